//! Symmetric eigenvalue routines: dense Householder tridiagonalization with
//! implicit-shift QL for small matrices, Lanczos with full reorthogonalization
//! for large sparse operators.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

const QL_MAX_SWEEPS: usize = 64;

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// On return `d` holds the diagonal and `e[1..]` the subdiagonal (`e[0]` = 0).
fn tridiagonalize(a: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = a.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[i][k].abs();
            }
            if scale == 0.0 {
                e[i] = a[i][l];
            } else {
                for k in 0..=l {
                    a[i][k] /= scale;
                    h += a[i][k] * a[i][k];
                }
                let mut f = a[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i][l] = f - g;
                f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j][k] * a[i][k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k][j] * a[i][k];
                    }
                    e[j] = g / h;
                    f += e[j] * a[i][j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j][k] -= f * e[k] + g * a[i][k];
                    }
                }
            }
        } else {
            e[i] = a[i][l];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[i][i];
    }
}

/// Implicit-shift QL on a tridiagonal matrix; `e` uses the
/// [`tridiagonalize`] convention. Eigenvalues land in `d`, unsorted.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(CoreError::Numeric(
                    "QL iteration failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// All eigenvalues of a symmetric matrix, ascending. Consumes the matrix.
pub(crate) fn dense_symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut a, &mut d, &mut e);
    ql_implicit(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a tridiagonal matrix given its diagonal and subdiagonal.
pub(crate) fn tridiagonal_eigenvalues(diag: &[f64], sub: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(n == 0 || sub.len() == n - 1);
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    if n > 1 {
        e[1..].copy_from_slice(sub);
    }
    ql_implicit(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_out(v: &mut [f64], unit_dirs: &[Vec<f64>]) {
    for u in unit_dirs {
        let c = dot(v, u);
        for (x, &ui) in v.iter_mut().zip(u) {
            *x -= c * ui;
        }
    }
}

const LANCZOS_MAX_STEPS: usize = 500;
const LANCZOS_TOL: f64 = 1e-11;

/// Largest eigenvalue of a symmetric operator restricted to the complement of
/// `deflate` (unit vectors). Deterministic: fixed internal seed.
pub(crate) fn lanczos_largest<F>(n: usize, matvec: F, deflate: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(CoreError::Numeric("Lanczos on empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a9c_205e);
    let mut v = vec![0.0; n];
    for x in &mut v {
        *x = rng.gen::<f64>() - 0.5;
    }
    project_out(&mut v, deflate);
    let norm = dot(&v, &v).sqrt();
    if norm <= 1e-300 {
        return Err(CoreError::Numeric(
            "Lanczos start vector vanished after deflation".into(),
        ));
    }
    for x in &mut v {
        *x /= norm;
    }
    let mut basis = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut prev_theta = f64::NEG_INFINITY;
    let mut stable = 0;
    for _ in 0..LANCZOS_MAX_STEPS.min(n) {
        let vj = basis.last().unwrap();
        matvec(vj, &mut w);
        let alpha = dot(&w, vj);
        alphas.push(alpha);
        for (wi, &vi) in w.iter_mut().zip(vj) {
            *wi -= alpha * vi;
        }
        if let Some(&beta) = betas.last() {
            let vprev = &basis[basis.len() - 2];
            for (wi, &pi) in w.iter_mut().zip(vprev) {
                *wi -= beta * pi;
            }
        }
        project_out(&mut w, deflate);
        // Two passes of full reorthogonalization keep the basis numerically
        // orthogonal even after many steps.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, &bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let theta = *tridiagonal_eigenvalues(&alphas, &betas)?
            .last()
            .expect("at least one Ritz value");
        let scale = theta.abs().max(1.0);
        if (theta - prev_theta).abs() <= LANCZOS_TOL * scale {
            stable += 1;
            if stable >= 3 {
                return Ok(theta);
            }
        } else {
            stable = 0;
        }
        prev_theta = theta;
        let beta = dot(&w, &w).sqrt();
        if beta <= 1e-13 * scale {
            // Invariant subspace: Ritz values are exact for it.
            return Ok(theta);
        }
        betas.push(beta);
        let mut vnext = w.clone();
        for x in &mut vnext {
            *x /= beta;
        }
        basis.push(vnext);
    }
    Err(CoreError::Numeric(format!(
        "Lanczos failed to converge within {LANCZOS_MAX_STEPS} steps"
    )))
}
