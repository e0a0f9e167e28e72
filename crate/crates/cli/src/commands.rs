//! Subcommand bodies. Each one loads its inputs, writes its outputs under
//! `--out`, and finishes by writing the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rewire_core::attack::attack_curve_counts;
use rewire_core::baselines::{
    self, evolutionary, greedy, hill_climb, sa_default_params, simulated_annealing,
};
use rewire_core::graph::{ba_generate, load_edge_list, save_edge_list, EdgeRef, Graph};
use rewire_core::metrics::{
    algebraic_connectivity, global_efficiency, local_efficiency, resilience_r_strided,
    spectral_radius, ObjectiveConfig,
};
use rewire_core::rewiring::{apply_rewiring, objective_parts, EnvConfig, ObjectiveParts, RewiringAction};
use rewire_nn::checkpoint::load_checkpoint;
use rewire_nn::firegnn::encode;
use rewire_nn::policy::{evaluate_policy, train, PPOConfig, PolicyParams, TrainConfig};
use rewire_nn::Tensor;
use serde::Serialize;

use crate::{
    manifest, AttackCurveArgs, Algo, Cli, CliError, Command, EmbedArgs, GenerateArgs, MetricsArgs,
    OptimizeArgs, RewireArgs, SweepKArgs, TrainArgs,
};

pub fn run(cli: Cli) -> Result<(), CliError> {
    init_thread_pool()?;
    let started = Instant::now();
    match cli.command {
        Command::Generate(a) => generate(a, started),
        Command::Metrics(a) => metrics(a, started),
        Command::AttackCurve(a) => attack_curve(a, started),
        Command::Rewire(a) => rewire(a, started),
        Command::Optimize(a) => optimize(a, started),
        Command::Train(a) => train_cmd(a, started),
        Command::Embed(a) => embed(a, started),
        Command::SweepK(a) => sweep_k(a, started),
    }
}

fn init_thread_pool() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("REWIRE_FORGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        CliError::Usage(format!("REWIRE_FORGE_THREADS must be a positive integer, got {raw:?}"))
    })?;
    if threads == 0 {
        return Err(CliError::Usage("REWIRE_FORGE_THREADS must be at least 1".into()));
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    load_edge_list(path)
        .map_err(|e| CliError::Data(format!("cannot load {}: {e}", path.display())))
}

fn write_json(path: &Path, doc: &impl Serialize) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(doc)?;
    fs::write(path, body + "\n")?;
    Ok(())
}

fn generate(a: GenerateArgs, started: Instant) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("count must be at least 1".into()));
    }
    let config = serde_json::to_value(&a)?;
    ensure_out_dir(&a.out)?;
    for i in 0..a.count {
        let g = ba_generate(a.n, a.m, a.seed.wrapping_add(i as u64))?;
        let path = a.out.join(format!("graph-{i:03}.edges"));
        save_edge_list(&g, &path)?;
        println!("wrote {} ({} nodes, {} edges)", path.display(), g.node_count(), g.edge_count());
    }
    manifest::write(&a.out, "generate", config, Some(a.seed), &[], started)
}

#[derive(Serialize)]
struct MetricsDoc {
    n: usize,
    edges: usize,
    connectivity_r: f64,
    spectral_radius: f64,
    algebraic_connectivity: f64,
    e_global: f64,
    e_local: f64,
    objective: ObjectiveParts,
    config: ObjectiveConfig,
}

fn metrics(a: MetricsArgs, started: Instant) -> Result<(), CliError> {
    let cfg = a.objective.to_config()?;
    let config = serde_json::to_value(&a)?;
    let g = load_graph(&a.graph)?;
    let doc = MetricsDoc {
        n: g.node_count(),
        edges: g.edge_count(),
        connectivity_r: resilience_r_strided(&g, cfg.attack, cfg.attack_recompute_every),
        spectral_radius: spectral_radius(&g)?,
        algebraic_connectivity: algebraic_connectivity(&g)?,
        e_global: global_efficiency(&g),
        e_local: local_efficiency(&g),
        objective: objective_parts(&g, &cfg)?,
        config: cfg,
    };
    ensure_out_dir(&a.out)?;
    let path = a.out.join("metrics.json");
    write_json(&path, &doc)?;
    println!("wrote {}", path.display());
    manifest::write(&a.out, "metrics", config, None, &[&a.graph], started)
}

fn attack_curve(a: AttackCurveArgs, started: Instant) -> Result<(), CliError> {
    if a.recompute_every == 0 {
        return Err(CliError::Usage("recompute-every must be at least 1".into()));
    }
    let config = serde_json::to_value(&a)?;
    let g = load_graph(&a.graph)?;
    let curve = attack_curve_counts(&g, a.attack, a.recompute_every);
    let mut csv = String::from("q,removed_node,largest_cc,fraction\n");
    let n = curve.n as f64;
    for (i, (&node, &cc)) in curve.removed.iter().zip(&curve.largest_cc).enumerate() {
        let fraction = cc as f64 / n;
        csv.push_str(&format!("{},{},{},{}\n", i + 1, node, cc, fraction));
    }
    ensure_out_dir(&a.out)?;
    let path = a.out.join("attack_curve.csv");
    fs::write(&path, csv)?;
    println!("wrote {}", path.display());
    manifest::write(&a.out, "attack-curve", config, None, &[&a.graph], started)
}

fn parse_edge(flag: &str, raw: &str) -> Result<EdgeRef, CliError> {
    let parts: Vec<&str> = raw.split(',').collect();
    let [tail, head] = parts.as_slice() else {
        return Err(CliError::Usage(format!(
            "--{flag} must be \"tail,head\" with two node ids, got {raw:?}"
        )));
    };
    let parse = |tok: &str| {
        tok.trim().parse::<u32>().map_err(|_| {
            CliError::Usage(format!("--{flag}: {tok:?} is not a node id"))
        })
    };
    Ok(EdgeRef::new(parse(tail)?, parse(head)?))
}

fn rewire(a: RewireArgs, started: Instant) -> Result<(), CliError> {
    let e1 = parse_edge("e1", &a.e1)?;
    let e2 = parse_edge("e2", &a.e2)?;
    let config = serde_json::to_value(&a)?;
    let g = load_graph(&a.graph)?;
    let next = apply_rewiring(&g, RewiringAction::Rewire { e1, e2 })?;
    if a.forbid_disconnecting && !next.is_connected() {
        return Err(CliError::Data(
            "infeasible action: rewiring would disconnect the graph and disconnecting moves are forbidden"
                .into(),
        ));
    }
    ensure_out_dir(&a.out)?;
    let path = a.out.join("rewired.edges");
    save_edge_list(&next, &path)?;
    println!("wrote {}", path.display());
    manifest::write(&a.out, "rewire", config, None, &[&a.graph], started)
}

#[derive(Serialize)]
struct OptimizeDoc<'a> {
    algo: Algo,
    objective_initial: f64,
    objective_final: f64,
    gain_percent: f64,
    rewirings_used: usize,
    objective_evals: usize,
    wall_time_seconds: f64,
    sequence: &'a [RewiringAction],
}

fn write_optimizer_outputs(
    out: &Path,
    algo: Algo,
    report: &baselines::OptimizerReport,
) -> Result<(), CliError> {
    ensure_out_dir(out)?;
    save_edge_list(&report.best_graph, &out.join("best.edges"))?;
    write_json(
        &out.join("report.json"),
        &OptimizeDoc {
            algo,
            objective_initial: report.objective_initial,
            objective_final: report.objective_final,
            gain_percent: report.gain_percent,
            rewirings_used: report.rewirings_used,
            objective_evals: report.objective_evals,
            wall_time_seconds: report.wall_time_seconds,
            sequence: &report.sequence,
        },
    )?;
    write_json(&out.join("sequence.json"), &report.sequence)?;
    let mut trace = String::from("eval,best_objective\n");
    for (i, v) in report.best_trace.iter().enumerate() {
        trace.push_str(&format!("{},{}\n", i + 1, v));
    }
    fs::write(out.join("trace.csv"), trace)?;
    println!(
        "{:?}: objective {} -> {} ({} rewirings, {} evals)",
        algo,
        report.objective_initial,
        report.objective_final,
        report.rewirings_used,
        report.objective_evals
    );
    Ok(())
}

fn checkpoint_files(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

fn optimize(a: OptimizeArgs, started: Instant) -> Result<(), CliError> {
    let cfg = EnvConfig {
        objective: a.objective.to_config()?,
        max_rewiring_budget: a.budget,
        reward_scale: 10.0,
        forbid_disconnecting: a.forbid_disconnecting,
    };
    cfg.validate()?;
    let config = serde_json::to_value(&a)?;
    let g = load_graph(&a.graph)?;
    let mut inputs: Vec<PathBuf> = vec![a.graph.clone()];
    let report = match a.algo {
        Algo::Hc => hill_climb(&g, &cfg, a.seed)?,
        Algo::Sa => {
            let initial = objective_parts(&g, &cfg.objective)?.combined;
            let (t0_default, decay_default) = sa_default_params(initial);
            let t0 = a.sa_t0.unwrap_or(t0_default);
            let decay = a.sa_decay.unwrap_or(decay_default);
            simulated_annealing(&g, &cfg, a.seed, t0, decay)?
        }
        Algo::Greedy => greedy(&g, &cfg)?,
        Algo::Ea => evolutionary(&g, &cfg, a.seed, a.pop_size, a.generations)?,
        Algo::Policy => {
            let stem = a.checkpoint.as_ref().ok_or_else(|| {
                CliError::Usage("--algo policy requires --checkpoint".into())
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let params = PolicyParams::new(a.k, &mut rng);
            load_checkpoint(stem, &params.all_params())?;
            let (json_path, bin_path) = checkpoint_files(stem);
            inputs.push(json_path);
            inputs.push(bin_path);
            evaluate_policy(&params, &g, &cfg)?
        }
    };
    write_optimizer_outputs(&a.out, a.algo, &report)?;
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    manifest::write(&a.out, "optimize", config, Some(a.seed), &input_refs, started)
}

#[derive(Serialize)]
struct TrainSummary {
    best_eval_gain: f64,
    env_steps: usize,
    updates: usize,
    eval_history: Vec<(usize, f64)>,
    objective_initial: f64,
    objective_final: f64,
    gain_percent: f64,
    rewirings_used: usize,
}

fn train_cmd(a: TrainArgs, started: Instant) -> Result<(), CliError> {
    let env_cfg = EnvConfig {
        objective: a.objective.to_config()?,
        max_rewiring_budget: a.budget,
        reward_scale: 10.0,
        forbid_disconnecting: a.forbid_disconnecting,
    };
    let ppo_cfg = PPOConfig {
        batch: a.batch,
        num_envs: a.num_envs,
        epochs: a.epochs,
        ..PPOConfig::default()
    };
    let config = serde_json::to_value(&a)?;
    let graphs: Vec<Graph> = a.graph.iter().map(|p| load_graph(p)).collect::<Result<_, _>>()?;
    ensure_out_dir(&a.out)?;
    let train_cfg = TrainConfig {
        total_steps: a.steps,
        seed: a.seed,
        k: a.k,
        eval_every: a.eval_every,
        log_path: Some(a.out.join("train_log.csv")),
        checkpoint_stem: Some(a.out.join("checkpoint")),
    };
    let outcome = train(&graphs, &env_cfg, &ppo_cfg, &train_cfg)?;
    let report = evaluate_policy(&outcome.params, &graphs[0], &env_cfg)?;
    save_edge_list(&report.best_graph, &a.out.join("best.edges"))?;
    write_json(
        &a.out.join("summary.json"),
        &TrainSummary {
            best_eval_gain: outcome.best_eval_gain,
            env_steps: outcome.env_steps,
            updates: outcome.log.len(),
            eval_history: outcome.eval_history.clone(),
            objective_initial: report.objective_initial,
            objective_final: report.objective_final,
            gain_percent: report.gain_percent,
            rewirings_used: report.rewirings_used,
        },
    )?;
    println!(
        "trained {} env steps over {} updates; greedy-decoded gain {}%",
        outcome.env_steps,
        outcome.log.len(),
        report.gain_percent
    );
    let input_refs: Vec<&Path> = a.graph.iter().map(PathBuf::as_path).collect();
    manifest::write(&a.out, "train", config, Some(a.seed), &input_refs, started)
}

fn tensor_rows(t: &Tensor) -> Vec<Vec<f64>> {
    t.value().chunks(t.cols().max(1)).map(<[f64]>::to_vec).collect()
}

#[derive(Serialize)]
struct EmbedDoc {
    k: usize,
    n: usize,
    directed_edges: Vec<(u32, u32)>,
    node: Vec<Vec<f64>>,
    edge: Vec<Vec<f64>>,
    graph: Vec<f64>,
}

fn embed(a: EmbedArgs, started: Instant) -> Result<(), CliError> {
    let config = serde_json::to_value(&a)?;
    let g = load_graph(&a.graph)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let params = PolicyParams::new(a.k, &mut rng);
    let mut inputs: Vec<PathBuf> = vec![a.graph.clone()];
    if let Some(stem) = &a.checkpoint {
        load_checkpoint(stem, &params.all_params())?;
        let (json_path, bin_path) = checkpoint_files(stem);
        inputs.push(json_path);
        inputs.push(bin_path);
    }
    let set = encode(&params.policy_encoder, &g, a.k)?;
    let doc = EmbedDoc {
        k: a.k,
        n: g.node_count(),
        directed_edges: set.directed_edges.iter().map(|e| (e.tail, e.head)).collect(),
        node: tensor_rows(&set.node),
        edge: tensor_rows(&set.edge),
        graph: set.graph.value(),
    };
    ensure_out_dir(&a.out)?;
    let path = a.out.join("embeddings.json");
    write_json(&path, &doc)?;
    println!("wrote {}", path.display());
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    manifest::write(&a.out, "embed", config, Some(a.seed), &input_refs, started)
}

fn sweep_k(a: SweepKArgs, started: Instant) -> Result<(), CliError> {
    let env_cfg = EnvConfig {
        objective: a.objective.to_config()?,
        max_rewiring_budget: a.budget,
        reward_scale: 10.0,
        forbid_disconnecting: false,
    };
    let ppo_cfg = PPOConfig {
        batch: a.batch,
        num_envs: a.num_envs,
        epochs: a.epochs,
        ..PPOConfig::default()
    };
    let config = serde_json::to_value(&a)?;
    let g = load_graph(&a.graph)?;
    if g.node_count() == 0 || a.k_max > g.node_count() - 1 {
        return Err(CliError::Usage(format!(
            "k-max {} needs a graph with at least {} nodes, got {}",
            a.k_max,
            a.k_max + 1,
            g.node_count()
        )));
    }
    let graphs = [g];
    let mut csv = String::from("k,gain\n");
    for k in 0..=a.k_max {
        let train_cfg = TrainConfig {
            total_steps: a.steps,
            seed: a.seed,
            k,
            eval_every: a.eval_every,
            log_path: None,
            checkpoint_stem: None,
        };
        let outcome = train(&graphs, &env_cfg, &ppo_cfg, &train_cfg)?;
        println!("k={} gain={}", k, outcome.best_eval_gain);
        csv.push_str(&format!("{},{}\n", k, outcome.best_eval_gain));
    }
    ensure_out_dir(&a.out)?;
    let path = a.out.join("sweep_k.csv");
    fs::write(&path, csv)?;
    println!("wrote {}", path.display());
    manifest::write(&a.out, "sweep-k", config, Some(a.seed), &[&a.graph], started)
}
