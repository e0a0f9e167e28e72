//! Plain-text edge-list format: one `u v` pair per line, whitespace
//! separated, `#`-prefixed comment lines ignored. Node ids are compacted to
//! `0..n` by ascending numeric rank on load, so files written by
//! [`write_edge_list`] reload to an identical graph.

use std::io::Write;
use std::path::Path;

use super::Graph;
use crate::error::{CoreError, Result};

/// Parses edge-list text. Malformed lines, self-loops and duplicate edges are
/// reported with their 1-based line number.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut raw_edges: Vec<(u64, u64, usize)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let (a, b, rest) = (toks.next(), toks.next(), toks.next());
        let (a, b) = match (a, b, rest) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(CoreError::Parse {
                    line: lineno,
                    msg: format!("expected two node ids, got {trimmed:?}"),
                })
            }
        };
        let parse = |tok: &str| -> Result<u64> {
            tok.parse::<u64>().map_err(|_| CoreError::Parse {
                line: lineno,
                msg: format!("invalid node id {tok:?}"),
            })
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u == v {
            return Err(CoreError::Parse { line: lineno, msg: format!("self-loop at node {u}") });
        }
        raw_edges.push((u, v, lineno));
    }
    let mut ids: Vec<u64> = raw_edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let rank = |raw: u64| ids.binary_search(&raw).expect("id was collected") as u32;
    let mut g = Graph::empty(ids.len());
    for (u, v, lineno) in raw_edges {
        g.add_edge(rank(u), rank(v)).map_err(|_| CoreError::Parse {
            line: lineno,
            msg: format!("duplicate edge {{{u}, {v}}}"),
        })?;
    }
    Ok(g)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text)
}

/// Writes edges in canonical `(min, max)` lexicographic order.
pub fn write_edge_list(g: &Graph, mut w: impl Write) -> Result<()> {
    for (u, v) in g.undirected_edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_edge_list(g, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}
