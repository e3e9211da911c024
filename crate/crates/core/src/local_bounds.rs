//! Simple-cycle enumeration and the local bound mapping ζ.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::dcp::{Atom, Dcp};

pub const DEFAULT_MAX_CYCLES: usize = 10_000;

/// A simple cycle as a sequence of transition indices.
pub type SimpleCycle = Vec<usize>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("more than {cap} simple cycles")]
pub struct CycleOverflow {
    pub cap: usize,
}

/// Enumerates every simple cycle of the location multigraph. Parallel
/// transitions yield distinct cycles.
pub fn simple_cycles(dcp: &Dcp, cap: usize) -> Result<Vec<SimpleCycle>, CycleOverflow> {
    let locs = dcp.locations();
    let index: HashMap<&str, usize> = locs
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let edges: Vec<(usize, usize)> = dcp
        .transitions()
        .iter()
        .map(|tr| (index[tr.source.as_str()], index[tr.target.as_str()]))
        .collect();
    graph_simple_cycles(locs.len(), &edges, cap)
}

/// Simple cycles of a multigraph with `nodes` nodes and the given
/// `(source, target)` edges, as sequences of edge indices. Each cycle is
/// rooted at its smallest node and the search from a root only visits
/// larger nodes that share a strongly connected component with it.
pub fn graph_simple_cycles(
    nodes: usize,
    edges: &[(usize, usize)],
    cap: usize,
) -> Result<Vec<SimpleCycle>, CycleOverflow> {
    let edges: Vec<(usize, usize, usize)> = edges
        .iter()
        .enumerate()
        .map(|(t, &(s, d))| (s, t, d))
        .collect();
    let mut out = Vec::new();
    for root in 0..nodes {
        let allowed = component(root, nodes, &edges);
        if allowed.len() <= 1 && !edges.iter().any(|&(s, _, d)| s == root && d == root) {
            continue;
        }
        let mut on_path = vec![false; nodes];
        let mut path = Vec::new();
        extend(
            root,
            root,
            &edges,
            &allowed,
            &mut on_path,
            &mut path,
            &mut out,
            cap,
        )?;
    }
    Ok(out)
}

/// Locations `>= root` that lie on a cycle through `root` using only
/// locations `>= root`.
fn component(root: usize, n: usize, edges: &[(usize, usize, usize)]) -> BTreeSet<usize> {
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &(s, _, d) in edges {
                let (from, to) = if forward { (s, d) } else { (d, s) };
                if from == u && to >= root && !seen[to] {
                    seen[to] = true;
                    stack.push(to);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    (root..n).filter(|&i| fwd[i] && bwd[i]).collect()
}

#[allow(clippy::too_many_arguments)]
fn extend(
    root: usize,
    at: usize,
    edges: &[(usize, usize, usize)],
    allowed: &BTreeSet<usize>,
    on_path: &mut [bool],
    path: &mut Vec<usize>,
    out: &mut Vec<SimpleCycle>,
    cap: usize,
) -> Result<(), CycleOverflow> {
    on_path[at] = true;
    for &(s, t, d) in edges {
        if s != at || !allowed.contains(&d) {
            continue;
        }
        if d == root {
            if out.len() == cap {
                return Err(CycleOverflow { cap });
            }
            let mut cycle = path.clone();
            cycle.push(t);
            out.push(cycle);
        } else if !on_path[d] {
            path.push(t);
            extend(root, d, edges, allowed, on_path, path, out, cap)?;
            path.pop();
        }
    }
    on_path[at] = false;
    Ok(())
}

/// ζ(τ) for one transition.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LocalBound {
    /// τ lies on no cycle and runs at most once.
    One,
    Var(String),
    /// τ lies on a cycle but no variable satisfies the criterion.
    Missing,
}

impl fmt::Display for LocalBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalBound::One => f.write_str("1"),
            LocalBound::Var(v) => f.write_str(v),
            LocalBound::Missing => f.write_str("?"),
        }
    }
}

/// ζ, indexed like [`Dcp::transitions`].
pub type LocalBoundMap = Vec<LocalBound>;

fn decreases(dcp: &Dcp, t: usize, v: &str) -> bool {
    dcp.transition(t)
        .update_of(v)
        .is_some_and(|c| c.rhs == Atom::Var(v.to_string()) && c.offset < 0)
}

/// A variable `v` bounds τ locally when every simple cycle through τ has a
/// transition guarded by `v` and a transition that decreases `v`. The
/// lexicographically smallest such variable is chosen.
pub fn local_bound_map(dcp: &Dcp, cap: usize) -> Result<LocalBoundMap, CycleOverflow> {
    let cycles = simple_cycles(dcp, cap)?;
    let mut through: Vec<Vec<&SimpleCycle>> = vec![Vec::new(); dcp.transitions().len()];
    for c in &cycles {
        let members: BTreeSet<usize> = c.iter().copied().collect();
        for t in members {
            through[t].push(c);
        }
    }
    let mut vars: Vec<&String> = dcp.vars().iter().collect();
    vars.sort();
    Ok(through
        .iter()
        .map(|cs| {
            if cs.is_empty() {
                return LocalBound::One;
            }
            vars.iter()
                .find(|v| {
                    cs.iter().all(|c| {
                        c.iter()
                            .any(|&t| dcp.transition(t).guard.contains(v.as_str()))
                            && c.iter().any(|&t| decreases(dcp, t, v))
                    })
                })
                .map_or(LocalBound::Missing, |v| LocalBound::Var((*v).clone()))
        })
        .collect())
}
