//! Reset graph, DAG enforcement, and sound/optimal reset paths.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::dcp::{Atom, Dcp};

pub const DEFAULT_MAX_RESET_PATHS: usize = 4_096;

/// Edge `src --(trans, offset)--> dst`: `dst' <= src + offset` on `trans`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResetEdge {
    pub src: Atom,
    pub trans: usize,
    pub offset: i64,
    pub dst: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResetGraph {
    edges: Vec<ResetEdge>,
    removed: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("more than {cap} optimal reset paths end in `{var}`")]
pub struct ResetPathOverflow {
    pub var: String,
    pub cap: usize,
}

impl ResetGraph {
    /// Builds the graph over every reset of `dcp` and determines which
    /// variables must be removed to make it acyclic: those on a cycle and
    /// everything whose value flows from them.
    pub fn build(dcp: &Dcp) -> ResetGraph {
        let mut edges = Vec::new();
        for v in dcp.vars() {
            for (trans, src, offset) in dcp.resets(v).expect("declared variable") {
                edges.push(ResetEdge {
                    src,
                    trans,
                    offset,
                    dst: v.clone(),
                });
            }
        }
        edges.sort();
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &edges {
            if let Atom::Var(s) = &e.src {
                succ.entry(s.as_str()).or_default().push(e.dst.as_str());
            }
        }
        let reach_from = |start: &str| {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<&str> = succ.get(start).cloned().unwrap_or_default();
            while let Some(u) = stack.pop() {
                if seen.insert(u) {
                    stack.extend(succ.get(u).into_iter().flatten());
                }
            }
            seen
        };
        let mut removed = BTreeSet::new();
        for v in dcp.vars() {
            let r = reach_from(v);
            if r.contains(v.as_str()) {
                removed.insert(v.clone());
                removed.extend(r.into_iter().map(str::to_string));
            }
        }
        ResetGraph { edges, removed }
    }

    pub fn edges(&self) -> &[ResetEdge] {
        &self.edges
    }

    /// Variables dropped to make the graph acyclic.
    pub fn removed(&self) -> &BTreeSet<String> {
        &self.removed
    }

    pub fn is_acyclic(&self) -> bool {
        self.removed.is_empty()
    }

    fn edges_into<'a>(&'a self, v: &'a str) -> impl Iterator<Item = &'a ResetEdge> + 'a {
        self.edges.iter().filter(move |e| e.dst == v)
    }

    /// Number of distinct paths (counting parallel edges separately) from
    /// `from` to `to`. The empty path counts when `from` is `to`.
    pub fn path_count(&self, from: &Atom, to: &str) -> u128 {
        fn go(g: &ResetGraph, from: &Atom, to: &str, memo: &mut HashMap<String, u128>) -> u128 {
            if let Some(&c) = memo.get(to) {
                return c;
            }
            let mut total = u128::from(from == &Atom::Var(to.to_string()));
            for e in g.edges_into(to) {
                total = total.saturating_add(match &e.src {
                    Atom::Var(s) => go(g, from, s, memo),
                    other => u128::from(other == from),
                });
            }
            memo.insert(to.to_string(), total);
            total
        }
        assert!(self.is_acyclic(), "path counting needs an acyclic graph");
        go(self, from, to, &mut HashMap::new())
    }

    /// DOT rendering. Edge labels are `id` or `id,+c` / `id,-c`.
    pub fn to_dot(&self, dcp: &Dcp) -> String {
        let mut nodes: BTreeSet<String> = dcp.vars().iter().cloned().collect();
        for e in &self.edges {
            nodes.insert(e.src.to_string());
        }
        let mut out = String::from("digraph reset_graph {\n  rankdir=LR;\n");
        for n in &nodes {
            let style = if self.removed.contains(n) {
                " [style=dashed]"
            } else {
                ""
            };
            out.push_str(&format!("  {n:?}{style};\n"));
        }
        for e in &self.edges {
            let id = &dcp.transition(e.trans).id;
            let label = match e.offset {
                0 => id.to_string(),
                c if c > 0 => format!("{id},+{c}"),
                c => format!("{id},{c}"),
            };
            out.push_str(&format!(
                "  {:?} -> {:?} [label={:?}];\n",
                e.src.to_string(),
                e.dst,
                label
            ));
        }
        out.push_str("}\n");
        out
    }

    /// 𝕽(v): the sound reset paths ending in `v` that cannot be extended
    /// to a longer sound path. The graph must be acyclic; build it from
    /// the pruned program (see [`Dcp::without_vars`]).
    pub fn optimal_reset_paths(
        &self,
        dcp: &Dcp,
        v: &str,
        cap: usize,
    ) -> Result<Vec<ResetPath>, ResetPathOverflow> {
        assert!(
            self.is_acyclic(),
            "reset path enumeration needs an acyclic graph"
        );
        let mut out = Vec::new();
        for e in self.edges_into(v) {
            let path = ResetPath {
                atoms: vec![e.src.clone(), Atom::Var(v.to_string())],
                steps: vec![(e.trans, e.offset)],
            };
            self.grow(dcp, path, &mut out, cap, v)?;
        }
        Ok(out)
    }

    fn grow(
        &self,
        dcp: &Dcp,
        path: ResetPath,
        out: &mut Vec<ResetPath>,
        cap: usize,
        v: &str,
    ) -> Result<(), ResetPathOverflow> {
        let mut extended = false;
        if let Atom::Var(head) = &path.atoms[0] {
            for e in self.edges_into(head) {
                let longer = path.prepend(e);
                if is_sound(dcp, &longer) {
                    extended = true;
                    self.grow(dcp, longer, out, cap, v)?;
                }
            }
        }
        if !extended {
            if out.len() == cap {
                return Err(ResetPathOverflow {
                    var: v.to_string(),
                    cap,
                });
            }
            out.push(path);
        }
        Ok(())
    }
}

/// `a_n --τ_n,c_n--> a_{n-1} ... --τ_1,c_1--> a_0`, stored front to back:
/// `atoms[0] = a_n`, `steps[0] = (τ_n, c_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ResetPath {
    atoms: Vec<Atom>,
    steps: Vec<(usize, i64)>,
}

impl ResetPath {
    /// Builds a path from `atoms` (a_n first) and the steps between them.
    /// Returns `None` unless there is exactly one step per pair of atoms.
    pub fn new(atoms: Vec<Atom>, steps: Vec<(usize, i64)>) -> Option<ResetPath> {
        (!steps.is_empty() && atoms.len() == steps.len() + 1).then_some(ResetPath { atoms, steps })
    }

    fn prepend(&self, e: &ResetEdge) -> ResetPath {
        let mut atoms = vec![e.src.clone()];
        atoms.extend(self.atoms.iter().cloned());
        let mut steps = vec![(e.trans, e.offset)];
        steps.extend(self.steps.iter().copied());
        ResetPath { atoms, steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn steps(&self) -> &[(usize, i64)] {
        &self.steps
    }

    /// in(κ) = a_n
    pub fn input(&self) -> &Atom {
        &self.atoms[0]
    }

    /// The variable the path ends in (a_0).
    pub fn target(&self) -> &str {
        self.atoms
            .last()
            .and_then(Atom::as_var)
            .expect("reset paths end in a variable")
    }

    /// c(κ): sum of the offsets.
    pub fn offset(&self) -> i64 {
        self.steps.iter().map(|s| s.1).sum()
    }

    /// trn(κ) as transition indices.
    pub fn transitions(&self) -> BTreeSet<usize> {
        self.steps.iter().map(|s| s.0).collect()
    }

    /// atm(κ)
    pub fn atom_set(&self) -> BTreeSet<Atom> {
        self.atoms.iter().cloned().collect()
    }

    /// The suffix consisting of the last `len` steps.
    pub fn suffix(&self, len: usize) -> ResetPath {
        let k = self.steps.len() - len;
        ResetPath {
            atoms: self.atoms[k..].to_vec(),
            steps: self.steps[k..].to_vec(),
        }
    }

    pub fn display<'a>(&'a self, dcp: &'a Dcp) -> impl fmt::Display + 'a {
        PathDisplay { path: self, dcp }
    }
}

struct PathDisplay<'a> {
    path: &'a ResetPath,
    dcp: &'a Dcp,
}

impl fmt::Display for PathDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.atoms[0])?;
        for (i, &(t, c)) in self.path.steps.iter().enumerate() {
            let id = &self.dcp.transition(t).id;
            match c {
                0 => write!(f, " --{id}--> ")?,
                c if c > 0 => write!(f, " --{id},+{c}--> ")?,
                c => write!(f, " --{id},{c}--> ")?,
            }
            write!(f, "{}", self.path.atoms[i + 1])?;
        }
        Ok(())
    }
}

fn resets_var(dcp: &Dcp, t: usize, v: &str) -> bool {
    dcp.transition(t)
        .update_of(v)
        .is_some_and(|c| c.rhs != Atom::Var(v.to_string()))
}

/// A path is sound when each interior atom a_i is reset on every path of
/// the program from the target of τ_1 to the source of τ_i. The empty
/// program path counts, so the check fails when those locations coincide.
pub fn is_sound(dcp: &Dcp, path: &ResetPath) -> bool {
    let n = path.len();
    let last = dcp.transition(path.steps[n - 1].0);
    let from = last.target.as_str();
    (1..n).all(|i| {
        let Atom::Var(a) = &path.atoms[n - i] else {
            return true;
        };
        let to = dcp.transition(path.steps[n - i].0).source.as_str();
        !reachable_avoiding(dcp, from, to, a)
    })
}

fn reachable_avoiding(dcp: &Dcp, from: &str, to: &str, var: &str) -> bool {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        for t in dcp.outgoing(u) {
            if resets_var(dcp, t, var) {
                continue;
            }
            let next = dcp.transition(t).target.as_str();
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    false
}
