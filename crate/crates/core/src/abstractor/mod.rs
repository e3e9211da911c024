//! Abstraction of concrete linear programs to guarded DCPs.
//!
//! Each abstract variable is a *norm*: a linear expression over program
//! state. The abstraction starts from norms read off loop guards, derives
//! a difference constraint for every norm on every transition by symbolic
//! execution, and adds the non-constant remainders it meets as new norms
//! until the set is stable or the depth limit cuts a chain off.

mod linexpr;
mod program;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

pub use linexpr::LinExpr;
pub use program::{parse_program, ConcreteProgram, ConcreteTransition, GuardAtom, Rel, Update};

use crate::dcp::{Atom, Constraint, Dcp, DcpError, DcpParts, Transition, Violation};
use crate::local_bounds::{graph_simple_cycles, CycleOverflow, DEFAULT_MAX_CYCLES};

pub const DEFAULT_DEPTH_LIMIT: usize = 5;

/// An abstract variable: a linear expression with a canonical printed name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Norm(pub LinExpr);

impl Norm {
    pub fn expr(&self) -> &LinExpr {
        &self.0
    }

    pub fn name(&self) -> String {
        self.0.to_string()
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Why a norm could not be carried across a transition.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SymExecFailure {
    #[error("`{0}` is havocked")]
    Havoc(String),
    #[error("integer overflow")]
    Overflow,
}

/// Norms read off guards `a > b` / `a >= b` whose transition shares a
/// simple cycle with a counter update (`x := x + c`, `c != 0`) of one of
/// the guard's variables. Returned in discovery order, without duplicates.
pub fn guess_norms(p: &ConcreteProgram, max_cycles: usize) -> Result<Vec<Norm>, CycleOverflow> {
    let edges: Vec<(usize, usize)> = p
        .transitions
        .iter()
        .map(|t| (p.location_index(&t.source), p.location_index(&t.target)))
        .collect();
    let cycles = graph_simple_cycles(p.locations.len(), &edges, max_cycles)?;
    let mut out: Vec<Norm> = Vec::new();
    for (ti, t) in p.transitions.iter().enumerate() {
        let mates: BTreeSet<usize> = cycles
            .iter()
            .filter(|c| c.contains(&ti))
            .flatten()
            .copied()
            .collect();
        for atom in &t.guard {
            let Some(norm) = atom.positive_part() else {
                continue;
            };
            if norm.is_constant() {
                continue;
            }
            let has_counter = atom.names().filter(|n| !p.is_param(n)).any(|v| {
                mates
                    .iter()
                    .any(|&m| p.transitions[m].counter_offset(v).is_some())
            });
            let norm = Norm(norm);
            if has_counter && !out.contains(&norm) {
                out.push(norm);
            }
        }
    }
    Ok(out)
}

/// `e` evaluated in the post-state of `t`, expressed over the pre-state.
pub fn sym_exec_norm(e: &LinExpr, t: &ConcreteTransition) -> Result<LinExpr, SymExecFailure> {
    for n in e.names() {
        if t.updates.get(n) == Some(&Update::Havoc) {
            return Err(SymExecFailure::Havoc(n.to_string()));
        }
    }
    e.substitute(|n| match t.updates.get(n) {
        Some(Update::Expr(u)) => Some(u),
        _ => None,
    })
    .ok_or(SymExecFailure::Overflow)
}

/// Syntactic check that the guard of `t` forces `e > 0`.
pub fn infer_guard(e: &LinExpr, t: &ConcreteTransition) -> bool {
    if e.is_constant() {
        return e.constant_part() > 0;
    }
    t.guard
        .iter()
        .any(|a| a.positive_part().as_ref() == Some(e))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbstractOptions {
    pub depth_limit: usize,
    pub max_cycles: usize,
    /// Name DCP variables after their norms instead of `v0, v1, ...`.
    pub keep_names: bool,
}

impl Default for AbstractOptions {
    fn default() -> Self {
        AbstractOptions {
            depth_limit: DEFAULT_DEPTH_LIMIT,
            max_cycles: DEFAULT_MAX_CYCLES,
            keep_names: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AbstractionWarning {
    DepthLimit { norm: Norm, limit: usize },
}

impl fmt::Display for AbstractionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractionWarning::DepthLimit { norm, limit } => {
                write!(f, "norm {norm} discarded (abstraction depth limit {limit})")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AbstractError {
    #[error(transparent)]
    Cycles(#[from] CycleOverflow),
    #[error("abstraction produced an invalid DCP: {0}")]
    Invalid(#[from] DcpError),
}

/// The abstract program plus the meaning of each of its variables.
#[derive(Clone, Debug)]
pub struct Abstraction {
    pub dcp: Dcp,
    /// DCP variable name and the norm it stands for, in variable order.
    pub norms: Vec<(String, Norm)>,
    pub warnings: Vec<AbstractionWarning>,
}

impl Abstraction {
    pub fn norm_of(&self, var: &str) -> Option<&Norm> {
        self.norms.iter().find(|(v, _)| v == var).map(|(_, n)| n)
    }

    /// DCP text, preceded by a `# v = norm` comment line for every variable
    /// whose name differs from its norm.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (v, n) in &self.norms {
            if *v != n.name() {
                out.push_str(&format!("# {v} = {n}\n"));
            }
        }
        out.push_str(&self.dcp.to_string());
        out
    }
}

#[derive(Clone, Debug)]
enum Rhs {
    Norm(usize),
    Param(String),
    Int(i64),
}

struct NormEntry {
    norm: Norm,
    depth: usize,
    parent: Option<usize>,
    discarded: bool,
}

struct Builder<'p> {
    p: &'p ConcreteProgram,
    live: BTreeMap<String, BTreeSet<String>>,
    norms: Vec<NormEntry>,
    /// `(transition, norm) -> (rhs, offset)`.
    constraints: BTreeMap<(usize, usize), (Rhs, i64)>,
    warnings: Vec<AbstractionWarning>,
    limit: usize,
}

impl Builder<'_> {
    fn tracked(&self, norm: &LinExpr, loc: &str) -> bool {
        norm.names()
            .filter(|n| !self.p.is_param(n))
            .all(|n| self.live[loc].contains(n))
    }

    fn find(&self, e: &LinExpr) -> Option<usize> {
        self.norms.iter().position(|n| n.norm.expr() == e)
    }

    fn discard(&mut self, idx: usize) {
        if !self.norms[idx].discarded {
            self.norms[idx].discarded = true;
            self.warnings.push(AbstractionWarning::DepthLimit {
                norm: self.norms[idx].norm.clone(),
                limit: self.limit,
            });
        }
    }

    /// Derives the constraint for norm `ni` on every transition into a
    /// location that tracks it. New norms are appended to `queue`.
    fn abstract_norm(&mut self, ni: usize, queue: &mut VecDeque<usize>) {
        for (ti, t) in self.p.transitions.iter().enumerate() {
            if self.norms[ni].discarded {
                return;
            }
            let e = self.norms[ni].norm.expr().clone();
            if !self.tracked(&e, &t.target) {
                continue;
            }
            let Ok(r) = sym_exec_norm(&e, t) else {
                continue;
            };
            if r.is_constant() {
                self.constraints
                    .insert((ti, ni), (Rhs::Int(r.constant_part()), 0));
                continue;
            }
            if let Some(c) = r.offset_from(&e) {
                self.constraints.insert((ti, ni), (Rhs::Norm(ni), c));
                continue;
            }
            let matched = self
                .norms
                .iter()
                .enumerate()
                .filter(|(_, n)| !n.discarded)
                .find_map(|(j, n)| r.offset_from(n.norm.expr()).map(|c| (j, c)));
            if let Some((j, c)) = matched {
                self.constraints.insert((ti, ni), (Rhs::Norm(j), c));
                continue;
            }
            let c = r.constant_part();
            let rest = r.without_constant();
            if let Some(param) = rest.as_single_name().filter(|n| self.p.is_param(n)) {
                self.constraints
                    .insert((ti, ni), (Rhs::Param(param.to_string()), c));
                continue;
            }
            if rest.names().all(|n| self.p.is_param(n)) {
                continue;
            }
            if self.find(&rest).is_some() {
                // Only a discarded norm can match here; the constraint is dropped.
                continue;
            }
            let depth = self.norms[ni].depth + 1;
            self.norms.push(NormEntry {
                norm: Norm(rest),
                depth,
                parent: Some(ni),
                discarded: false,
            });
            let new = self.norms.len() - 1;
            if depth > self.limit {
                self.discard(new);
                let mut at = Some(ni);
                while let Some(k) = at {
                    if self.norms[k].parent.is_none() {
                        break;
                    }
                    self.discard(k);
                    at = self.norms[k].parent;
                }
            } else {
                self.constraints.insert((ti, ni), (Rhs::Norm(new), c));
                queue.push_back(new);
            }
        }
    }
}

/// Abstracts `p` to a deterministic, well-defined guarded DCP.
pub fn abstract_program(
    p: &ConcreteProgram,
    opts: &AbstractOptions,
) -> Result<Abstraction, AbstractError> {
    let initial = guess_norms(p, opts.max_cycles)?;
    let mut b = Builder {
        p,
        live: p.liveness(),
        norms: initial
            .into_iter()
            .map(|norm| NormEntry {
                norm,
                depth: 0,
                parent: None,
                discarded: false,
            })
            .collect(),
        constraints: BTreeMap::new(),
        warnings: Vec::new(),
        limit: opts.depth_limit,
    };
    let mut queue: VecDeque<usize> = (0..b.norms.len()).collect();
    while let Some(ni) = queue.pop_front() {
        b.abstract_norm(ni, &mut queue);
    }

    let reserved: BTreeSet<&str> = p
        .params
        .iter()
        .chain(&p.locations)
        .map(String::as_str)
        .collect();
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut counter = 0usize;
    for (i, n) in b.norms.iter().enumerate().filter(|(_, n)| !n.discarded) {
        let name = if opts.keep_names {
            n.norm.name()
        } else {
            loop {
                let candidate = format!("v{counter}");
                counter += 1;
                if !reserved.contains(candidate.as_str()) {
                    break candidate;
                }
            }
        };
        names.insert(i, name);
    }

    let mut transitions: Vec<Transition> = p
        .transitions
        .iter()
        .map(|t| Transition {
            id: t.id.clone(),
            source: t.source.clone(),
            target: t.target.clone(),
            guard: BTreeSet::new(),
            updates: Vec::new(),
        })
        .collect();
    for (&(ti, ni), (rhs, c)) in &b.constraints {
        let Some(lhs) = names.get(&ni) else { continue };
        let atom = match rhs {
            Rhs::Norm(j) => match names.get(j) {
                Some(v) => Atom::Var(v.clone()),
                None => continue,
            },
            Rhs::Param(k) => Atom::Const(k.clone()),
            Rhs::Int(k) => Atom::Int(*k),
        };
        transitions[ti]
            .updates
            .push(Constraint::new(lhs.clone(), atom, *c));
    }
    for (ti, t) in p.transitions.iter().enumerate() {
        for (&ni, name) in &names {
            let e = b.norms[ni].norm.expr();
            if b.tracked(e, &t.source) && infer_guard(e, t) {
                transitions[ti].guard.insert(name.clone());
            }
        }
    }

    let mut parts = DcpParts {
        consts: p.params.clone(),
        vars: names.values().cloned().collect(),
        locations: p.locations.clone(),
        entry: p.entry.clone(),
        exit: p.exit.clone(),
        transitions,
    };
    repair(&mut parts);
    let dcp = Dcp::new(parts)?;
    let norms = names
        .into_iter()
        .map(|(i, v)| (v, b.norms[i].norm.clone()))
        .collect();
    Ok(Abstraction {
        dcp,
        norms,
        warnings: b.warnings,
    })
}

/// Removes reads of variables that are live but not defined at a location
/// until none remain. Each round deletes at least one read, so this stops.
fn repair(parts: &mut DcpParts) {
    loop {
        let (_, violations) = Dcp::assemble(parts.clone());
        let bad: BTreeSet<(String, String)> = violations
            .into_iter()
            .filter_map(|v| match v {
                Violation::NotWellDefined { location, var, .. } => Some((location, var)),
                _ => None,
            })
            .collect();
        let mut changed = false;
        for t in &mut parts.transitions {
            for (loc, var) in &bad {
                if t.source != *loc {
                    continue;
                }
                changed |= t.guard.remove(var);
                let before = t.updates.len();
                t.updates.retain(|c| c.rhs.as_var() != Some(var.as_str()));
                changed |= t.updates.len() != before;
            }
        }
        if !changed {
            return;
        }
    }
}
