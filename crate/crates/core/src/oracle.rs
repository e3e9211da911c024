//! Exhaustive interpreter for guarded DCPs, used as ground truth when
//! checking computed bounds.
//!
//! Every update is taken at equality (`x' = y + c`). Updates only give
//! upper bounds and guards only demand positivity, so a pointwise larger
//! state enables at least the behaviour of a smaller one. Exploring these
//! maximal runs therefore finds the worst case of every counter.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;

use crate::dcp::{Atom, Dcp, TransId};
use crate::engine::Report;
use crate::expr::{evaluate, ExprError, Valuation};
use crate::local_bounds::{LocalBound, LocalBoundMap};

pub const DEFAULT_STEP_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("no value for symbolic constant `{0}`")]
    MissingConstant(String),
    #[error("transition `{trans}` reads `{var}` before it is defined")]
    UndefinedRead { trans: TransId, var: String },
    #[error("report mentions unknown transition `{0}`")]
    UnknownTransition(TransId),
    #[error("report mentions unknown variable `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

type Values = Vec<Option<BigInt>>;

/// Interpreter view of a DCP with names resolved to indices.
struct Machine<'d> {
    dcp: &'d Dcp,
    loc_index: HashMap<&'d str, usize>,
    outgoing: Vec<Vec<usize>>,
    /// For each location, whether each variable is in D(l).
    defined: Vec<Vec<bool>>,
    consts: HashMap<&'d str, BigInt>,
}

impl<'d> Machine<'d> {
    fn new(dcp: &'d Dcp, valuation: &Valuation) -> Result<Self, OracleError> {
        let loc_index: HashMap<&str, usize> = dcp
            .locations()
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let mut outgoing = vec![Vec::new(); loc_index.len()];
        for (t, tr) in dcp.transitions().iter().enumerate() {
            outgoing[loc_index[tr.source.as_str()]].push(t);
        }
        let defined = dcp
            .locations()
            .iter()
            .map(|l| {
                let d = dcp.defined_at(l);
                dcp.vars().iter().map(|v| d.contains(v)).collect()
            })
            .collect();
        let mut consts = HashMap::new();
        for k in dcp.consts() {
            let v = valuation
                .get(k)
                .ok_or_else(|| OracleError::MissingConstant(k.clone()))?;
            consts.insert(k.as_str(), BigInt::from(v));
        }
        Ok(Machine {
            dcp,
            loc_index,
            outgoing,
            defined,
            consts,
        })
    }

    fn var_index(&self, v: &str) -> usize {
        self.dcp
            .vars()
            .iter()
            .position(|x| x == v)
            .expect("variable of a validated DCP")
    }

    fn read(&self, t: usize, values: &Values, v: &str) -> Result<BigInt, OracleError> {
        values[self.var_index(v)]
            .clone()
            .ok_or_else(|| OracleError::UndefinedRead {
                trans: self.dcp.transition(t).id.clone(),
                var: v.to_string(),
            })
    }

    fn enabled(&self, t: usize, values: &Values) -> Result<bool, OracleError> {
        for g in &self.dcp.transition(t).guard {
            if self.read(t, values, g)? <= BigInt::zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Post-state values. `slack(var)` is subtracted from each maximal
    /// update; the exhaustive search passes zero.
    fn post(
        &self,
        t: usize,
        values: &Values,
        mut slack: impl FnMut() -> u32,
    ) -> Result<Values, OracleError> {
        let mut out = vec![None; values.len()];
        for c in &self.dcp.transition(t).updates {
            let base = match &c.rhs {
                Atom::Var(v) => self.read(t, values, v)?,
                Atom::Const(k) => self.consts[k.as_str()].clone(),
                Atom::Int(i) => BigInt::from(*i),
            };
            out[self.var_index(&c.lhs)] = Some(base + c.offset - slack());
        }
        Ok(out)
    }

    fn entry(&self) -> (usize, Values) {
        (
            self.loc_index[self.dcp.entry()],
            vec![None; self.dcp.vars().len()],
        )
    }
}

/// Worst-case observations of one exhaustive exploration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunStats {
    /// Maximum number of executions of each transition on one run, indexed
    /// like [`Dcp::transitions`].
    pub counts: Vec<u64>,
    /// Largest value of each variable at a location where it is defined,
    /// indexed like [`Dcp::vars`]. `None` when never observed.
    pub var_max: Vec<Option<BigInt>>,
    /// False when the step cap was reached or a state repeated on a run.
    /// The numbers are then only lower bounds.
    pub exhausted: bool,
    /// Whether some explored run ends at the exit location. Only such
    /// runs contribute to `counts` and `var_max`.
    pub reached_exit: bool,
    pub states: usize,
}

impl RunStats {
    pub fn count_of(&self, dcp: &Dcp, id: &str) -> Option<u64> {
        dcp.index_of(id).map(|i| self.counts[i])
    }

    pub fn var_max_of(&self, dcp: &Dcp, var: &str) -> Option<&BigInt> {
        let i = dcp.vars().iter().position(|v| v == var)?;
        self.var_max[i].as_ref()
    }
}

#[derive(Clone)]
struct Summary {
    counts: Vec<u64>,
    var_max: Vec<Option<BigInt>>,
}

impl Summary {
    fn empty(n_trans: usize, values: &Values, defined: &[bool]) -> Self {
        Summary {
            counts: vec![0; n_trans],
            var_max: values
                .iter()
                .zip(defined)
                .map(|(v, &d)| if d { v.clone() } else { None })
                .collect(),
        }
    }

    fn absorb(&mut self, other: &Summary, via: usize) {
        for (t, (mine, theirs)) in self.counts.iter_mut().zip(&other.counts).enumerate() {
            let c = theirs + u64::from(t == via);
            *mine = (*mine).max(c);
        }
        for (mine, theirs) in self.var_max.iter_mut().zip(&other.var_max) {
            if let Some(v) = theirs {
                if mine.as_ref().is_none_or(|m| v > m) {
                    *mine = Some(v.clone());
                }
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    OnStack,
    Done,
}

/// A DFS frame: state, its `(transition, successor)` edges and the index
/// of the next edge to visit.
type Frame = (usize, Vec<(usize, usize)>, usize);

/// Explores every maximal run from the entry location. Counts and values
/// are maxima over the runs that end at the exit location; a run that
/// dead-ends elsewhere never completes and bounds say nothing about it.
pub fn explore(dcp: &Dcp, valuation: &Valuation, step_cap: usize) -> Result<RunStats, OracleError> {
    let m = Machine::new(dcp, valuation)?;
    let n_trans = dcp.transitions().len();
    let mut ids: HashMap<(usize, Values), usize> = HashMap::new();
    let mut states: Vec<(usize, Values)> = Vec::new();
    let mut status: Vec<Option<Status>> = Vec::new();
    let mut summaries: Vec<Option<Summary>> = Vec::new();
    let mut exhausted = true;
    let exit = m.loc_index[dcp.exit()];

    let mut intern = |s: (usize, Values),
                      states: &mut Vec<(usize, Values)>,
                      status: &mut Vec<Option<Status>>,
                      summaries: &mut Vec<Option<Summary>>| {
        *ids.entry(s.clone()).or_insert_with(|| {
            states.push(s);
            status.push(None);
            summaries.push(None);
            states.len() - 1
        })
    };

    let root = intern(m.entry(), &mut states, &mut status, &mut summaries);
    let mut stack: Vec<Frame> = Vec::new();
    let mut expand = |s: usize,
                      states: &mut Vec<(usize, Values)>,
                      status: &mut Vec<Option<Status>>,
                      summaries: &mut Vec<Option<Summary>>,
                      exhausted: &mut bool|
     -> Result<Vec<(usize, usize)>, OracleError> {
        status[s] = Some(Status::OnStack);
        let (loc, values) = states[s].clone();
        if states.len() > step_cap {
            *exhausted = false;
            return Ok(Vec::new());
        }
        let mut succs = Vec::new();
        for &t in &m.outgoing[loc] {
            if !m.enabled(t, &values)? {
                continue;
            }
            let next = (
                m.loc_index[dcp.transition(t).target.as_str()],
                m.post(t, &values, || 0)?,
            );
            succs.push((t, intern(next, states, status, summaries)));
        }
        Ok(succs)
    };

    let succs = expand(
        root,
        &mut states,
        &mut status,
        &mut summaries,
        &mut exhausted,
    )?;
    stack.push((root, succs, 0));
    while let Some(top) = stack.last_mut() {
        if top.2 < top.1.len() {
            let (_, next) = top.1[top.2];
            top.2 += 1;
            match status[next] {
                Some(Status::Done) => {}
                Some(Status::OnStack) => exhausted = false,
                None => {
                    let succs = expand(
                        next,
                        &mut states,
                        &mut status,
                        &mut summaries,
                        &mut exhausted,
                    )?;
                    stack.push((next, succs, 0));
                }
            }
            continue;
        }
        let (s, succs, _) = stack.pop().expect("non-empty stack");
        let (loc, values) = &states[s];
        let mut sum: Option<Summary> = None;
        if *loc == exit {
            sum = Some(Summary::empty(n_trans, values, &m.defined[*loc]));
        }
        for (t, next) in succs {
            if let Some(child) = &summaries[next] {
                sum.get_or_insert_with(|| Summary::empty(n_trans, values, &m.defined[*loc]))
                    .absorb(child, t);
            }
        }
        summaries[s] = sum;
        status[s] = Some(Status::Done);
    }
    let root_summary = summaries[root].take();
    let reached_exit = root_summary.is_some();
    let root_summary = root_summary.unwrap_or(Summary {
        counts: vec![0; n_trans],
        var_max: vec![None; dcp.vars().len()],
    });
    Ok(RunStats {
        counts: root_summary.counts,
        var_max: root_summary.var_max,
        exhausted,
        reached_exit,
        states: states.len(),
    })
}

/// One concrete run, possibly with sub-maximal updates.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Executed transitions, in order.
    pub steps: Vec<usize>,
    /// Variable values before the first step and after each step.
    pub values: Vec<Values>,
    /// Whether the run ended at the exit location.
    pub complete: bool,
}

impl Trace {
    pub fn counts(&self, n_trans: usize) -> Vec<u64> {
        let mut out = vec![0; n_trans];
        for &t in &self.steps {
            out[t] += 1;
        }
        out
    }

    /// How often the value of variable `var` (an index into
    /// [`Dcp::vars`]) strictly decreases between consecutive states.
    pub fn decreases(&self, var: usize) -> u64 {
        self.values
            .windows(2)
            .filter(|w| matches!((&w[0][var], &w[1][var]), (Some(a), Some(b)) if a > b))
            .count() as u64
    }
}

/// A random run: each step picks an enabled transition uniformly and
/// takes every update `slack` below its maximum, with `slack` drawn from
/// `0..=max_slack`. Stops at a location with no enabled transition or
/// after `max_steps` steps.
pub fn random_run(
    dcp: &Dcp,
    valuation: &Valuation,
    rng: &mut impl Rng,
    max_slack: u32,
    max_steps: usize,
) -> Result<Trace, OracleError> {
    let m = Machine::new(dcp, valuation)?;
    let (mut loc, mut values) = m.entry();
    let mut trace = Trace {
        steps: Vec::new(),
        values: vec![values.clone()],
        complete: false,
    };
    while trace.steps.len() < max_steps {
        let mut enabled = Vec::new();
        for &t in &m.outgoing[loc] {
            if m.enabled(t, &values)? {
                enabled.push(t);
            }
        }
        if enabled.is_empty() {
            break;
        }
        let t = enabled[rng.gen_range(0..enabled.len())];
        values = m.post(t, &values, || rng.gen_range(0..=max_slack))?;
        loc = m.loc_index[dcp.transition(t).target.as_str()];
        trace.steps.push(t);
        trace.values.push(values.clone());
    }
    trace.complete = dcp.locations()[loc] == dcp.exit();
    Ok(trace)
}

/// Transitions whose local bound is contradicted by `trace`: `ζ(τ) = 1`
/// yet τ ran twice, or `ζ(τ) = v` yet τ ran more often than `v` decreased.
/// Local bounds only speak about runs that reach the exit; a run stuck
/// halfway through a loop may legitimately exceed them, so incomplete
/// traces yield no violations.
pub fn check_local_bounds(dcp: &Dcp, zeta: &LocalBoundMap, trace: &Trace) -> Vec<TransId> {
    if !trace.complete {
        return Vec::new();
    }
    let counts = trace.counts(dcp.transitions().len());
    zeta.iter()
        .enumerate()
        .filter(|&(t, z)| match z {
            LocalBound::One => counts[t] > 1,
            LocalBound::Var(v) => {
                let vi = dcp
                    .vars()
                    .iter()
                    .position(|x| x == v)
                    .expect("known variable");
                counts[t] > trace.decreases(vi)
            }
            LocalBound::Missing => false,
        })
        .map(|(t, _)| dcp.transition(t).id.clone())
        .collect()
}

/// What a table row talks about.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subject {
    Transition(TransId),
    Variable(String),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Transition(t) => write!(f, "{t}"),
            Subject::Variable(v) => write!(f, "VB({v})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub subject: Subject,
    /// `None` for a variable that never held a value.
    pub observed: Option<BigInt>,
    /// `None` when the bound is `undef`.
    pub bound: Option<BigInt>,
}

impl Row {
    pub fn ok(&self) -> bool {
        match (&self.observed, &self.bound) {
            (Some(o), Some(b)) => o <= b,
            _ => true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValuationCheck {
    pub valuation: Valuation,
    pub stats: RunStats,
    pub rows: Vec<Row>,
}

impl ValuationCheck {
    pub fn table(&self) -> String {
        let show = |v: &Option<BigInt>, none: &str| {
            v.as_ref().map_or(none.to_string(), ToString::to_string)
        };
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                let status = match (&r.bound, r.ok()) {
                    (None, _) => "UNCHECKED",
                    (_, true) => "OK",
                    (_, false) => "VIOLATION",
                };
                [
                    r.subject.to_string(),
                    show(&r.observed, "-"),
                    show(&r.bound, "undef"),
                    status.to_string(),
                ]
            })
            .collect();
        let mut widths = [0usize; 3];
        for c in &cells {
            for i in 0..3 {
                widths[i] = widths[i].max(c[i].len());
            }
        }
        let mut out = format!(
            "valuation {}: {} states{}{}\n",
            self.valuation,
            self.stats.states,
            if self.stats.exhausted {
                ""
            } else {
                " (not exhausted)"
            },
            if self.stats.reached_exit {
                ""
            } else {
                " (exit never reached)"
            }
        );
        for c in &cells {
            out.push_str(&format!(
                "  {:<w0$}  {:>w1$}  {:>w2$}  {}\n",
                c[0],
                c[1],
                c[2],
                c[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2]
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictKind {
    Pass,
    /// No violation, but some exploration hit the step cap or a state cycle.
    PassPartial,
    Fail,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::Pass => "PASS",
            VerdictKind::PassPartial => "PASS-PARTIAL",
            VerdictKind::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// One entry per valuation, in input order.
    pub checks: Vec<ValuationCheck>,
}

impl Verdict {
    pub fn counterexamples(&self) -> impl Iterator<Item = (&Valuation, &Row)> {
        self.checks.iter().flat_map(|c| {
            c.rows
                .iter()
                .filter(|r| !r.ok())
                .map(move |r| (&c.valuation, r))
        })
    }
}

/// Compares `report` against exhaustive exploration under each valuation.
/// Valuations are explored in parallel; results keep the input order.
pub fn check_soundness(
    dcp: &Dcp,
    report: &Report,
    valuations: &[Valuation],
    step_cap: usize,
) -> Result<Verdict, OracleError> {
    let mut tb_index = Vec::new();
    for (id, e) in &report.tb {
        let i = dcp
            .index_of(id.as_str())
            .ok_or_else(|| OracleError::UnknownTransition(id.clone()))?;
        tb_index.push((i, id, e));
    }
    let mut vb_index = Vec::new();
    for (v, e) in &report.vb {
        let i = dcp
            .vars()
            .iter()
            .position(|x| x == v)
            .ok_or_else(|| OracleError::UnknownVariable(v.clone()))?;
        vb_index.push((i, v, e));
    }
    let checks: Vec<ValuationCheck> = valuations
        .par_iter()
        .map(|val| {
            let stats = explore(dcp, val, step_cap)?;
            let mut rows = Vec::new();
            for &(i, id, e) in &tb_index {
                rows.push(Row {
                    subject: Subject::Transition(id.clone()),
                    observed: stats.reached_exit.then(|| BigInt::from(stats.counts[i])),
                    bound: evaluate(e, val)?,
                });
            }
            for &(i, v, e) in &vb_index {
                rows.push(Row {
                    subject: Subject::Variable(v.clone()),
                    observed: stats.var_max[i].clone(),
                    bound: evaluate(e, val)?,
                });
            }
            Ok(ValuationCheck {
                valuation: val.clone(),
                stats,
                rows,
            })
        })
        .collect::<Result<_, OracleError>>()?;
    let kind = if checks.iter().any(|c| c.rows.iter().any(|r| !r.ok())) {
        VerdictKind::Fail
    } else if checks.iter().all(|c| c.stats.exhausted) {
        VerdictKind::Pass
    } else {
        VerdictKind::PassPartial
    };
    Ok(Verdict { kind, checks })
}

/// Cartesian product of per-constant value ranges, in lexicographic order
/// of the constant names.
pub fn valuation_grid(ranges: &[(String, Vec<u64>)]) -> Vec<Valuation> {
    let mut sorted: Vec<&(String, Vec<u64>)> = ranges.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = vec![Valuation::new()];
    for (name, values) in sorted {
        out = out
            .into_iter()
            .flat_map(|v| values.iter().map(move |&x| v.clone().with(name, x)))
            .collect();
    }
    out
}
