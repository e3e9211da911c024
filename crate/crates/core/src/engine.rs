//! Transition bounds, variable bounds and whole-program complexity.
//!
//! Three modes are available. `Free` reasons about single resets,
//! `Ctx` about optimal reset paths, and `Opt` additionally counts the
//! increments of atoms that flow into the local bound along a single
//! reset-graph path only once.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::dcp::{Atom, Dcp, TransId};
use crate::expr::{self, BoundExpr};
use crate::local_bounds::{
    local_bound_map, CycleOverflow, LocalBound, LocalBoundMap, DEFAULT_MAX_CYCLES,
};
use crate::reset_graph::{ResetGraph, ResetPath, ResetPathOverflow, DEFAULT_MAX_RESET_PATHS};
use crate::syntax::{Cursor, Diagnostic, ParseError, Pos};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AnalysisMode {
    Free,
    #[default]
    Ctx,
    Opt,
}

impl AnalysisMode {
    pub const ALL: [AnalysisMode; 3] = [AnalysisMode::Free, AnalysisMode::Ctx, AnalysisMode::Opt];
}

impl fmt::Display for AnalysisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnalysisMode::Free => "free",
            AnalysisMode::Ctx => "ctx",
            AnalysisMode::Opt => "opt",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown analysis mode `{0}` (expected free, ctx or opt)")]
pub struct UnknownMode(String);

impl FromStr for AnalysisMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(AnalysisMode::Free),
            "ctx" => Ok(AnalysisMode::Ctx),
            "opt" => Ok(AnalysisMode::Opt),
            other => Err(UnknownMode(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub mode: AnalysisMode,
    pub max_cycles: usize,
    pub max_reset_paths: usize,
    /// Disable only to cross-check results; the cost becomes exponential.
    pub memoize: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            mode: AnalysisMode::default(),
            max_cycles: DEFAULT_MAX_CYCLES,
            max_reset_paths: DEFAULT_MAX_RESET_PATHS,
            memoize: true,
        }
    }
}

impl AnalysisOptions {
    pub fn with_mode(mode: AnalysisMode) -> Self {
        AnalysisOptions {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Cycles(#[from] CycleOverflow),
    #[error(transparent)]
    ResetPaths(#[from] ResetPathOverflow),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Key {
    Tb(usize),
    Vb(String),
}

pub struct BoundEngine {
    mode: AnalysisMode,
    original: Dcp,
    work: Dcp,
    zeta: LocalBoundMap,
    graph: ResetGraph,
    removed: BTreeSet<String>,
    paths: HashMap<String, Vec<ResetPath>>,
    memoize: bool,
    memo: HashMap<Key, BoundExpr>,
    in_progress: HashSet<Key>,
}

impl BoundEngine {
    /// Computes ζ on `dcp`. For `Ctx` and `Opt` the program is pruned to an
    /// acyclic reset graph and 𝕽 is enumerated for every local-bound
    /// variable.
    pub fn new(dcp: &Dcp, opts: &AnalysisOptions) -> Result<Self, AnalysisError> {
        let zeta = local_bound_map(dcp, opts.max_cycles)?;
        let (work, removed) = match opts.mode {
            AnalysisMode::Free => (dcp.clone(), BTreeSet::new()),
            AnalysisMode::Ctx | AnalysisMode::Opt => {
                let removed = ResetGraph::build(dcp).removed().clone();
                (dcp.without_vars(&removed), removed)
            }
        };
        let graph = ResetGraph::build(&work);
        let mut paths = HashMap::new();
        if opts.mode != AnalysisMode::Free {
            let wanted: BTreeSet<&String> = zeta
                .iter()
                .filter_map(|z| match z {
                    LocalBound::Var(v) if work.is_var(v) => Some(v),
                    _ => None,
                })
                .collect();
            for v in wanted {
                let r = graph.optimal_reset_paths(&work, v, opts.max_reset_paths)?;
                paths.insert(v.clone(), r);
            }
        }
        Ok(BoundEngine {
            mode: opts.mode,
            original: dcp.clone(),
            work,
            zeta,
            graph,
            removed,
            paths,
            memoize: opts.memoize,
            memo: HashMap::new(),
            in_progress: HashSet::new(),
        })
    }

    pub fn mode(&self) -> AnalysisMode {
        self.mode
    }

    pub fn local_bounds(&self) -> &LocalBoundMap {
        &self.zeta
    }

    /// The program the bounds are computed on (pruned for `Ctx`/`Opt`).
    pub fn working_dcp(&self) -> &Dcp {
        &self.work
    }

    pub fn reset_graph(&self) -> &ResetGraph {
        &self.graph
    }

    pub fn removed_vars(&self) -> &BTreeSet<String> {
        &self.removed
    }

    /// 𝕽(v) as used by the engine (only for local-bound variables).
    pub fn optimal_paths(&self, v: &str) -> Option<&[ResetPath]> {
        self.paths.get(v).map(Vec::as_slice)
    }

    fn cached(&mut self, key: Key, compute: impl FnOnce(&mut Self) -> BoundExpr) -> BoundExpr {
        if let Some(e) = self.memo.get(&key) {
            return e.clone();
        }
        if !self.in_progress.insert(key.clone()) {
            return BoundExpr::Undefined;
        }
        let value = compute(self);
        self.in_progress.remove(&key);
        if self.memoize {
            self.memo.insert(key, value.clone());
        }
        value
    }

    /// Incr(v): total amount by which `v` may be incremented.
    pub fn incr(&mut self, v: &str) -> BoundExpr {
        let Ok(incs) = self.work.increments(v) else {
            return BoundExpr::Undefined;
        };
        let terms: Vec<BoundExpr> = incs
            .into_iter()
            .map(|(t, c)| self.tb(t).mul(&BoundExpr::int(c)))
            .collect();
        sum(terms)
    }

    fn incr_atom(&mut self, a: &Atom) -> BoundExpr {
        match a {
            Atom::Var(v) => self.incr(v),
            _ => BoundExpr::zero(),
        }
    }

    /// VB(a): bound on the value of `a` wherever it is defined.
    pub fn vb(&mut self, a: &Atom) -> BoundExpr {
        match a {
            Atom::Int(k) => BoundExpr::int(*k),
            Atom::Const(s) => BoundExpr::sym(s.clone()),
            Atom::Var(v) => {
                let v = v.clone();
                self.cached(Key::Vb(v.clone()), |me| me.vb_uncached(&v))
            }
        }
    }

    fn vb_uncached(&mut self, v: &str) -> BoundExpr {
        let Ok(resets) = self.work.resets(v) else {
            return BoundExpr::Undefined;
        };
        if resets.is_empty() {
            return BoundExpr::Undefined;
        }
        let inc = self.incr(v);
        let args: Vec<BoundExpr> = resets
            .into_iter()
            .map(|(_, a, c)| self.vb(&a).add(&BoundExpr::int(c)))
            .collect();
        let top = expr::normalize(&BoundExpr::Max(args));
        inc.add(&top)
    }

    /// TB(τ) for the transition with index `t`.
    pub fn tb(&mut self, t: usize) -> BoundExpr {
        self.cached(Key::Tb(t), |me| me.tb_uncached(t))
    }

    /// TB of a set of transitions: the minimum of the members' bounds. A
    /// member with local bound 1 runs at most once, which bounds the whole
    /// sequence by 1 without looking at the other members.
    pub fn tb_set(&mut self, ts: &BTreeSet<usize>) -> BoundExpr {
        if ts.iter().any(|&t| self.zeta[t] == LocalBound::One) {
            return BoundExpr::one();
        }
        let args: Vec<BoundExpr> = ts.iter().map(|&t| self.tb(t)).collect();
        expr::normalize(&BoundExpr::Min(args))
    }

    fn tb_uncached(&mut self, t: usize) -> BoundExpr {
        let v = match &self.zeta[t] {
            LocalBound::One => return BoundExpr::one(),
            LocalBound::Missing => return BoundExpr::Undefined,
            LocalBound::Var(v) if self.work.is_var(v) => v.clone(),
            LocalBound::Var(_) => return BoundExpr::Undefined,
        };
        match self.mode {
            AnalysisMode::Free => self.tb_free(&v),
            AnalysisMode::Ctx => self.tb_ctx(&v, false),
            AnalysisMode::Opt => self.tb_ctx(&v, true),
        }
    }

    fn tb_free(&mut self, v: &str) -> BoundExpr {
        let resets = self
            .work
            .resets(v)
            .expect("variable of the working program");
        if resets.is_empty() {
            return BoundExpr::Undefined;
        }
        let mut terms = vec![self.incr(v)];
        for (t, a, c) in resets {
            let weight = self.vb(&a).add(&BoundExpr::int(c)).clamp_nonnegative();
            terms.push(self.tb(t).mul(&weight));
        }
        sum(terms)
    }

    fn tb_ctx(&mut self, v: &str, optimized: bool) -> BoundExpr {
        let paths = self.paths.get(v).cloned().unwrap_or_default();
        if paths.is_empty() {
            return BoundExpr::Undefined;
        }
        let mut terms = Vec::new();
        let mut once: BTreeSet<Atom> = BTreeSet::new();
        for k in &paths {
            let weight = self
                .vb(k.input())
                .add(&BoundExpr::int(k.offset()))
                .clamp_nonnegative();
            terms.push(self.tb_set(&k.transitions()).mul(&weight));
            for a in k.atom_set() {
                if optimized && self.graph.path_count(&a, k.target()) <= 1 {
                    once.insert(a);
                } else {
                    terms.push(self.incr_atom(&a));
                }
            }
        }
        for a in once {
            terms.push(self.incr_atom(&a));
        }
        sum(terms)
    }

    /// Sum of TB over the back edges of the program.
    pub fn complexity(&mut self) -> BoundExpr {
        let terms: Vec<BoundExpr> = self
            .original
            .back_edges()
            .into_iter()
            .map(|t| self.tb(t))
            .collect();
        sum(terms)
    }

    /// Computes the full report.
    pub fn report(&mut self) -> Report {
        let tb = (0..self.original.transitions().len())
            .map(|t| (self.original.transition(t).id.clone(), self.tb(t)))
            .collect();
        let vars: Vec<String> = self.original.vars().to_vec();
        let vb = vars
            .into_iter()
            .map(|v| {
                let b = self.vb(&Atom::Var(v.clone()));
                (v, b)
            })
            .collect();
        Report {
            tb,
            vb,
            complexity: self.complexity(),
        }
    }
}

fn sum(terms: Vec<BoundExpr>) -> BoundExpr {
    if terms.is_empty() {
        BoundExpr::zero()
    } else {
        expr::normalize(&BoundExpr::Sum(terms))
    }
}

/// Runs the analysis in the requested mode.
pub fn analyze(dcp: &Dcp, opts: &AnalysisOptions) -> Result<Report, AnalysisError> {
    Ok(BoundEngine::new(dcp, opts)?.report())
}

/// Result of one analysis, in the line-oriented report format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    /// One entry per transition, in id order.
    pub tb: Vec<(TransId, BoundExpr)>,
    /// One entry per variable, in declaration order. May be empty for a
    /// report read back without variable bounds.
    pub vb: Vec<(String, BoundExpr)>,
    pub complexity: BoundExpr,
}

impl Report {
    pub fn tb_of(&self, id: &str) -> Option<&BoundExpr> {
        self.tb
            .iter()
            .find(|(t, _)| t.as_str() == id)
            .map(|(_, e)| e)
    }

    pub fn vb_of(&self, v: &str) -> Option<&BoundExpr> {
        self.vb.iter().find(|(x, _)| x == v).map(|(_, e)| e)
    }

    /// The report text. Variable bounds are included on request.
    pub fn render(&self, with_vb: bool) -> String {
        let mut out = String::new();
        for (t, e) in &self.tb {
            out.push_str(&format!("TB({t}) = {e}\n"));
        }
        if with_vb {
            for (v, e) in &self.vb {
                out.push_str(&format!("VB({v}) = {e}\n"));
            }
        }
        out.push_str(&format!("complexity = {}\n", self.complexity));
        out
    }

    /// Reads a report back. Expressions are normalized; `#` comments and
    /// blank lines are ignored.
    pub fn parse(text: &str) -> Result<Report, ParseError> {
        let mut tb = Vec::new();
        let mut vb = Vec::new();
        let mut complexity = None;
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let pos = Pos {
                line: i + 1,
                col: 1,
                offset: 0,
            };
            match parse_report_line(line) {
                Ok(ReportLine::Tb(t, e)) => tb.push((t, e)),
                Ok(ReportLine::Vb(v, e)) => vb.push((v, e)),
                Ok(ReportLine::Complexity(e)) => complexity = Some(e),
                Err(mut err) => {
                    for d in &mut err.diagnostics {
                        d.line = pos.line;
                    }
                    errors.extend(err.diagnostics);
                }
            }
        }
        if !errors.is_empty() {
            return Err(ParseError {
                diagnostics: errors,
            });
        }
        let complexity = complexity.ok_or_else(|| ParseError {
            diagnostics: vec![Diagnostic {
                line: text.lines().count().max(1),
                col: 1,
                message: "missing `complexity = ...` line".into(),
            }],
        })?;
        Ok(Report { tb, vb, complexity })
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(true))
    }
}

enum ReportLine {
    Tb(TransId, BoundExpr),
    Vb(String, BoundExpr),
    Complexity(BoundExpr),
}

fn parse_report_line(line: &str) -> Result<ReportLine, ParseError> {
    let (lhs, rhs) = line
        .split_once('=')
        .ok_or_else(|| ParseError::single(Pos::default(), "expected `<name> = <expr>`"))?;
    let e = expr::normalize(&expr::parse(rhs.trim())?);
    let lhs = lhs.trim();
    if lhs == "complexity" {
        return Ok(ReportLine::Complexity(e));
    }
    let mut c = Cursor::new(lhs)?;
    let (kind, _) = c.expect_ident()?;
    c.expect_punct("(")?;
    let (name, _) = c.expect_name()?;
    c.expect_punct(")")?;
    if !c.at_eof() {
        return Err(c.unexpected("`=`"));
    }
    match kind.as_str() {
        "TB" => Ok(ReportLine::Tb(TransId(name), e)),
        "VB" => Ok(ReportLine::Vb(name, e)),
        other => Err(ParseError::single(
            Pos::default(),
            format!("unknown report entry `{other}`"),
        )),
    }
}
