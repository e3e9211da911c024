//! Guarded difference constraint programs: data model, text format,
//! validation, reset/increment extraction and back-edge classification.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::syntax::{Cursor, Diagnostic, ParseError, Pos, Tok};

/// Transition identifier. Ordering is lexicographic on the name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransId(pub String);

impl TransId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TransId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TransId {
    fn from(s: &str) -> Self {
        TransId(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(String),
    Const(String),
    Int(i64),
}

impl Atom {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Atom::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Var(s) | Atom::Const(s) => f.write_str(s),
            Atom::Int(k) => write!(f, "{k}"),
        }
    }
}

/// `lhs' <= rhs + offset`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub lhs: String,
    pub rhs: Atom,
    pub offset: i64,
}

impl Constraint {
    pub fn new(lhs: impl Into<String>, rhs: Atom, offset: i64) -> Self {
        Constraint {
            lhs: lhs.into(),
            rhs,
            offset,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}' <= {}", self.lhs, self.rhs)?;
        match self.offset {
            0 => Ok(()),
            c if c > 0 => write!(f, " + {c}"),
            c => write!(f, " - {}", c.unsigned_abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub id: TransId,
    pub source: String,
    pub target: String,
    /// Variables required to be strictly positive.
    pub guard: BTreeSet<String>,
    pub updates: Vec<Constraint>,
}

impl Transition {
    pub fn update_of(&self, var: &str) -> Option<&Constraint> {
        self.updates.iter().find(|c| c.lhs == var)
    }

    pub fn defines(&self, var: &str) -> bool {
        self.update_of(var).is_some()
    }

    /// Guard variables plus every variable read on a right-hand side.
    pub fn uses(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.guard.iter().map(String::as_str).collect();
        out.extend(self.updates.iter().filter_map(|c| c.rhs.as_var()));
        out
    }
}

/// A rule a DCP must satisfy, reported by [`Dcp::new`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateTransition(TransId),
    NameClash(String),
    UnknownName {
        trans: TransId,
        name: String,
    },
    NotAVariable {
        trans: TransId,
        name: String,
    },
    UnknownLocation {
        trans: TransId,
        location: String,
    },
    EntryHasIncoming(TransId),
    ExitHasOutgoing(TransId),
    EntryIsExit,
    NonDeterministic {
        trans: TransId,
        var: String,
    },
    NotWellDefined {
        location: String,
        var: String,
        via: TransId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateTransition(t) => write!(f, "duplicate transition id `{t}`"),
            Violation::NameClash(n) => {
                write!(f, "name `{n}` is used for more than one of variable, constant, location")
            }
            Violation::UnknownName { trans, name } => {
                write!(f, "transition `{trans}`: undeclared name `{name}`")
            }
            Violation::NotAVariable { trans, name } => {
                write!(f, "transition `{trans}`: `{name}` is not a variable")
            }
            Violation::UnknownLocation { trans, location } => {
                write!(f, "transition `{trans}`: unknown location `{location}`")
            }
            Violation::EntryHasIncoming(t) => {
                write!(f, "transition `{t}` enters the entry location")
            }
            Violation::ExitHasOutgoing(t) => write!(f, "transition `{t}` leaves the exit location"),
            Violation::EntryIsExit => write!(f, "entry and exit must be different locations"),
            Violation::NonDeterministic { trans, var } => write!(
                f,
                "transition `{trans}`: more than one constraint for `{var}` (not deterministic)"
            ),
            Violation::NotWellDefined { location, var, via } => write!(
                f,
                "`{var}` is live at `{location}` (read via transition `{via}`) but not defined on every incoming transition"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DcpError {
    #[error("invalid DCP: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}

/// The pieces of a DCP before validation.
#[derive(Clone, Debug, Default)]
pub struct DcpParts {
    pub consts: Vec<String>,
    pub vars: Vec<String>,
    /// Optional explicit location list; derived from the transitions when empty.
    pub locations: Vec<String>,
    pub entry: String,
    pub exit: String,
    pub transitions: Vec<Transition>,
}

/// A validated, deterministic and well-defined guarded DCP. Transitions are
/// stored sorted by id, and indices into [`Dcp::transitions`] are used as
/// compact handles throughout the crate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dcp {
    consts: Vec<String>,
    vars: Vec<String>,
    locations: Vec<String>,
    entry: String,
    exit: String,
    transitions: Vec<Transition>,
}

impl Dcp {
    pub fn new(parts: DcpParts) -> Result<Dcp, DcpError> {
        let (dcp, violations) = Self::assemble(parts);
        if violations.is_empty() {
            Ok(dcp)
        } else {
            Err(DcpError::Invalid(violations))
        }
    }

    /// Builds the program and reports every violation instead of stopping
    /// at the first one.
    pub(crate) fn assemble(parts: DcpParts) -> (Dcp, Vec<Violation>) {
        let mut violations = Vec::new();
        let mut seen = BTreeSet::new();
        for t in &parts.transitions {
            if !seen.insert(t.id.clone()) {
                violations.push(Violation::DuplicateTransition(t.id.clone()));
            }
        }
        let explicit_locations = !parts.locations.is_empty();
        let mut locations = parts.locations.clone();
        if !explicit_locations {
            let mut push = |l: &String| {
                if !locations.contains(l) {
                    locations.push(l.clone());
                }
            };
            push(&parts.entry);
            for t in &parts.transitions {
                push(&t.source);
                push(&t.target);
            }
            push(&parts.exit);
        }

        let var_set: BTreeSet<&str> = parts.vars.iter().map(String::as_str).collect();
        let const_set: BTreeSet<&str> = parts.consts.iter().map(String::as_str).collect();
        let loc_set: BTreeSet<&str> = locations.iter().map(String::as_str).collect();
        let mut clashes = BTreeSet::new();
        for n in &var_set {
            if const_set.contains(n) || loc_set.contains(n) {
                clashes.insert(n.to_string());
            }
        }
        for n in &const_set {
            if loc_set.contains(n) {
                clashes.insert(n.to_string());
            }
        }
        violations.extend(clashes.into_iter().map(Violation::NameClash));
        if parts.entry == parts.exit {
            violations.push(Violation::EntryIsExit);
        }

        for t in &parts.transitions {
            for l in [&t.source, &t.target] {
                if explicit_locations && !loc_set.contains(l.as_str()) {
                    violations.push(Violation::UnknownLocation {
                        trans: t.id.clone(),
                        location: l.clone(),
                    });
                }
            }
            if explicit_locations {
                for l in [&parts.entry, &parts.exit] {
                    if !loc_set.contains(l.as_str()) {
                        violations.push(Violation::UnknownLocation {
                            trans: t.id.clone(),
                            location: l.clone(),
                        });
                    }
                }
            }
            if t.target == parts.entry {
                violations.push(Violation::EntryHasIncoming(t.id.clone()));
            }
            if t.source == parts.exit {
                violations.push(Violation::ExitHasOutgoing(t.id.clone()));
            }
            let check_var = |name: &str| {
                if var_set.contains(name) {
                    None
                } else if const_set.contains(name) {
                    Some(Violation::NotAVariable {
                        trans: t.id.clone(),
                        name: name.to_string(),
                    })
                } else {
                    Some(Violation::UnknownName {
                        trans: t.id.clone(),
                        name: name.to_string(),
                    })
                }
            };
            violations.extend(t.guard.iter().filter_map(|g| check_var(g)));
            let mut lhs_seen = BTreeSet::new();
            for c in &t.updates {
                violations.extend(check_var(&c.lhs));
                match &c.rhs {
                    Atom::Var(v) => violations.extend(check_var(v)),
                    Atom::Const(k) if !const_set.contains(k.as_str()) => {
                        violations.push(Violation::UnknownName {
                            trans: t.id.clone(),
                            name: k.clone(),
                        })
                    }
                    _ => {}
                }
                if !lhs_seen.insert(c.lhs.as_str()) {
                    violations.push(Violation::NonDeterministic {
                        trans: t.id.clone(),
                        var: c.lhs.clone(),
                    });
                }
            }
        }

        let mut transitions = parts.transitions;
        transitions.sort_by(|a, b| a.id.cmp(&b.id));
        let dcp = Dcp {
            consts: parts.consts,
            vars: parts.vars,
            locations,
            entry: parts.entry,
            exit: parts.exit,
            transitions,
        };
        if violations.is_empty() {
            violations.extend(dcp.well_definedness_violations());
        }
        (dcp, violations)
    }

    pub fn consts(&self) -> &[String] {
        &self.consts
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn entry(&self) -> &str {
        &self.entry
    }

    pub fn exit(&self) -> &str {
        &self.exit
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, idx: usize) -> &Transition {
        &self.transitions[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.transitions
            .binary_search_by(|t| t.id.0.as_str().cmp(id))
            .ok()
    }

    pub fn is_var(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v == name)
    }

    pub fn is_const(&self, name: &str) -> bool {
        self.consts.iter().any(|v| v == name)
    }

    /// Indices of transitions leaving `loc`, in id order.
    pub fn outgoing(&self, loc: &str) -> impl Iterator<Item = usize> + '_ {
        let loc = loc.to_string();
        (0..self.transitions.len()).filter(move |&i| self.transitions[i].source == loc)
    }

    /// Indices of transitions entering `loc`, in id order.
    pub fn incoming(&self, loc: &str) -> impl Iterator<Item = usize> + '_ {
        let loc = loc.to_string();
        (0..self.transitions.len()).filter(move |&i| self.transitions[i].target == loc)
    }

    fn require_var(&self, v: &str) -> Result<(), DcpError> {
        if self.is_var(v) {
            Ok(())
        } else {
            Err(DcpError::UnknownVariable(v.to_string()))
        }
    }

    /// ℛ(v): updates of `v` whose source atom is something other than `v`.
    /// Each entry is (transition index, source atom, offset).
    pub fn resets(&self, v: &str) -> Result<Vec<(usize, Atom, i64)>, DcpError> {
        self.require_var(v)?;
        Ok(self
            .transitions
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                let c = t.update_of(v)?;
                (c.rhs != Atom::Var(v.to_string())).then(|| (i, c.rhs.clone(), c.offset))
            })
            .collect())
    }

    /// ℐ(v): self-updates `v' <= v + c` with `c > 0`, as (transition index, c).
    pub fn increments(&self, v: &str) -> Result<Vec<(usize, i64)>, DcpError> {
        self.require_var(v)?;
        Ok(self
            .transitions
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                let c = t.update_of(v)?;
                (c.rhs == Atom::Var(v.to_string()) && c.offset > 0).then_some((i, c.offset))
            })
            .collect())
    }

    /// Transitions classified as back edges by a depth-first traversal from
    /// the entry that visits outgoing transitions in id order. Self-loops are
    /// always back edges. Returned in id order.
    pub fn back_edges(&self) -> Vec<usize> {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let index: HashMap<&str, usize> = self
            .locations
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let succ: Vec<Vec<usize>> = self
            .locations
            .iter()
            .map(|l| self.outgoing(l).collect())
            .collect();
        let mut color = vec![Color::White; self.locations.len()];
        let mut back = Vec::new();
        let start = index[self.entry.as_str()];
        // Explicit stack of (location, position in its successor list).
        let mut stack = vec![(start, 0usize)];
        color[start] = Color::Gray;
        while let Some(&mut (loc, ref mut next)) = stack.last_mut() {
            if let Some(&t) = succ[loc].get(*next) {
                *next += 1;
                let tgt = index[self.transitions[t].target.as_str()];
                match color[tgt] {
                    Color::Gray => back.push(t),
                    Color::White => {
                        color[tgt] = Color::Gray;
                        stack.push((tgt, 0));
                    }
                    Color::Black => {}
                }
            } else {
                color[loc] = Color::Black;
                stack.pop();
            }
        }
        back.sort_unstable();
        back
    }

    /// 𝒟(l): variables constrained on every incoming transition of `l`.
    /// Empty at the entry.
    pub fn defined_at(&self, loc: &str) -> BTreeSet<String> {
        if loc == self.entry {
            return BTreeSet::new();
        }
        self.vars
            .iter()
            .filter(|v| self.incoming(loc).all(|t| self.transitions[t].defines(v)))
            .cloned()
            .collect()
    }

    /// Variables live at each location (classical backward fixpoint: a
    /// transition uses its guard and right-hand-side variables and kills the
    /// variables it constrains).
    pub fn liveness(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut live: BTreeMap<String, BTreeSet<String>> = self
            .locations
            .iter()
            .map(|l| (l.clone(), BTreeSet::new()))
            .collect();
        loop {
            let mut changed = false;
            for t in &self.transitions {
                let mut add: BTreeSet<String> = t.uses().into_iter().map(str::to_string).collect();
                if let Some(after) = live.get(&t.target) {
                    add.extend(after.iter().filter(|v| !t.defines(v)).cloned());
                }
                let here = live.entry(t.source.clone()).or_default();
                for v in add {
                    changed |= here.insert(v);
                }
            }
            if !changed {
                return live;
            }
        }
    }

    fn well_definedness_violations(&self) -> Vec<Violation> {
        let live = self.liveness();
        let mut out = Vec::new();
        for loc in &self.locations {
            let defined = self.defined_at(loc);
            for v in &live[loc] {
                if defined.contains(v) {
                    continue;
                }
                let via = self
                    .outgoing(loc)
                    .map(|i| &self.transitions[i])
                    .find(|t| {
                        t.uses().contains(v.as_str())
                            || (!t.defines(v) && live[&t.target].contains(v))
                    })
                    .map(|t| t.id.clone())
                    .expect("a live variable is read through some outgoing transition");
                out.push(Violation::NotWellDefined {
                    location: loc.clone(),
                    var: v.clone(),
                    via,
                });
            }
        }
        out
    }

    /// Copy of the program with every variable in `removed` erased: its
    /// declaration, the guards on it and every constraint mentioning it.
    pub fn without_vars(&self, removed: &BTreeSet<String>) -> Dcp {
        let mentions = |c: &Constraint| {
            removed.contains(&c.lhs) || c.rhs.as_var().is_some_and(|v| removed.contains(v))
        };
        Dcp {
            consts: self.consts.clone(),
            vars: self
                .vars
                .iter()
                .filter(|v| !removed.contains(*v))
                .cloned()
                .collect(),
            locations: self.locations.clone(),
            entry: self.entry.clone(),
            exit: self.exit.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|t| Transition {
                    id: t.id.clone(),
                    source: t.source.clone(),
                    target: t.target.clone(),
                    guard: t.guard.difference(removed).cloned().collect(),
                    updates: t.updates.iter().filter(|c| !mentions(c)).cloned().collect(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Dcp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dcp")?;
        writeln!(f, "consts: {}", self.consts.join(", "))?;
        writeln!(f, "vars: {}", self.vars.join(", "))?;
        writeln!(f, "entry: {}", self.entry)?;
        writeln!(f, "exit: {}", self.exit)?;
        for t in &self.transitions {
            write!(f, "trans {}: {} -> {}", t.id, t.source, t.target)?;
            if !t.guard.is_empty() {
                let g: Vec<&str> = t.guard.iter().map(String::as_str).collect();
                write!(f, " guard({})", g.join(", "))?;
            }
            write!(f, " {{")?;
            for c in &t.updates {
                write!(f, " {c};")?;
            }
            writeln!(f, " }}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Text format

#[derive(Default)]
struct Spans {
    header: Pos,
    trans: HashMap<TransId, Pos>,
    duplicate_trans: HashMap<TransId, Pos>,
    name: HashMap<(TransId, String), Pos>,
    constraint: HashMap<(TransId, String), Pos>,
    decl: HashMap<String, Pos>,
}

impl Spans {
    fn locate(&self, v: &Violation) -> Pos {
        let trans_pos = |t: &TransId| self.trans.get(t).copied().unwrap_or(self.header);
        match v {
            Violation::DuplicateTransition(t) => self
                .duplicate_trans
                .get(t)
                .copied()
                .unwrap_or_else(|| trans_pos(t)),
            Violation::NameClash(n) => self.decl.get(n).copied().unwrap_or(self.header),
            Violation::UnknownName { trans, name } | Violation::NotAVariable { trans, name } => {
                self.name
                    .get(&(trans.clone(), name.clone()))
                    .copied()
                    .unwrap_or_else(|| trans_pos(trans))
            }
            Violation::NonDeterministic { trans, var } => self
                .constraint
                .get(&(trans.clone(), var.clone()))
                .copied()
                .unwrap_or_else(|| trans_pos(trans)),
            Violation::UnknownLocation { trans, .. }
            | Violation::EntryHasIncoming(trans)
            | Violation::ExitHasOutgoing(trans)
            | Violation::NotWellDefined { via: trans, .. } => trans_pos(trans),
            Violation::EntryIsExit => self.header,
        }
    }
}

/// Parses the DCP text format and validates the result.
pub fn parse_dcp(text: &str) -> Result<Dcp, ParseError> {
    let mut c = Cursor::new(text)?;
    let mut spans = Spans::default();
    let parts = parse_parts(&mut c, &mut spans)?;
    let (dcp, violations) = Dcp::assemble(parts);
    if violations.is_empty() {
        return Ok(dcp);
    }
    let mut diagnostics: Vec<Diagnostic> = violations
        .iter()
        .map(|v| Diagnostic::new(spans.locate(v), v.to_string()))
        .collect();
    diagnostics.sort_by_key(|d| (d.line, d.col));
    Err(ParseError { diagnostics })
}

fn parse_name_list(c: &mut Cursor<'_>, spans: &mut Spans) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    let starts_section = |c: &Cursor<'_>| {
        matches!(c.peek(), Tok::Ident(_)) && matches!(c.peek_at(1), Tok::Punct(":"))
    };
    if c.at_eof() || starts_section(c) || c.is_keyword("trans") {
        return Ok(out);
    }
    loop {
        let (name, pos) = c.expect_name()?;
        spans.decl.entry(name.clone()).or_insert(pos);
        out.push(name);
        if !c.eat_punct(",") {
            return Ok(out);
        }
    }
}

fn parse_parts(c: &mut Cursor<'_>, spans: &mut Spans) -> Result<DcpParts, ParseError> {
    spans.header = c.expect_keyword("dcp")?;
    let mut parts = DcpParts::default();
    let mut entry = None;
    let mut exit = None;
    while !c.is_keyword("trans") && !c.at_eof() {
        let (section, pos) = c.expect_ident()?;
        c.expect_punct(":")?;
        match section.as_str() {
            "consts" => parts.consts = parse_name_list(c, spans)?,
            "vars" => parts.vars = parse_name_list(c, spans)?,
            "locations" => parts.locations = parse_name_list(c, spans)?,
            "entry" => entry = Some(c.expect_ident()?.0),
            "exit" => exit = Some(c.expect_ident()?.0),
            other => {
                return Err(ParseError::single(
                    pos,
                    format!("unknown section `{other}`"),
                ));
            }
        }
    }
    parts.entry = entry.ok_or_else(|| ParseError::single(c.pos(), "missing `entry:` section"))?;
    parts.exit = exit.ok_or_else(|| ParseError::single(c.pos(), "missing `exit:` section"))?;
    let consts: BTreeSet<String> = parts.consts.iter().cloned().collect();
    while !c.at_eof() {
        parts.transitions.push(parse_transition(c, spans, &consts)?);
    }
    Ok(parts)
}

fn parse_transition(
    c: &mut Cursor<'_>,
    spans: &mut Spans,
    consts: &BTreeSet<String>,
) -> Result<Transition, ParseError> {
    c.expect_keyword("trans")?;
    let (id, pos) = c.expect_ident()?;
    let id = TransId(id);
    if spans.trans.contains_key(&id) {
        spans.duplicate_trans.insert(id.clone(), pos);
    } else {
        spans.trans.insert(id.clone(), pos);
    }
    c.expect_punct(":")?;
    let (source, _) = c.expect_ident()?;
    c.expect_punct("->")?;
    let (target, _) = c.expect_ident()?;
    let mut guard = BTreeSet::new();
    if c.is_keyword("guard") {
        c.bump();
        c.expect_punct("(")?;
        loop {
            let (g, gpos) = c.expect_name()?;
            spans.name.entry((id.clone(), g.clone())).or_insert(gpos);
            guard.insert(g);
            if !c.eat_punct(",") {
                break;
            }
        }
        c.expect_punct(")")?;
    }
    c.expect_punct("{")?;
    let mut updates = Vec::new();
    while !c.eat_punct("}") {
        let (lhs, lpos) = c.expect_name()?;
        spans.name.entry((id.clone(), lhs.clone())).or_insert(lpos);
        spans.constraint.insert((id.clone(), lhs.clone()), lpos);
        c.expect_punct("'")?;
        c.expect_punct("<=")?;
        let rpos = c.pos();
        let rhs = match c.peek() {
            Tok::Int(_) | Tok::Punct("-") => Atom::Int(c.expect_i64()?.0),
            _ => {
                let (name, _) = c.expect_name()?;
                spans.name.entry((id.clone(), name.clone())).or_insert(rpos);
                if consts.contains(&name) {
                    Atom::Const(name)
                } else {
                    Atom::Var(name)
                }
            }
        };
        let offset = if c.eat_punct("+") {
            c.expect_i64()?.0
        } else if c.is_punct("-") {
            c.bump();
            let (v, p) = c.expect_i64()?;
            v.checked_neg()
                .ok_or_else(|| ParseError::single(p, "offset out of range"))?
        } else {
            0
        };
        c.expect_punct(";")?;
        updates.push(Constraint { lhs, rhs, offset });
    }
    Ok(Transition {
        id,
        source,
        target,
        guard,
        updates,
    })
}

impl std::str::FromStr for Dcp {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_dcp(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_A: &str = "
dcp
consts: n
vars: i, j
entry: lb
exit: le
trans t0: lb -> l1 { i' <= n; j' <= 0; }
trans t1: l1 -> l1 guard(i) { i' <= i - 1; j' <= j + 1; }
trans t2: l1 -> l1 guard(j) { i' <= i; j' <= j - 1; }
";

    #[test]
    fn parses_example_a() {
        let d = parse_dcp(EXAMPLE_A).unwrap();
        assert_eq!(d.locations().len(), 3);
        assert_eq!(d.transitions().len(), 3);
        assert_eq!(d.vars(), ["i", "j"]);
        assert_eq!(d.consts(), ["n"]);
        assert_eq!(d.transition(1).update_of("j").unwrap().offset, 1);
    }

    #[test]
    fn print_parse_round_trip() {
        let d = parse_dcp(EXAMPLE_A).unwrap();
        let again = parse_dcp(&d.to_string()).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn determinism_violation_is_positioned() {
        let src = "dcp\nconsts:\nvars: x, y, z\nentry: a\nexit: b\n\
                   trans t: a -> b { x' <= y + 1; x' <= z; }\n";
        let err = parse_dcp(src).unwrap_err();
        let d = &err.diagnostics[0];
        assert!(d.message.contains("not deterministic"), "{d}");
        assert_eq!(d.line, 6);
        assert!(d.message.contains("`x`"));
    }

    #[test]
    fn guard_on_undefined_variable_is_rejected() {
        let src = "dcp\nvars: v\nentry: a\nexit: c\n\
                   trans t0: a -> b { }\n\
                   trans t1: b -> c guard(v) { v' <= v - 1; }\n";
        let err = parse_dcp(src).unwrap_err();
        let at_b = err
            .diagnostics
            .iter()
            .find(|d| d.message.contains("`v` is live at `b`"))
            .expect("violation at b");
        assert!(at_b.message.contains("t1"));
        assert_eq!(at_b.line, 6);
    }

    #[test]
    fn entry_and_exit_degree() {
        let src = "dcp\nvars: v\nentry: a\nexit: b\n\
                   trans t0: a -> b { v' <= 0; }\ntrans t1: b -> a { v' <= 0; }\n";
        let msgs: Vec<String> = parse_dcp(src)
            .unwrap_err()
            .diagnostics
            .into_iter()
            .map(|d| d.message)
            .collect();
        assert!(msgs.iter().any(|m| m.contains("enters the entry")));
        assert!(msgs.iter().any(|m| m.contains("leaves the exit")));
    }

    #[test]
    fn syntax_errors() {
        assert!(parse_dcp("dcp vars: x entry: a exit: b trans t: a -> b { x' = 1; }").is_err());
        assert!(parse_dcp("vars: x").is_err());
        let dup = "dcp\nvars: x\nentry: a\nexit: b\ntrans t: a -> b { }\ntrans t: a -> b { }\n";
        let err = parse_dcp(dup).unwrap_err();
        assert!(err.diagnostics[0].message.contains("duplicate"));
        assert_eq!(err.diagnostics[0].line, 6);
    }

    #[test]
    fn unknown_location_with_explicit_list() {
        let src = "dcp\nvars: x\nlocations: a, b\nentry: a\nexit: b\ntrans t: a -> c { }\n";
        let err = parse_dcp(src).unwrap_err();
        assert!(err.diagnostics[0].message.contains("unknown location `c`"));
    }

    #[test]
    fn resets_and_increments() {
        let d = parse_dcp(EXAMPLE_A).unwrap();
        assert_eq!(
            d.resets("i").unwrap(),
            vec![(0, Atom::Const("n".into()), 0)]
        );
        assert_eq!(d.resets("j").unwrap(), vec![(0, Atom::Int(0), 0)]);
        assert_eq!(d.increments("j").unwrap(), vec![(1, 1)]);
        assert!(d.increments("i").unwrap().is_empty());
        assert_eq!(d.resets("q"), Err(DcpError::UnknownVariable("q".into())));
    }

    #[test]
    fn back_edges_of_self_loops_and_chains() {
        let d = parse_dcp(EXAMPLE_A).unwrap();
        assert_eq!(d.back_edges(), vec![1, 2]);
        let chain = "dcp\nvars: x\nentry: lb\nexit: le\n\
                     trans a: lb -> l1 { x' <= 1; }\ntrans b: l1 -> le { x' <= x; }\n";
        assert!(parse_dcp(chain).unwrap().back_edges().is_empty());
    }

    #[test]
    fn pruning_drops_mentions() {
        let d = parse_dcp(EXAMPLE_A).unwrap();
        let removed: BTreeSet<String> = ["j".to_string()].into();
        let p = d.without_vars(&removed);
        assert_eq!(p.vars(), ["i"]);
        assert!(p.transitions().iter().all(|t| t.update_of("j").is_none()));
        assert!(p.transition(2).guard.is_empty());
    }

    #[test]
    fn parenthesized_variable_names() {
        let src = "dcp\nconsts: l\nvars: (l-i)\nentry: a\nexit: c\n\
                   trans t0: a -> b { (l-i)' <= l; }\n\
                   trans t1: b -> b guard((l - i)) { (l-i)' <= (l-i) - 1; }\n\
                   trans t2: b -> c { }\n";
        let d = parse_dcp(src).unwrap();
        assert_eq!(d.vars(), ["(l-i)"]);
        assert!(d.transition(1).guard.contains("(l-i)"));
        assert_eq!(parse_dcp(&d.to_string()).unwrap(), d);
    }
}
