//! Concrete linear-arithmetic transition systems and their text format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::linexpr::LinExpr;
use crate::dcp::TransId;
use crate::syntax::{Cursor, Diagnostic, ParseError, Pos, Tok};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
            Rel::Eq => "==",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardAtom {
    pub lhs: LinExpr,
    pub rel: Rel,
    pub rhs: LinExpr,
}

impl GuardAtom {
    pub fn holds(&self, env: &BTreeMap<String, i64>) -> bool {
        let (a, b) = (self.lhs.eval(env), self.rhs.eval(env));
        match self.rel {
            Rel::Lt => a < b,
            Rel::Le => a <= b,
            Rel::Gt => a > b,
            Rel::Ge => a >= b,
            Rel::Eq => a == b,
        }
    }

    /// The expression that this atom forces to be strictly positive:
    /// `a - b` for `a > b`, `a - b + 1` for `a >= b`, and the mirrored
    /// forms for `<` and `<=`. Equalities yield nothing.
    pub fn positive_part(&self) -> Option<LinExpr> {
        let (big, small, shift) = match self.rel {
            Rel::Gt => (&self.lhs, &self.rhs, 0),
            Rel::Ge => (&self.lhs, &self.rhs, 1),
            Rel::Lt => (&self.rhs, &self.lhs, 0),
            Rel::Le => (&self.rhs, &self.lhs, 1),
            Rel::Eq => return None,
        };
        big.checked_sub(small)?.checked_add_const(shift)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.lhs.names().chain(self.rhs.names())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Update {
    Expr(LinExpr),
    /// `x := ?`, an arbitrary value.
    Havoc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteTransition {
    pub id: TransId,
    pub source: String,
    pub target: String,
    pub guard: Vec<GuardAtom>,
    pub updates: BTreeMap<String, Update>,
}

impl ConcreteTransition {
    fn is_identity(&self, var: &str) -> bool {
        matches!(self.updates.get(var), Some(Update::Expr(e)) if e.as_single_name() == Some(var))
    }

    /// Variables whose value actually changes (identity updates excluded).
    pub fn writes(&self) -> BTreeSet<&str> {
        self.updates
            .keys()
            .filter(|v| !self.is_identity(v))
            .map(String::as_str)
            .collect()
    }

    /// Names read by the guard or by a non-identity update.
    pub fn reads(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.guard.iter().flat_map(GuardAtom::names).collect();
        for (v, u) in &self.updates {
            if let Update::Expr(e) = u {
                if !self.is_identity(v) {
                    out.extend(e.names());
                }
            }
        }
        out
    }

    /// `Some(c)` with `c != 0` when the transition performs `var := var + c`.
    pub fn counter_offset(&self, var: &str) -> Option<i64> {
        match self.updates.get(var)? {
            Update::Expr(e) => e.offset_from(&LinExpr::var(var)).filter(|&c| c != 0),
            Update::Havoc => None,
        }
    }

    pub fn guard_holds(&self, env: &BTreeMap<String, i64>) -> bool {
        self.guard.iter().all(|a| a.holds(env))
    }

    /// The post-state. Havoc updates draw from `havoc`. Values that leave
    /// the `i64` range make the step fail.
    pub fn step(
        &self,
        env: &BTreeMap<String, i64>,
        mut havoc: impl FnMut(&str) -> i64,
    ) -> Option<BTreeMap<String, i64>> {
        let mut out = env.clone();
        for (v, u) in &self.updates {
            let val = match u {
                Update::Expr(e) => i64::try_from(e.eval(env)).ok()?,
                Update::Havoc => havoc(v),
            };
            out.insert(v.clone(), val);
        }
        Some(out)
    }
}

/// A validated concrete program. Transitions are sorted by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteProgram {
    pub params: Vec<String>,
    pub vars: Vec<String>,
    pub locations: Vec<String>,
    pub entry: String,
    pub exit: String,
    pub transitions: Vec<ConcreteTransition>,
}

impl ConcreteProgram {
    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|p| p == name)
    }

    pub fn location_index(&self, loc: &str) -> usize {
        self.locations
            .iter()
            .position(|l| l == loc)
            .expect("location of a validated program")
    }

    /// Variables (not parameters) live on entry to each location.
    pub fn liveness(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut live: BTreeMap<String, BTreeSet<String>> = self
            .locations
            .iter()
            .map(|l| (l.clone(), BTreeSet::new()))
            .collect();
        let mut changed = true;
        while changed {
            changed = false;
            for t in &self.transitions {
                let writes = t.writes();
                let mut add: BTreeSet<String> = t
                    .reads()
                    .into_iter()
                    .filter(|n| !self.is_param(n))
                    .map(str::to_string)
                    .collect();
                add.extend(
                    live[&t.target]
                        .iter()
                        .filter(|v| !writes.contains(v.as_str()))
                        .cloned(),
                );
                let at = live.get_mut(&t.source).expect("known location");
                for v in add {
                    changed |= at.insert(v);
                }
            }
        }
        live
    }
}

/// Parses the program format:
///
/// ```text
/// prog
/// params: n
/// vars: i
/// entry: a
/// exit: z
/// trans t0: a -> b { i := n; }
/// trans t1: b -> b when i > 0 && i <= n { i := i - 1; }
/// trans t2: b -> z when i <= 0 { }
/// ```
pub fn parse_program(text: &str) -> Result<ConcreteProgram, ParseError> {
    let mut c = Cursor::new(text)?;
    let mut diags = Vec::new();
    let header = c.expect_keyword("prog")?;
    let mut params = Vec::new();
    let mut vars = Vec::new();
    let mut locations = Vec::new();
    let mut entry = None;
    let mut exit = None;
    let mut decl_pos: BTreeMap<String, Pos> = BTreeMap::new();
    while !c.is_keyword("trans") && !c.at_eof() {
        let (section, pos) = c.expect_ident()?;
        c.expect_punct(":")?;
        match section.as_str() {
            "params" => params = name_list(&mut c, &mut decl_pos)?,
            "vars" => vars = name_list(&mut c, &mut decl_pos)?,
            "locations" => locations = name_list(&mut c, &mut decl_pos)?,
            "entry" => entry = Some(c.expect_ident()?),
            "exit" => exit = Some(c.expect_ident()?),
            other => {
                return Err(ParseError::single(
                    pos,
                    format!("unknown section `{other}`"),
                ))
            }
        }
    }
    let (entry, entry_pos) =
        entry.ok_or_else(|| ParseError::single(c.pos(), "missing `entry:` section"))?;
    let (exit, _) = exit.ok_or_else(|| ParseError::single(c.pos(), "missing `exit:` section"))?;

    let mut seen = BTreeSet::new();
    for name in params.iter().chain(&vars).chain(&locations) {
        if !seen.insert(name.as_str()) {
            diags.push(Diagnostic::new(
                decl_pos[name],
                format!("name `{name}` declared twice"),
            ));
        }
    }
    if entry == exit {
        diags.push(Diagnostic::new(entry_pos, "entry and exit must differ"));
    }

    let names = Names {
        params: params.iter().cloned().collect(),
        vars: vars.iter().cloned().collect(),
    };
    let mut transitions: Vec<(ConcreteTransition, Pos)> = Vec::new();
    while !c.at_eof() {
        let (t, pos) = parse_transition(&mut c, &names, &mut diags)?;
        if transitions.iter().any(|(u, _)| u.id == t.id) {
            diags.push(Diagnostic::new(
                pos,
                format!("duplicate transition `{}`", t.id),
            ));
        }
        transitions.push((t, pos));
    }

    let explicit = !locations.is_empty();
    if !explicit {
        let mut push = |l: &String| {
            if !locations.contains(l) {
                locations.push(l.clone());
            }
        };
        push(&entry);
        for (t, _) in &transitions {
            push(&t.source);
            push(&t.target);
        }
        push(&exit);
    }
    for (t, pos) in &transitions {
        for l in [&t.source, &t.target] {
            if !locations.contains(l) {
                diags.push(Diagnostic::new(*pos, format!("unknown location `{l}`")));
            }
            if names.params.contains(l) || names.vars.contains(l) {
                diags.push(Diagnostic::new(
                    *pos,
                    format!("location `{l}` clashes with a variable"),
                ));
            }
        }
        if t.target == entry {
            diags.push(Diagnostic::new(
                *pos,
                format!("entry location `{entry}` has an incoming transition"),
            ));
        }
        if t.source == exit {
            diags.push(Diagnostic::new(
                *pos,
                format!("exit location `{exit}` has an outgoing transition"),
            ));
        }
    }
    for l in [&entry, &exit] {
        if explicit && !locations.contains(l) {
            diags.push(Diagnostic::new(header, format!("unknown location `{l}`")));
        }
    }
    if !diags.is_empty() {
        diags.sort_by_key(|d| (d.line, d.col));
        return Err(ParseError { diagnostics: diags });
    }
    let mut transitions: Vec<ConcreteTransition> =
        transitions.into_iter().map(|(t, _)| t).collect();
    transitions.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(ConcreteProgram {
        params,
        vars,
        locations,
        entry,
        exit,
        transitions,
    })
}

impl std::str::FromStr for ConcreteProgram {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}

struct Names {
    params: BTreeSet<String>,
    vars: BTreeSet<String>,
}

fn name_list(
    c: &mut Cursor<'_>,
    decl: &mut BTreeMap<String, Pos>,
) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    let starts_section = |c: &Cursor<'_>| {
        matches!(c.peek(), Tok::Ident(_)) && matches!(c.peek_at(1), Tok::Punct(":"))
    };
    if c.at_eof() || starts_section(c) || c.is_keyword("trans") {
        return Ok(out);
    }
    loop {
        let (name, pos) = c.expect_ident()?;
        decl.entry(name.clone()).or_insert(pos);
        out.push(name);
        if !c.eat_punct(",") {
            return Ok(out);
        }
    }
}

fn parse_transition(
    c: &mut Cursor<'_>,
    names: &Names,
    diags: &mut Vec<Diagnostic>,
) -> Result<(ConcreteTransition, Pos), ParseError> {
    c.expect_keyword("trans")?;
    let (id, pos) = c.expect_ident()?;
    c.expect_punct(":")?;
    let (source, _) = c.expect_ident()?;
    c.expect_punct("->")?;
    let (target, _) = c.expect_ident()?;
    let mut guard = Vec::new();
    if c.is_keyword("when") {
        c.bump();
        loop {
            let lhs = linear(c, names, diags)?;
            let rel = match c.peek() {
                Tok::Punct("<") => Rel::Lt,
                Tok::Punct("<=") => Rel::Le,
                Tok::Punct(">") => Rel::Gt,
                Tok::Punct(">=") => Rel::Ge,
                Tok::Punct("==") | Tok::Punct("=") => Rel::Eq,
                _ => return Err(c.unexpected("a relation")),
            };
            c.bump();
            let rhs = linear(c, names, diags)?;
            guard.push(GuardAtom { lhs, rel, rhs });
            if !c.eat_punct("&&") {
                break;
            }
        }
    }
    c.expect_punct("{")?;
    let mut updates = BTreeMap::new();
    while !c.eat_punct("}") {
        let (var, vpos) = c.expect_ident()?;
        c.expect_punct(":=")?;
        let update = if c.eat_punct("?") {
            Update::Havoc
        } else {
            Update::Expr(linear(c, names, diags)?)
        };
        c.expect_punct(";")?;
        if names.params.contains(&var) {
            diags.push(Diagnostic::new(
                vpos,
                format!("parameter `{var}` cannot be assigned"),
            ));
        } else if !names.vars.contains(&var) {
            diags.push(Diagnostic::new(vpos, format!("unknown variable `{var}`")));
        }
        if updates.insert(var.clone(), update).is_some() {
            diags.push(Diagnostic::new(
                vpos,
                format!("`{var}` is updated twice in `{id}`"),
            ));
        }
    }
    let t = ConcreteTransition {
        id: TransId(id),
        source,
        target,
        guard,
        updates,
    };
    Ok((t, pos))
}

/// `['-'] term (('+' | '-') term)*`.
fn linear(
    c: &mut Cursor<'_>,
    names: &Names,
    diags: &mut Vec<Diagnostic>,
) -> Result<LinExpr, ParseError> {
    let pos = c.pos();
    let negate_first = c.eat_punct("-");
    let mut acc = product(c, names, diags)?;
    if negate_first {
        acc = acc.checked_scale(-1).ok_or_else(|| overflow(pos))?;
    }
    loop {
        let sign = if c.eat_punct("+") {
            1
        } else if c.eat_punct("-") {
            -1
        } else {
            return Ok(acc);
        };
        let tpos = c.pos();
        let t = product(c, names, diags)?
            .checked_scale(sign)
            .ok_or_else(|| overflow(tpos))?;
        acc = acc.checked_add(&t).ok_or_else(|| overflow(tpos))?;
    }
}

fn product(
    c: &mut Cursor<'_>,
    names: &Names,
    diags: &mut Vec<Diagnostic>,
) -> Result<LinExpr, ParseError> {
    let mut acc = factor(c, names, diags)?;
    while c.is_punct("*") {
        c.bump();
        let pos = c.pos();
        let rhs = factor(c, names, diags)?;
        acc = if rhs.is_constant() {
            acc.checked_scale(rhs.constant_part())
        } else if acc.is_constant() {
            rhs.checked_scale(acc.constant_part())
        } else {
            return Err(ParseError::single(pos, "non-linear product"));
        }
        .ok_or_else(|| overflow(pos))?;
    }
    Ok(acc)
}

fn factor(
    c: &mut Cursor<'_>,
    names: &Names,
    diags: &mut Vec<Diagnostic>,
) -> Result<LinExpr, ParseError> {
    let pos = c.pos();
    match c.peek().clone() {
        Tok::Int(digits) => {
            c.bump();
            digits
                .parse::<i64>()
                .map(LinExpr::constant)
                .map_err(|_| ParseError::single(pos, format!("integer `{digits}` out of range")))
        }
        Tok::Ident(name) => {
            c.bump();
            if !names.params.contains(&name) && !names.vars.contains(&name) {
                diags.push(Diagnostic::new(pos, format!("unknown name `{name}`")));
            }
            Ok(LinExpr::var(name))
        }
        Tok::Punct("(") => {
            c.bump();
            let e = linear(c, names, diags)?;
            c.expect_punct(")")?;
            Ok(e)
        }
        Tok::Punct("-") => {
            c.bump();
            factor(c, names, diags)?
                .checked_scale(-1)
                .ok_or_else(|| overflow(pos))
        }
        _ => Err(c.unexpected("an expression")),
    }
}

fn overflow(pos: Pos) -> ParseError {
    ParseError::single(pos, "integer overflow in linear expression")
}
