//! Symbolic bound expressions over integers and symbolic constants.
//!
//! Expressions are kept in a canonical polynomial form: sums of monomials,
//! each monomial an optional integer coefficient followed by atomic factors
//! (symbolic constants or `max`/`min` nodes). The printed form is the
//! canonical spelling used in reports, and `parse` reads it back.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::syntax::{Cursor, ParseError, Tok};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BoundExpr {
    Int(BigInt),
    Sym(String),
    Sum(Vec<BoundExpr>),
    Product(Vec<BoundExpr>),
    Max(Vec<BoundExpr>),
    Min(Vec<BoundExpr>),
    Undefined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Mul,
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("operator applied to an empty argument list")]
    EmptyArgs,
    #[error("no value given for symbolic constant `{0}`")]
    MissingConstant(String),
}

/// Assignment of nonnegative values to symbolic constants.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Valuation(BTreeMap<String, u64>);

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: u64) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: u64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl FromIterator<(String, u64)> for Valuation {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        Valuation(iter.into_iter().collect())
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl BoundExpr {
    pub fn int(v: i64) -> Self {
        BoundExpr::Int(BigInt::from(v))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    pub fn sym(name: impl Into<String>) -> Self {
        BoundExpr::Sym(name.into())
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, BoundExpr::Undefined)
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            BoundExpr::Int(v) => Some(v),
            _ => None,
        }
    }

    /// Normalized sum of `self` and `other`.
    pub fn add(&self, other: &BoundExpr) -> BoundExpr {
        normalize(&BoundExpr::Sum(vec![self.clone(), other.clone()]))
    }

    /// Normalized product of `self` and `other`.
    pub fn mul(&self, other: &BoundExpr) -> BoundExpr {
        normalize(&BoundExpr::Product(vec![self.clone(), other.clone()]))
    }

    /// `max(self, 0)`, simplified to `self` when provably nonnegative.
    pub fn clamp_nonnegative(&self) -> BoundExpr {
        normalize(&BoundExpr::Max(vec![self.clone(), BoundExpr::zero()]))
    }

    /// Conservative check that the expression is `>= 0` under every
    /// valuation (symbolic constants range over the naturals).
    pub fn is_nonnegative(&self) -> bool {
        match self {
            BoundExpr::Int(v) => !v.is_negative(),
            BoundExpr::Sym(_) => true,
            BoundExpr::Sum(xs) | BoundExpr::Product(xs) | BoundExpr::Min(xs) => {
                xs.iter().all(BoundExpr::is_nonnegative)
            }
            BoundExpr::Max(xs) => xs.iter().any(BoundExpr::is_nonnegative),
            BoundExpr::Undefined => false,
        }
    }

    /// Symbolic constants occurring in the expression.
    pub fn symbols(&self) -> Vec<String> {
        fn walk(e: &BoundExpr, out: &mut Vec<String>) {
            match e {
                BoundExpr::Sym(s) => {
                    if !out.contains(s) {
                        out.push(s.clone());
                    }
                }
                BoundExpr::Sum(xs)
                | BoundExpr::Product(xs)
                | BoundExpr::Max(xs)
                | BoundExpr::Min(xs) => xs.iter().for_each(|x| walk(x, out)),
                BoundExpr::Int(_) | BoundExpr::Undefined => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out
    }

    /// Replaces symbolic constants according to `map`, leaving others alone.
    pub fn rename(&self, map: &dyn Fn(&str) -> String) -> BoundExpr {
        let go = |xs: &Vec<BoundExpr>| xs.iter().map(|x| x.rename(map)).collect();
        match self {
            BoundExpr::Sym(s) => BoundExpr::Sym(map(s)),
            BoundExpr::Sum(xs) => BoundExpr::Sum(go(xs)),
            BoundExpr::Product(xs) => BoundExpr::Product(go(xs)),
            BoundExpr::Max(xs) => BoundExpr::Max(go(xs)),
            BoundExpr::Min(xs) => BoundExpr::Min(go(xs)),
            other => other.clone(),
        }
    }
}

impl From<i64> for BoundExpr {
    fn from(v: i64) -> Self {
        BoundExpr::int(v)
    }
}

/// Smart constructor: applies `op` to `args` and normalizes.
pub fn build(op: Op, args: &[BoundExpr]) -> Result<BoundExpr, ExprError> {
    if args.is_empty() {
        return Err(ExprError::EmptyArgs);
    }
    let args = args.to_vec();
    let raw = match op {
        Op::Add => BoundExpr::Sum(args),
        Op::Mul => BoundExpr::Product(args),
        Op::Max => BoundExpr::Max(args),
        Op::Min => BoundExpr::Min(args),
    };
    Ok(normalize(&raw))
}

/// Evaluates `e` under `v`. `Ok(None)` stands for the undefined value.
pub fn evaluate(e: &BoundExpr, v: &Valuation) -> Result<Option<BigInt>, ExprError> {
    let all = |xs: &[BoundExpr]| -> Result<Option<Vec<BigInt>>, ExprError> {
        let mut out = Vec::with_capacity(xs.len());
        let mut undefined = false;
        for x in xs {
            match evaluate(x, v)? {
                Some(val) => out.push(val),
                None => undefined = true,
            }
        }
        Ok(if undefined { None } else { Some(out) })
    };
    Ok(match e {
        BoundExpr::Int(k) => Some(k.clone()),
        BoundExpr::Sym(s) => {
            let val = v
                .get(s)
                .ok_or_else(|| ExprError::MissingConstant(s.clone()))?;
            Some(BigInt::from(val))
        }
        BoundExpr::Sum(xs) => all(xs)?.map(|vals| vals.into_iter().sum()),
        BoundExpr::Product(xs) => all(xs)?.map(|vals| vals.into_iter().product()),
        BoundExpr::Max(xs) => all(xs)?.and_then(|vals| vals.into_iter().max()),
        BoundExpr::Min(xs) => all(xs)?.and_then(|vals| vals.into_iter().min()),
        BoundExpr::Undefined => None,
    })
}

// ---------------------------------------------------------------------------
// Normalization

/// Polynomial over atomic factors, keyed by the printed atoms of each
/// monomial (sorted), so like terms collect.
#[derive(Default)]
struct Poly {
    terms: BTreeMap<Vec<String>, (Vec<BoundExpr>, BigInt)>,
}

impl Poly {
    fn constant(k: BigInt) -> Self {
        let mut p = Poly::default();
        p.push(Vec::new(), k);
        p
    }

    fn atom(a: BoundExpr) -> Self {
        let mut p = Poly::default();
        p.push(vec![a], BigInt::one());
        p
    }

    fn push(&mut self, mut atoms: Vec<BoundExpr>, coeff: BigInt) {
        let mut keyed: Vec<(String, BoundExpr)> =
            atoms.drain(..).map(|a| (a.to_string(), a)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let key: Vec<String> = keyed.iter().map(|(k, _)| k.clone()).collect();
        let atoms: Vec<BoundExpr> = keyed.into_iter().map(|(_, a)| a).collect();
        let slot = self
            .terms
            .entry(key)
            .or_insert_with(|| (atoms, BigInt::zero()));
        slot.1 += coeff;
    }

    fn add_assign(&mut self, other: Poly) {
        for (_, (atoms, c)) in other.terms {
            self.push(atoms, c);
        }
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (a_atoms, a_c) in self.terms.values() {
            for (b_atoms, b_c) in other.terms.values() {
                let mut atoms = a_atoms.clone();
                atoms.extend(b_atoms.iter().cloned());
                out.push(atoms, a_c * b_c);
            }
        }
        out
    }

    fn into_expr(self) -> BoundExpr {
        let mut terms: Vec<(String, BoundExpr)> = self
            .terms
            .into_values()
            .filter(|(_, c)| !c.is_zero())
            .map(|(mut atoms, c)| {
                let e = if atoms.is_empty() {
                    BoundExpr::Int(c)
                } else if c.is_one() {
                    if atoms.len() == 1 {
                        atoms.pop().unwrap()
                    } else {
                        BoundExpr::Product(atoms)
                    }
                } else {
                    let mut fs = vec![BoundExpr::Int(c)];
                    fs.extend(atoms);
                    BoundExpr::Product(fs)
                };
                (e.to_string(), e)
            })
            .collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        match terms.len() {
            0 => BoundExpr::zero(),
            1 => terms.pop().unwrap().1,
            _ => BoundExpr::Sum(terms.into_iter().map(|(_, e)| e).collect()),
        }
    }
}

fn poly_of(e: &BoundExpr) -> Option<Poly> {
    match e {
        BoundExpr::Int(k) => Some(Poly::constant(k.clone())),
        BoundExpr::Sym(_) => Some(Poly::atom(e.clone())),
        BoundExpr::Sum(xs) => {
            let mut acc = Poly::default();
            for x in xs {
                acc.add_assign(poly_of(x)?);
            }
            Some(acc)
        }
        BoundExpr::Product(xs) => {
            let mut acc = Poly::constant(BigInt::one());
            for x in xs {
                acc = acc.mul(&poly_of(x)?);
            }
            Some(acc)
        }
        BoundExpr::Max(xs) | BoundExpr::Min(xs) => {
            let is_max = matches!(e, BoundExpr::Max(_));
            match normalize_lattice(is_max, xs) {
                BoundExpr::Undefined => None,
                n @ (BoundExpr::Max(_) | BoundExpr::Min(_)) => Some(Poly::atom(n)),
                n => poly_of(&n),
            }
        }
        BoundExpr::Undefined => None,
    }
}

fn normalize_lattice(is_max: bool, args: &[BoundExpr]) -> BoundExpr {
    let mut flat = Vec::new();
    for a in args {
        match (normalize(a), is_max) {
            (BoundExpr::Undefined, _) => return BoundExpr::Undefined,
            (BoundExpr::Max(inner), true) | (BoundExpr::Min(inner), false) => flat.extend(inner),
            (n, _) => flat.push(n),
        }
    }
    let mut konst: Option<BigInt> = None;
    let mut others: BTreeMap<String, BoundExpr> = BTreeMap::new();
    for a in flat {
        match a {
            BoundExpr::Int(k) => {
                konst = Some(match konst {
                    None => k,
                    Some(prev) if is_max => prev.max(k),
                    Some(prev) => prev.min(k),
                });
            }
            other => {
                others.insert(other.to_string(), other);
            }
        }
    }
    if let Some(k) = &konst {
        if !k.is_positive() && !others.is_empty() {
            if is_max && others.values().any(BoundExpr::is_nonnegative) {
                konst = None;
            } else if !is_max && others.values().all(BoundExpr::is_nonnegative) {
                return BoundExpr::Int(k.clone());
            }
        }
    }
    if let Some(k) = konst {
        let e = BoundExpr::Int(k);
        others.insert(e.to_string(), e);
    }
    let mut args: Vec<BoundExpr> = others.into_values().collect();
    if args.len() == 1 {
        args.pop().unwrap()
    } else if is_max {
        BoundExpr::Max(args)
    } else {
        BoundExpr::Min(args)
    }
}

/// Brings `e` into canonical form. Evaluation is preserved for every
/// valuation, and `normalize` is idempotent.
pub fn normalize(e: &BoundExpr) -> BoundExpr {
    match poly_of(e) {
        Some(p) => p.into_expr(),
        None => BoundExpr::Undefined,
    }
}

// ---------------------------------------------------------------------------
// Printing and parsing

impl fmt::Display for BoundExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundExpr::Int(k) => write!(f, "{k}"),
            BoundExpr::Sym(s) => f.write_str(s),
            BoundExpr::Undefined => f.write_str("undef"),
            BoundExpr::Sum(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    if matches!(x, BoundExpr::Sum(_)) {
                        write!(f, "({x})")?;
                    } else {
                        write!(f, "{x}")?;
                    }
                }
                Ok(())
            }
            BoundExpr::Product(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    if matches!(x, BoundExpr::Sum(_) | BoundExpr::Product(_)) {
                        write!(f, "({x})")?;
                    } else {
                        write!(f, "{x}")?;
                    }
                }
                Ok(())
            }
            BoundExpr::Max(xs) | BoundExpr::Min(xs) => {
                let name = if matches!(self, BoundExpr::Max(_)) {
                    "max"
                } else {
                    "min"
                };
                write!(f, "{name}(")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses the canonical syntax. The result is the tree as written (a
/// single-element sum or product collapses); call [`normalize`] for the
/// canonical form.
pub fn parse(text: &str) -> Result<BoundExpr, ParseError> {
    let mut c = Cursor::new(text)?;
    let e = parse_sum(&mut c)?;
    if !c.at_eof() {
        return Err(c.unexpected("end of expression"));
    }
    Ok(e)
}

fn parse_sum(c: &mut Cursor<'_>) -> Result<BoundExpr, ParseError> {
    let mut terms = vec![parse_term(c)?];
    while c.eat_punct("+") {
        terms.push(parse_term(c)?);
    }
    Ok(collapse(terms, BoundExpr::Sum))
}

fn parse_term(c: &mut Cursor<'_>) -> Result<BoundExpr, ParseError> {
    let mut factors = vec![parse_factor(c)?];
    while c.eat_punct("*") {
        factors.push(parse_factor(c)?);
    }
    Ok(collapse(factors, BoundExpr::Product))
}

fn collapse(mut xs: Vec<BoundExpr>, wrap: fn(Vec<BoundExpr>) -> BoundExpr) -> BoundExpr {
    if xs.len() == 1 {
        xs.pop().unwrap()
    } else {
        wrap(xs)
    }
}

fn parse_factor(c: &mut Cursor<'_>) -> Result<BoundExpr, ParseError> {
    match c.peek().clone() {
        Tok::Int(_) | Tok::Punct("-") => {
            let pos = c.pos();
            let neg = c.eat_punct("-");
            let (digits, _) = c.expect_int()?;
            let v: BigInt = digits
                .parse()
                .map_err(|_| ParseError::single(pos, "malformed integer"))?;
            Ok(BoundExpr::Int(if neg { -v } else { v }))
        }
        Tok::Punct("(") => {
            c.bump();
            let e = parse_sum(c)?;
            c.expect_punct(")")?;
            Ok(e)
        }
        Tok::Ident(name) => {
            c.bump();
            match name.as_str() {
                "undef" => Ok(BoundExpr::Undefined),
                "max" | "min" if matches!(c.peek(), Tok::Punct("(")) => {
                    c.bump();
                    let mut args = vec![parse_sum(c)?];
                    while c.eat_punct(",") {
                        args.push(parse_sum(c)?);
                    }
                    c.expect_punct(")")?;
                    Ok(if name == "max" {
                        BoundExpr::Max(args)
                    } else {
                        BoundExpr::Min(args)
                    })
                }
                _ => Ok(BoundExpr::Sym(name)),
            }
        }
        _ => Err(c.unexpected("an integer, identifier, `max`, `min`, `undef` or `(`")),
    }
}

impl std::str::FromStr for BoundExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> BoundExpr {
        parse(s).unwrap()
    }

    fn n(s: &str) -> String {
        normalize(&p(s)).to_string()
    }

    #[test]
    fn flattening_and_folding() {
        let e = BoundExpr::Sum(vec![
            BoundExpr::sym("n"),
            BoundExpr::Sum(vec![BoundExpr::sym("n"), BoundExpr::zero()]),
        ]);
        assert_eq!(normalize(&e).to_string(), "2*n");
    }

    #[test]
    fn max_is_a_set() {
        assert_eq!(n("max(max(m1,m2), max(m2,m1))"), "max(m1,m2)");
    }

    #[test]
    fn undefined_absorbs() {
        assert_eq!(n("n * undef"), "undef");
        assert_eq!(n("max(n, undef)"), "undef");
        for op in [Op::Add, Op::Mul, Op::Max, Op::Min] {
            let got = build(op, &[BoundExpr::sym("n"), BoundExpr::Undefined]).unwrap();
            assert!(got.is_undefined());
        }
    }

    #[test]
    fn build_examples() {
        let args = [BoundExpr::sym("n"), 1.into(), (-1).into()];
        assert_eq!(build(Op::Add, &args).unwrap(), BoundExpr::sym("n"));
        assert_eq!(
            build(Op::Max, &[p("n + n")]).unwrap(),
            normalize(&p("n + n"))
        );
        assert_eq!(
            build(Op::Mul, &[1.into(), BoundExpr::sym("n")]).unwrap(),
            BoundExpr::sym("n")
        );
        assert_eq!(build(Op::Add, &[]), Err(ExprError::EmptyArgs));
    }

    #[test]
    fn evaluation() {
        let v = Valuation::new().with("n", 3).with("m1", 5).with("m2", 7);
        let e = p("2*n + max(m1,m2)");
        assert_eq!(evaluate(&e, &v).unwrap(), Some(BigInt::from(13)));
        let sq = Valuation::new().with("n", 4);
        assert_eq!(evaluate(&p("n*n"), &sq).unwrap(), Some(BigInt::from(16)));
        assert_eq!(
            evaluate(&BoundExpr::Undefined, &Valuation::new()).unwrap(),
            None
        );
        assert_eq!(
            evaluate(&p("k"), &v),
            Err(ExprError::MissingConstant("k".into()))
        );
    }

    #[test]
    fn distribution_and_like_terms() {
        assert_eq!(n("(n + 1) * (n + 1)"), "1 + 2*n + n*n");
        assert_eq!(n("n*(2 + m) + m*n"), "2*m*n + 2*n");
        assert_eq!(n("n + -1 + 1"), "n");
        assert_eq!(n("n + -3"), "-3 + n");
    }

    #[test]
    fn max_with_zero() {
        assert_eq!(n("max(n + 2, 0)"), "2 + n");
        assert_eq!(n("max(n + -1, 0)"), "max(-1 + n,0)");
        assert_eq!(n("max(n, 3, 5)"), "max(5,n)");
        assert_eq!(n("min(n, 0)"), "0");
        assert_eq!(n("min(n, -2, 4)"), "-2");
        assert_eq!(n("min(-1 + n, 0)"), "min(-1 + n,0)");
        assert_eq!(n("max(3, 5)"), "5");
    }

    #[test]
    fn round_trip_of_canonical_strings() {
        for s in [
            "2*n + max(m1,m2)",
            "n + n*n",
            "-1 + n",
            "-2*n + 4",
            "undef",
            "3*max(-1 + n,0)*n",
            "min(m,n) + 7",
        ] {
            let e = normalize(&p(s));
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{s}");
        }
    }

    #[test]
    fn parse_errors_are_positioned() {
        let err = parse("n + * 2").unwrap_err();
        assert_eq!(err.diagnostics[0].col, 5);
        assert!(parse("max(n").is_err());
        assert!(parse("n n").is_err());
    }

    #[test]
    fn nonnegativity() {
        assert!(p("n*m + 2").is_nonnegative());
        assert!(!p("n + -1").is_nonnegative());
        assert!(p("max(n + -1, 0)").is_nonnegative());
        assert!(!BoundExpr::Undefined.is_nonnegative());
    }
}
