use std::collections::BTreeMap;
use std::fmt;

/// `constant + Σ coeff·var` over integer coefficients. Zero coefficients
/// are never stored, so structural equality is semantic equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinExpr {
    constant: i64,
    coeffs: BTreeMap<String, i64>,
}

impl LinExpr {
    pub fn constant(c: i64) -> Self {
        LinExpr {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::term(name, 1)
    }

    pub fn term(name: impl Into<String>, coeff: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        if coeff != 0 {
            coeffs.insert(name.into(), coeff);
        }
        LinExpr {
            constant: 0,
            coeffs,
        }
    }

    pub fn constant_part(&self) -> i64 {
        self.constant
    }

    pub fn coeffs(&self) -> &BTreeMap<String, i64> {
        &self.coeffs
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.coeffs.get(name).copied().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.coeffs.keys().map(String::as_str)
    }

    /// The expression with its constant part set to zero.
    pub fn without_constant(&self) -> LinExpr {
        LinExpr {
            constant: 0,
            coeffs: self.coeffs.clone(),
        }
    }

    /// `Some(name)` when the expression is exactly `1·name`.
    pub fn as_single_name(&self) -> Option<&str> {
        match (self.constant, self.coeffs.len()) {
            (0, 1) => self
                .coeffs
                .iter()
                .next()
                .filter(|(_, &k)| k == 1)
                .map(|(n, _)| n.as_str()),
            _ => None,
        }
    }

    pub fn checked_add(&self, other: &LinExpr) -> Option<LinExpr> {
        let mut out = self.clone();
        out.constant = out.constant.checked_add(other.constant)?;
        for (n, &k) in &other.coeffs {
            let sum = out.coeff(n).checked_add(k)?;
            if sum == 0 {
                out.coeffs.remove(n);
            } else {
                out.coeffs.insert(n.clone(), sum);
            }
        }
        Some(out)
    }

    pub fn checked_scale(&self, factor: i64) -> Option<LinExpr> {
        if factor == 0 {
            return Some(LinExpr::default());
        }
        let mut coeffs = BTreeMap::new();
        for (n, &k) in &self.coeffs {
            coeffs.insert(n.clone(), k.checked_mul(factor)?);
        }
        Some(LinExpr {
            constant: self.constant.checked_mul(factor)?,
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &LinExpr) -> Option<LinExpr> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    pub fn checked_add_const(&self, c: i64) -> Option<LinExpr> {
        self.checked_add(&LinExpr::constant(c))
    }

    /// `Some(c)` when `self = other + c`.
    pub fn offset_from(&self, other: &LinExpr) -> Option<i64> {
        if self.coeffs != other.coeffs {
            return None;
        }
        self.constant.checked_sub(other.constant)
    }

    /// Replaces every name by `subst(name)`, or keeps it when that is
    /// `None`. Fails only on arithmetic overflow.
    pub fn substitute<'a>(&self, subst: impl Fn(&str) -> Option<&'a LinExpr>) -> Option<LinExpr> {
        let mut out = LinExpr::constant(self.constant);
        for (n, &k) in &self.coeffs {
            let part = match subst(n) {
                Some(e) => e.checked_scale(k)?,
                None => LinExpr::term(n.clone(), k),
            };
            out = out.checked_add(&part)?;
        }
        Some(out)
    }

    /// Value under `env`; names missing from `env` read as zero.
    pub fn eval(&self, env: &BTreeMap<String, i64>) -> i128 {
        self.coeffs
            .iter()
            .fold(i128::from(self.constant), |acc, (n, &k)| {
                acc + i128::from(k) * i128::from(env.get(n).copied().unwrap_or(0))
            })
    }
}

impl fmt::Display for LinExpr {
    /// Canonical norm name: a bare name for `1·x`, otherwise positive terms
    /// then negative terms (each alphabetical) then the constant, in
    /// parentheses, e.g. `(l-i)` or `(i+1)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.as_single_name() {
            return f.write_str(n);
        }
        if self.is_constant() {
            return write!(f, "{}", self.constant);
        }
        let mut out = String::from("(");
        let positives = self.coeffs.iter().filter(|(_, &k)| k > 0);
        let negatives = self.coeffs.iter().filter(|(_, &k)| k < 0);
        for (n, &k) in positives.chain(negatives) {
            if k < 0 {
                out.push('-');
            } else if out.len() > 1 {
                out.push('+');
            }
            if k.unsigned_abs() != 1 {
                out.push_str(&format!("{}*", k.unsigned_abs()));
            }
            out.push_str(n);
        }
        if self.constant > 0 {
            out.push_str(&format!("+{}", self.constant));
        } else if self.constant < 0 {
            out.push_str(&format!("-{}", self.constant.unsigned_abs()));
        }
        out.push(')');
        f.write_str(&out)
    }
}
