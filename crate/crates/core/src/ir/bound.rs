//! The weakly-monotonic bound algebra: expressions over natural constants,
//! omega, program variables, sums, products and `k^(..)`. The representation
//! is a canonical sum of products so that symbolic equality is structural
//! equality; every constructor re-canonicalizes. There is no subtraction and
//! no negative constant, which makes every bound weakly monotonic in every
//! variable by construction.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::{Polynomial, State, VarId};

/// A value in the extended naturals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NatOmega {
    Fin(BigUint),
    Omega,
}

impl NatOmega {
    pub fn zero() -> Self {
        NatOmega::Fin(BigUint::zero())
    }

    pub fn from_u64(v: u64) -> Self {
        NatOmega::Fin(BigUint::from(v))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NatOmega::Fin(v) if v.is_zero())
    }

    pub fn add(&self, other: &NatOmega) -> NatOmega {
        match (self, other) {
            (NatOmega::Fin(a), NatOmega::Fin(b)) => NatOmega::Fin(a + b),
            _ => NatOmega::Omega,
        }
    }

    /// Product with the convention `0 * omega = 0`: the product
    /// over-approximates a real count that is zero.
    pub fn mul(&self, other: &NatOmega) -> NatOmega {
        if self.is_zero() || other.is_zero() {
            return NatOmega::zero();
        }
        match (self, other) {
            (NatOmega::Fin(a), NatOmega::Fin(b)) => NatOmega::Fin(a * b),
            _ => NatOmega::Omega,
        }
    }

    pub fn pow_base(base: u64, exp: &NatOmega) -> NatOmega {
        match exp {
            NatOmega::Omega => match base {
                0 => NatOmega::zero(),
                1 => NatOmega::Fin(BigUint::one()),
                _ => NatOmega::Omega,
            },
            NatOmega::Fin(e) => {
                let e = e.to_u32().unwrap_or(u32::MAX);
                NatOmega::Fin(BigUint::from(base).pow(e))
            }
        }
    }

    pub fn ge(&self, other: &NatOmega) -> bool {
        match (self, other) {
            (NatOmega::Omega, _) => true,
            (NatOmega::Fin(_), NatOmega::Omega) => false,
            (NatOmega::Fin(a), NatOmega::Fin(b)) => a >= b,
        }
    }
}

impl fmt::Display for NatOmega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatOmega::Fin(v) => write!(f, "{v}"),
            NatOmega::Omega => write!(f, "inf"),
        }
    }
}

/// A multiplicative atom of a bound monomial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum BAtom {
    Var(VarId),
    /// `base^exp` for a natural base >= 2 and a non-constant exponent.
    Pow(u64, BoundExpr),
    Omega,
}

type BMonomial = BTreeMap<BAtom, u32>;

/// A bound expression in canonical sum-of-products form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BoundExpr {
    terms: BTreeMap<BMonomial, BigUint>,
}

impl BoundExpr {
    pub fn zero() -> Self {
        BoundExpr::default()
    }

    pub fn constant_big(c: BigUint) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(BMonomial::new(), c);
        }
        BoundExpr { terms }
    }

    pub fn constant(c: u64) -> Self {
        Self::constant_big(BigUint::from(c))
    }

    pub fn var(v: VarId) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(BMonomial::from([(BAtom::Var(v), 1)]), BigUint::one());
        BoundExpr { terms }
    }

    pub fn omega() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(BMonomial::from([(BAtom::Omega, 1)]), BigUint::one());
        BoundExpr { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_omega(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .keys()
                .next()
                .map(|m| m.len() == 1 && m.contains_key(&BAtom::Omega))
                .unwrap_or(false)
    }

    pub fn as_constant(&self) -> Option<BigUint> {
        if self.terms.is_empty() {
            return Some(BigUint::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&BMonomial::new()) {
                return Some(c.clone());
            }
        }
        None
    }

    fn insert_term(terms: &mut BTreeMap<BMonomial, BigUint>, mono: BMonomial, coeff: BigUint) {
        if coeff.is_zero() {
            return;
        }
        let mono = normalize_monomial(mono);
        let coeff = if mono.contains_key(&BAtom::Omega) {
            // c * (0 or omega) is independent of c >= 1.
            BigUint::one()
        } else {
            coeff
        };
        *terms.entry(mono).or_insert_with(BigUint::zero) += coeff;
    }

    fn canonical(mut terms: BTreeMap<BMonomial, BigUint>) -> BoundExpr {
        // Re-collapse duplicate omega coefficients produced by merging.
        for (m, c) in terms.iter_mut() {
            if m.contains_key(&BAtom::Omega) && !c.is_zero() {
                *c = BigUint::one();
            }
        }
        // A bare omega term absorbs the whole sum.
        let pure_omega = BMonomial::from([(BAtom::Omega, 1)]);
        if terms.contains_key(&pure_omega) {
            return BoundExpr::omega();
        }
        terms.retain(|_, c| !c.is_zero());
        BoundExpr { terms }
    }

    pub fn add(&self, other: &BoundExpr) -> BoundExpr {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            Self::insert_term(&mut terms, m.clone(), c.clone());
        }
        Self::canonical(terms)
    }

    pub fn mul(&self, other: &BoundExpr) -> BoundExpr {
        let mut terms = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                for (a, e) in m2 {
                    *m.entry(a.clone()).or_insert(0) += e;
                }
                Self::insert_term(&mut terms, m, c1 * c2);
            }
        }
        Self::canonical(terms)
    }

    /// `base^exp` for a natural base. Constant exponents fold; base 0 and 1
    /// collapse to constants.
    pub fn pow(base: u64, exp: &BoundExpr) -> BoundExpr {
        if exp.is_omega() {
            return match base {
                0 => BoundExpr::zero(),
                1 => BoundExpr::constant(1),
                _ => BoundExpr::omega(),
            };
        }
        if let Some(c) = exp.as_constant() {
            let e = c.to_u32().expect("constant exponent too large");
            return BoundExpr::constant_big(BigUint::from(base).pow(e));
        }
        match base {
            0 => BoundExpr::zero(),
            1 => BoundExpr::constant(1),
            _ => {
                let mut terms = BTreeMap::new();
                terms.insert(
                    BMonomial::from([(BAtom::Pow(base, exp.clone()), 1)]),
                    BigUint::one(),
                );
                BoundExpr { terms }
            }
        }
    }

    pub fn sum(parts: impl IntoIterator<Item = BoundExpr>) -> BoundExpr {
        parts
            .into_iter()
            .fold(BoundExpr::zero(), |acc, p| acc.add(&p))
    }

    /// Convert a polynomial with integer coefficients into the bound formed
    /// by taking absolute values of all coefficients.
    pub fn from_poly_abs(p: &Polynomial) -> BoundExpr {
        let mut out = BoundExpr::zero();
        for (m, c) in p.terms() {
            assert!(c.is_integer(), "bound conversion needs integer coefficients");
            let coeff = c.numer().magnitude().clone();
            let mut factor = BoundExpr::constant_big(coeff);
            for (v, e) in &m.0 {
                for _ in 0..*e {
                    factor = factor.mul(&BoundExpr::var(*v));
                }
            }
            out = out.add(&factor);
        }
        out
    }

    /// Evaluate under non-negative sizes. Omega absorbs sums, products with
    /// non-zero operands and exponentiation; `0 * omega = 0`.
    pub fn eval(&self, sizes: &BTreeMap<VarId, BigUint>) -> NatOmega {
        if self.is_omega() {
            return NatOmega::Omega;
        }
        let mut total = NatOmega::zero();
        for (m, c) in &self.terms {
            let mut val = NatOmega::Fin(c.clone());
            for (a, e) in m {
                let base = match a {
                    BAtom::Var(v) => NatOmega::Fin(
                        sizes
                            .get(v)
                            .unwrap_or_else(|| panic!("no size for variable {v}"))
                            .clone(),
                    ),
                    BAtom::Pow(k, b) => NatOmega::pow_base(*k, &b.eval(sizes)),
                    BAtom::Omega => NatOmega::Omega,
                };
                for _ in 0..*e {
                    val = val.mul(&base);
                }
            }
            total = total.add(&val);
        }
        total
    }

    /// Evaluate under the component-wise absolute values of an integer state.
    pub fn eval_state(&self, state: &State) -> NatOmega {
        let sizes = state
            .iter()
            .map(|(v, x)| (*v, x.magnitude().clone()))
            .collect();
        self.eval(&sizes)
    }

    /// Simultaneous substitution of variables by bounds. Substitution keys
    /// missing from the map leave the variable in place.
    pub fn subst(&self, map: &BTreeMap<VarId, BoundExpr>) -> BoundExpr {
        let mut out = BoundExpr::zero();
        for (m, c) in &self.terms {
            let mut term = BoundExpr::constant_big(c.clone());
            for (a, e) in m {
                let factor = match a {
                    BAtom::Var(v) => map.get(v).cloned().unwrap_or_else(|| BoundExpr::var(*v)),
                    BAtom::Pow(k, b) => BoundExpr::pow(*k, &b.subst(map)),
                    BAtom::Omega => BoundExpr::omega(),
                };
                for _ in 0..*e {
                    term = term.mul(&factor);
                }
            }
            out = out.add(&term);
        }
        out
    }

    pub fn vars(&self) -> std::collections::BTreeSet<VarId> {
        let mut out = std::collections::BTreeSet::new();
        for m in self.terms.keys() {
            for a in m.keys() {
                match a {
                    BAtom::Var(v) => {
                        out.insert(*v);
                    }
                    BAtom::Pow(_, b) => out.extend(b.vars()),
                    BAtom::Omega => {}
                }
            }
        }
        out
    }

    /// Asymptotic class as a function of the common magnitude of all
    /// variables.
    pub fn classify(&self) -> ComplexityClass {
        let mut best = ComplexityClass::Const;
        for m in self.terms.keys() {
            let mut cls = ComplexityClass::Const;
            for (a, e) in m {
                let factor = match a {
                    BAtom::Var(_) => ComplexityClass::Poly(*e),
                    BAtom::Pow(_, b) => match b.classify() {
                        ComplexityClass::Const => ComplexityClass::Const,
                        _ => ComplexityClass::Exp,
                    },
                    BAtom::Omega => ComplexityClass::Infinite,
                };
                cls = cls.mul(&factor);
            }
            best = best.max(cls);
        }
        best
    }

    pub fn display<'a>(&'a self, names: &'a dyn Fn(VarId) -> String) -> BoundDisplay<'a> {
        BoundDisplay { bound: self, names }
    }
}

fn normalize_monomial(mut m: BMonomial) -> BMonomial {
    if m.contains_key(&BAtom::Omega) {
        // With an omega factor only zero-ness of the other factors matters.
        for e in m.values_mut() {
            *e = 1;
        }
    }
    m.retain(|_, e| *e > 0);
    m
}

/// Asymptotic growth classes, totally ordered by growth rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComplexityClass {
    Const,
    Poly(u32),
    Exp,
    Infinite,
}

impl ComplexityClass {
    fn mul(&self, other: &ComplexityClass) -> ComplexityClass {
        use ComplexityClass::*;
        match (self, other) {
            (Infinite, _) | (_, Infinite) => Infinite,
            (Exp, _) | (_, Exp) => Exp,
            (Poly(a), Poly(b)) => Poly(a + b),
            (Poly(a), Const) | (Const, Poly(a)) => Poly(*a),
            (Const, Const) => Const,
        }
    }
}

impl fmt::Display for ComplexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplexityClass::Const => write!(f, "O(1)"),
            ComplexityClass::Poly(1) => write!(f, "O(n)"),
            ComplexityClass::Poly(k) => write!(f, "O(n^{k})"),
            ComplexityClass::Exp => write!(f, "EXP"),
            ComplexityClass::Infinite => write!(f, "INF"),
        }
    }
}

pub struct BoundDisplay<'a> {
    bound: &'a BoundExpr,
    names: &'a dyn Fn(VarId) -> String,
}

impl fmt::Display for BoundDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bound.is_zero() {
            return write!(f, "0");
        }
        let degree = |m: &BMonomial| -> u32 { m.values().sum() };
        let mut terms: Vec<_> = self.bound.terms.iter().collect();
        terms.sort_by(|(m1, _), (m2, _)| degree(m2).cmp(&degree(m1)).then(m1.cmp(m2)));
        for (i, (m, c)) in terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_empty() {
                write!(f, "{c}")?;
                continue;
            }
            let mut first = true;
            if !c.is_one() {
                write!(f, "{c}")?;
                first = false;
            }
            for (a, e) in m.iter() {
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                match a {
                    BAtom::Var(v) => write!(f, "{}", (self.names)(*v))?,
                    BAtom::Pow(k, b) => write!(f, "{k}^({})", b.display(self.names))?,
                    BAtom::Omega => write!(f, "inf")?,
                }
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}
