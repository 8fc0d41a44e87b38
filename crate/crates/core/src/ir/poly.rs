//! Exact multivariate polynomial arithmetic over arbitrary-precision
//! rationals. Program guards and updates carry integer coefficients; the
//! closed-form machinery needs rationals, so the coefficient type is
//! `BigRational` throughout with an integrality check where it matters.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::VarId;

/// An exponent vector: variable index to positive power.
///
/// The map never stores zero exponents, so equal monomials compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub BTreeMap<VarId, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial(BTreeMap::from([(v, 1)]))
    }

    pub fn var_pow(v: VarId, e: u32) -> Self {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial(BTreeMap::from([(v, e)]))
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.0.clone();
        for (v, e) in &other.0 {
            *out.entry(*v).or_insert(0) += e;
        }
        Monomial(out)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.keys().copied()
    }
}

/// A polynomial in canonical form: a finite map from monomials to non-zero
/// coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::from_int(1)
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Polynomial { terms }
    }

    pub fn from_int(c: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(c)))
    }

    pub fn from_bigint(c: BigInt) -> Self {
        Self::constant(BigRational::from_integer(c))
    }

    pub fn var(v: VarId) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(v), BigRational::one());
        Polynomial { terms }
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Polynomial { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// The coefficient of a monomial (zero if absent).
    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// The constant term.
    pub fn constant_term(&self) -> BigRational {
        self.coeff(&Monomial::one())
    }

    /// `Some(c)` when the polynomial is a constant (including zero).
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    /// `Some(v)` when the polynomial is exactly one variable.
    pub fn as_var(&self) -> Option<VarId> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if c.is_one() && m.0.len() == 1 {
            let (v, e) = m.0.iter().next().unwrap();
            if *e == 1 {
                return Some(*v);
            }
        }
        None
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }

    /// Degree in a single variable.
    pub fn degree_in(&self, v: VarId) -> u32 {
        self.terms
            .keys()
            .map(|m| m.0.get(&v).copied().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.total_degree() <= 1
    }

    pub fn has_integer_coeffs(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        let mut seen = std::collections::BTreeSet::new();
        for m in self.terms.keys() {
            seen.extend(m.vars());
        }
        seen.into_iter()
    }

    fn insert(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.insert(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Simultaneous substitution of variables by polynomials. Variables
    /// absent from the map are left untouched.
    pub fn substitute(&self, map: &BTreeMap<VarId, Polynomial>) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(c.clone());
            for (v, e) in &m.0 {
                match map.get(v) {
                    Some(p) => term = term.mul(&p.pow(*e)),
                    None => term = term.mul(&Polynomial::var(*v).pow(*e)),
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Evaluate under an integer assignment; variables must all be assigned.
    pub fn eval(&self, state: &BTreeMap<VarId, BigInt>) -> BigRational {
        let mut out = BigRational::zero();
        for (m, c) in &self.terms {
            let mut val = c.clone();
            for (v, e) in &m.0 {
                let x = state
                    .get(v)
                    .unwrap_or_else(|| panic!("unassigned variable {v} in polynomial evaluation"));
                let xr = BigRational::from_integer(x.clone());
                for _ in 0..*e {
                    val *= &xr;
                }
            }
            out += val;
        }
        out
    }

    /// Evaluate to an integer; panics if the value is not integral.
    pub fn eval_int(&self, state: &BTreeMap<VarId, BigInt>) -> BigInt {
        let v = self.eval(state);
        assert!(v.is_integer(), "polynomial evaluated to non-integer {v}");
        v.to_integer()
    }

    /// Least common multiple of all coefficient denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        let mut lcm = BigInt::one();
        for c in self.terms.values() {
            lcm = lcm.lcm(c.denom());
        }
        lcm
    }

    /// Split into single-monomial polynomials.
    pub fn monomials(&self) -> Vec<Polynomial> {
        self.terms
            .iter()
            .map(|(m, c)| Polynomial::monomial(m.clone(), c.clone()))
            .collect()
    }

    /// Monomial-wise absolute coefficients, the building block of the
    /// polynomial join used for bound over-approximation.
    pub fn abs_coeffs(&self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.abs())).collect(),
        }
    }

    /// Render with a variable name resolver.
    pub fn display<'a>(&'a self, names: &'a dyn Fn(VarId) -> String) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, names }
    }
}

pub struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    names: &'a dyn Fn(VarId) -> String,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        // Highest total degree first, then monomial order.
        let mut terms: Vec<_> = self.poly.terms.iter().collect();
        terms.sort_by(|(m1, _), (m2, _)| {
            m2.total_degree().cmp(&m1.total_degree()).then(m1.cmp(m2))
        });
        for (i, (m, c)) in terms.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let coeff_is_one = abs.is_one();
            if m.is_one() {
                write_rat(f, &abs)?;
            } else {
                if !coeff_is_one {
                    write_rat(f, &abs)?;
                    write!(f, "*")?;
                }
                let mut first = true;
                for (v, e) in &m.0 {
                    if !first {
                        write!(f, "*")?;
                    }
                    first = false;
                    write!(f, "{}", (self.names)(*v))?;
                    if *e > 1 {
                        write!(f, "^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn write_rat(f: &mut fmt::Formatter<'_>, r: &BigRational) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}
