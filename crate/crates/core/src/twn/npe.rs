//! Normalized poly-exponential expressions: finite sums of
//! `p * n^a * b^n` with rational polynomial coefficients `p`, natural
//! exponents `a` and natural bases `b >= 1`. Closed forms of tnn-loop
//! updates live in this space, and so do the guard instantiations the
//! bound machinery dissects.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::ir::{Polynomial, State, VarId};

/// Key of an addend: `(b, a)` for `p * n^a * b^n`. The natural tuple order
/// is exactly the lexicographic order on `(b, a)` that drives dominance
/// arguments.
pub type NpeKey = (u64, u64);

/// A normalized poly-exponential expression in canonical form: at most one
/// addend per `(b, a)` pair, no zero polynomials, all bases >= 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Npe {
    addends: BTreeMap<NpeKey, Polynomial>,
}

impl Npe {
    pub fn zero() -> Npe {
        Npe::default()
    }

    /// A polynomial in the program variables, constant in `n`.
    pub fn from_poly(p: Polynomial) -> Npe {
        let mut out = Npe::zero();
        out.insert((1, 0), p);
        out
    }

    pub fn single(p: Polynomial, a: u64, b: u64) -> Npe {
        assert!(b >= 1, "npe bases are at least 1");
        let mut out = Npe::zero();
        out.insert((b, a), p);
        out
    }

    pub fn insert(&mut self, key: NpeKey, p: Polynomial) {
        assert!(key.0 >= 1, "npe bases are at least 1");
        if p.is_zero() {
            return;
        }
        match self.addends.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(p);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&p);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.addends.is_empty()
    }

    /// Addends in ascending `(b, a)` order.
    pub fn addends(&self) -> impl Iterator<Item = (&NpeKey, &Polynomial)> {
        self.addends.iter()
    }

    pub fn len(&self) -> usize {
        self.addends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addends.is_empty()
    }

    pub fn add(&self, other: &Npe) -> Npe {
        let mut out = self.clone();
        for (k, p) in &other.addends {
            out.insert(*k, p.clone());
        }
        out
    }

    pub fn sub(&self, other: &Npe) -> Npe {
        let mut out = self.clone();
        for (k, p) in &other.addends {
            out.insert(*k, p.neg());
        }
        out
    }

    pub fn mul(&self, other: &Npe) -> Npe {
        let mut out = Npe::zero();
        for ((b1, a1), p1) in &self.addends {
            for ((b2, a2), p2) in &other.addends {
                out.insert((b1 * b2, a1 + a2), p1.mul(p2));
            }
        }
        out
    }

    pub fn scale_poly(&self, p: &Polynomial) -> Npe {
        let mut out = Npe::zero();
        for (k, q) in &self.addends {
            out.insert(*k, q.mul(p));
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Npe {
        let mut out = Npe::zero();
        for (k, q) in &self.addends {
            out.insert(*k, q.scale(c));
        }
        out
    }

    /// Substitute every variable of `poly` by its NPE image; the map must
    /// cover all variables of `poly`.
    pub fn subst_into_poly(poly: &Polynomial, map: &BTreeMap<VarId, Npe>) -> Npe {
        let mut out = Npe::zero();
        for (m, c) in poly.terms() {
            let mut term = Npe::from_poly(Polynomial::constant(c.clone()));
            for (v, e) in &m.0 {
                let image = map
                    .get(v)
                    .unwrap_or_else(|| panic!("no closed form for variable {v}"));
                for _ in 0..*e {
                    term = term.mul(image);
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// The expression at `n - 1`, an NPE valid wherever the original was
    /// valid at `n - 1`.
    pub fn shift_minus_one(&self) -> Npe {
        let mut out = Npe::zero();
        for ((b, a), p) in &self.addends {
            // p * (n-1)^a * b^(n-1)
            let inv_b = BigRational::new(BigInt::one(), BigInt::from(*b));
            for k in 0..=*a {
                let mut coeff = BigRational::from_integer(BigInt::from(binomial(*a, k)));
                if (*a - k) % 2 == 1 {
                    coeff = -coeff;
                }
                out.insert((*b, k), p.scale(&(coeff * &inv_b)));
            }
        }
        out
    }

    /// Scale by the least common multiple of all coefficient denominators;
    /// the result has integer coefficients and the same sign behavior in
    /// `n`. Returns the scaled expression and the factor used.
    pub fn integerize(&self) -> (Npe, BigInt) {
        let mut lcm = BigInt::one();
        for p in self.addends.values() {
            lcm = lcm.lcm(&p.denominator_lcm());
        }
        if lcm.is_one() {
            return (self.clone(), lcm);
        }
        let factor = BigRational::from_integer(lcm.clone());
        let mut out = Npe::zero();
        for (k, p) in &self.addends {
            out.insert(*k, p.scale(&factor));
        }
        (out, lcm)
    }

    /// Evaluate at a program state and an iteration count.
    pub fn eval(&self, state: &State, n: u64) -> BigRational {
        let mut out = BigRational::zero();
        for ((b, a), p) in &self.addends {
            let scalar = BigInt::from(n).pow(*a as u32) * BigInt::from(*b).pow(n as u32);
            out += p.eval(state) * BigRational::from_integer(scalar);
        }
        out
    }

    /// The polynomial obtained by fixing `n` to a concrete value.
    pub fn at_fixed_n(&self, n: u64) -> Polynomial {
        let mut out = Polynomial::zero();
        for ((b, a), p) in &self.addends {
            let scalar = BigInt::from(n).pow(*a as u32) * BigInt::from(*b).pow(n as u32);
            out = out.add(&p.scale(&BigRational::from_integer(scalar)));
        }
        out
    }

    pub fn has_integer_coeffs(&self) -> bool {
        self.addends.values().all(|p| p.has_integer_coeffs())
    }

    pub fn display<'a>(&'a self, names: &'a dyn Fn(VarId) -> String) -> NpeDisplay<'a> {
        NpeDisplay { npe: self, names }
    }
}

/// Solve `Q(n) = sum_{m=0}^{n-1} c^(n-1-m) * P(m)` for `c >= 1` by
/// undetermined coefficients; the returned NPE satisfies the recurrence
/// `Q(n+1) = c*Q(n) + P(n)` with `Q(0) = 0` exactly, for all `n >= 0`.
/// The zero-coefficient case is a plain index shift and is handled by the
/// closed-form driver instead.
pub fn npe_sum_recurrence(c: u64, p: &Npe) -> Npe {
    assert!(c >= 1, "the c = 0 recurrence degenerates to a shift");
    let mut out = Npe::zero();
    for ((b, a), poly) in &p.addends {
        if *b != c {
            // Q_addend = poly * (u(n) * b^n + v * c^n) with u of degree a:
            // b*u(n+1) - c*u(n) = n^a, v = -u(0).
            let u = solve_shift_recurrence(*b, c, *a);
            for (j, uj) in u.iter().enumerate() {
                out.insert((*b, j as u64), poly.scale(uj));
            }
            let v = -u[0].clone();
            out.insert((c, 0), poly.scale(&v));
        } else {
            // Q_addend = poly * w(n) * b^n with w of degree a+1, w(0) = 0:
            // w(n+1) - w(n) = n^a / b.
            let w = solve_difference(*b, *a);
            for (j, wj) in w.iter().enumerate().skip(1) {
                out.insert((*b, j as u64), poly.scale(wj));
            }
        }
    }
    out
}

/// Coefficients `u_0..u_a` of the unique degree-`a` polynomial with
/// `b*u(n+1) - c*u(n) = n^a`, for `b != c`.
fn solve_shift_recurrence(b: u64, c: u64, a: u64) -> Vec<BigRational> {
    let a = a as usize;
    let b_r = BigRational::from_integer(BigInt::from(b));
    let c_r = BigRational::from_integer(BigInt::from(c));
    let d = &b_r - &c_r;
    let mut u = vec![BigRational::zero(); a + 1];
    for j in (0..=a).rev() {
        // (b - c) u_j = [j == a] - b * sum_{i > j} binom(i, j) u_i
        let mut rhs = if j == a { BigRational::one() } else { BigRational::zero() };
        for (i, u_i) in u.iter().enumerate().take(a + 1).skip(j + 1) {
            rhs -= &b_r * BigRational::from_integer(BigInt::from(binomial(i as u64, j as u64))) * u_i;
        }
        u[j] = rhs / &d;
    }
    u
}

/// Coefficients `w_0..w_{a+1}` (with `w_0 = 0`) of the unique polynomial
/// with `w(n+1) - w(n) = n^a / b`.
fn solve_difference(b: u64, a: u64) -> Vec<BigRational> {
    let a = a as usize;
    let b_r = BigRational::from_integer(BigInt::from(b));
    let mut w = vec![BigRational::zero(); a + 2];
    for k in (0..=a).rev() {
        // sum_{j > k} binom(j, k) w_j = [k == a] / b
        let mut rhs = if k == a {
            BigRational::one() / &b_r
        } else {
            BigRational::zero()
        };
        for (j, w_j) in w.iter().enumerate().take(a + 2).skip(k + 2) {
            rhs -= BigRational::from_integer(BigInt::from(binomial(j as u64, k as u64))) * w_j;
        }
        // binom(k+1, k) = k+1
        w[k + 1] = rhs / BigRational::from_integer(BigInt::from(k as i64 + 1));
    }
    w
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u64 = 1;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

pub struct NpeDisplay<'a> {
    npe: &'a Npe,
    names: &'a dyn Fn(VarId) -> String,
}

impl fmt::Display for NpeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.npe.is_zero() {
            return write!(f, "0");
        }
        // Dominant addend first.
        for (i, ((b, a), p)) in self.npe.addends.iter().rev().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})", p.display(self.names))?;
            if *a > 0 {
                write!(f, "*n^{a}")?;
            }
            if *b != 1 {
                write!(f, "*{b}^n")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x2() -> VarId {
        VarId(1)
    }
    fn x3() -> VarId {
        VarId(2)
    }

    fn check_recurrence(c: u64, p: &Npe, upto: u64) {
        // Oracle: Q(n) must equal the literal sum for all n <= upto, on a
        // few integer states.
        let q = npe_sum_recurrence(c, p);
        let states: Vec<State> = vec![
            State::from([(x2(), BigInt::from(3)), (x3(), BigInt::from(-2))]),
            State::from([(x2(), BigInt::from(-7)), (x3(), BigInt::from(5))]),
            State::from([(x2(), BigInt::from(0)), (x3(), BigInt::from(1))]),
        ];
        for st in &states {
            for n in 0..=upto {
                let mut expected = BigRational::zero();
                for m in 0..n {
                    let factor = BigInt::from(c).pow((n - 1 - m) as u32);
                    expected += p.eval(st, m) * BigRational::from_integer(factor);
                }
                assert_eq!(q.eval(st, n), expected, "c={c}, n={n}");
            }
        }
    }

    #[test]
    fn geometric_sum_with_constant_addend() {
        // c=9, P = x2 - x3^3: Q = ((x2 - x3^3)/8)*9^n - (x2 - x3^3)/8.
        let p = Npe::from_poly(Polynomial::var(x2()).sub(&Polynomial::var(x3()).pow(3)));
        check_recurrence(9, &p, 12);
        let q = npe_sum_recurrence(9, &p);
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn counting_sum() {
        // c=1, P=1 gives n.
        let q = npe_sum_recurrence(1, &Npe::from_poly(Polynomial::one()));
        let mut expected = Npe::zero();
        expected.insert((1, 1), Polynomial::one());
        assert_eq!(q, expected);
    }

    #[test]
    fn matching_base_gains_polynomial_degree() {
        // c=2, P=2^n gives (1/2)*n*2^n.
        let p = Npe::single(Polynomial::one(), 0, 2);
        let q = npe_sum_recurrence(2, &p);
        let mut expected = Npe::zero();
        expected.insert(
            (2, 1),
            Polynomial::constant(BigRational::new(BigInt::one(), BigInt::from(2))),
        );
        assert_eq!(q, expected);
        check_recurrence(2, &p, 12);
    }

    #[test]
    fn mixed_addends() {
        let mut p = Npe::from_poly(Polynomial::var(x2()));
        p.insert((3, 1), Polynomial::var(x3()));
        p.insert((2, 0), Polynomial::one());
        check_recurrence(3, &p, 10);
        check_recurrence(2, &p, 10);
        check_recurrence(1, &p, 10);
    }

    #[test]
    fn shift_is_exact() {
        let mut p = Npe::from_poly(Polynomial::var(x2()));
        p.insert((2, 2), Polynomial::var(x3()));
        let shifted = p.shift_minus_one();
        let st = State::from([(x2(), BigInt::from(4)), (x3(), BigInt::from(-3))]);
        for n in 1..=10u64 {
            assert_eq!(shifted.eval(&st, n), p.eval(&st, n - 1));
        }
    }

    #[test]
    fn integerize_scales_by_denominator_lcm() {
        // (1/2)*x*2^n + (1/3)*n  ->  3x*2^n + 2n with lcm 6.
        let mut p = Npe::zero();
        p.insert(
            (2, 0),
            Polynomial::var(x2()).scale(&BigRational::new(BigInt::one(), BigInt::from(2))),
        );
        p.insert(
            (1, 1),
            Polynomial::constant(BigRational::new(BigInt::one(), BigInt::from(3))),
        );
        let (scaled, lcm) = p.integerize();
        assert_eq!(lcm, BigInt::from(6));
        let mut expected = Npe::zero();
        expected.insert((2, 0), Polynomial::var(x2()).scale(&BigRational::from_integer(3.into())));
        expected.insert((1, 1), Polynomial::from_int(2));
        assert_eq!(scaled, expected);

        let (same, one) = expected.integerize();
        assert_eq!(one, BigInt::one());
        assert_eq!(same, expected);
    }
}
