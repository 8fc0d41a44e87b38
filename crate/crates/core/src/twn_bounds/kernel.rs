//! Invariant-aware over-approximation of poly-exponential expressions:
//! monomial addends with provable signs are moved to lexicographically
//! larger (positive monomials) or smaller (non-positive monomials) `(b, a)`
//! targets, which can cancel or drop high-degree monomials before the
//! polynomial join is taken. Every move must keep the kernel eventually
//! non-positive, checked by handing the eventual-sign formula to the
//! solver.

use std::collections::BTreeMap;

use crate::ir::{Formula, Polynomial};
use crate::smt::{Entailment, SmtCtx};
use crate::twn::{eventual_sign_formula, Npe, NpeKey};

use super::mt::monotonicity_threshold;

/// A selected over-approximation of an integerized NPE. `lambda` holds the
/// monomial addends in ascending `(b, a)` order; `delta` and `gamma` map
/// addend indices to their replacement targets (`gamma` targets are `(0, 0)`
/// and stand for dropping the addend, since `n^0 * 0^n` vanishes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelSpec {
    pub lambda: Vec<(Polynomial, u64, u64)>,
    pub delta: BTreeMap<usize, NpeKey>,
    pub gamma: BTreeMap<usize, NpeKey>,
    pub psi_prime: Formula,
}

impl KernelSpec {
    fn untouched(npe: &Npe, psi_prime: &Formula) -> KernelSpec {
        let mut lambda = Vec::new();
        for ((b, a), poly) in npe.addends() {
            for mono in poly.monomials() {
                lambda.push((mono, *a, *b));
            }
        }
        KernelSpec {
            lambda,
            delta: BTreeMap::new(),
            gamma: BTreeMap::new(),
            psi_prime: psi_prime.clone(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.delta.is_empty() && self.gamma.is_empty()
    }

    /// The over-approximating expression: moved addends contribute at their
    /// target keys (a zero base contributes nothing), the rest stay put.
    pub fn kernel_npe(&self) -> Npe {
        let mut out = Npe::zero();
        for (idx, (poly, a, b)) in self.lambda.iter().enumerate() {
            let key = self
                .delta
                .get(&idx)
                .or_else(|| self.gamma.get(&idx))
                .copied()
                .unwrap_or((*b, *a));
            if key.0 == 0 {
                continue;
            }
            out.insert(key, poly.clone());
        }
        out
    }

    /// The index from which the over-approximation dominates the original
    /// expression: the largest 1-monotonicity threshold over all
    /// replacements.
    pub fn kernel_d(&self) -> u64 {
        let mut d = 0;
        for (idx, target) in &self.delta {
            let (_, a, b) = &self.lambda[*idx];
            d = d.max(
                monotonicity_threshold(1, *target, (*b, *a))
                    .expect("delta targets grow lexicographically"),
            );
        }
        for (idx, target) in &self.gamma {
            let (_, a, b) = &self.lambda[*idx];
            d = d.max(
                monotonicity_threshold(1, (*b, *a), *target)
                    .expect("gamma targets shrink lexicographically"),
            );
        }
        d
    }
}

/// Greedy kernel selection, highest monomial degree first. A provably
/// positive addend cancels against a matching negated addend at a larger
/// `(b, a)`; a provably non-positive addend is dropped. A move is kept only
/// while the kernel's eventual non-positivity remains provable.
#[allow(clippy::needless_range_loop)] // indices key the delta/gamma maps
pub fn select_kernel(npe: &Npe, psi_prime: &Formula, smt: &SmtCtx) -> KernelSpec {
    let mut spec = KernelSpec::untouched(npe, psi_prime);
    let n = spec.lambda.len();
    let mut consumed = vec![false; n];

    let mut degrees: Vec<u32> = spec.lambda.iter().map(|(p, _, _)| p.total_degree()).collect();
    degrees.sort_unstable();
    degrees.dedup();
    degrees.reverse();

    for degree in degrees {
        // Cancellation phase before drops, so cancel partners survive.
        for idx in 0..n {
            if consumed[idx] || spec.lambda[idx].0.total_degree() != degree {
                continue;
            }
            let (poly, a, b) = spec.lambda[idx].clone();
            if !proven_positive(smt, psi_prime, &poly) {
                continue;
            }
            let negated = poly.neg();
            let partner = (0..n).find(|&j| {
                !consumed[j]
                    && j != idx
                    && spec.lambda[j].0 == negated
                    && (spec.lambda[j].2, spec.lambda[j].1) > (b, a)
            });
            if let Some(j) = partner {
                let target = (spec.lambda[j].2, spec.lambda[j].1);
                spec.delta.insert(idx, target);
                consumed[idx] = true;
                consumed[j] = true;
                if !eventually_non_positive(smt, psi_prime, &spec) {
                    spec.delta.remove(&idx);
                    consumed[idx] = false;
                    consumed[j] = false;
                }
            }
        }
        // Drop phase.
        for idx in 0..n {
            if consumed[idx] || spec.lambda[idx].0.total_degree() != degree {
                continue;
            }
            let (poly, _, _) = spec.lambda[idx].clone();
            if !proven_non_positive(smt, psi_prime, &poly) {
                continue;
            }
            spec.gamma.insert(idx, (0, 0));
            consumed[idx] = true;
            if !eventually_non_positive(smt, psi_prime, &spec) {
                spec.gamma.remove(&idx);
                consumed[idx] = false;
            }
        }
    }
    spec
}

fn proven_positive(smt: &SmtCtx, psi_prime: &Formula, p: &Polynomial) -> bool {
    smt.entails(psi_prime, &Formula::atom_positive(p.clone())) == Entailment::Proven
}

fn proven_non_positive(smt: &SmtCtx, psi_prime: &Formula, p: &Polynomial) -> bool {
    smt.entails(psi_prime, &Formula::le(p.clone(), Polynomial::zero())) == Entailment::Proven
}

/// The footnote check: a modified kernel must provably be non-positive for
/// all large `n` on every state satisfying the context, i.e. the
/// conjunction with its eventual-sign formula must be unsatisfiable.
fn eventually_non_positive(smt: &SmtCtx, psi_prime: &Formula, spec: &KernelSpec) -> bool {
    let kernel = spec.kernel_npe();
    let query = Formula::and(vec![psi_prime.clone(), eventual_sign_formula(&kernel)]);
    smt.check_sat(&query) == crate::smt::SatResult::Unsat
}

/// Monomial-wise maximum of absolute coefficients over a set of
/// polynomials; the join of the empty set is 0.
pub fn join_polys(ps: &[Polynomial]) -> Polynomial {
    let mut coeffs: BTreeMap<crate::ir::Monomial, num_rational::BigRational> = BTreeMap::new();
    for p in ps {
        for (m, c) in p.terms() {
            let abs = num_traits::Signed::abs(c);
            match coeffs.entry(m.clone()) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(abs);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    if abs > *e.get() {
                        *e.get_mut() = abs;
                    }
                }
            }
        }
    }
    let mut out = Polynomial::zero();
    for (m, c) in coeffs {
        out = out.add(&Polynomial::monomial(m, c));
    }
    out
}
