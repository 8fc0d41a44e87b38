//! Termination of twn-loops via closed forms: the loop guard instantiated
//! with the closed form yields poly-exponential expressions whose eventual
//! signs are decided by their leading non-zero coefficients, so eventual
//! satisfaction of the guard becomes an existential formula handed to the
//! SMT facade. Invalidity of that formula is equivalent to termination.

use num_traits::{Signed, Zero};

use crate::ir::{Formula, State};
use crate::smt::{SatResult, SmtCtx};
use crate::twn_bounds::monotonicity_threshold;

use super::closed_form::{closed_form, ClosedForm};
use super::npe::Npe;
use super::{tnn_of_twn, ChainGuard, TwnLoop};

/// Outcome of the termination check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TerminationVerdict {
    Terminating,
    /// A state from which the loop provably never exits.
    NonTerminating(State),
    Unknown,
}

/// The formula satisfied by exactly those variable values for which the
/// expression is positive for all large `n`: some addend has a positive
/// coefficient while all lexicographically larger addends vanish.
pub fn eventual_sign_formula(npe: &Npe) -> Formula {
    let (npe, _) = npe.integerize();
    let addends: Vec<_> = npe.addends().collect();
    let mut disjuncts = Vec::new();
    for j in (0..addends.len()).rev() {
        let mut parts = vec![Formula::atom_positive(addends[j].1.clone())];
        for above in addends.iter().skip(j + 1) {
            parts.push(Formula::eq(above.1.clone(), crate::ir::Polynomial::zero()));
        }
        disjuncts.push(Formula::and(parts));
    }
    Formula::or(disjuncts)
}

/// Lift the eventual-sign transformation through the guard's boolean
/// structure: each atom's truth value stabilizes, so conjunction and
/// disjunction of the per-atom formulas characterize eventual satisfaction
/// of the whole guard.
fn eventually_satisfied(guard: &Formula, cf: &ClosedForm) -> Formula {
    guard.map_atoms(&|atom| {
        let npe = Npe::subst_into_poly(atom.poly(), cf.map());
        eventual_sign_formula(&npe)
    })
}

/// Decide termination of a twn-loop. Loops that are not already
/// non-negative are chained with themselves (with the full guard, which
/// preserves the termination behavior and makes witnesses transfer).
pub fn check_termination(l: &TwnLoop, smt: &SmtCtx) -> TerminationVerdict {
    let tnn = if l.is_tnn() {
        l.clone()
    } else {
        tnn_of_twn(l, ChainGuard::Full)
    };
    let cf = closed_form(&tnn);
    let phi = Formula::and(vec![
        tnn.psi.clone(),
        eventually_satisfied(&tnn.phi, &cf),
    ]);
    match smt.check_sat(&phi) {
        SatResult::Unsat => TerminationVerdict::Terminating,
        SatResult::Unknown => TerminationVerdict::Unknown,
        SatResult::Sat(model) => {
            let mut entry = State::new();
            for v in &tnn.vars {
                entry.insert(*v, model.get(v).cloned().unwrap_or_else(|| 0.into()));
            }
            // Evaluate the closed form past the point where every guard
            // atom has stabilized; from there the guard stays true forever.
            let mut n_star = cf.n0;
            for atom in tnn.phi.atoms() {
                let npe = Npe::subst_into_poly(atom.poly(), cf.map());
                n_star = n_star.max(stability_threshold_concrete(&npe, &entry));
            }
            TerminationVerdict::NonTerminating(cf.state_at(&entry, n_star))
        }
    }
}

/// A bound on the stabilization point of a single poly-exponential sequence
/// with concrete coefficients: beyond the returned index the sign of the
/// expression equals the sign of its leading non-zero coefficient.
pub fn stability_threshold_concrete(npe: &Npe, state: &State) -> u64 {
    let (npe, _) = npe.integerize();
    let concrete: Vec<((u64, u64), num_bigint::BigInt)> = npe
        .addends()
        .map(|(k, p)| {
            let v = p.eval(state);
            debug_assert!(v.is_integer());
            (*k, v.to_integer())
        })
        .filter(|(_, c)| !c.is_zero())
        .collect();
    if concrete.len() <= 1 {
        // Constant sign for all n >= 1 (n^a vanishes at n = 0).
        return 1;
    }
    let mt1 = |hi: (u64, u64), lo: (u64, u64)| -> u64 {
        monotonicity_threshold(1, hi, lo).expect("keys are sorted strictly")
    };
    // Same shape as the stabilization-threshold theorem, specialized to
    // constant coefficients: C covers the index gymnastics, 2*max|c| the
    // coefficient mass of the non-leading addends.
    let mut c_max = 1u64;
    for j in 1..concrete.len() {
        let (kj, _) = concrete[j];
        let (kj1, _) = concrete[j - 1];
        let m_j = if kj.0 == kj1.0 {
            0
        } else {
            mt1(kj, (kj1.0, kj1.1 + 1))
        };
        let n_j = if j == 1 {
            1
        } else {
            let mt_prime = monotonicity_threshold(j as u64 - 1, concrete[j - 1].0, concrete[j - 2].0)
                .expect("sorted");
            let mt_low = (0..j.saturating_sub(2))
                .map(|i| mt1(concrete[j - 2].0, concrete[i].0))
                .max()
                .unwrap_or(0);
            mt_prime.max(mt_low)
        };
        c_max = c_max.max(m_j).max(n_j);
    }
    let coeff_mass: num_bigint::BigInt = concrete[..concrete.len() - 1]
        .iter()
        .map(|(_, c)| c.abs())
        .fold(num_bigint::BigInt::from(0), |a, b| a.max(b));
    let mass: u64 = num_traits::ToPrimitive::to_u64(&(coeff_mass * 2)).unwrap_or(u64::MAX);
    c_max.max(mass)
}
