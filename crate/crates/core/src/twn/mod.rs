//! Triangular weakly non-linear loops: recognition, transition chaining,
//! normalized closed forms and the termination decision procedure.

mod closed_form;
mod npe;
mod termination;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::ir::{
    apply_update_formula, apply_update_poly, Formula, Polynomial, Program, Transition, VarId,
};

pub use closed_form::{closed_form, ClosedForm};
pub use npe::{npe_sum_recurrence, Npe, NpeKey};
pub use termination::{
    check_termination, eventual_sign_formula, stability_threshold_concrete, TerminationVerdict,
};

/// A self-loop in triangular weakly non-linear form: update
/// `eta(x_i) = c_i * x_i + p_i` where `p_i` only mentions variables that
/// come later in the triangular order, together with an update-invariant
/// precondition `psi` and the loop guard `phi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwnLoop {
    /// Variables in triangular order `x_1 .. x_d`.
    pub vars: Vec<VarId>,
    /// Update-invariant precondition.
    pub psi: Formula,
    /// Loop guard.
    pub phi: Formula,
    /// The update map (identity for unmapped variables).
    pub update: BTreeMap<VarId, Polynomial>,
    /// Self-coefficients `c_i`, aligned with `vars`.
    pub coeffs: Vec<BigInt>,
    /// Remainders `p_i`, aligned with `vars`.
    pub remainders: Vec<Polynomial>,
}

impl TwnLoop {
    /// Non-negative loops admit closed forms directly.
    pub fn is_tnn(&self) -> bool {
        self.coeffs.iter().all(|c| !c.is_negative())
    }

    pub fn update_of(&self, v: VarId) -> Polynomial {
        self.update.get(&v).cloned().unwrap_or_else(|| Polynomial::var(v))
    }

    /// The update applied to a formula.
    pub fn apply_update(&self, f: &Formula) -> Formula {
        apply_update_formula(f, &self.update)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("cannot chain an empty sequence")]
    Empty,
    #[error("transitions are not consecutive at position {0}")]
    NotConsecutive(usize),
    #[error("chaining requires transitions without temporary variables")]
    Temporaries,
}

/// Chain a consecutive sequence of transitions into one transition: the
/// guard collects every guard under the updates executed before it, and the
/// update is the composition.
pub fn chain(program: &Program, ts: &[&Transition]) -> Result<Transition, ChainError> {
    if ts.is_empty() {
        return Err(ChainError::Empty);
    }
    for (i, t) in ts.iter().enumerate() {
        if t.has_temp_vars(program) {
            return Err(ChainError::Temporaries);
        }
        if i + 1 < ts.len() && t.tgt != ts[i + 1].src {
            return Err(ChainError::NotConsecutive(i));
        }
    }
    // acc is the composed update of the prefix processed so far.
    let mut acc: BTreeMap<VarId, Polynomial> = ts[0].update.clone();
    let mut guard = ts[0].guard.clone();
    for t in &ts[1..] {
        guard = Formula::and(vec![guard, apply_update_formula(&t.guard, &acc)]);
        let mut next = BTreeMap::new();
        for v in program.pv() {
            let composed = apply_update_poly(&t.update_of(*v), &acc);
            if composed.as_var() != Some(*v) {
                next.insert(*v, composed);
            }
        }
        acc = next;
    }
    let name = ts
        .iter()
        .map(|t| t.name.clone())
        .collect::<Vec<_>>()
        .join("*");
    Ok(Transition {
        id: ts[0].id,
        name,
        src: ts[0].src,
        tgt: ts[ts.len() - 1].tgt,
        guard,
        update: acc,
    })
}

/// Try to order the variables of a self-loop so that its update is
/// triangular and weakly non-linear. Returns the recognized loop, whose
/// `vars` order realizes the renaming; `None` when a variable occurs
/// non-linearly in its own update or the dependency graph is cyclic.
///
/// The precondition must be an update-invariant; if its preservation under
/// the loop update is not provable it is weakened to `true`, which is
/// always invariant.
pub fn recognize_twn(program: &Program, t: &Transition, psi: Formula) -> Option<TwnLoop> {
    if t.src != t.tgt || t.has_temp_vars(program) {
        return None;
    }
    let psi = if psi == Formula::True {
        psi
    } else {
        let preserved = apply_update_formula(&psi, &t.update);
        let smt = crate::smt::SmtCtx::builtin_only();
        if smt.entails(&psi, &preserved) == crate::smt::Entailment::Proven {
            psi
        } else {
            Formula::tt()
        }
    };
    // The variable footprint: guard variables, updated variables and
    // everything their update polynomials mention.
    let mut footprint: BTreeSet<VarId> = t.guard.vars();
    for (v, p) in &t.update {
        if p.as_var() != Some(*v) {
            footprint.insert(*v);
            footprint.extend(p.vars());
        }
    }
    footprint.extend(psi.vars());

    // Weak non-linearity: x_i appears in eta(x_i) only as c_i * x_i.
    let mut coeff_of: BTreeMap<VarId, BigInt> = BTreeMap::new();
    let mut remainder_of: BTreeMap<VarId, Polynomial> = BTreeMap::new();
    for v in &footprint {
        let eta = t.update_of(*v);
        if eta.degree_in(*v) > 1 {
            return None;
        }
        let c = eta.coeff(&crate::ir::Monomial::var(*v));
        if !c.is_integer() {
            return None;
        }
        let rem = eta.sub(&Polynomial::var(*v).scale(&c));
        if rem.degree_in(*v) > 0 {
            return None;
        }
        coeff_of.insert(*v, c.to_integer());
        remainder_of.insert(*v, rem);
    }

    // Triangularity: the dependency graph v -> vars(p_v) must be acyclic;
    // a topological order (dependencies last) is the renaming.
    let nodes: Vec<VarId> = footprint.iter().copied().collect();
    let mut indegree: BTreeMap<VarId, usize> = nodes.iter().map(|v| (*v, 0)).collect();
    for v in &nodes {
        for w in remainder_of[v].vars() {
            if footprint.contains(&w) && w != *v {
                *indegree.get_mut(&w).unwrap() += 1;
            }
        }
    }
    let mut order = Vec::new();
    let mut ready: Vec<VarId> = nodes
        .iter()
        .filter(|v| indegree[v] == 0)
        .copied()
        .collect();
    while let Some(v) = ready.first().copied() {
        ready.remove(0);
        order.push(v);
        for w in remainder_of[&v].vars() {
            if footprint.contains(&w) && w != v {
                let d = indegree.get_mut(&w).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(w);
                    ready.sort();
                }
            }
        }
    }
    if order.len() != nodes.len() {
        return None; // dependency cycle
    }

    let coeffs = order.iter().map(|v| coeff_of[v].clone()).collect();
    let remainders = order.iter().map(|v| remainder_of[v].clone()).collect();
    let update: BTreeMap<VarId, Polynomial> = order
        .iter()
        .filter_map(|v| {
            let eta = t.update_of(*v);
            if eta.as_var() != Some(*v) { Some((*v, eta)) } else { None }
        })
        .collect();
    Some(TwnLoop {
        vars: order,
        psi,
        phi: t.guard.clone(),
        update,
        coeffs,
        remainders,
    })
}

/// How the guard of a chained loop is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainGuard {
    /// Keep the original guard only. Sound for upper bounds: the weakened
    /// loop runs at least as long.
    Simplified,
    /// The exact chained guard `phi && eta(phi)`.
    Full,
}

/// Chain a twn-loop with itself. All squared self-coefficients are
/// non-negative, so the result is a tnn-loop.
pub fn tnn_of_twn(l: &TwnLoop, guard: ChainGuard) -> TwnLoop {
    let composed: BTreeMap<VarId, Polynomial> = l
        .vars
        .iter()
        .filter_map(|v| {
            let twice = apply_update_poly(&l.update_of(*v), &l.update);
            if twice.as_var() != Some(*v) { Some((*v, twice)) } else { None }
        })
        .collect();
    let phi = match guard {
        ChainGuard::Simplified => l.phi.clone(),
        ChainGuard::Full => Formula::and(vec![l.phi.clone(), l.apply_update(&l.phi)]),
    };
    let mut coeffs = Vec::new();
    let mut remainders = Vec::new();
    for (v, c) in l.vars.iter().zip(&l.coeffs) {
        let eta2 = composed.get(v).cloned().unwrap_or_else(|| Polynomial::var(*v));
        let c2 = c * c;
        let rem = eta2.sub(&Polynomial::var(*v).scale(&num_rational::BigRational::from_integer(c2.clone())));
        debug_assert_eq!(rem.degree_in(*v), 0);
        coeffs.push(c2);
        remainders.push(rem);
    }
    TwnLoop {
        vars: l.vars.clone(),
        psi: l.psi.clone(),
        phi,
        update: composed,
        coeffs,
        remainders,
    }
}

/// Self-coefficients as u64 for the closed-form solver; tnn-loops only.
pub(crate) fn coeff_u64(c: &BigInt) -> u64 {
    assert!(!c.is_negative());
    c.to_u64().expect("self-coefficient exceeds u64")
}

pub(crate) fn is_zero_coeff(c: &BigInt) -> bool {
    c.is_zero()
}
