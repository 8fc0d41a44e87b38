//! Normalized closed forms for tnn-loop updates, computed one variable at a
//! time in triangular order. Each recurrence `x(n+1) = c*x(n) + P(n)` with a
//! poly-exponential inhomogeneity is solved exactly; zero self-coefficients
//! shift the expression by one step and raise the start value `n0`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::ir::{apply_update_poly, Polynomial, State, VarId};

use super::npe::{npe_sum_recurrence, Npe};
use super::{coeff_u64, is_zero_coeff, TwnLoop};

/// A per-variable normalized closed form with its start value: for every
/// state and every `n >= n0`, evaluating `cl(x_i)` at `n` equals the value
/// of `x_i` after `n` update applications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedForm {
    map: BTreeMap<VarId, Npe>,
    pub n0: u64,
}

impl ClosedForm {
    pub fn of(&self, v: VarId) -> &Npe {
        &self.map[&v]
    }

    pub fn map(&self) -> &BTreeMap<VarId, Npe> {
        &self.map
    }

    /// The state reached after `n` iterations from `state`; defined for
    /// `n >= n0` and exact by the defining property.
    pub fn state_at(&self, state: &State, n: u64) -> State {
        let mut out = state.clone();
        for (v, npe) in &self.map {
            let value = npe.eval(state, n);
            assert!(value.is_integer(), "closed form must evaluate integrally");
            out.insert(*v, value.to_integer());
        }
        out
    }
}

/// Compute the normalized closed form of a tnn-loop update.
pub fn closed_form(l: &TwnLoop) -> ClosedForm {
    assert!(l.is_tnn(), "closed forms need non-negative self-coefficients");
    let mut map: BTreeMap<VarId, Npe> = BTreeMap::new();
    let mut starts: BTreeMap<VarId, u64> = BTreeMap::new();

    // Symbolic iterates E_m with sigma_m(v) = sigma_0(E_m(v)); computed
    // lazily up to the largest shift the corrections need.
    let mut iterates: Vec<BTreeMap<VarId, Polynomial>> = vec![l
        .vars
        .iter()
        .map(|v| (*v, Polynomial::var(*v)))
        .collect()];
    let ensure_iterate = |iterates: &mut Vec<BTreeMap<VarId, Polynomial>>, m: usize| {
        while iterates.len() <= m {
            let last = iterates.last().unwrap();
            let next = l
                .vars
                .iter()
                .map(|v| (*v, apply_update_poly(&l.update_of(*v), last)))
                .collect();
            iterates.push(next);
        }
    };

    for (idx, v) in l.vars.iter().enumerate().rev() {
        let c = &l.coeffs[idx];
        let p = &l.remainders[idx];
        let inhom = Npe::subst_into_poly(p, &map);
        let s = p
            .vars()
            .map(|w| starts.get(&w).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        let (cl, n0) = if is_zero_coeff(c) {
            // x(n) = P(n-1) for n >= 1.
            (inhom.shift_minus_one(), s + 1)
        } else {
            let c = coeff_u64(c);
            let mut cl = Npe::single(Polynomial::var(*v), 0, c);
            cl = cl.add(&npe_sum_recurrence(c, &inhom));
            // The sum formula uses the inner closed forms at indices below
            // their start values; correct those finitely many addends.
            for m in 0..s {
                ensure_iterate(&mut iterates, m as usize);
                let truth = apply_update_poly(p, &iterates[m as usize]);
                let claimed = inhom.at_fixed_n(m);
                let delta = truth.sub(&claimed);
                if !delta.is_zero() {
                    // delta * c^(n-1-m) = (delta / c^(m+1)) * c^n
                    let scale = BigRational::new(BigInt::one(), BigInt::from(c).pow(m as u32 + 1));
                    cl.insert((c, 0), delta.scale(&scale));
                }
            }
            (cl, s)
        };
        map.insert(*v, cl);
        starts.insert(*v, n0);
    }

    let n0 = starts.values().copied().max().unwrap_or(0);
    ClosedForm { map, n0 }
}
