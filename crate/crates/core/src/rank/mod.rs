//! Linear ranking functions via Farkas' lemma: per-location affine
//! templates whose decrease, non-increase and boundedness obligations are
//! linearized against the (invariant-enriched, linearized) transition
//! guards and decided by the exact simplex. The three obligations are
//!
//!   * every transition of the subprogram never increases the function,
//!   * every counted transition decreases it by at least one, and
//!   * every counted transition leaves it non-negative after the step,
//!
//! so the function's value at an entry state dominates the number of
//! counted firings of a local run without any correction term.

mod simplex;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::invariants::LocationInvariants;
use crate::ir::{entry_transitions, BoundExpr, LocId, Monomial, Polynomial, Program, TransId, VarId};

pub use simplex::{Lp, LpSolution, Rel};

/// A location-indexed affine ranking function together with the transition
/// sets it was synthesized for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearRF {
    /// Per location: variable coefficients and constant.
    pub per_loc: BTreeMap<LocId, (BTreeMap<VarId, BigRational>, BigRational)>,
    pub non_increasing: BTreeSet<TransId>,
    pub decreasing: BTreeSet<TransId>,
}

impl LinearRF {
    pub fn value_at(&self, loc: LocId, state: &crate::ir::State) -> BigRational {
        let (coeffs, c) = &self.per_loc[&loc];
        let mut out = c.clone();
        for (v, a) in coeffs {
            out += a * BigRational::from_integer(state[v].clone());
        }
        out
    }
}

/// Synthesize a linear ranking function: non-increase on `t_prime`,
/// decrease and post-step boundedness on `t_strict`. Guards are enriched
/// with location invariants; non-linear and disjunctive guard parts are
/// dropped, which weakens the premises and is sound for upper bounds.
pub fn synthesize_linear_rf(
    program: &Program,
    invariants: &LocationInvariants,
    t_prime: &BTreeSet<TransId>,
    t_strict: &BTreeSet<TransId>,
) -> Option<LinearRF> {
    assert!(t_strict.is_subset(t_prime));
    if t_strict.is_empty() {
        return None;
    }
    let mut locations = BTreeSet::new();
    for t in t_prime {
        let tr = program.transition(*t);
        locations.insert(tr.src);
        locations.insert(tr.tgt);
    }
    // Local bounds are read off at the targets of the entry transitions, so
    // constants there are minimized with higher priority.
    let entry_targets: BTreeSet<LocId> = entry_transitions(program, t_prime)
        .unwrap_or_default()
        .into_iter()
        .map(|r| program.transition(r).tgt)
        .collect();

    let mut enc = Encoder::new(program, locations.iter().copied().collect());
    for t in t_prime {
        let tr = program.transition(*t);
        let guard = guard_atoms(program, invariants, tr);
        let strict = t_strict.contains(t);
        // f_src - f_tgt(eta) - delta >= 0 under the guard.
        let mut diff = enc.template(tr.src);
        diff.sub_assign(&enc.template_after_update(tr.tgt, tr));
        if strict {
            diff.add_const(BigRational::from_integer((-1).into()));
        }
        enc.farkas_row(diff, &guard);
        if strict {
            // f_tgt(eta) >= 0 under the guard.
            let bounded = enc.template_after_update(tr.tgt, tr);
            enc.farkas_row(bounded, &guard);
        }
    }
    let solution = enc.solve(&entry_targets)?;
    let mut per_loc = BTreeMap::new();
    for loc in &locations {
        let mut coeffs = BTreeMap::new();
        for v in program.pv() {
            let a = enc.coeff_value(&solution, *loc, *v);
            if !a.is_zero() {
                coeffs.insert(*v, a);
            }
        }
        per_loc.insert(*loc, (coeffs, enc.const_value(&solution, *loc)));
    }
    Some(LinearRF {
        per_loc,
        non_increasing: t_prime.clone(),
        decreasing: t_strict.clone(),
    })
}

/// The bound an entry transition inherits from a ranking function: the
/// function at the entry's target location with absolute coefficients and
/// the non-negative part of the constant.
pub fn rf_local_bounds(
    program: &Program,
    rf: &LinearRF,
    entries: &[TransId],
) -> BTreeMap<TransId, BoundExpr> {
    let mut out = BTreeMap::new();
    for r in entries {
        let tgt = program.transition(*r).tgt;
        let (coeffs, c) = &rf.per_loc[&tgt];
        let mut bound = BoundExpr::zero();
        for (v, a) in coeffs {
            let mag = a.abs().ceil().to_integer().magnitude().clone();
            bound = bound.add(
                &BoundExpr::constant_big(mag).mul(&BoundExpr::var(*v)),
            );
        }
        if c.is_positive() {
            bound = bound.add(&BoundExpr::constant_big(
                c.ceil().to_integer().magnitude().clone(),
            ));
        }
        out.insert(*r, bound);
    }
    out
}

/// Linear conjunct atoms of the enriched guard, in `p >= 0` form (`0 < p`
/// over the integers tightens to `p - 1 >= 0`).
fn guard_atoms(
    program: &Program,
    invariants: &LocationInvariants,
    t: &crate::ir::Transition,
) -> Vec<Polynomial> {
    let enriched = invariants.enriched_guard(program, t);
    enriched
        .conjunct_atoms()
        .into_iter()
        .filter(|a| a.poly().is_linear())
        .map(|a| a.poly().sub(&Polynomial::one()))
        .collect()
}

/// An affine-in-template-variables polynomial: for every state monomial, a
/// linear combination of LP variables plus a rational constant.
#[derive(Debug, Clone, Default)]
struct TemplatePoly {
    terms: BTreeMap<Monomial, LinComb>,
}

#[derive(Debug, Clone, Default)]
struct LinComb {
    vars: BTreeMap<usize, BigRational>,
    constant: BigRational,
}

impl LinComb {
    fn add_var(&mut self, idx: usize, c: BigRational) {
        *self.vars.entry(idx).or_insert_with(BigRational::zero) += c;
    }
}

impl TemplatePoly {
    fn entry(&mut self, m: Monomial) -> &mut LinComb {
        self.terms.entry(m).or_default()
    }

    fn sub_assign(&mut self, other: &TemplatePoly) {
        for (m, lc) in &other.terms {
            let e = self.entry(m.clone());
            for (i, c) in &lc.vars {
                e.add_var(*i, -c.clone());
            }
            e.constant -= &lc.constant;
        }
    }

    fn add_const(&mut self, c: BigRational) {
        self.entry(Monomial::one()).constant += c;
    }
}

/// Builds the Farkas LP: template variables are split into non-negative
/// parts, every obligation contributes per-monomial equality rows tying the
/// template to fresh non-negative multipliers over the guard atoms.
struct Encoder<'a> {
    program: &'a Program,
    lp: Lp,
    // (loc, var) -> (plus, minus) LP indices; loc -> (plus, minus) consts.
    coeff_idx: BTreeMap<(LocId, VarId), (usize, usize)>,
    const_idx: BTreeMap<LocId, (usize, usize)>,
}

impl<'a> Encoder<'a> {
    fn new(program: &'a Program, locations: Vec<LocId>) -> Encoder<'a> {
        let mut lp = Lp::new(0);
        let mut coeff_idx = BTreeMap::new();
        let mut const_idx = BTreeMap::new();
        for loc in locations {
            for v in program.pv() {
                let plus = lp.fresh_var();
                let minus = lp.fresh_var();
                coeff_idx.insert((loc, *v), (plus, minus));
            }
            let plus = lp.fresh_var();
            let minus = lp.fresh_var();
            const_idx.insert(loc, (plus, minus));
        }
        Encoder {
            program,
            lp,
            coeff_idx,
            const_idx,
        }
    }

    /// `f_loc` as a template polynomial.
    fn template(&mut self, loc: LocId) -> TemplatePoly {
        let mut out = TemplatePoly::default();
        for v in self.program.pv() {
            let (p, m) = self.coeff_idx[&(loc, *v)];
            let e = out.entry(Monomial::var(*v));
            e.add_var(p, BigRational::from_integer(1.into()));
            e.add_var(m, BigRational::from_integer((-1).into()));
        }
        let (p, m) = self.const_idx[&loc];
        let e = out.entry(Monomial::one());
        e.add_var(p, BigRational::from_integer(1.into()));
        e.add_var(m, BigRational::from_integer((-1).into()));
        out
    }

    /// `f_loc` after the transition's update: coefficients multiply the
    /// update polynomials, which may introduce non-linear monomials.
    fn template_after_update(&mut self, loc: LocId, t: &crate::ir::Transition) -> TemplatePoly {
        let mut out = TemplatePoly::default();
        for v in self.program.pv() {
            let (pi, mi) = self.coeff_idx[&(loc, *v)];
            let eta = t.update_of(*v);
            for (mono, c) in eta.terms() {
                let e = out.entry(mono.clone());
                e.add_var(pi, c.clone());
                e.add_var(mi, -c.clone());
            }
        }
        let (p, m) = self.const_idx[&loc];
        let e = out.entry(Monomial::one());
        e.add_var(p, BigRational::from_integer(1.into()));
        e.add_var(m, BigRational::from_integer((-1).into()));
        out
    }

    /// Encode "`poly >= 0` whenever all guard atoms are >= 0": the
    /// polynomial must equal a non-negative combination of the atoms plus a
    /// non-negative constant, coefficient-wise.
    fn farkas_row(&mut self, poly: TemplatePoly, guard: &[Polynomial]) {
        let lambdas: Vec<usize> = guard.iter().map(|_| self.lp.fresh_var()).collect();
        let mut monomials: BTreeSet<Monomial> = poly.terms.keys().cloned().collect();
        for g in guard {
            for (m, _) in g.terms() {
                monomials.insert(m.clone());
            }
        }
        for mono in monomials {
            let lc = poly.terms.get(&mono);
            let mut coeffs: Vec<(usize, BigRational)> = lc
                .map(|lc| lc.vars.iter().map(|(i, c)| (*i, c.clone())).collect())
                .unwrap_or_default();
            let template_const = lc.map(|lc| lc.constant.clone()).unwrap_or_default();
            for (g, li) in guard.iter().zip(&lambdas) {
                let gc = g.coeff(&mono);
                if !gc.is_zero() {
                    coeffs.push((*li, -gc));
                }
            }
            if mono.is_one() {
                // Constant position: template_const + coeffs >= 0.
                self.lp.add_row(coeffs, Rel::Ge, -template_const);
            } else {
                self.lp.add_row(coeffs, Rel::Eq, -template_const);
            }
        }
    }

    /// Lexicographic minimization: total coefficient magnitude, then the
    /// constant magnitude at the entry targets (where local bounds are
    /// read), then all constant magnitudes, then signed constants. Each
    /// stage pins the previous optimum.
    fn solve(&mut self, entry_targets: &BTreeSet<LocId>) -> Option<LpSolution> {
        let one = || BigRational::from_integer(1.into());
        let coeff_cost: Vec<(usize, BigRational)> = self
            .coeff_idx
            .values()
            .flat_map(|(p, m)| [(*p, one()), (*m, one())])
            .collect();
        let sol = self.lp.minimize(&coeff_cost)?;
        self.lp.add_row(coeff_cost, Rel::Le, sol.objective.clone());

        let entry_cost: Vec<(usize, BigRational)> = self
            .const_idx
            .iter()
            .filter(|(loc, _)| entry_targets.contains(loc))
            .flat_map(|(_, (p, m))| [(*p, one()), (*m, one())])
            .collect();
        if !entry_cost.is_empty() {
            let sol = self.lp.minimize(&entry_cost)?;
            self.lp.add_row(entry_cost, Rel::Le, sol.objective.clone());
        }

        let const_cost: Vec<(usize, BigRational)> = self
            .const_idx
            .values()
            .flat_map(|(p, m)| [(*p, one()), (*m, one())])
            .collect();
        let sol = self.lp.minimize(&const_cost)?;
        self.lp.add_row(const_cost, Rel::Le, sol.objective.clone());

        let signed_cost: Vec<(usize, BigRational)> = self
            .const_idx
            .values()
            .flat_map(|(p, m)| [(*p, one()), (*m, -one())])
            .collect();
        let last = self.lp.minimize(&signed_cost)?;
        if last.unbounded {
            Some(sol)
        } else {
            Some(last)
        }
    }

    fn coeff_value(&self, sol: &LpSolution, loc: LocId, v: VarId) -> BigRational {
        let (p, m) = self.coeff_idx[&(loc, v)];
        &sol.values[p] - &sol.values[m]
    }

    fn const_value(&self, sol: &LpSolution, loc: LocId) -> BigRational {
        let (p, m) = self.const_idx[&loc];
        &sol.values[p] - &sol.values[m]
    }
}
