//! Sound built-in decision attempts: exhaustive small-model search for SAT
//! and Fourier-Motzkin refutation of a linear abstraction for UNSAT.
//!
//! Non-linear monomials are abstracted by fresh variables. The abstraction
//! is an over-approximation of the integer model space — its axioms are
//! valid for every integer instantiation — so infeasibility of the
//! abstraction implies unsatisfiability of the original formula. Atoms are
//! tightened over the integers (`0 < p` becomes `p - 1 >= 0`) before the
//! rational elimination runs.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::ir::{Atom, Formula, Monomial, State, VarId};

use super::SatResult;

const DNF_CAP: usize = 512;
const FM_CONSTRAINT_CAP: usize = 4000;
const MODEL_SEARCH_CAP: usize = 300_000;

pub fn check_sat(formula: &Formula) -> SatResult {
    if let Some(model) = search_model(formula) {
        return SatResult::Sat(model);
    }
    let Some(conjuncts) = formula.dnf(DNF_CAP) else {
        return SatResult::Unknown;
    };
    if conjuncts.is_empty() {
        return SatResult::Unsat;
    }
    for conjunct in &conjuncts {
        if !refute_conjunct(conjunct) {
            return SatResult::Unknown;
        }
    }
    SatResult::Unsat
}

/// Exhaustive grid search over the formula's variables, widening the range
/// while the candidate count stays tractable. Any model found satisfies the
/// formula by construction.
fn search_model(formula: &Formula) -> Option<State> {
    let vars: Vec<VarId> = formula.vars().into_iter().collect();
    if vars.is_empty() {
        return if formula.holds(&State::new()) {
            Some(State::new())
        } else {
            None
        };
    }
    let mut ranges: Vec<i64> = vec![2];
    for r in [4, 6, 12, 100] {
        let width = (2 * r + 1) as usize;
        if width.checked_pow(vars.len() as u32).is_some_and(|n| n <= MODEL_SEARCH_CAP) {
            ranges.push(r);
        }
    }
    let mut tried_before = 0i64;
    for range in ranges {
        if let Some(model) = grid_search(formula, &vars, range, tried_before) {
            return Some(model);
        }
        tried_before = range;
    }
    None
}

fn grid_search(formula: &Formula, vars: &[VarId], range: i64, skip_inside: i64) -> Option<State> {
    let mut state = State::new();
    fn go(
        formula: &Formula,
        vars: &[VarId],
        range: i64,
        skip_inside: i64,
        idx: usize,
        all_inside: bool,
        state: &mut State,
    ) -> bool {
        if idx == vars.len() {
            // Skip assignments fully covered by a previous, narrower pass.
            if all_inside && skip_inside > 0 {
                return false;
            }
            return formula.holds(state);
        }
        for x in -range..=range {
            state.insert(vars[idx], BigInt::from(x));
            let inside = all_inside && x.abs() <= skip_inside;
            if go(formula, vars, range, skip_inside, idx + 1, inside, state) {
                return true;
            }
        }
        state.remove(&vars[idx]);
        false
    }
    if go(formula, vars, range, skip_inside, 0, true, &mut state) {
        Some(state)
    } else {
        None
    }
}

/// Abstraction variable: either an original variable or a non-linear
/// monomial treated as an opaque integer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum LinVar {
    Orig(VarId),
    Mono(Monomial),
}

/// `sum(coeffs) + constant >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LinConstraint {
    coeffs: BTreeMap<LinVar, BigRational>,
    constant: BigRational,
}

impl LinConstraint {
    fn normalized(mut self) -> Self {
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }
}

/// Try to prove that a conjunction of atoms has no integer model.
fn refute_conjunct(atoms: &[Atom]) -> bool {
    let mut constraints = Vec::new();
    let mut monomials = BTreeSet::new();
    for atom in atoms {
        // 0 < p over the integers means p - 1 >= 0.
        let mut c = LinConstraint {
            coeffs: BTreeMap::new(),
            constant: -BigRational::one(),
        };
        for (m, coeff) in atom.poly().terms() {
            if m.is_one() {
                c.constant += coeff;
            } else if m.total_degree() == 1 {
                let v = m.vars().next().unwrap();
                *c.coeffs.entry(LinVar::Orig(v)).or_insert_with(BigRational::zero) += coeff;
            } else {
                monomials.insert(m.clone());
                *c.coeffs
                    .entry(LinVar::Mono(m.clone()))
                    .or_insert_with(BigRational::zero) += coeff;
            }
        }
        constraints.push(c.normalized());
    }

    // Unconditional axioms, valid for all integers.
    for m in &monomials {
        if let Some((v, k)) = single_var_power(m) {
            if k % 2 == 0 {
                // x^(2j) >= 0, and |x|^(2j) >= |x| for 2j >= 2.
                constraints.push(axiom(&[(LinVar::Mono(m.clone()), 1)], 0));
                constraints.push(axiom(
                    &[(LinVar::Mono(m.clone()), 1), (LinVar::Orig(v), -1)],
                    0,
                ));
                constraints.push(axiom(
                    &[(LinVar::Mono(m.clone()), 1), (LinVar::Orig(v), 1)],
                    0,
                ));
            }
        } else if m.0.values().all(|e| e % 2 == 0) {
            // A product of squares is non-negative.
            constraints.push(axiom(&[(LinVar::Mono(m.clone()), 1)], 0));
        }
    }

    // Conditional sign-link axioms: once the linear part pins the sign of a
    // base variable, power monomials over it inherit ordering facts.
    let singles: Vec<(Monomial, VarId, u32)> = monomials
        .iter()
        .filter_map(|m| single_var_power(m).map(|(v, k)| (m.clone(), v, k)))
        .collect();
    for _round in 0..3 {
        let mut added = false;
        let mut new_axioms = Vec::new();
        for (m, v, k) in &singles {
            let mv = LinVar::Mono(m.clone());
            if entails_var_ge_one(&constraints, *v) {
                // x >= 1: x^k >= x and x^k >= 1, powers are monotone.
                new_axioms.push(axiom(&[(mv.clone(), 1), (LinVar::Orig(*v), -1)], 0));
                new_axioms.push(axiom(&[(mv.clone(), 1)], -1));
                for (m2, v2, k2) in &singles {
                    if v2 == v && k2 < k {
                        new_axioms.push(axiom(
                            &[(mv.clone(), 1), (LinVar::Mono(m2.clone()), -1)],
                            0,
                        ));
                    }
                }
            } else if entails_var_le_minus_one(&constraints, *v) {
                if k % 2 == 1 {
                    // x <= -1: odd powers stay below x.
                    new_axioms.push(axiom(&[(mv.clone(), -1), (LinVar::Orig(*v), 1)], 0));
                    new_axioms.push(axiom(&[(mv.clone(), -1)], -1));
                    for (m2, v2, k2) in &singles {
                        if v2 == v && k2 < k && k2 % 2 == 1 {
                            new_axioms.push(axiom(
                                &[(mv.clone(), -1), (LinVar::Mono(m2.clone()), 1)],
                                0,
                            ));
                        }
                    }
                } else {
                    // |x| >= 1 makes even powers at least 1.
                    new_axioms.push(axiom(&[(mv.clone(), 1)], -1));
                }
            }
        }
        for ax in new_axioms {
            if !constraints.contains(&ax) {
                constraints.push(ax);
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    fm_infeasible(constraints)
}

fn axiom(coeffs: &[(LinVar, i64)], constant: i64) -> LinConstraint {
    LinConstraint {
        coeffs: coeffs
            .iter()
            .map(|(v, c)| (v.clone(), BigRational::from_integer(BigInt::from(*c))))
            .collect(),
        constant: BigRational::from_integer(BigInt::from(constant)),
    }
    .normalized()
}

fn single_var_power(m: &Monomial) -> Option<(VarId, u32)> {
    if m.0.len() == 1 {
        let (v, e) = m.0.iter().next().unwrap();
        if *e >= 2 {
            return Some((*v, *e));
        }
    }
    None
}

fn entails_var_ge_one(constraints: &[LinConstraint], v: VarId) -> bool {
    // Valid iff constraints plus x <= 0 are infeasible.
    let mut with = constraints.to_vec();
    with.push(axiom(&[(LinVar::Orig(v), -1)], 0));
    fm_infeasible(with)
}

fn entails_var_le_minus_one(constraints: &[LinConstraint], v: VarId) -> bool {
    // Valid iff constraints plus x >= 0 are infeasible.
    let mut with = constraints.to_vec();
    with.push(axiom(&[(LinVar::Orig(v), 1)], 0));
    fm_infeasible(with)
}

/// Fourier-Motzkin elimination over the rationals. Returns true only when a
/// contradiction is derived; resource exhaustion counts as "not refuted".
fn fm_infeasible(mut constraints: Vec<LinConstraint>) -> bool {
    loop {
        constraints.sort_by(|a, b| (a.coeffs.len(), &a.coeffs, &a.constant).cmp(&(b.coeffs.len(), &b.coeffs, &b.constant)));
        constraints.dedup();
        // Ground contradiction?
        if constraints
            .iter()
            .any(|c| c.coeffs.is_empty() && c.constant.is_negative())
        {
            return true;
        }
        constraints.retain(|c| !c.coeffs.is_empty());
        if constraints.is_empty() {
            return false;
        }
        // Pick the variable with the fewest upper*lower combinations.
        let mut vars: BTreeSet<LinVar> = BTreeSet::new();
        for c in &constraints {
            vars.extend(c.coeffs.keys().cloned());
        }
        let mut best: Option<(usize, LinVar)> = None;
        for v in vars {
            let pos = constraints
                .iter()
                .filter(|c| c.coeffs.get(&v).map(|x| x.is_positive()).unwrap_or(false))
                .count();
            let neg = constraints
                .iter()
                .filter(|c| c.coeffs.get(&v).map(|x| x.is_negative()).unwrap_or(false))
                .count();
            let cost = pos * neg;
            if best.as_ref().map(|(c, _)| cost < *c).unwrap_or(true) {
                best = Some((cost, v));
            }
        }
        let (_, var) = best.expect("non-empty constraint set has variables");
        let mut lower = Vec::new(); // coefficient > 0: v >= -rest/coeff
        let mut upper = Vec::new(); // coefficient < 0: v <= rest/(-coeff)
        let mut rest = Vec::new();
        for c in constraints {
            match c.coeffs.get(&var) {
                Some(k) if k.is_positive() => lower.push(c),
                Some(_) => upper.push(c),
                None => rest.push(c),
            }
        }
        let mut next = rest;
        for lo in &lower {
            for up in &upper {
                let a = lo.coeffs[&var].clone();
                let b = -up.coeffs[&var].clone();
                // b*lo + a*up eliminates var.
                let mut coeffs: BTreeMap<LinVar, BigRational> = BTreeMap::new();
                for (v, c) in &lo.coeffs {
                    *coeffs.entry(v.clone()).or_insert_with(BigRational::zero) += c * &b;
                }
                for (v, c) in &up.coeffs {
                    *coeffs.entry(v.clone()).or_insert_with(BigRational::zero) += c * &a;
                }
                coeffs.remove(&var);
                coeffs.retain(|_, c| !c.is_zero());
                let constant = &lo.constant * &b + &up.constant * &a;
                next.push(LinConstraint { coeffs, constant }.normalized());
                if next.len() > FM_CONSTRAINT_CAP {
                    return false;
                }
            }
        }
        constraints = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Polynomial;

    fn x() -> VarId {
        VarId(0)
    }
    fn y() -> VarId {
        VarId(1)
    }

    #[test]
    fn fm_detects_plain_contradiction() {
        // x >= 1 and -x >= 0.
        let cs = vec![
            axiom(&[(LinVar::Orig(x()), 1)], -1),
            axiom(&[(LinVar::Orig(x()), -1)], 0),
        ];
        assert!(fm_infeasible(cs));
    }

    #[test]
    fn fm_accepts_feasible_system() {
        // x >= 1, y >= x.
        let cs = vec![
            axiom(&[(LinVar::Orig(x()), 1)], -1),
            axiom(&[(LinVar::Orig(y()), 1), (LinVar::Orig(x()), -1)], 0),
        ];
        assert!(!fm_infeasible(cs));
    }

    #[test]
    fn refutes_square_strictly_negative() {
        // 0 < -x^2
        let f = Formula::gt(Polynomial::var(x()).pow(2).neg(), Polynomial::zero());
        let atoms: Vec<Atom> = f.atoms().into_iter().cloned().collect();
        assert!(refute_conjunct(&atoms));
    }

    #[test]
    fn conditional_axiom_links_cube_to_base() {
        // x >= 1 and x^3 <= 0 is contradictory.
        let f = Formula::and(vec![
            Formula::ge(Polynomial::var(x()), Polynomial::one()),
            Formula::le(Polynomial::var(x()).pow(3), Polynomial::zero()),
        ]);
        let atoms: Vec<Atom> = f.atoms().into_iter().cloned().collect();
        assert!(refute_conjunct(&atoms));
    }

    #[test]
    fn no_false_refutation() {
        // x^3 <= 0 alone is satisfiable (x <= 0).
        let f = Formula::le(Polynomial::var(x()).pow(3), Polynomial::zero());
        let atoms: Vec<Atom> = f.atoms().into_iter().cloned().collect();
        assert!(!refute_conjunct(&atoms));
    }
}
