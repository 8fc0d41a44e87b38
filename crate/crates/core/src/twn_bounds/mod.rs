//! Runtime bounds for terminating tnn-loops via stabilization thresholds,
//! and their use as local runtime bounds for self-loops inside larger
//! programs: monotonicity thresholds, the polynomial join, invariant-aware
//! kernel over-approximations, the threshold bound itself and a syntactic
//! update-invariant synthesizer for entry transitions.

mod kernel;
mod mt;

use std::collections::BTreeSet;

use crate::ir::{
    apply_update_formula, Atom, BoundExpr, Formula, Polynomial, Program, Transition, VarId,
};
use crate::smt::{Entailment, SmtCtx};
use crate::twn::{
    check_termination, closed_form, recognize_twn, tnn_of_twn, ChainGuard, Npe, TerminationVerdict,
    TwnLoop,
};

pub use kernel::{join_polys, select_kernel, KernelSpec};
pub use mt::{monotonicity_threshold, MtError};

/// Derivation record for the stabilization-threshold bound of one guard
/// atom.
#[derive(Debug, Clone)]
pub struct AtomDerivation {
    /// The instantiated, integerized poly-exponential expression.
    pub npe: Npe,
    pub kernel: KernelSpec,
    /// Kernel addends in ascending `(b, a)` order: `(p_j, a_j, b_j)`.
    pub sorted: Vec<(Polynomial, u64, u64)>,
    /// `M_j` and `N_j` for `j = 2..l` (index 0 holds `j = 2`).
    pub m_thresholds: Vec<u64>,
    pub n_thresholds: Vec<u64>,
    pub c_alpha: u64,
    pub d_alpha: u64,
    pub pol_alpha: Vec<Polynomial>,
}

/// Full derivation of a stabilization-threshold bound.
#[derive(Debug, Clone)]
pub struct SthDerivation {
    pub atoms: Vec<AtomDerivation>,
    pub n0: u64,
    pub c: u64,
    pub d: u64,
    pub pol: Vec<Polynomial>,
    pub join: Polynomial,
    pub bound: BoundExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SthError {
    /// The loop is not (known to be) terminating; no threshold bound exists.
    NotTerminating,
}

/// Compute the bound `2 * join(Pol) + max(n0, C, D)` on the stabilization
/// threshold of a terminating tnn-loop. The caller is responsible for
/// having established termination.
pub fn sth_bound(l: &TwnLoop, smt: &SmtCtx) -> (BoundExpr, SthDerivation) {
    assert!(l.is_tnn(), "stabilization thresholds are computed on tnn-loops");
    let cf = closed_form(l);
    let psi_prime = Formula::and(vec![l.psi.clone(), l.phi.clone()]);

    let mut atoms = Vec::new();
    let mut c_all = 1u64;
    let mut d_all = 0u64;
    let mut pol_all: Vec<Polynomial> = Vec::new();
    for atom in l.phi.atoms() {
        let raw = Npe::subst_into_poly(atom.poly(), cf.map());
        let (npe, _) = raw.integerize();
        let derivation = derive_atom(&npe, &psi_prime, smt);
        c_all = c_all.max(derivation.c_alpha);
        d_all = d_all.max(derivation.d_alpha);
        for p in &derivation.pol_alpha {
            if !pol_all.contains(p) {
                pol_all.push(p.clone());
            }
        }
        atoms.push(derivation);
    }

    let join = join_polys(&pol_all);
    let offset = cf.n0.max(c_all).max(d_all);
    let bound = BoundExpr::constant(2)
        .mul(&BoundExpr::from_poly_abs(&join))
        .add(&BoundExpr::constant(offset));
    let derivation = SthDerivation {
        atoms,
        n0: cf.n0,
        c: c_all,
        d: d_all,
        pol: pol_all,
        join,
        bound: bound.clone(),
    };
    (bound, derivation)
}

fn derive_atom(npe: &Npe, psi_prime: &Formula, smt: &SmtCtx) -> AtomDerivation {
    let kernel = select_kernel(npe, psi_prime, smt);
    let kernel_npe = kernel.kernel_npe();
    let sorted: Vec<(Polynomial, u64, u64)> = kernel_npe
        .addends()
        .map(|((b, a), p)| (p.clone(), *a, *b))
        .collect();
    let len = sorted.len();
    let mt1 = |hi: (u64, u64), lo: (u64, u64)| -> u64 {
        monotonicity_threshold(1, hi, lo).expect("addend keys are strictly sorted")
    };
    let key = |j: usize| -> (u64, u64) { (sorted[j - 1].2, sorted[j - 1].1) };

    let mut m_thresholds = Vec::new();
    let mut n_thresholds = Vec::new();
    let mut c_alpha = 1u64;
    for j in 2..=len {
        let (b_j, a_j) = key(j);
        let (b_p, a_p) = key(j - 1);
        let m_j = if b_j == b_p { 0 } else { mt1((b_j, a_j), (b_p, a_p + 1)) };
        let n_j = match j {
            2 => 1,
            3 => monotonicity_threshold(j as u64 - 2, key(j - 1), key(j - 2)).expect("sorted"),
            _ => {
                let mt_prime =
                    monotonicity_threshold(j as u64 - 2, key(j - 1), key(j - 2)).expect("sorted");
                let mt = (1..=j - 3).map(|i| mt1(key(j - 2), key(i))).max().unwrap_or(0);
                mt_prime.max(mt)
            }
        };
        c_alpha = c_alpha.max(m_j).max(n_j);
        m_thresholds.push(m_j);
        n_thresholds.push(n_j);
    }
    let d_alpha = kernel.kernel_d();
    let pol_alpha: Vec<Polynomial> = if len >= 1 {
        sorted[..len - 1].iter().map(|(p, _, _)| p.clone()).collect()
    } else {
        Vec::new()
    };
    AtomDerivation {
        npe: npe.clone(),
        kernel,
        sorted,
        m_thresholds,
        n_thresholds,
        c_alpha,
        d_alpha,
        pol_alpha,
    }
}

/// How a local twn bound was obtained, for the derivation log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TwnRoute {
    DirectTnn,
    ChainedSimplified,
    ChainedFull,
}

#[derive(Debug, Clone)]
pub struct LocalTwnDerivation {
    pub invariant: Formula,
    pub route: TwnRoute,
    pub sth: SthDerivation,
}

/// Local runtime bound for a self-loop reached through one entry
/// transition: `sth` for terminating tnn-loops, `2*sth + 1` for loops that
/// first need chaining, and omega when recognition or termination fails.
pub fn local_bound_twn(
    program: &Program,
    t: &Transition,
    r: &Transition,
    chain_guard: ChainGuard,
    smt: &SmtCtx,
) -> (BoundExpr, Option<LocalTwnDerivation>) {
    let psi = synthesize_update_invariant(program, t, r, smt);
    let Some(l) = recognize_twn(program, t, psi.clone()) else {
        return (BoundExpr::omega(), None);
    };
    if check_termination(&l, smt) != TerminationVerdict::Terminating {
        return (BoundExpr::omega(), None);
    }
    if l.is_tnn() {
        let (bound, sth) = sth_bound(&l, smt);
        return (
            bound,
            Some(LocalTwnDerivation {
                invariant: psi,
                route: TwnRoute::DirectTnn,
                sth,
            }),
        );
    }
    // Chain into a tnn-loop. The simplified guard reproduces the tighter
    // constants but can lose termination; fall back to the full guard,
    // whose termination follows from the loop's own.
    let mut route = match chain_guard {
        ChainGuard::Simplified => TwnRoute::ChainedSimplified,
        ChainGuard::Full => TwnRoute::ChainedFull,
    };
    let mut chained = tnn_of_twn(&l, chain_guard);
    if chain_guard == ChainGuard::Simplified
        && check_termination(&chained, smt) != TerminationVerdict::Terminating
    {
        chained = tnn_of_twn(&l, ChainGuard::Full);
        route = TwnRoute::ChainedFull;
    }
    let (sth, derivation) = sth_bound(&chained, smt);
    let bound = BoundExpr::constant(2).mul(&sth).add(&BoundExpr::constant(1));
    (
        bound,
        Some(LocalTwnDerivation {
            invariant: psi,
            route,
            sth: derivation,
        }),
    )
}

/// Syntactic update-invariant synthesis for a self-loop `t` entered via
/// `r`: candidate atoms are conjuncts of `r`'s guard over variables `r`
/// does not change, equalities from constant assignments in `r`'s update,
/// and guard conjuncts of unique-predecessor chains before `r` over
/// variables nothing in the program updates. A candidate is kept when its
/// preservation under `t`'s update is provable, so the conjunction is an
/// update-invariant that holds whenever the loop is entered through `r`.
pub fn synthesize_update_invariant(
    program: &Program,
    t: &Transition,
    r: &Transition,
    smt: &SmtCtx,
) -> Formula {
    let footprint = loop_footprint(t);
    let mut candidates: Vec<Atom> = Vec::new();
    let push = |candidates: &mut Vec<Atom>, a: Atom| {
        if !candidates.contains(&a) {
            candidates.push(a);
        }
    };

    // Guard conjuncts of the entry transition over variables it preserves.
    let r_modified: BTreeSet<VarId> = r.modified_vars().into_iter().collect();
    for atom in r.guard.conjunct_atoms() {
        let vars: BTreeSet<VarId> = atom.poly().vars().collect();
        if vars.is_subset(&footprint) && vars.is_disjoint(&r_modified) {
            push(&mut candidates, atom.clone());
        }
    }

    // Constant assignments of the entry transition.
    for (v, p) in &r.update {
        if !footprint.contains(v) {
            continue;
        }
        if let Some(c) = p.as_constant() {
            let c = Polynomial::constant(c);
            for f in [
                Formula::ge(Polynomial::var(*v), c.clone()),
                Formula::le(Polynomial::var(*v), c),
            ] {
                if let Formula::Atom(a) = f {
                    push(&mut candidates, a);
                }
            }
        }
    }

    // Guards along the unique-predecessor chain before the entry, over
    // variables that no transition in the program ever updates.
    let mut cur = r.src;
    let mut seen = BTreeSet::from([cur]);
    while cur != program.initial {
        let preds: Vec<&Transition> = program.transitions_into(cur).collect();
        let [only] = preds.as_slice() else { break };
        for atom in only.guard.conjunct_atoms() {
            let vars: BTreeSet<VarId> = atom.poly().vars().collect();
            if vars.is_subset(&footprint) && vars.iter().all(|v| !program.ever_updated(*v)) {
                push(&mut candidates, atom.clone());
            }
        }
        cur = only.src;
        if !seen.insert(cur) {
            break;
        }
    }

    // Keep exactly the candidates whose preservation under the loop update
    // is provable.
    let kept: Vec<Formula> = candidates
        .into_iter()
        .filter(|a| {
            let before = Formula::Atom(a.clone());
            let after = apply_update_formula(&before, &t.update);
            smt.entails(&before, &after) == Entailment::Proven
        })
        .map(Formula::Atom)
        .collect();
    Formula::and(kept)
}

/// The variables a self-loop is "about": guard variables plus the closure
/// of updated variables under their update polynomials.
fn loop_footprint(t: &Transition) -> BTreeSet<VarId> {
    let mut footprint: BTreeSet<VarId> = t.guard.vars();
    for (v, p) in &t.update {
        if p.as_var() != Some(*v) {
            footprint.insert(*v);
            footprint.extend(p.vars());
        }
    }
    footprint
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{State, TransId};
    use num_bigint::BigInt;
    use num_rational::BigRational;

    /// The chained non-linear loop with an invariant, ready for bound tests.
    fn squared_nonlinear_loop(psi: Formula) -> (crate::ir::Program, TwnLoop) {
        let p = crate::twn::tests::nonlinear_loop_program();
        let t5 = p.transition(TransId(1)).clone();
        let l = recognize_twn(&p, &t5, psi).unwrap();
        let sq = tnn_of_twn(&l, ChainGuard::Simplified);
        (p, sq)
    }

    fn var(p: &crate::ir::Program, n: &str) -> VarId {
        p.var_by_name(n).unwrap()
    }

    #[test]
    fn kernel_reproduction_under_sign_invariant() {
        // With x3 > 0 in the context, the cube cancels against the 9^n
        // addend and the fifth power drops, leaving -x1^2*16^n + x2*9^n.
        let (p, sq) = squared_nonlinear_loop(Formula::gt(
            Polynomial::var(VarId(2)),
            Polynomial::zero(),
        ));
        let smt = SmtCtx::builtin_only();
        let (x1, x2, x3) = (var(&p, "x1"), var(&p, "x2"), var(&p, "x3"));
        let cf = closed_form(&sq);
        let alpha = Polynomial::var(x2)
            .sub(&Polynomial::var(x1).pow(2))
            .sub(&Polynomial::var(x3).pow(5));
        let (npe, _) = Npe::subst_into_poly(&alpha, cf.map()).integerize();
        let psi_prime = Formula::and(vec![sq.psi.clone(), sq.phi.clone()]);
        let spec = select_kernel(&npe, &psi_prime, &smt);
        let mut expected = Npe::single(Polynomial::var(x1).pow(2).neg(), 0, 16);
        expected.insert((9, 0), Polynomial::var(x2));
        assert_eq!(spec.kernel_npe(), expected);
        assert_eq!(spec.kernel_d(), 1);
        assert_eq!(spec.delta.len(), 1);
        assert_eq!(spec.gamma.len(), 1);

        // Sampled dominance: kernel >= npe for states satisfying the
        // context, from D on.
        let d = spec.kernel_d();
        let kernel = spec.kernel_npe();
        for e in crate::smt::assignment_grid(&[x1, x2, x3], 4) {
            if !psi_prime.holds(&e) {
                continue;
            }
            for n in d..=d + 50 {
                assert!(
                    kernel.eval(&e, n) >= npe.eval(&e, n),
                    "kernel dominance fails at {e:?}, n={n}"
                );
            }
        }
    }

    #[test]
    fn kernel_without_invariant_is_trivial() {
        let (p, sq) = squared_nonlinear_loop(Formula::tt());
        let smt = SmtCtx::builtin_only();
        let (x1, x2, x3) = (var(&p, "x1"), var(&p, "x2"), var(&p, "x3"));
        let cf = closed_form(&sq);
        let alpha = Polynomial::var(x2)
            .sub(&Polynomial::var(x1).pow(2))
            .sub(&Polynomial::var(x3).pow(5));
        let (npe, _) = Npe::subst_into_poly(&alpha, cf.map()).integerize();
        let psi_prime = Formula::and(vec![sq.psi.clone(), sq.phi.clone()]);
        let spec = select_kernel(&npe, &psi_prime, &smt);
        assert!(spec.is_trivial());
        assert_eq!(spec.kernel_npe(), npe);
    }

    #[test]
    fn sth_bound_without_invariant() {
        // 2*x2 + 2*x3^3 + 2*x3^5 + 1.
        let (p, sq) = squared_nonlinear_loop(Formula::tt());
        let smt = SmtCtx::builtin_only();
        let (x2, x3) = (var(&p, "x2"), var(&p, "x3"));
        let (bound, derivation) = sth_bound(&sq, &smt);
        let x3b = BoundExpr::var(x3);
        let expected = BoundExpr::sum([
            BoundExpr::constant(2).mul(&BoundExpr::var(x2)),
            BoundExpr::constant(2).mul(&x3b).mul(&x3b).mul(&x3b),
            BoundExpr::constant(2)
                .mul(&x3b)
                .mul(&x3b)
                .mul(&x3b)
                .mul(&x3b)
                .mul(&x3b),
            BoundExpr::constant(1),
        ]);
        assert_eq!(bound, expected);
        assert_eq!(derivation.c, 1);
        assert_eq!(derivation.d, 0);
        assert_eq!(derivation.n0, 0);
    }

    #[test]
    fn sth_bound_with_sign_invariant() {
        // 2*x2 + 1 under x3 > 0, via the kernel; D = 1.
        let (p, sq) = squared_nonlinear_loop(Formula::gt(Polynomial::var(VarId(2)), Polynomial::zero()));
        let smt = SmtCtx::builtin_only();
        let x2 = var(&p, "x2");
        let (bound, derivation) = sth_bound(&sq, &smt);
        let expected = BoundExpr::constant(2)
            .mul(&BoundExpr::var(x2))
            .add(&BoundExpr::constant(1));
        assert_eq!(bound, expected);
        assert_eq!(derivation.c, 1);
        assert_eq!(derivation.d, 1);
    }

    #[test]
    fn sth_dominates_bruteforce_stabilization() {
        // Oracle: iterate the loop update and find the last time the guard
        // truth value changes; the bound must dominate it.
        let (p, sq) = squared_nonlinear_loop(Formula::tt());
        let smt = SmtCtx::builtin_only();
        let (bound, _) = sth_bound(&sq, &smt);
        let psi_prime = Formula::and(vec![sq.psi.clone(), sq.phi.clone()]);
        let vars: Vec<VarId> = sq.vars.clone();
        for e in crate::smt::assignment_grid(&vars, 3) {
            if !psi_prime.holds(&e) {
                continue;
            }
            let sth = brute_force_sth(&sq, &e, 500);
            let allowed = bound.eval_state(&e);
            assert!(
                allowed.ge(&crate::ir::NatOmega::from_u64(sth)),
                "sth bound {allowed} below brute-force {sth} at {e:?}"
            );
            let _ = p;
        }
    }

    /// Smallest n such that the guard truth value never changes afterwards,
    /// within a finite window.
    pub(crate) fn brute_force_sth(l: &TwnLoop, e: &State, window: u64) -> u64 {
        let mut truth = Vec::new();
        let mut current = e.clone();
        for _ in 0..=window {
            truth.push(l.phi.holds(&current));
            let mut next = current.clone();
            for v in &l.vars {
                next.insert(*v, l.update_of(*v).eval_int(&current));
            }
            current = next;
        }
        let last = *truth.last().unwrap();
        let mut sth = 0;
        for (i, t) in truth.iter().enumerate() {
            if *t != last {
                sth = i as u64 + 1;
            }
        }
        sth
    }

    #[test]
    fn invariant_synthesis_on_entry_guards() {
        // Entering the non-linear loop via a guard x3 > 0 && x4 > 0 that leaves
        // x3, x4 unchanged keeps exactly the x3 fact (x4 is outside the
        // loop footprint).
        let mut b = crate::ir::ProgramBuilder::new();
        let x1 = b.program_var("x1");
        let x2 = b.program_var("x2");
        let x3 = b.program_var("x3");
        let x4 = b.program_var("x4");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        let l3 = b.location("l3");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), Default::default());
        b.transition(
            "t1",
            l1,
            l3,
            Formula::and(vec![
                Formula::gt(Polynomial::var(x3), Polynomial::zero()),
                Formula::gt(Polynomial::var(x4), Polynomial::zero()),
            ]),
            std::collections::BTreeMap::from([(x1, Polynomial::var(x4)), (x2, Polynomial::var(x4))]),
        );
        let guard = Formula::and(vec![
            Formula::lt(
                Polynomial::var(x1).pow(2).add(&Polynomial::var(x3).pow(5)),
                Polynomial::var(x2),
            ),
            Formula::ne(Polynomial::var(x1), Polynomial::zero()),
        ]);
        let update = std::collections::BTreeMap::from([
            (x1, Polynomial::from_int(-2).mul(&Polynomial::var(x1))),
            (
                x2,
                Polynomial::from_int(3)
                    .mul(&Polynomial::var(x2))
                    .sub(&Polynomial::from_int(2).mul(&Polynomial::var(x3).pow(3))),
            ),
        ]);
        b.transition("t5", l3, l3, guard, update);
        let p = b.build().unwrap();
        let smt = SmtCtx::builtin_only();
        let t5 = p.transition(TransId(2));
        let t1 = p.transition(TransId(1));
        let psi = synthesize_update_invariant(&p, t5, t1, &smt);
        assert_eq!(psi, Formula::gt(Polynomial::var(x3), Polynomial::zero()));
    }

    #[test]
    fn invariant_from_empty_guard_is_true() {
        let p = crate::twn::tests::nonlinear_loop_program();
        let smt = SmtCtx::builtin_only();
        let t0 = p.transition(TransId(0));
        let t5 = p.transition(TransId(1));
        assert_eq!(synthesize_update_invariant(&p, t5, t0, &smt), Formula::tt());
    }

    #[test]
    fn constant_entry_assignment_becomes_equality() {
        // r sets x <- 5 and the loop keeps x: the invariant pins x = 5.
        let mut b = crate::ir::ProgramBuilder::new();
        let x = b.program_var("x");
        let y = b.program_var("y");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        b.initial(l0);
        b.transition(
            "r",
            l0,
            l1,
            Formula::tt(),
            std::collections::BTreeMap::from([(x, Polynomial::from_int(5))]),
        );
        b.transition(
            "t",
            l1,
            l1,
            Formula::lt(Polynomial::var(y), Polynomial::var(x)),
            std::collections::BTreeMap::from([(y, Polynomial::var(y).add(&Polynomial::one()))]),
        );
        let p = b.build().unwrap();
        let smt = SmtCtx::builtin_only();
        let psi = synthesize_update_invariant(&p, p.transition(TransId(1)), p.transition(TransId(0)), &smt);
        let st5 = State::from([(x, BigInt::from(5)), (y, BigInt::from(0))]);
        let st4 = State::from([(x, BigInt::from(4)), (y, BigInt::from(0))]);
        assert!(psi.holds(&st5));
        assert!(!psi.holds(&st4));
    }

    #[test]
    fn local_bounds_match_known_thresholds() {
        // Via an entry asserting x3 > 0: 4*x2 + 3. Via a plain entry:
        // 4*x2 + 4*x3^3 + 4*x3^5 + 3.
        let p = crate::twn::tests::nonlinear_loop_program();
        let smt = SmtCtx::builtin_only();
        let t0 = p.transition(TransId(0));
        let t5 = p.transition(TransId(1));
        let x2 = var(&p, "x2");
        let x3 = var(&p, "x3");

        let (plain, derivation) =
            local_bound_twn(&p, t5, t0, ChainGuard::Simplified, &smt);
        let x3b = BoundExpr::var(x3);
        let expected_plain = BoundExpr::sum([
            BoundExpr::constant(4).mul(&BoundExpr::var(x2)),
            BoundExpr::constant(4).mul(&x3b).mul(&x3b).mul(&x3b),
            BoundExpr::constant(4)
                .mul(&x3b)
                .mul(&x3b)
                .mul(&x3b)
                .mul(&x3b)
                .mul(&x3b),
            BoundExpr::constant(3),
        ]);
        assert_eq!(plain, expected_plain);
        assert_eq!(derivation.unwrap().route, TwnRoute::ChainedSimplified);
    }

    #[test]
    fn nonterminating_self_loop_gets_omega() {
        let mut b = crate::ir::ProgramBuilder::new();
        let x = b.program_var("x");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), Default::default());
        b.transition(
            "t",
            l1,
            l1,
            Formula::gt(Polynomial::var(x), Polynomial::zero()),
            std::collections::BTreeMap::from([(x, Polynomial::var(x).add(&Polynomial::one()))]),
        );
        let p = b.build().unwrap();
        let smt = SmtCtx::builtin_only();
        let (bound, _) =
            local_bound_twn(&p, p.transition(TransId(1)), p.transition(TransId(0)), ChainGuard::Simplified, &smt);
        assert!(bound.is_omega());
    }

    #[test]
    fn mt_error_display() {
        let e = monotonicity_threshold(1, (1, 0), (2, 0)).unwrap_err();
        assert_eq!(e, MtError::NotLexGreater(1, 0, 2, 0));
        let _ = BigRational::from_integer(BigInt::from(1));
    }
}
