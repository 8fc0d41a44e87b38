//! Syntactic location invariants: a greatest-fixpoint propagation of guard
//! conjuncts along the control flow. A fact holds at a location when every
//! incoming transition establishes it (from its own guard or its source's
//! facts) and does not touch its variables. The result strengthens guards
//! for ranking-function synthesis and size bounds.

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{Atom, Formula, LocId, Program, VarId};

/// Per-location invariant atoms, each valid in every reachable state at the
/// location.
#[derive(Debug, Clone, Default)]
pub struct LocationInvariants {
    facts: BTreeMap<LocId, Vec<Atom>>,
}

impl LocationInvariants {
    pub fn at(&self, loc: LocId) -> &[Atom] {
        self.facts.get(&loc).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The transition's guard strengthened with its source's invariants.
    pub fn enriched_guard(&self, program: &Program, t: &crate::ir::Transition) -> Formula {
        let mut parts = vec![t.guard.clone()];
        for a in self.at(t.src) {
            parts.push(Formula::Atom(a.clone()));
        }
        let _ = program;
        Formula::and(parts)
    }
}

/// Compute invariants by descending iteration from the optimistic "all
/// candidate facts" assignment. Soundness is by induction on run prefixes:
/// the initial location carries no facts, and a fact survives a step only
/// if the step's guard or source facts establish it and the update leaves
/// its variables alone.
pub fn location_invariants(program: &Program) -> LocationInvariants {
    // Candidate universe: every guard conjunct atom in the program.
    let mut universe: Vec<Atom> = Vec::new();
    for t in &program.transitions {
        for a in t.guard.conjunct_atoms() {
            if !universe.contains(a) {
                universe.push(a.clone());
            }
        }
    }

    let mut facts: BTreeMap<LocId, BTreeSet<usize>> = BTreeMap::new();
    let all: BTreeSet<usize> = (0..universe.len()).collect();
    for l in 0..program.loc_count() {
        let l = LocId(l as u32);
        if l == program.initial {
            facts.insert(l, BTreeSet::new());
        } else {
            facts.insert(l, all.clone());
        }
    }

    loop {
        let mut changed = false;
        for l in 0..program.loc_count() {
            let l = LocId(l as u32);
            if l == program.initial {
                continue;
            }
            let mut meet: Option<BTreeSet<usize>> = None;
            for t in program.transitions_into(l) {
                let modified: BTreeSet<VarId> = t.modified_vars().into_iter().collect();
                let mut establishes: BTreeSet<usize> = facts[&t.src].clone();
                for a in t.guard.conjunct_atoms() {
                    if let Some(i) = universe.iter().position(|u| u == a) {
                        establishes.insert(i);
                    }
                }
                establishes.retain(|i| {
                    universe[*i]
                        .poly()
                        .vars()
                        .all(|v| !modified.contains(&v))
                });
                meet = Some(match meet {
                    None => establishes,
                    Some(acc) => acc.intersection(&establishes).copied().collect(),
                });
            }
            let next = meet.unwrap_or_default();
            if next != facts[&l] {
                facts.insert(l, next);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    LocationInvariants {
        facts: facts
            .into_iter()
            .map(|(l, idxs)| (l, idxs.into_iter().map(|i| universe[i].clone()).collect()))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Polynomial, ProgramBuilder, TransId};
    use num_bigint::BigInt;
    use std::collections::BTreeMap;

    /// Shape of the running example: facts about x4 survive the loop.
    #[test]
    fn propagates_loop_invariant_facts() {
        let mut b = ProgramBuilder::new();
        let x3 = b.program_var("x3");
        let x4 = b.program_var("x4");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        let l2 = b.location("l2");
        let l3 = b.location("l3");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), BTreeMap::new());
        b.transition(
            "t1",
            l1,
            l3,
            Formula::and(vec![
                Formula::gt(Polynomial::var(x3), Polynomial::zero()),
                Formula::gt(Polynomial::var(x4), Polynomial::zero()),
            ]),
            BTreeMap::new(),
        );
        b.transition(
            "t2",
            l3,
            l1,
            Formula::tt(),
            BTreeMap::from([(x4, Polynomial::var(x4).sub(&Polynomial::one()))]),
        );
        b.transition(
            "t3",
            l1,
            l2,
            Formula::and(vec![
                Formula::ge(Polynomial::var(x3), Polynomial::from_int(-5)),
                Formula::le(Polynomial::var(x3), Polynomial::from_int(5)),
            ]),
            BTreeMap::new(),
        );
        b.transition(
            "t4",
            l2,
            l3,
            Formula::gt(Polynomial::var(x4), Polynomial::zero()),
            BTreeMap::new(),
        );
        b.transition("t5", l3, l3, Formula::tt(), BTreeMap::new());
        let p = b.build().unwrap();
        let inv = location_invariants(&p);

        // l3 is reached via t1 (x3>0, x4>0) or t4 (x4>0): only x4>0 is
        // common, and the self-loop preserves it.
        let x4_pos = Formula::gt(Polynomial::var(x4), Polynomial::zero());
        let guard_t2 = inv.enriched_guard(&p, p.transition(TransId(2)));
        assert_eq!(guard_t2, x4_pos);
        // l2 carries the range facts of t3 but nothing about x4.
        let at_l2 = inv.at(l2);
        assert_eq!(at_l2.len(), 2);
        let st = crate::ir::State::from([(x3, BigInt::from(9)), (x4, BigInt::from(1))]);
        assert!(at_l2.iter().any(|a| !a.holds(&st)));
        // l1 has no facts: the initial transition establishes nothing.
        assert!(inv.at(l1).is_empty());
        // Every invariant is sound on exhaustively explored states.
        for sigma in crate::interp::state_grid(&p, 2) {
            soundness_on_runs(&p, &inv, &sigma);
        }
    }

    /// Walk all runs and assert each visited configuration satisfies its
    /// location's facts.
    fn soundness_on_runs(p: &Program, inv: &LocationInvariants, sigma0: &crate::ir::State) {
        fn go(
            p: &Program,
            inv: &LocationInvariants,
            loc: LocId,
            state: &crate::ir::State,
            depth: usize,
        ) {
            for a in inv.at(loc) {
                assert!(a.holds(state), "invariant violated at {}", p.loc_name(loc));
            }
            if depth == 0 {
                return;
            }
            for t in p.transitions_from(loc) {
                if let Some(next) = crate::interp::eval_step(p, t, state, &BTreeMap::new()) {
                    go(p, inv, t.tgt, &next, depth - 1);
                }
            }
        }
        go(p, inv, p.initial, sigma0, 12);
    }
}
