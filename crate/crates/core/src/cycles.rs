//! Local runtime bounds for simple cycles. A simple cycle — pairwise
//! distinct locations, no temporaries — iterates in exactly one way, so
//! chaining its transitions from an entry's target yields a self-loop whose
//! bound applies to every member transition. A partial final traversal can
//! execute each transition once more, hence the +1 on chained cycles;
//! genuine self-loops take the direct route without it.

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{BoundExpr, LocId, Program, TransId, Transition};
use crate::smt::SmtCtx;
use crate::twn::{chain, ChainGuard};
use crate::twn_bounds::{local_bound_twn, LocalTwnDerivation};

/// A simple cycle, stored in traversal order starting at the transition it
/// was searched for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleCycle {
    pub transitions: Vec<TransId>,
}

impl SimpleCycle {
    pub fn set(&self) -> BTreeSet<TransId> {
        self.transitions.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// All simple cycles through `containing` of length at most `max_len`, by
/// depth-first search over the location graph with distinct-location
/// pruning. Deterministic: neighbors are explored in transition-id order
/// and the result is sorted by length, then id sequence.
pub fn enumerate_simple_cycles(
    program: &Program,
    containing: TransId,
    max_len: usize,
) -> Vec<SimpleCycle> {
    assert!(max_len >= 1);
    let start = program.transition(containing);
    if start.has_temp_vars(program) {
        return Vec::new();
    }
    let mut out = Vec::new();
    if start.src == start.tgt {
        out.push(SimpleCycle {
            transitions: vec![containing],
        });
        return out;
    }
    // Walk from the target of `containing` back to its source; locations on
    // the way must be fresh.
    let mut path: Vec<TransId> = vec![containing];
    let mut visited: BTreeSet<LocId> = BTreeSet::from([start.src, start.tgt]);
    dfs(
        program,
        start.src,
        start.tgt,
        max_len,
        &mut path,
        &mut visited,
        &mut out,
    );
    out.sort_by(|a, b| {
        a.transitions
            .len()
            .cmp(&b.transitions.len())
            .then_with(|| a.transitions.cmp(&b.transitions))
    });
    out
}

fn dfs(
    program: &Program,
    home: LocId,
    at: LocId,
    max_len: usize,
    path: &mut Vec<TransId>,
    visited: &mut BTreeSet<LocId>,
    out: &mut Vec<SimpleCycle>,
) {
    if path.len() > max_len {
        return;
    }
    for t in program.transitions_from(at) {
        if t.has_temp_vars(program) {
            continue;
        }
        if t.tgt == home {
            let mut cycle = path.clone();
            cycle.push(t.id);
            if cycle.len() <= max_len {
                out.push(SimpleCycle { transitions: cycle });
            }
            continue;
        }
        if visited.contains(&t.tgt) {
            continue;
        }
        visited.insert(t.tgt);
        path.push(t.id);
        dfs(program, home, t.tgt, max_len, path, visited, out);
        path.pop();
        visited.remove(&t.tgt);
    }
}

/// Per-entry local runtime bounds for a simple cycle: chain the cycle
/// starting at the entry's target, recognize the chained self-loop as a
/// twn-loop and bound it; entries whose chained loop resists stay at omega.
pub fn cycle_local_bounds(
    program: &Program,
    cycle: &SimpleCycle,
    chain_guard: ChainGuard,
    smt: &SmtCtx,
) -> BTreeMap<TransId, (BoundExpr, Option<LocalTwnDerivation>)> {
    let set = cycle.set();
    let entries = crate::ir::entry_transitions(program, &set).unwrap_or_default();
    let mut out = BTreeMap::new();
    for r in entries {
        let entry = program.transition(r);
        let bound = entry_bound(program, cycle, entry, chain_guard, smt);
        out.insert(r, bound);
    }
    out
}

fn entry_bound(
    program: &Program,
    cycle: &SimpleCycle,
    entry: &Transition,
    chain_guard: ChainGuard,
    smt: &SmtCtx,
) -> (BoundExpr, Option<LocalTwnDerivation>) {
    // Rotate the cycle to start at the entry's target location.
    let Some(offset) = cycle
        .transitions
        .iter()
        .position(|t| program.transition(*t).src == entry.tgt)
    else {
        return (BoundExpr::omega(), None);
    };
    let rotated: Vec<&Transition> = (0..cycle.len())
        .map(|i| program.transition(cycle.transitions[(offset + i) % cycle.len()]))
        .collect();
    if cycle.len() == 1 {
        // A self-loop is handled directly, with no partial-traversal slack.
        return local_bound_twn(program, rotated[0], entry, chain_guard, smt);
    }
    let Ok(chained) = chain(program, &rotated) else {
        return (BoundExpr::omega(), None);
    };
    debug_assert_eq!(chained.src, chained.tgt);
    let (bound, derivation) = local_bound_twn(program, &chained, entry, chain_guard, smt);
    if bound.is_omega() {
        return (bound, derivation);
    }
    (bound.add(&BoundExpr::constant(1)), derivation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{explore_runs, ExploreCaps};
    use crate::ir::{Formula, Polynomial, ProgramBuilder, State};
    use num_bigint::BigInt;

    /// Two-location split of the non-linear self-loop, plus entries.
    fn split_loop_program() -> Program {
        let mut b = ProgramBuilder::new();
        let x1 = b.program_var("x1");
        let x2 = b.program_var("x2");
        let x3 = b.program_var("x3");
        let l0 = b.location("l0");
        let l3 = b.location("l3");
        let l4 = b.location("l4");
        b.initial(l0);
        b.transition(
            "t1",
            l0,
            l3,
            Formula::gt(Polynomial::var(x3), Polynomial::zero()),
            BTreeMap::new(),
        );
        let guard = Formula::and(vec![
            Formula::lt(
                Polynomial::var(x1).pow(2).add(&Polynomial::var(x3).pow(5)),
                Polynomial::var(x2),
            ),
            Formula::ne(Polynomial::var(x1), Polynomial::zero()),
        ]);
        b.transition(
            "t5a",
            l3,
            l4,
            guard,
            BTreeMap::from([(x1, Polynomial::from_int(-2).mul(&Polynomial::var(x1)))]),
        );
        b.transition(
            "t5b",
            l4,
            l3,
            Formula::tt(),
            BTreeMap::from([(
                x2,
                Polynomial::from_int(3)
                    .mul(&Polynomial::var(x2))
                    .sub(&Polynomial::from_int(2).mul(&Polynomial::var(x3).pow(3))),
            )]),
        );
        b.build().unwrap()
    }

    #[test]
    fn finds_the_two_step_cycle() {
        let p = split_loop_program();
        let cycles = enumerate_simple_cycles(&p, TransId(1), 4);
        assert_eq!(
            cycles,
            vec![SimpleCycle {
                transitions: vec![TransId(1), TransId(2)]
            }]
        );
    }

    #[test]
    fn self_loop_is_a_length_one_cycle() {
        let p = crate::twn::tests::nonlinear_loop_program();
        let cycles = enumerate_simple_cycles(&p, TransId(1), 6);
        assert_eq!(
            cycles,
            vec![SimpleCycle {
                transitions: vec![TransId(1)]
            }]
        );
    }

    #[test]
    fn temporaries_exclude_cycles() {
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let tv = b.temp_var("tmp");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), BTreeMap::new());
        b.transition(
            "t",
            l1,
            l1,
            Formula::gt(Polynomial::var(tv), Polynomial::zero()),
            BTreeMap::from([(x, Polynomial::var(x).sub(&Polynomial::one()))]),
        );
        let p = b.build().unwrap();
        assert!(enumerate_simple_cycles(&p, TransId(1), 6).is_empty());
    }

    #[test]
    fn chained_cycle_bound_matches_split_loop() {
        // Entering via x3 > 0 the bound is 1 + (4*x2 + 3) = 4*x2 + 4.
        let p = split_loop_program();
        let smt = SmtCtx::builtin_only();
        let cycle = SimpleCycle {
            transitions: vec![TransId(1), TransId(2)],
        };
        let bounds = cycle_local_bounds(&p, &cycle, ChainGuard::Simplified, &smt);
        let x2 = p.var_by_name("x2").unwrap();
        let expected = BoundExpr::constant(4)
            .mul(&BoundExpr::var(x2))
            .add(&BoundExpr::constant(4));
        assert_eq!(bounds[&TransId(0)].0, expected);
    }

    #[test]
    fn unchainable_cycle_keeps_omega() {
        // x <- x + y then y <- x + y compose into mutually dependent
        // updates, which no variable order makes triangular.
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let y = b.program_var("y");
        let l0 = b.location("l0");
        let la = b.location("la");
        let lb = b.location("lb");
        b.initial(l0);
        b.transition("t0", l0, la, Formula::tt(), BTreeMap::new());
        b.transition(
            "ta",
            la,
            lb,
            Formula::gt(Polynomial::var(x), Polynomial::zero()),
            BTreeMap::from([(x, Polynomial::var(x).add(&Polynomial::var(y)))]),
        );
        b.transition(
            "tb",
            lb,
            la,
            Formula::tt(),
            BTreeMap::from([(y, Polynomial::var(x).add(&Polynomial::var(y)))]),
        );
        let p = b.build().unwrap();
        let smt = SmtCtx::builtin_only();
        let cycle = SimpleCycle {
            transitions: vec![TransId(1), TransId(2)],
        };
        let bounds = cycle_local_bounds(&p, &cycle, ChainGuard::Simplified, &smt);
        assert!(bounds.values().all(|(b, _)| b.is_omega()));
    }

    #[test]
    fn partial_traversal_needs_the_plus_one() {
        // A two-transition cycle whose guard dies mid-cycle: the first
        // transition fires once more than the full cycle count.
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let l0 = b.location("l0");
        let la = b.location("la");
        let lb = b.location("lb");
        b.initial(l0);
        b.transition("t0", l0, la, Formula::tt(), BTreeMap::new());
        b.transition(
            "ta",
            la,
            lb,
            Formula::gt(Polynomial::var(x), Polynomial::zero()),
            BTreeMap::from([(x, Polynomial::var(x).sub(&Polynomial::one()))]),
        );
        b.transition(
            "tb",
            lb,
            la,
            Formula::gt(Polynomial::var(x), Polynomial::zero()),
            BTreeMap::new(),
        );
        let p = b.build().unwrap();

        // From x = 1: ta fires once, tb never; the chained loop from la
        // iterates zero times.
        let stats = explore_runs(
            &p,
            &State::from([(x, BigInt::from(1))]),
            ExploreCaps::default(),
        );
        assert_eq!(stats.count(TransId(1)), 1);
        assert_eq!(stats.count(TransId(2)), 0);

        let smt = SmtCtx::builtin_only();
        let cycle = SimpleCycle {
            transitions: vec![TransId(1), TransId(2)],
        };
        let bounds = cycle_local_bounds(&p, &cycle, ChainGuard::Simplified, &smt);
        let (bound, _) = &bounds[&TransId(0)];
        assert!(!bound.is_omega());
        // The bound covers the partial traversal: at x = 1 it allows >= 1.
        let allowed = bound.eval_state(&State::from([(x, BigInt::from(1))]));
        assert!(allowed.ge(&crate::ir::NatOmega::from_u64(1)));
    }

    #[test]
    fn oracle_never_exceeds_cycle_bounds() {
        // For each entry and initial state, interp counts of each cycle
        // transition stay within the computed per-entry bound.
        let p = split_loop_program();
        let smt = SmtCtx::builtin_only();
        let cycle = SimpleCycle {
            transitions: vec![TransId(1), TransId(2)],
        };
        let bounds = cycle_local_bounds(&p, &cycle, ChainGuard::Simplified, &smt);
        let (bound, _) = &bounds[&TransId(0)];
        for sigma0 in crate::interp::state_grid(&p, 2) {
            let stats = explore_runs(&p, &sigma0, ExploreCaps::default());
            assert!(!stats.truncated);
            // The single entry fires at most once here, so the local bound
            // applies to the full counts directly.
            let allowed = bound.eval_state(&sigma0);
            for t in [TransId(1), TransId(2)] {
                assert!(
                    allowed.ge(&crate::ir::NatOmega::from_u64(stats.count(t))),
                    "cycle bound violated at {sigma0:?}"
                );
            }
        }
    }
}
