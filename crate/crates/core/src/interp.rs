//! Reference semantics and an exhaustive bounded-exploration oracle.
//!
//! `explore_runs` enumerates every run from an initial configuration, fully
//! branching over enabled transitions and over all assignments of temporary
//! variables within a finite range. The per-transition maxima over all runs
//! realize the suprema that runtime bounds must dominate, so the oracle can
//! refute (or corroborate) any computed bound at desk scale.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::ir::{BoundExpr, NatOmega, Program, State, TransId, Transition, VarKind};

/// Exploration caps. `depth_cap` limits the length of a single run,
/// `node_budget` the total number of evaluation steps, and `value_bits`
/// the magnitude of intermediate values (squaring updates double the bit
/// length every step, so unbounded growth would exhaust memory long
/// before the step caps bite).
#[derive(Debug, Clone, Copy)]
pub struct ExploreCaps {
    pub temp_min: i64,
    pub temp_max: i64,
    pub depth_cap: usize,
    pub node_budget: usize,
    pub value_bits: u64,
}

impl Default for ExploreCaps {
    fn default() -> Self {
        ExploreCaps {
            temp_min: -2,
            temp_max: 2,
            depth_cap: 10_000,
            node_budget: 1_000_000,
            value_bits: 512,
        }
    }
}

/// Aggregated exploration result: per-transition use-count suprema over all
/// explored runs, the number of maximal runs, and whether any cap was hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStats {
    pub max_counts: BTreeMap<TransId, u64>,
    pub runs: u64,
    pub truncated: bool,
}

impl RunStats {
    pub fn count(&self, t: TransId) -> u64 {
        self.max_counts.get(&t).copied().unwrap_or(0)
    }
}

/// Soundness verdict of a bound table against one exploration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// A transition whose observed count exceeds its evaluated bound.
    Fail { transition: TransId, observed: u64 },
    /// The exploration was truncated, so no positive claim is possible.
    Inconclusive,
}

/// One evaluation step: fire `t` from `state` under an assignment of its
/// temporaries. Returns the post-state restricted to program variables, or
/// `None` when the guard is false.
pub fn eval_step(
    program: &Program,
    t: &Transition,
    state: &State,
    temps: &BTreeMap<crate::ir::VarId, BigInt>,
) -> Option<State> {
    let mut full = state.clone();
    for (v, x) in temps {
        full.insert(*v, x.clone());
    }
    if !t.guard.holds(&full) {
        return None;
    }
    let mut next = State::new();
    for v in program.pv() {
        let value = match t.update.get(v) {
            Some(p) => p.eval_int(&full),
            None => full
                .get(v)
                .cloned()
                .unwrap_or_else(|| panic!("state not total on {}", program.var_name(*v))),
        };
        next.insert(*v, value);
    }
    Some(next)
}

/// Breadth of temporaries: every assignment of `vars` over the cap range.
fn temp_assignments(
    vars: &[crate::ir::VarId],
    caps: &ExploreCaps,
) -> Vec<BTreeMap<crate::ir::VarId, BigInt>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for base in &out {
            for x in caps.temp_min..=caps.temp_max {
                let mut m = base.clone();
                m.insert(*v, BigInt::from(x));
                next.push(m);
            }
        }
        out = next;
    }
    out
}

struct Explorer<'a> {
    program: &'a Program,
    caps: ExploreCaps,
    nodes_left: usize,
    stats: RunStats,
    counts: BTreeMap<TransId, u64>,
}

impl Explorer<'_> {
    fn record_run(&mut self) {
        self.stats.runs += 1;
        for (t, c) in &self.counts {
            let entry = self.stats.max_counts.entry(*t).or_insert(0);
            if *c > *entry {
                *entry = *c;
            }
        }
    }

    fn explore(&mut self, loc: crate::ir::LocId, state: &State, depth: usize) {
        let mut successors = Vec::new();
        for t in self.program.transitions_from(loc) {
            let temps = t.temp_vars(self.program);
            for assignment in temp_assignments(&temps, &self.caps) {
                if self.nodes_left == 0 {
                    self.stats.truncated = true;
                    self.record_run();
                    return;
                }
                self.nodes_left -= 1;
                if let Some(next) = eval_step(self.program, t, state, &assignment) {
                    if next.values().any(|v| v.bits() > self.caps.value_bits) {
                        self.stats.truncated = true;
                        continue;
                    }
                    successors.push((t.id, t.tgt, next));
                }
            }
        }
        if successors.is_empty() {
            self.record_run();
            return;
        }
        if depth >= self.caps.depth_cap {
            // A run is still live at the depth cap.
            self.stats.truncated = true;
            self.record_run();
            return;
        }
        for (id, tgt, next) in successors {
            *self.counts.entry(id).or_insert(0) += 1;
            self.explore(tgt, &next, depth + 1);
            *self.counts.get_mut(&id).unwrap() -= 1;
        }
    }
}

/// Exhaustively explore all runs from `(l0, sigma0)`, branching over every
/// enabled transition and every temporary assignment within the caps.
pub fn explore_runs(program: &Program, sigma0: &State, caps: ExploreCaps) -> RunStats {
    let mut sigma0 = sigma0.clone();
    for v in program.pv() {
        assert!(
            sigma0.contains_key(v),
            "initial state not total on {}",
            program.var_name(*v)
        );
    }
    sigma0.retain(|v, _| program.kind(*v) == VarKind::Program);
    let mut explorer = Explorer {
        program,
        caps,
        nodes_left: caps.node_budget,
        stats: RunStats {
            max_counts: BTreeMap::new(),
            runs: 0,
            truncated: false,
        },
        counts: BTreeMap::new(),
    };
    explorer.explore(program.initial, &sigma0, 0);
    explorer.stats
}

/// PASS iff every observed transition count is dominated by its bound
/// evaluated at `|sigma0|`; truncated explorations are never PASS.
pub fn check_bound_soundness(
    program: &Program,
    bounds: &BTreeMap<TransId, BoundExpr>,
    sigma0: &State,
    caps: ExploreCaps,
) -> Verdict {
    let stats = explore_runs(program, sigma0, caps);
    if stats.truncated {
        return Verdict::Inconclusive;
    }
    for t in &program.transitions {
        let observed = stats.count(t.id);
        let bound = bounds.get(&t.id).cloned().unwrap_or_else(BoundExpr::omega);
        let allowed = bound.eval_state(sigma0);
        if !allowed.ge(&NatOmega::from_u64(observed)) {
            return Verdict::Fail {
                transition: t.id,
                observed,
            };
        }
    }
    Verdict::Pass
}

/// Iterate a deterministic self-loop from `state` and count how often its
/// guard admits another step, up to `cap` iterations. Returns `None` when
/// the loop is still running at the cap.
pub fn count_self_loop_iterations(
    program: &Program,
    t: &Transition,
    state: &State,
    cap: usize,
) -> Option<u64> {
    assert!(t.src == t.tgt, "not a self-loop");
    assert!(!t.has_temp_vars(program), "self-loop must be deterministic");
    let mut current = state.clone();
    let mut count = 0u64;
    for _ in 0..cap {
        if !t.guard.holds(&current) {
            return Some(count);
        }
        current = eval_step(program, t, &current, &BTreeMap::new()).unwrap();
        count += 1;
    }
    if t.guard.holds(&current) {
        None
    } else {
        Some(count)
    }
}

/// All initial states with program-variable components in `[-range, range]`.
pub fn state_grid(program: &Program, range: i64) -> Vec<State> {
    let mut out = vec![State::new()];
    for v in program.pv() {
        let mut next = Vec::with_capacity(out.len() * (2 * range as usize + 1));
        for base in &out {
            for x in -range..=range {
                let mut s = base.clone();
                s.insert(*v, BigInt::from(x));
                next.push(s);
            }
        }
        out = next;
    }
    out
}

/// Extract a small `i64` view of a state, for tests.
pub fn state_to_vec(program: &Program, s: &State) -> Vec<i64> {
    program
        .pv()
        .iter()
        .map(|v| s[v].to_i64().expect("state component too large"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Formula, Polynomial, ProgramBuilder};

    fn countdown() -> Program {
        // l1 self-loop: x > 0, x <- x - 1
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), BTreeMap::new());
        b.transition(
            "t",
            l1,
            l1,
            Formula::gt(Polynomial::var(x), Polynomial::zero()),
            BTreeMap::from([(x, Polynomial::var(x).sub(&Polynomial::one()))]),
        );
        b.build().unwrap()
    }

    #[test]
    fn countdown_counts() {
        let p = countdown();
        let x = p.var_by_name("x").unwrap();
        let stats = explore_runs(&p, &State::from([(x, BigInt::from(3))]), ExploreCaps::default());
        assert_eq!(stats.count(TransId(1)), 3);
        assert_eq!(stats.runs, 1);
        assert!(!stats.truncated);
    }

    #[test]
    fn unsatisfiable_guard_means_empty_runs() {
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        b.initial(l0);
        b.transition(
            "t0",
            l0,
            l1,
            Formula::and(vec![
                Formula::gt(Polynomial::var(x), Polynomial::zero()),
                Formula::lt(Polynomial::var(x), Polynomial::zero()),
            ]),
            BTreeMap::new(),
        );
        let p = b.build().unwrap();
        let stats = explore_runs(&p, &State::from([(x, BigInt::from(1))]), ExploreCaps::default());
        assert_eq!(stats.count(TransId(0)), 0);
        assert_eq!(stats.runs, 1);
        assert!(!stats.truncated);
    }

    #[test]
    fn depth_cap_truncates_and_verdict_is_inconclusive() {
        let p = countdown();
        let x = p.var_by_name("x").unwrap();
        let caps = ExploreCaps {
            depth_cap: 1,
            ..ExploreCaps::default()
        };
        let stats = explore_runs(&p, &State::from([(x, BigInt::from(3))]), caps);
        assert!(stats.truncated);
        let bounds = BTreeMap::from([
            (TransId(0), BoundExpr::constant(1)),
            (TransId(1), BoundExpr::var(x)),
        ]);
        assert_eq!(
            check_bound_soundness(&p, &bounds, &State::from([(x, BigInt::from(3))]), caps),
            Verdict::Inconclusive
        );
    }

    #[test]
    fn zero_bound_on_used_transition_fails() {
        let p = countdown();
        let x = p.var_by_name("x").unwrap();
        let bounds = BTreeMap::from([
            (TransId(0), BoundExpr::zero()),
            (TransId(1), BoundExpr::var(x)),
        ]);
        assert_eq!(
            check_bound_soundness(
                &p,
                &bounds,
                &State::from([(x, BigInt::from(1))]),
                ExploreCaps::default()
            ),
            Verdict::Fail {
                transition: TransId(0),
                observed: 1
            }
        );
    }

    #[test]
    fn sound_bounds_pass() {
        let p = countdown();
        let x = p.var_by_name("x").unwrap();
        let bounds = BTreeMap::from([
            (TransId(0), BoundExpr::constant(1)),
            (TransId(1), BoundExpr::var(x)),
        ]);
        for s in state_grid(&p, 3) {
            assert_eq!(
                check_bound_soundness(&p, &bounds, &s, ExploreCaps::default()),
                Verdict::Pass
            );
        }
    }

    #[test]
    fn temporaries_branch_fully() {
        // x <- t for a temporary t; from x=0 the counts reflect every choice.
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let tv = b.temp_var("tmp");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        let l2 = b.location("l2");
        b.initial(l0);
        b.transition(
            "t0",
            l0,
            l1,
            Formula::tt(),
            BTreeMap::from([(x, Polynomial::var(tv))]),
        );
        b.transition(
            "t1",
            l1,
            l2,
            Formula::gt(Polynomial::var(x), Polynomial::zero()),
            BTreeMap::new(),
        );
        let p = b.build().unwrap();
        let stats = explore_runs(&p, &State::from([(x, BigInt::from(0))]), ExploreCaps::default());
        // Five choices of tmp in [-2, 2]; only tmp in {1, 2} enables t1.
        assert_eq!(stats.runs, 5);
        assert_eq!(stats.count(TransId(0)), 1);
        assert_eq!(stats.count(TransId(1)), 1);
    }

    #[test]
    fn counts_monotone_in_caps() {
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
            Formula::and(vec![
                Formula::gt(Polynomial::var(x), Polynomial::zero()),
                Formula::gt(Polynomial::var(tv), Polynomial::zero()),
            ]),
            BTreeMap::from([(x, Polynomial::var(x).sub(&Polynomial::var(tv)))]),
        );
        let p = b.build().unwrap();
        let sigma0 = State::from([(x, BigInt::from(4))]);
        let small = explore_runs(
            &p,
            &sigma0,
            ExploreCaps { temp_min: 1, temp_max: 1, depth_cap: 2, ..ExploreCaps::default() },
        );
        let wide = explore_runs(
            &p,
            &sigma0,
            ExploreCaps { temp_min: -2, temp_max: 2, depth_cap: 2, ..ExploreCaps::default() },
        );
        let deep = explore_runs(
            &p,
            &sigma0,
            ExploreCaps { temp_min: -2, temp_max: 2, depth_cap: 100, ..ExploreCaps::default() },
        );
        for t in [TransId(0), TransId(1)] {
            assert!(wide.count(t) >= small.count(t));
            assert!(deep.count(t) >= wide.count(t));
        }
    }

    #[test]
    fn evaluation_trace_of_the_running_example() {
        // (l0,(5,7,1,1,3)) -t0-> (l1,.) -t1-> (l3,(1,3,1,1,3))
        // -t5^3-> (l3,(-8,55,1,1,3)) is a run prefix.
        let p = crate::its::parse_its(crate::its::tests::FIGURE_ONE).unwrap();
        let v = |n: &str| p.var_by_name(n).unwrap();
        let mut state = State::from([
            (v("x1"), BigInt::from(5)),
            (v("x2"), BigInt::from(7)),
            (v("x3"), BigInt::from(1)),
            (v("x4"), BigInt::from(1)),
            (v("x5"), BigInt::from(3)),
        ]);
        let step = |state: &State, idx: u32| {
            eval_step(&p, p.transition(TransId(idx)), state, &BTreeMap::new())
                .expect("transition enabled")
        };
        state = step(&state, 0);
        state = step(&state, 1);
        assert_eq!(state_to_vec(&p, &state), vec![1, 3, 1, 1, 3]);
        for _ in 0..3 {
            state = step(&state, 5);
        }
        assert_eq!(state_to_vec(&p, &state), vec![-8, 55, 1, 1, 3]);
        // The guard of t5 is now false, the run leaves via t2.
        assert!(eval_step(&p, p.transition(TransId(5)), &state, &BTreeMap::new()).is_none());
        assert!(eval_step(&p, p.transition(TransId(2)), &state, &BTreeMap::new()).is_some());
        // The exhaustive exploration sees at least this prefix.
        let sigma0 = State::from([
            (v("x1"), BigInt::from(5)),
            (v("x2"), BigInt::from(7)),
            (v("x3"), BigInt::from(1)),
            (v("x4"), BigInt::from(1)),
            (v("x5"), BigInt::from(3)),
        ]);
        let stats = explore_runs(&p, &sigma0, ExploreCaps::default());
        assert!(stats.count(TransId(5)) >= 3);
    }

    #[test]
    fn determinacy() {
        let p = countdown();
        let x = p.var_by_name("x").unwrap();
        let s = State::from([(x, BigInt::from(2))]);
        let a = explore_runs(&p, &s, ExploreCaps::default());
        let b = explore_runs(&p, &s, ExploreCaps::default());
        assert_eq!(a, b);
    }
}
