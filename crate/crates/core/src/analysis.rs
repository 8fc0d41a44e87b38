//! The analysis driver: initialize global bounds, walk the strongly
//! connected components in topological order, compute local bounds with
//! ranking functions first and the twn machinery on whatever stays
//! unbounded, and lift every local bound to a global one through entry
//! transitions and size bounds. Two full passes, then the per-transition
//! table is summed into the program bound.

use std::collections::{BTreeMap, BTreeSet};

use crate::cycles::{cycle_local_bounds, enumerate_simple_cycles};
use crate::invariants::{location_invariants, LocationInvariants};
use crate::ir::{
    entry_transitions, sccs_topological, BoundExpr, ComplexityClass, Program, TransId,
};
use crate::rank::{rf_local_bounds, synthesize_linear_rf};
use crate::sizebounds::{compute_size_bounds, SizeBoundTable};
use crate::smt::{SmtCtx, SolverConfig};
use crate::twn::ChainGuard;

/// Which local-bound techniques run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Technique {
    Twn,
    Rf,
    TwnRf,
}

impl Technique {
    fn uses_rf(self) -> bool {
        matches!(self, Technique::Rf | Technique::TwnRf)
    }
    fn uses_twn(self) -> bool {
        matches!(self, Technique::Twn | Technique::TwnRf)
    }
}

impl std::str::FromStr for Technique {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "twn" => Ok(Technique::Twn),
            "rf" => Ok(Technique::Rf),
            "twn+rf" | "rf+twn" => Ok(Technique::TwnRf),
            other => Err(format!("unknown technique '{other}' (use twn, rf, twn+rf)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub technique: Technique,
    pub solver: SolverConfig,
    pub cycle_max_len: usize,
    pub full_chained_guard: bool,
    pub proof: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            technique: Technique::TwnRf,
            solver: SolverConfig::default(),
            cycle_max_len: 6,
            full_chained_guard: false,
            proof: false,
        }
    }
}

impl AnalysisConfig {
    /// Configuration without an external solver, for tests.
    pub fn builtin_only() -> Self {
        AnalysisConfig {
            solver: SolverConfig::disabled(),
            ..Default::default()
        }
    }

    fn chain_guard(&self) -> ChainGuard {
        if self.full_chained_guard {
            ChainGuard::Full
        } else {
            ChainGuard::Simplified
        }
    }
}

/// Final analysis output.
#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub rbglo: BTreeMap<TransId, BoundExpr>,
    pub size_bounds: SizeBoundTable,
    pub overall: BoundExpr,
    pub class: ComplexityClass,
    pub log: Vec<String>,
}

/// Lift a local runtime bound to global bounds: each counted transition is
/// bounded by the sum over entries of "times the entry fires" times "the
/// local bound with entry sizes substituted in". The new bound is kept only
/// when it improves the asymptotic class.
#[allow(clippy::too_many_arguments)]
pub fn lift_local_bounds(
    program: &Program,
    rbglo: &mut BTreeMap<TransId, BoundExpr>,
    sb: &SizeBoundTable,
    t_prime: &BTreeSet<TransId>,
    t_strict: &BTreeSet<TransId>,
    rbloc: &BTreeMap<TransId, BoundExpr>,
    log: &mut Vec<String>,
    proof: bool,
) -> bool {
    for t in t_prime {
        assert!(
            program.transition(*t).src != program.initial,
            "lifting requires a subprogram without initial transitions"
        );
    }
    let entries = entry_transitions(program, t_prime).expect("non-empty subprogram");
    let mut lifted = BoundExpr::zero();
    for r in &entries {
        let outer = rbglo.get(r).cloned().unwrap_or_else(BoundExpr::omega);
        let local = rbloc.get(r).cloned().unwrap_or_else(BoundExpr::omega);
        let inner = local.subst(&sb.subst_map(program, *r));
        lifted = lifted.add(&outer.mul(&inner));
    }
    let mut changed = false;
    for t in t_strict {
        let old = rbglo.get(t).cloned().unwrap_or_else(BoundExpr::omega);
        if lifted.classify() < old.classify() {
            if proof {
                log.push(format!(
                    "lift: {} <- {} (was {})",
                    program.transition(*t).name,
                    lifted.display(&program.namer()),
                    old.display(&program.namer()),
                ));
            }
            rbglo.insert(*t, lifted.clone());
            changed = true;
        }
    }
    changed
}

/// Run the full analysis on a program.
pub fn analyze_program(program: &Program, config: &AnalysisConfig) -> AnalysisResult {
    let smt = SmtCtx::new(config.solver.clone());
    let invariants = location_invariants(program);
    let units = sccs_topological(program);
    let mut log = Vec::new();

    // Initial bounds: transitions outside all cycles fire at most once.
    let mut rbglo: BTreeMap<TransId, BoundExpr> = BTreeMap::new();
    for unit in &units {
        let cyclic = unit_is_cyclic(program, unit);
        for t in unit {
            rbglo.insert(
                *t,
                if cyclic {
                    BoundExpr::omega()
                } else {
                    BoundExpr::constant(1)
                },
            );
        }
    }
    let mut sb = compute_size_bounds(program, &invariants, &rbglo);

    for pass in 0..2 {
        for unit in &units {
            if !unit_is_cyclic(program, unit) {
                continue;
            }
            if config.technique.uses_rf() {
                rf_phase(
                    program, &invariants, &sb, &mut rbglo, unit, &mut log, config.proof,
                );
            }
            if config.technique.uses_twn() {
                twn_phase(
                    program, &smt, &sb, &mut rbglo, unit, config, &mut log,
                );
            }
            sb = compute_size_bounds(program, &invariants, &rbglo);
        }
        if config.proof {
            log.push(format!("pass {} complete", pass + 1));
        }
    }

    let overall = BoundExpr::sum(rbglo.values().cloned());
    let class = overall.classify();
    AnalysisResult {
        rbglo,
        size_bounds: sb,
        overall,
        class,
    log,
    }
}

fn unit_is_cyclic(program: &Program, unit: &BTreeSet<TransId>) -> bool {
    unit.len() > 1 || unit.iter().any(|t| {
        let tr = program.transition(*t);
        tr.src == tr.tgt
    })
}

fn unbounded_of(rbglo: &BTreeMap<TransId, BoundExpr>, set: &BTreeSet<TransId>) -> BTreeSet<TransId> {
    set.iter()
        .filter(|t| {
            rbglo
                .get(t)
                .map(|b| b.classify() == ComplexityClass::Infinite)
                .unwrap_or(true)
        })
        .copied()
        .collect()
}

/// Ranking functions over the component: first the whole unbounded set at
/// once, then one transition at a time; then the same against the
/// subprogram narrowed to the still-unbounded transitions.
fn rf_phase(
    program: &Program,
    invariants: &LocationInvariants,
    sb: &SizeBoundTable,
    rbglo: &mut BTreeMap<TransId, BoundExpr>,
    scc: &BTreeSet<TransId>,
    log: &mut Vec<String>,
    proof: bool,
) {
    // The second round narrows the subprogram to what the first round
    // left unbounded; its local runs are shorter and easier to bound.
    for narrow in [false, true] {
        let t_prime = if narrow {
            unbounded_of(rbglo, scc)
        } else {
            scc.clone()
        };
        if t_prime.is_empty() {
            continue;
        }
        let unbounded = unbounded_of(rbglo, &t_prime);
        if unbounded.is_empty() {
            continue;
        }
        let mut targets: Vec<BTreeSet<TransId>> = vec![unbounded.clone()];
        targets.extend(unbounded.iter().map(|t| BTreeSet::from([*t])));
        for t_strict in targets {
            if unbounded_of(rbglo, &t_strict).is_empty() {
                continue;
            }
            let Some(rf) = synthesize_linear_rf(program, invariants, &t_prime, &t_strict) else {
                continue;
            };
            let entries = entry_transitions(program, &t_prime).expect("non-empty");
            let rbloc = rf_local_bounds(program, &rf, &entries);
            if proof {
                for (r, b) in &rbloc {
                    log.push(format!(
                        "rf: local bound via {} for {:?}: {}",
                        program.transition(*r).name,
                        t_strict
                            .iter()
                            .map(|t| program.transition(*t).name.clone())
                            .collect::<Vec<_>>(),
                        b.display(&program.namer()),
                    ));
                }
            }
            lift_local_bounds(program, rbglo, sb, &t_prime, &t_strict, &rbloc, log, proof);
        }
    }
}

/// Twn-cycle search for each still-unbounded transition: among the simple
/// cycles through it, pick the one whose lifted bound has the smallest
/// asymptotic class (ties: shorter cycle, then id order), and lift it for
/// every member of the cycle.
fn twn_phase(
    program: &Program,
    smt: &SmtCtx,
    sb: &SizeBoundTable,
    rbglo: &mut BTreeMap<TransId, BoundExpr>,
    scc: &BTreeSet<TransId>,
    config: &AnalysisConfig,
    log: &mut Vec<String>,
) {
    let todo: Vec<TransId> = unbounded_of(rbglo, scc).into_iter().collect();
    for t in todo {
        if rbglo[&t].classify() != ComplexityClass::Infinite {
            continue; // bounded by an earlier cycle in this phase
        }
        let candidates = enumerate_simple_cycles(program, t, config.cycle_max_len);
        let mut best: Option<(ComplexityClass, usize, crate::cycles::SimpleCycle, BTreeMap<TransId, BoundExpr>)> =
            None;
        for cycle in candidates {
            if !cycle.set().is_subset(scc) {
                continue;
            }
            let with_derivations = cycle_local_bounds(program, &cycle, config.chain_guard(), smt);
            let rbloc: BTreeMap<TransId, BoundExpr> = with_derivations
                .iter()
                .map(|(r, (b, _))| (*r, b.clone()))
                .collect();
            if config.proof {
                for (r, (b, derivation)) in &with_derivations {
                    let invariant = derivation
                        .as_ref()
                        .map(|d| format!("{}", d.invariant.display(&program.namer())))
                        .unwrap_or_else(|| "-".to_string());
                    log.push(format!(
                        "twn: cycle [{}] via {}: bound {} (invariant {})",
                        cycle
                            .transitions
                            .iter()
                            .map(|c| program.transition(*c).name.clone())
                            .collect::<Vec<_>>()
                            .join(", "),
                        program.transition(*r).name,
                        b.display(&program.namer()),
                        invariant,
                    ));
                }
            }
            // Score: the class of the would-be lifted bound.
            let mut lifted = BoundExpr::zero();
            for (r, local) in &rbloc {
                let outer = rbglo.get(r).cloned().unwrap_or_else(BoundExpr::omega);
                lifted = lifted.add(&outer.mul(&local.subst(&sb.subst_map(program, *r))));
            }
            let score = (lifted.classify(), cycle.len());
            let better = match &best {
                None => true,
                Some((c, l, existing, _)) => {
                    score < (*c, *l)
                        || (score == (*c, *l) && cycle.transitions < existing.transitions)
                }
            };
            if better {
                best = Some((score.0, score.1, cycle, rbloc));
            }
        }
        if let Some((class, _, cycle, rbloc)) = best {
            if class == ComplexityClass::Infinite {
                continue;
            }
            let set = cycle.set();
            lift_local_bounds(program, rbglo, sb, &set, &set, &rbloc, log, config.proof);
        }
    }
}
