//! Three-valued satisfiability and entailment over (possibly non-linear)
//! integer arithmetic.
//!
//! Queries are answered by a sound built-in procedure first — a small-model
//! search for SAT and a Fourier-Motzkin refutation of a linearized monomial
//! abstraction for UNSAT — and fall through to an external SMT-LIB2 solver
//! subprocess when the built-in backend is inconclusive. Every SAT model is
//! re-checked by direct evaluation before it is reported, and UNSAT is only
//! reported when one of the backends proves it, so `Unknown` is the only
//! possible degradation.

mod builtin;
mod external;

use std::collections::BTreeMap;

use crate::ir::{Formula, State, VarId};

pub use external::SolverConfig;

/// Result of a satisfiability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// Satisfiable, with a model that has been verified by evaluation.
    Sat(State),
    /// Proven unsatisfiable.
    Unsat,
    Unknown,
}

/// Result of an entailment check; `Proven` is sound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entailment {
    Proven,
    Unknown,
}

/// Solver facade shared by all analyses.
pub struct SmtCtx {
    config: SolverConfig,
    external_enabled: bool,
}

impl SmtCtx {
    pub fn new(config: SolverConfig) -> Self {
        SmtCtx {
            external_enabled: config.command.is_some(),
            config,
        }
    }

    /// A context that never spawns an external process.
    pub fn builtin_only() -> Self {
        SmtCtx::new(SolverConfig::disabled())
    }

    /// Satisfiability of a quantifier-free formula over integer variables.
    pub fn check_sat(&self, formula: &Formula) -> SatResult {
        match formula {
            Formula::True => return SatResult::Sat(State::new()),
            Formula::False => return SatResult::Unsat,
            _ => {}
        }
        match builtin::check_sat(formula) {
            SatResult::Unknown => {}
            decided => return decided,
        }
        if self.external_enabled {
            if let Some(result) = external::check_sat(&self.config, formula) {
                // Trust unsat; verify models by evaluation.
                match result {
                    SatResult::Sat(model) => {
                        let model = complete_model(formula, model);
                        if formula.holds(&model) {
                            return SatResult::Sat(model);
                        }
                    }
                    SatResult::Unsat => return SatResult::Unsat,
                    SatResult::Unknown => {}
                }
            }
        }
        SatResult::Unknown
    }

    /// `Proven` iff `premise && !conclusion` is unsatisfiable.
    pub fn entails(&self, premise: &Formula, conclusion: &Formula) -> Entailment {
        let query = Formula::and(vec![premise.clone(), conclusion.negated()]);
        match self.check_sat(&query) {
            SatResult::Unsat => Entailment::Proven,
            _ => Entailment::Unknown,
        }
    }

    /// Whether the external backend is configured (used by differential
    /// tests that compare the two backends).
    pub fn has_external(&self) -> bool {
        self.external_enabled && external::probe(&self.config)
    }
}

impl Default for SmtCtx {
    fn default() -> Self {
        SmtCtx::new(SolverConfig::default())
    }
}

/// Extend a partial model with zeros for the formula variables it misses.
fn complete_model(formula: &Formula, mut model: State) -> State {
    for v in formula.vars() {
        model.entry(v).or_insert_with(|| 0.into());
    }
    model
}

/// All integer assignments of `vars` over `[-range, range]`, for the model
/// search and for sampled property checks.
pub fn assignment_grid(vars: &[VarId], range: i64) -> Vec<State> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for base in &out {
            for x in -range..=range {
                let mut m = base.clone();
                m.insert(*v, num_bigint::BigInt::from(x));
                next.push(m);
            }
        }
        out = next;
    }
    out
}
