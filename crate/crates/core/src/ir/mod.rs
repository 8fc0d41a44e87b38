//! Core intermediate representation: variables, exact polynomials, guard
//! formulas, transitions, programs, states and the weakly-monotonic bound
//! algebra, plus the graph utilities the analysis driver relies on.

mod bound;
mod formula;
mod graph;
mod poly;
mod program;

pub use bound::{BoundExpr, ComplexityClass, NatOmega};
pub use formula::{Atom, Formula};
pub use graph::{entry_transitions, on_cycle, sccs_topological, GraphError};
pub use poly::{Monomial, Polynomial};
pub use program::{
    apply_update_formula, apply_update_poly, Program, ProgramBuilder, State, Transition, VarKind,
};

/// Index of a variable in a program's variable table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

/// Index of a location in a program's location table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocId(pub u32);

/// Index of a transition in a program's transition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransId(pub u32);

impl std::fmt::Display for VarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}
