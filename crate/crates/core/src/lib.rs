//! Runtime-complexity analysis for integer transition systems.
//!
//! The crate infers per-transition upper bounds on how often each transition
//! of an integer program can fire, combining linear ranking functions with a
//! complete bound computation for triangular weakly non-linear loops, and
//! lifts the resulting local bounds to global runtime bounds. A bounded
//! exhaustive interpreter serves as an independent soundness oracle.

pub mod analysis;
pub mod cycles;
pub mod interp;
pub mod invariants;
pub mod ir;
pub mod its;
pub mod rank;
pub mod report;
pub mod sizebounds;
pub mod smt;
pub mod twn;
pub mod twn_bounds;

pub use ir::{
    BoundExpr, ComplexityClass, Formula, LocId, Polynomial, Program, State, TransId, VarId,
};
