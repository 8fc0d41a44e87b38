//! Size bounds: for every transition and program variable, a bound on the
//! absolute value the variable can have right after the transition fires,
//! as a function of the initial sizes. A deliberately small, sound rule set
//! that covers rigid right-hand sides, guard-pinned ranges and acyclic
//! propagation; accumulating variables inside cycles stay unbounded.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;

use crate::invariants::LocationInvariants;
use crate::ir::{
    sccs_topological, BoundExpr, Polynomial, Program, TransId, Transition, VarId, VarKind,
};

/// The table `(transition, variable) -> bound`.
#[derive(Debug, Clone, Default)]
pub struct SizeBoundTable {
    entries: BTreeMap<(TransId, VarId), BoundExpr>,
}

impl SizeBoundTable {
    pub fn get(&self, t: TransId, v: VarId) -> BoundExpr {
        self.entries
            .get(&(t, v))
            .cloned()
            .unwrap_or_else(BoundExpr::omega)
    }

    /// Substitution map for lifting a local bound over entry `r`.
    pub fn subst_map(&self, program: &Program, r: TransId) -> BTreeMap<VarId, BoundExpr> {
        program
            .pv()
            .iter()
            .map(|v| (*v, self.get(r, *v)))
            .collect()
    }
}

/// Compute size bounds. The global runtime bounds are accepted for parity
/// with a full alternating analysis but the simplified rules do not consume
/// them yet.
pub fn compute_size_bounds(
    program: &Program,
    invariants: &LocationInvariants,
    _rbglo: &BTreeMap<TransId, BoundExpr>,
) -> SizeBoundTable {
    let units = sccs_topological(program);
    let mut unit_of: BTreeMap<TransId, usize> = BTreeMap::new();
    for (i, unit) in units.iter().enumerate() {
        for t in unit {
            unit_of.insert(*t, i);
        }
    }
    let mut table = SizeBoundTable::default();
    for unit in &units {
        let in_cycle = unit.len() > 1
            || unit.iter().any(|t| {
                let tr = program.transition(*t);
                tr.src == tr.tgt
            });
        let scc_modified: BTreeSet<VarId> = unit
            .iter()
            .flat_map(|t| program.transition(*t).modified_vars())
            .collect();
        let entries: Vec<TransId> = if in_cycle {
            crate::ir::entry_transitions(program, unit).unwrap_or_default()
        } else {
            Vec::new()
        };
        for t in unit {
            let tr = program.transition(*t);
            for v in program.pv() {
                let bound = size_bound_of(
                    program,
                    invariants,
                    &table,
                    tr,
                    *v,
                    in_cycle,
                    &scc_modified,
                    &entries,
                );
                table.entries.insert((*t, *v), bound);
            }
        }
    }
    table
}

#[allow(clippy::too_many_arguments)]
fn size_bound_of(
    program: &Program,
    invariants: &LocationInvariants,
    table: &SizeBoundTable,
    t: &Transition,
    v: VarId,
    in_cycle: bool,
    scc_modified: &BTreeSet<VarId>,
    entries: &[TransId],
) -> BoundExpr {
    let eta = t.update_of(v);
    if eta
        .vars()
        .any(|w| program.kind(w) == VarKind::Temporary)
    {
        // Temporaries range over all integers.
        return BoundExpr::omega();
    }
    if let Some(c) = eta.as_constant() {
        return BoundExpr::constant_big(c.abs().to_integer().magnitude().clone());
    }
    if eta.as_var() == Some(v) {
        // Identity update: a guard-pinned range beats everything.
        if let Some(k) = guarded_range(program, invariants, t, v) {
            return BoundExpr::constant(k);
        }
        if !program.ever_updated(v) {
            return BoundExpr::var(v);
        }
        if !in_cycle {
            return sum_over_predecessors(program, table, t, v);
        }
        if !scc_modified.contains(&v) {
            // Preserved across the whole component: entry sizes carry over.
            let mut out = BoundExpr::zero();
            for r in entries {
                out = out.add(&table.get(*r, v));
            }
            return out;
        }
        return BoundExpr::omega();
    }
    // A genuine polynomial right-hand side.
    if eta.vars().all(|w| !program.ever_updated(w)) {
        return abs_bound(&eta);
    }
    if !in_cycle {
        let mut subst = BTreeMap::new();
        for w in eta.vars() {
            subst.insert(w, sum_over_predecessors(program, table, t, w));
        }
        return abs_bound(&eta).subst(&subst);
    }
    BoundExpr::omega()
}

/// Absolute-coefficient over-approximation of a polynomial as a bound.
fn abs_bound(p: &Polynomial) -> BoundExpr {
    BoundExpr::from_poly_abs(p)
}

/// Sizes flowing into the source of `t`: the sum of the predecessors'
/// bounds, or the variable itself at the initial location.
fn sum_over_predecessors(
    program: &Program,
    table: &SizeBoundTable,
    t: &Transition,
    v: VarId,
) -> BoundExpr {
    if t.src == program.initial {
        return BoundExpr::var(v);
    }
    let mut out = BoundExpr::zero();
    for r in program.transitions_into(t.src) {
        out = out.add(&table.get(r.id, v));
    }
    out
}

/// `Some(max(|c1|, |c2|))` when the enriched guard pins `c1 <= v <= c2`
/// through conjunct atoms of the shapes `c <= v`, `v <= c`, `v < c`,
/// `c < v`.
fn guarded_range(
    program: &Program,
    invariants: &LocationInvariants,
    t: &Transition,
    v: VarId,
) -> Option<u64> {
    use num_bigint::BigInt;
    let enriched = invariants.enriched_guard(program, t);
    let mut lower: Option<BigInt> = None;
    let mut upper: Option<BigInt> = None;
    for atom in enriched.conjunct_atoms() {
        // Atoms are normalized to 0 < p; a bound on v appears as
        // p = a*v + c with a in {1, -1}.
        let p = atom.poly();
        if !p.is_linear() {
            continue;
        }
        let vars: Vec<VarId> = p.vars().collect();
        if vars != [v] {
            continue;
        }
        let a = p.coeff(&crate::ir::Monomial::var(v));
        let c = p.constant_term();
        if !a.is_integer() || !c.is_integer() {
            continue;
        }
        let (a, c) = (a.to_integer(), c.to_integer());
        if a == BigInt::from(1) {
            // 0 < v + c, i.e. v >= 1 - c.
            let lo = BigInt::from(1) - c;
            lower = Some(match lower {
                Some(old) => old.max(lo),
                None => lo,
            });
        } else if a == BigInt::from(-1) {
            // 0 < -v + c, i.e. v <= c - 1.
            let hi = c - 1;
            upper = Some(match upper {
                Some(old) => old.min(hi),
                None => hi,
            });
        }
    }
    let (lo, hi) = (lower?, upper?);
    if lo > hi {
        return Some(0);
    }
    let k = lo.magnitude().clone().max(hi.magnitude().clone());
    num_traits::ToPrimitive::to_u64(&k)
}
