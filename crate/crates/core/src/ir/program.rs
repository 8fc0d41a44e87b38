//! Programs, transitions and states, following the transition-system view of
//! integer programs: a control-flow graph whose edges carry a guard formula
//! and a polynomial update of the program variables. Temporary variables are
//! re-sampled nondeterministically at every step.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use super::{Formula, LocId, Polynomial, TransId, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Program,
    Temporary,
}

/// A total assignment of integers to variables.
pub type State = BTreeMap<VarId, BigInt>;

/// A guarded polynomial update edge between two locations. Program variables
/// absent from the update map are updated by identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: TransId,
    pub name: String,
    pub src: LocId,
    pub tgt: LocId,
    pub guard: Formula,
    pub update: BTreeMap<VarId, Polynomial>,
}

impl Transition {
    /// The effective update of `v` (identity when unmapped).
    pub fn update_of(&self, v: VarId) -> Polynomial {
        self.update.get(&v).cloned().unwrap_or_else(|| Polynomial::var(v))
    }

    /// Variables whose update is not syntactically the identity.
    pub fn modified_vars(&self) -> Vec<VarId> {
        self.update
            .iter()
            .filter(|(v, p)| p.as_var() != Some(**v))
            .map(|(v, _)| *v)
            .collect()
    }

    /// Temporary variables referenced by guard or update, given the program's
    /// variable kinds.
    pub fn temp_vars(&self, program: &Program) -> Vec<VarId> {
        let mut out = std::collections::BTreeSet::new();
        for v in self.guard.vars() {
            if program.kind(v) == VarKind::Temporary {
                out.insert(v);
            }
        }
        for p in self.update.values() {
            for v in p.vars() {
                if program.kind(v) == VarKind::Temporary {
                    out.insert(v);
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn has_temp_vars(&self, program: &Program) -> bool {
        !self.temp_vars(program).is_empty()
    }
}

/// An integer program: program variables, locations with a distinguished
/// initial location, and transitions. The initial location has no incoming
/// transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    var_names: Vec<String>,
    var_kinds: Vec<VarKind>,
    pv: Vec<VarId>,
    loc_names: Vec<String>,
    pub initial: LocId,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("transition {0} targets the initial location")]
    IntoInitial(String),
    #[error("program has no transitions")]
    Empty,
    #[error("duplicate variable name {0}")]
    DuplicateVar(String),
}

impl Program {
    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.var_names[v.0 as usize]
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.var_kinds[v.0 as usize]
    }

    /// The ordered program variables.
    pub fn pv(&self) -> &[VarId] {
        &self.pv
    }

    pub fn loc_name(&self, l: LocId) -> &str {
        &self.loc_names[l.0 as usize]
    }

    pub fn loc_count(&self) -> usize {
        self.loc_names.len()
    }

    pub fn transition(&self, id: TransId) -> &Transition {
        &self.transitions[id.0 as usize]
    }

    pub fn transitions_from(&self, loc: LocId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.src == loc)
    }

    pub fn transitions_into(&self, loc: LocId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.tgt == loc)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_names
            .iter()
            .position(|n| n == name)
            .map(|i| VarId(i as u32))
    }

    pub fn loc_by_name(&self, name: &str) -> Option<LocId> {
        self.loc_names
            .iter()
            .position(|n| n == name)
            .map(|i| LocId(i as u32))
    }

    /// Name resolver closure for display helpers.
    pub fn namer(&self) -> impl Fn(VarId) -> String + '_ {
        move |v| self.var_name(v).to_string()
    }

    /// Whether `v` is updated non-trivially by some transition.
    pub fn ever_updated(&self, v: VarId) -> bool {
        self.transitions
            .iter()
            .any(|t| t.update.get(&v).map(|p| p.as_var() != Some(v)).unwrap_or(false))
    }
}

/// Incremental program construction for the parser and for tests.
pub struct ProgramBuilder {
    var_names: Vec<String>,
    var_kinds: Vec<VarKind>,
    pv: Vec<VarId>,
    loc_names: Vec<String>,
    initial: Option<LocId>,
    transitions: Vec<Transition>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        ProgramBuilder {
            var_names: Vec::new(),
            var_kinds: Vec::new(),
            pv: Vec::new(),
            loc_names: Vec::new(),
            initial: None,
            transitions: Vec::new(),
        }
    }

    pub fn program_var(&mut self, name: &str) -> VarId {
        if let Some(i) = self.var_names.iter().position(|n| n == name) {
            return VarId(i as u32);
        }
        let id = VarId(self.var_names.len() as u32);
        self.var_names.push(name.to_string());
        self.var_kinds.push(VarKind::Program);
        self.pv.push(id);
        id
    }

    pub fn temp_var(&mut self, name: &str) -> VarId {
        if let Some(i) = self.var_names.iter().position(|n| n == name) {
            return VarId(i as u32);
        }
        let id = VarId(self.var_names.len() as u32);
        self.var_names.push(name.to_string());
        self.var_kinds.push(VarKind::Temporary);
        id
    }

    pub fn location(&mut self, name: &str) -> LocId {
        if let Some(i) = self.loc_names.iter().position(|n| n == name) {
            return LocId(i as u32);
        }
        let id = LocId(self.loc_names.len() as u32);
        self.loc_names.push(name.to_string());
        id
    }

    pub fn initial(&mut self, loc: LocId) {
        self.initial = Some(loc);
    }

    pub fn transition(
        &mut self,
        name: &str,
        src: LocId,
        tgt: LocId,
        guard: Formula,
        update: BTreeMap<VarId, Polynomial>,
    ) -> TransId {
        let id = TransId(self.transitions.len() as u32);
        self.transitions.push(Transition {
            id,
            name: name.to_string(),
            src,
            tgt,
            guard,
            update,
        });
        id
    }

    pub fn build(self) -> Result<Program, ProgramError> {
        if self.transitions.is_empty() {
            return Err(ProgramError::Empty);
        }
        let initial = self.initial.expect("initial location not set");
        for t in &self.transitions {
            if t.tgt == initial {
                return Err(ProgramError::IntoInitial(t.name.clone()));
            }
        }
        Ok(Program {
            var_names: self.var_names,
            var_kinds: self.var_kinds,
            pv: self.pv,
            loc_names: self.loc_names,
            initial,
            transitions: self.transitions,
        })
    }
}

impl Default for ProgramBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Substitute every program variable in `p` by its update polynomial,
/// simultaneously. Temporaries are untouched (they are never update keys).
pub fn apply_update_poly(p: &Polynomial, update: &BTreeMap<VarId, Polynomial>) -> Polynomial {
    p.substitute(update)
}

/// `apply_update_poly` lifted to formulas atom by atom.
pub fn apply_update_formula(f: &Formula, update: &BTreeMap<VarId, Polynomial>) -> Formula {
    f.map_atoms(&|a| Formula::atom_positive(apply_update_poly(a.poly(), update)))
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.namer();
        writeln!(f, "initial {}", self.loc_name(self.initial))?;
        for t in &self.transitions {
            write!(
                f,
                "{}: {} -> {} :|: {}",
                t.name,
                self.loc_name(t.src),
                self.loc_name(t.tgt),
                t.guard.display(&names)
            )?;
            for (v, p) in &t.update {
                write!(f, ", {} := {}", self.var_name(*v), p.display(&names))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_substitutes_in_guard() {
        let mut b = ProgramBuilder::new();
        let x1 = b.program_var("x1");
        // eta(x1) = -2*x1 applied to the guard x1 != 0.
        let guard = Formula::ne(Polynomial::var(x1), Polynomial::zero());
        let update = BTreeMap::from([(
            x1,
            Polynomial::from_int(-2).mul(&Polynomial::var(x1)),
        )]);
        let substituted = apply_update_formula(&guard, &update);
        let expected = Formula::ne(
            Polynomial::from_int(-2).mul(&Polynomial::var(x1)),
            Polynomial::zero(),
        );
        assert_eq!(substituted, expected);
    }

    #[test]
    fn identity_update_is_noop() {
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let y = b.program_var("y");
        let f = Formula::lt(
            Polynomial::var(x).pow(2),
            Polynomial::var(y).add(&Polynomial::from_int(7)),
        );
        assert_eq!(apply_update_formula(&f, &BTreeMap::new()), f);
    }

    #[test]
    fn substitution_commutes_with_evaluation() {
        // sigma(p[eta]) = sigma'(p) where sigma'(v) = sigma(eta(v)).
        use num_bigint::BigInt;
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut b = ProgramBuilder::new();
        let vars: Vec<VarId> = (0..4).map(|i| b.program_var(&format!("v{i}"))).collect();
        let mut rng = StdRng::seed_from_u64(99);
        let random_poly = |rng: &mut StdRng| {
            let mut p = Polynomial::zero();
            for _ in 0..rng.gen_range(1..5) {
                let c = rng.gen_range(-5i64..=5);
                let mut m = Polynomial::from_int(c);
                for _ in 0..rng.gen_range(0..3) {
                    let v = vars[rng.gen_range(0..vars.len())];
                    m = m.mul(&Polynomial::var(v));
                }
                p = p.add(&m);
            }
            p
        };
        for _ in 0..50 {
            let p = random_poly(&mut rng);
            let mut update: BTreeMap<VarId, Polynomial> = BTreeMap::new();
            for v in &vars {
                if rng.gen_bool(0.7) {
                    let poly = random_poly(&mut rng);
                    update.insert(*v, poly);
                }
            }
            let sigma: BTreeMap<VarId, BigInt> = vars
                .iter()
                .map(|v| (*v, BigInt::from(rng.gen_range(-6i64..=6))))
                .collect();
            let substituted = apply_update_poly(&p, &update);
            let sigma_prime: BTreeMap<VarId, BigInt> = vars
                .iter()
                .map(|v| {
                    let eta = update.get(v).cloned().unwrap_or_else(|| Polynomial::var(*v));
                    (*v, eta.eval_int(&sigma))
                })
                .collect();
            assert_eq!(substituted.eval(&sigma), p.eval(&sigma_prime));
        }
    }

    #[test]
    fn normalization_preserves_satisfaction() {
        // The sugared comparators agree with their direct semantics on
        // random states.
        use num_bigint::BigInt;
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut b = ProgramBuilder::new();
        let x = b.program_var("x");
        let y = b.program_var("y");
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..200 {
            let lhs = Polynomial::var(x)
                .scale(&num_rational::BigRational::from_integer(rng.gen_range(-3i64..=3).into()))
                .add(&Polynomial::from_int(rng.gen_range(-4i64..=4)));
            let rhs = Polynomial::var(y)
                .scale(&num_rational::BigRational::from_integer(rng.gen_range(-3i64..=3).into()))
                .add(&Polynomial::from_int(rng.gen_range(-4i64..=4)));
            let st = BTreeMap::from([
                (x, BigInt::from(rng.gen_range(-8i64..=8))),
                (y, BigInt::from(rng.gen_range(-8i64..=8))),
            ]);
            let l = lhs.eval(&st);
            let r = rhs.eval(&st);
            assert_eq!(Formula::lt(lhs.clone(), rhs.clone()).holds(&st), l < r);
            assert_eq!(Formula::le(lhs.clone(), rhs.clone()).holds(&st), l <= r);
            assert_eq!(Formula::eq(lhs.clone(), rhs.clone()).holds(&st), l == r);
            assert_eq!(Formula::ne(lhs.clone(), rhs.clone()).holds(&st), l != r);
            assert_eq!(Formula::ge(lhs.clone(), rhs.clone()).holds(&st), l >= r);
            assert_eq!(Formula::gt(lhs.clone(), rhs.clone()).holds(&st), l > r);
        }
    }

    #[test]
    fn transition_into_initial_rejected() {
        let mut b = ProgramBuilder::new();
        b.program_var("x");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), BTreeMap::new());
        b.transition("bad", l1, l0, Formula::tt(), BTreeMap::new());
        assert!(matches!(b.build(), Err(ProgramError::IntoInitial(_))));
    }
}
