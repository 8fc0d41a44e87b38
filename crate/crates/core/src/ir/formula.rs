//! Guard formulas: positive boolean combinations of polynomial atoms.
//!
//! Every atom is kept in the normalized strict form `0 < p` with integer
//! coefficients; the other comparators are sugar that the constructors
//! rewrite on the spot (over the integers `p1 >= p2` is `p2 < p1 + 1`,
//! `p1 != p2` becomes a disjunction of the two strict orders).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

use super::{Polynomial, VarId};

/// The atom `0 < poly`. The polynomial always has integer coefficients;
/// rational inputs are cleared by scaling with the denominator lcm, which
/// preserves the sign and hence the atom's meaning.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    poly: Polynomial,
}

impl Atom {
    pub fn positive(poly: Polynomial) -> Atom {
        let lcm = poly.denominator_lcm();
        let poly = if lcm == BigInt::from(1) {
            poly
        } else {
            poly.scale(&BigRational::from_integer(lcm))
        };
        Atom { poly }
    }

    /// The polynomial `p` of `0 < p`.
    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn holds(&self, state: &BTreeMap<VarId, BigInt>) -> bool {
        self.poly.eval(state).is_positive()
    }

    /// The complement `p <= 0`, i.e. `0 < 1 - p`.
    pub fn negated(&self) -> Atom {
        Atom::positive(Polynomial::one().sub(&self.poly))
    }
}

/// A propositional formula over atoms, conjunction and disjunction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn tt() -> Formula {
        Formula::True
    }

    pub fn ff() -> Formula {
        Formula::False
    }

    /// `0 < p`, folding constant polynomials to a truth value.
    pub fn atom_positive(p: Polynomial) -> Formula {
        if let Some(c) = p.as_constant() {
            return if c.is_positive() { Formula::True } else { Formula::False };
        }
        Formula::Atom(Atom::positive(p))
    }

    pub fn lt(lhs: Polynomial, rhs: Polynomial) -> Formula {
        Formula::atom_positive(rhs.sub(&lhs))
    }

    pub fn le(lhs: Polynomial, rhs: Polynomial) -> Formula {
        Formula::atom_positive(rhs.sub(&lhs).add(&Polynomial::one()))
    }

    pub fn gt(lhs: Polynomial, rhs: Polynomial) -> Formula {
        Formula::lt(rhs, lhs)
    }

    pub fn ge(lhs: Polynomial, rhs: Polynomial) -> Formula {
        Formula::le(rhs, lhs)
    }

    pub fn eq(lhs: Polynomial, rhs: Polynomial) -> Formula {
        Formula::and(vec![
            Formula::le(lhs.clone(), rhs.clone()),
            Formula::le(rhs, lhs),
        ])
    }

    pub fn ne(lhs: Polynomial, rhs: Polynomial) -> Formula {
        Formula::or(vec![
            Formula::lt(lhs.clone(), rhs.clone()),
            Formula::lt(rhs, lhs),
        ])
    }

    /// Conjunction with flattening and constant short-circuiting.
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        out.dedup();
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with flattening and constant short-circuiting.
    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        out.dedup();
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    /// Structural negation via the atom complement and De Morgan.
    pub fn negated(&self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Atom(a) => Formula::Atom(a.negated()),
            Formula::And(ps) => Formula::or(ps.iter().map(|p| p.negated()).collect()),
            Formula::Or(ps) => Formula::and(ps.iter().map(|p| p.negated()).collect()),
        }
    }

    pub fn holds(&self, state: &BTreeMap<VarId, BigInt>) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => a.holds(state),
            Formula::And(ps) => ps.iter().all(|p| p.holds(state)),
            Formula::Or(ps) => ps.iter().any(|p| p.holds(state)),
        }
    }

    /// All atoms in the formula, in syntactic order (disjunction leaves
    /// included).
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.push(a),
            Formula::And(ps) | Formula::Or(ps) => {
                for p in ps {
                    p.collect_atoms(out);
                }
            }
        }
    }

    /// Atoms that occur as top-level conjuncts (never under a disjunction).
    pub fn conjunct_atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::And(ps) => {
                for p in ps {
                    if let Formula::Atom(a) = p {
                        out.push(a);
                    }
                }
            }
            _ => {}
        }
        out
    }

    pub fn vars(&self) -> std::collections::BTreeSet<VarId> {
        let mut out = std::collections::BTreeSet::new();
        for a in self.atoms() {
            out.extend(a.poly().vars());
        }
        out
    }

    /// Replace each atom by `f(atom)`, keeping the boolean structure.
    pub fn map_atoms(&self, f: &dyn Fn(&Atom) -> Formula) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => f(a),
            Formula::And(ps) => Formula::and(ps.iter().map(|p| p.map_atoms(f)).collect()),
            Formula::Or(ps) => Formula::or(ps.iter().map(|p| p.map_atoms(f)).collect()),
        }
    }

    /// Disjunctive normal form as a list of atom conjunctions. Returns
    /// `None` when the expansion exceeds `cap` conjuncts.
    pub fn dnf(&self, cap: usize) -> Option<Vec<Vec<Atom>>> {
        match self {
            Formula::True => Some(vec![vec![]]),
            Formula::False => Some(vec![]),
            Formula::Atom(a) => Some(vec![vec![a.clone()]]),
            Formula::And(ps) => {
                let mut acc: Vec<Vec<Atom>> = vec![vec![]];
                for p in ps {
                    let branches = p.dnf(cap)?;
                    let mut next = Vec::new();
                    for base in &acc {
                        for br in &branches {
                            let mut merged = base.clone();
                            merged.extend(br.iter().cloned());
                            next.push(merged);
                            if next.len() > cap {
                                return None;
                            }
                        }
                    }
                    acc = next;
                }
                Some(acc)
            }
            Formula::Or(ps) => {
                let mut acc = Vec::new();
                for p in ps {
                    acc.extend(p.dnf(cap)?);
                    if acc.len() > cap {
                        return None;
                    }
                }
                Some(acc)
            }
        }
    }

    pub fn display<'a>(&'a self, names: &'a dyn Fn(VarId) -> String) -> FormulaDisplay<'a> {
        FormulaDisplay { formula: self, names }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    names: &'a dyn Fn(VarId) -> String,
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(
            fm: &Formula,
            names: &dyn Fn(VarId) -> String,
            f: &mut fmt::Formatter<'_>,
            parent_or: bool,
        ) -> fmt::Result {
            match fm {
                Formula::True => write!(f, "0 < 1"),
                Formula::False => write!(f, "0 < 0"),
                Formula::Atom(a) => {
                    write!(f, "0 < {}", a.poly().display(names))
                }
                Formula::And(ps) => {
                    for (i, p) in ps.iter().enumerate() {
                        if i > 0 {
                            write!(f, " && ")?;
                        }
                        if matches!(p, Formula::Or(_)) {
                            write!(f, "(")?;
                            go(p, names, f, false)?;
                            write!(f, ")")?;
                        } else {
                            go(p, names, f, false)?;
                        }
                    }
                    Ok(())
                }
                Formula::Or(ps) => {
                    if parent_or {
                        write!(f, "(")?;
                    }
                    for (i, p) in ps.iter().enumerate() {
                        if i > 0 {
                            write!(f, " || ")?;
                        }
                        go(p, names, f, true)?;
                    }
                    if parent_or {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self.formula, self.names, f, false)
    }
}
