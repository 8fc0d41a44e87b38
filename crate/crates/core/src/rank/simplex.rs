//! A small exact-arithmetic linear program solver: two-phase primal simplex
//! over rationals with Bland's rule, which terminates on every input. Used
//! to decide Farkas feasibility systems and to pick canonical (coefficient-
//! minimal) ranking functions among the feasible ones.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

/// One constraint row: sparse coefficients, relation, right-hand side.
type Row = (Vec<(usize, BigRational)>, Rel, BigRational);

/// A linear program over non-negative variables `x_0 .. x_{n-1}`.
#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub num_vars: usize,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub values: Vec<BigRational>,
    pub objective: BigRational,
    /// The objective is unbounded below; `values` still holds a feasible
    /// point.
    pub unbounded: bool,
}

impl Lp {
    pub fn new(num_vars: usize) -> Lp {
        Lp {
            num_vars,
            rows: Vec::new(),
        }
    }

    pub fn fresh_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, BigRational)>, rel: Rel, rhs: BigRational) {
        self.rows.push((coeffs, rel, rhs));
    }

    /// Minimize `objective` subject to the rows; `None` when infeasible.
    pub fn minimize(&self, objective: &[(usize, BigRational)]) -> Option<LpSolution> {
        Tableau::solve(self, objective)
    }
}

struct Tableau {
    /// `rows x cols` matrix; the last column is the right-hand side.
    a: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn solve(lp: &Lp, objective: &[(usize, BigRational)]) -> Option<LpSolution> {
        let m = lp.rows.len();
        // Layout: structural vars, then one slack/surplus per inequality,
        // then one artificial per row (unused ones are dropped eagerly).
        let mut num_slack = 0;
        for (_, rel, _) in &lp.rows {
            if *rel != Rel::Eq {
                num_slack += 1;
            }
        }
        let n = lp.num_vars;
        let total = n + num_slack + m;
        let mut a = vec![vec![BigRational::zero(); total + 1]; m];
        let mut basis = vec![0usize; m];
        let mut slack_idx = n;
        let mut artificial_cols = Vec::new();

        for (i, (coeffs, rel, rhs)) in lp.rows.iter().enumerate() {
            for (j, c) in coeffs {
                a[i][*j] += c;
            }
            a[i][total] = rhs.clone();
            match rel {
                Rel::Le => {
                    a[i][slack_idx] = BigRational::one();
                    slack_idx += 1;
                }
                Rel::Ge => {
                    a[i][slack_idx] = -BigRational::one();
                    slack_idx += 1;
                }
                Rel::Eq => {}
            }
            // Make the right-hand side non-negative, then add an
            // artificial basis variable.
            if a[i][total].is_negative() {
                for x in a[i].iter_mut() {
                    *x = -x.clone();
                }
            }
            let art = n + num_slack + i;
            a[i][art] = BigRational::one();
            basis[i] = art;
            artificial_cols.push(art);
        }

        let mut t = Tableau {
            a,
            basis,
            cols: total,
        };

        // Phase 1: minimize the sum of artificials.
        let phase1: Vec<BigRational> = (0..total)
            .map(|j| {
                if artificial_cols.contains(&j) {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        let (value, _) = t.run(&phase1, &artificial_cols);
        if !value.is_zero() {
            return None;
        }
        // Drive remaining artificials out of the basis where possible.
        for i in 0..m {
            if artificial_cols.contains(&t.basis[i]) {
                if let Some(j) = (0..n + num_slack).find(|j| !t.a[i][*j].is_zero()) {
                    t.pivot(i, j);
                }
            }
        }

        // Phase 2.
        let mut phase2 = vec![BigRational::zero(); total];
        for (j, c) in objective {
            phase2[*j] = c.clone();
        }
        let (objective_value, unbounded) = t.run(&phase2, &artificial_cols);

        let mut values = vec![BigRational::zero(); lp.num_vars];
        for (i, b) in t.basis.iter().enumerate() {
            if *b < lp.num_vars {
                values[*b] = t.a[i][total].clone();
            }
        }
        Some(LpSolution {
            values,
            objective: objective_value,
            unbounded,
        })
    }

    /// Bland-rule simplex on the current basis; returns the final objective
    /// value and whether it is unbounded below. Artificial columns never
    /// re-enter.
    fn run(&mut self, cost: &[BigRational], banned: &[usize]) -> (BigRational, bool) {
        loop {
            // Reduced costs: c_j - c_B * B^-1 A_j, computed directly from
            // the tableau (rows are already B^-1 A).
            let basis_cost: Vec<BigRational> =
                self.basis.iter().map(|b| cost[*b].clone()).collect();
            let mut entering = None;
            for (j, cost_j) in cost.iter().enumerate().take(self.cols) {
                if banned.contains(&j) && !self.basis.contains(&j) {
                    continue;
                }
                if self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost_j.clone();
                for (i, bc) in basis_cost.iter().enumerate() {
                    if !bc.is_zero() {
                        reduced -= bc * &self.a[i][j];
                    }
                }
                if reduced.is_negative() {
                    entering = Some(j);
                    break; // Bland: smallest index
                }
            }
            let Some(j) = entering else {
                let mut value = BigRational::zero();
                for (i, b) in self.basis.iter().enumerate() {
                    value += &cost[*b] * &self.a[i][self.cols];
                }
                return (value, false);
            };
            // Ratio test, Bland tie-break on the leaving basis variable.
            let mut leave: Option<(usize, BigRational)> = None;
            for i in 0..self.a.len() {
                if self.a[i][j].is_positive() {
                    let ratio = &self.a[i][self.cols] / &self.a[i][j];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((i, _)) = leave else {
                let mut value = BigRational::zero();
                for (bi, b) in self.basis.iter().enumerate() {
                    value += &cost[*b] * &self.a[bi][self.cols];
                }
                return (value, true);
            };
            self.pivot(i, j);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.a[row][col].clone();
        for x in self.a[row].iter_mut() {
            *x /= &pivot;
        }
        for i in 0..self.a.len() {
            if i != row && !self.a[i][col].is_zero() {
                let factor = self.a[i][col].clone();
                for j in 0..=self.cols {
                    let delta = &factor * &self.a[row][j];
                    self.a[i][j] -= delta;
                }
            }
        }
        self.basis[row] = col;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    #[test]
    fn feasible_minimum() {
        // min x0 s.t. x0 + x1 >= 3, x0 >= 1: optimum x0 = 1.
        let mut lp = Lp::new(2);
        lp.add_row(vec![(0, r(1)), (1, r(1))], Rel::Ge, r(3));
        lp.add_row(vec![(0, r(1))], Rel::Ge, r(1));
        let sol = lp.minimize(&[(0, r(1))]).unwrap();
        assert!(!sol.unbounded);
        assert_eq!(sol.objective, r(1));
        assert_eq!(sol.values[0], r(1));
    }

    #[test]
    fn infeasible_detected() {
        // x0 >= 2 and x0 <= 1.
        let mut lp = Lp::new(1);
        lp.add_row(vec![(0, r(1))], Rel::Ge, r(2));
        lp.add_row(vec![(0, r(1))], Rel::Le, r(1));
        assert!(lp.minimize(&[(0, r(1))]).is_none());
    }

    #[test]
    fn unbounded_detected() {
        // min -x0 with x0 free upward.
        let mut lp = Lp::new(1);
        lp.add_row(vec![(0, r(1))], Rel::Ge, r(0));
        let sol = lp.minimize(&[(0, r(-1))]).unwrap();
        assert!(sol.unbounded);
    }

    #[test]
    fn equality_rows() {
        // x0 + x1 = 4, x0 - x1 <= 0, min x1: x0 = x1 = 2.
        let mut lp = Lp::new(2);
        lp.add_row(vec![(0, r(1)), (1, r(1))], Rel::Eq, r(4));
        lp.add_row(vec![(0, r(1)), (1, r(-1))], Rel::Le, r(0));
        let sol = lp.minimize(&[(1, r(1))]).unwrap();
        assert_eq!(sol.values[0], r(2));
        assert_eq!(sol.values[1], r(2));
    }

    #[test]
    fn negative_rhs_normalization() {
        // -x0 <= -5 means x0 >= 5.
        let mut lp = Lp::new(1);
        lp.add_row(vec![(0, r(-1))], Rel::Le, r(-5));
        let sol = lp.minimize(&[(0, r(1))]).unwrap();
        assert_eq!(sol.values[0], r(5));
    }

    #[test]
    fn rational_pivots_stay_exact() {
        // 2x0 + 3x1 = 1, min x0: x0 = 0, x1 = 1/3.
        let mut lp = Lp::new(2);
        lp.add_row(vec![(0, r(2)), (1, r(3))], Rel::Eq, r(1));
        let sol = lp.minimize(&[(0, r(1))]).unwrap();
        assert_eq!(sol.values[1], BigRational::new(1.into(), 3.into()));
    }
}
