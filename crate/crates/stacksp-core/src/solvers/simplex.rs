//! Dense exact-rational simplex for the small revenue programs.
//!
//! Solves `maximize c·x subject to Ax ≤ b, x ≥ 0` with `b ≥ 0`, so the
//! origin is feasible and no phase-1 is needed. Bland's rule on both the
//! entering and leaving choices guarantees termination; everything is exact.

use crate::scalar::Rat;
use num::Zero;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { objective: Rat, solution: Vec<Rat> },
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<Rat>,
    /// Each constraint: sparse coefficient list (var index, coefficient)
    /// and the right-hand side. All rhs must be nonnegative.
    pub constraints: Vec<(Vec<(usize, Rat)>, Rat)>,
}

pub fn maximize(problem: &LpProblem) -> LpOutcome {
    let n = problem.objective.len();
    let m = problem.constraints.len();
    let cols = n + m + 1;

    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(m);
    for (i, (coeffs, rhs)) in problem.constraints.iter().enumerate() {
        debug_assert!(!rhs.is_negative(), "rhs must be nonnegative");
        let mut row = vec![Rat::zero(); cols];
        for (j, c) in coeffs {
            row[*j] = c.clone();
        }
        row[n + i] = Rat::from_integer(1.into());
        row[cols - 1] = rhs.clone();
        rows.push(row);
    }
    let mut obj = vec![Rat::zero(); cols];
    obj[..n].clone_from_slice(&problem.objective);
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland: smallest improving column.
        let Some(enter) = (0..n + m).find(|&j| obj[j] > Rat::zero()) else {
            let mut solution = vec![Rat::zero(); n];
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    solution[b] = rows[i][cols - 1].clone();
                }
            }
            let objective = -obj[cols - 1].clone();
            return LpOutcome::Optimal {
                objective,
                solution,
            };
        };
        // Ratio test; ties resolved by the smallest basis variable.
        let mut leave: Option<(usize, Rat)> = None;
        for i in 0..m {
            if rows[i][enter] > Rat::zero() {
                let ratio = &rows[i][cols - 1] / &rows[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((pivot_row, _)) = leave else {
            return LpOutcome::Unbounded;
        };

        let factor = rows[pivot_row][enter].clone();
        for value in rows[pivot_row].iter_mut() {
            *value /= &factor;
        }
        for i in 0..m {
            if i != pivot_row && !rows[i][enter].is_zero() {
                let scale = rows[i][enter].clone();
                for j in 0..cols {
                    let delta = &rows[pivot_row][j] * &scale;
                    rows[i][j] -= delta;
                }
            }
        }
        if !obj[enter].is_zero() {
            let scale = obj[enter].clone();
            for j in 0..cols {
                let delta = &rows[pivot_row][j] * &scale;
                obj[j] -= delta;
            }
        }
        basis[pivot_row] = enter;
    }
}

trait IsNegative {
    fn is_negative(&self) -> bool;
}

impl IsNegative for Rat {
    fn is_negative(&self) -> bool {
        use num::Signed;
        Signed::is_negative(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, rat_int};

    fn one() -> Rat {
        rat_int(1)
    }

    #[test]
    fn simple_box() {
        // max x + y, x ≤ 1, y ≤ 3/2
        let problem = LpProblem {
            objective: vec![one(), one()],
            constraints: vec![
                (vec![(0, one())], rat_int(1)),
                (vec![(1, one())], rat(3, 2)),
            ],
        };
        match maximize(&problem) {
            LpOutcome::Optimal {
                objective,
                solution,
            } => {
                assert_eq!(objective, rat(5, 2));
                assert_eq!(solution, vec![rat_int(1), rat(3, 2)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coupled_constraints() {
        // max p1+p2+p3+p4 with p_i ≤ 1 and p2+p3 ≤ 3/2: the path-fixing
        // program of the long-shortcut example.
        let problem = LpProblem {
            objective: vec![one(); 4],
            constraints: vec![
                (vec![(0, one())], one()),
                (vec![(1, one())], one()),
                (vec![(2, one())], one()),
                (vec![(3, one())], one()),
                (vec![(1, one()), (2, one())], rat(3, 2)),
            ],
        };
        match maximize(&problem) {
            LpOutcome::Optimal { objective, .. } => assert_eq!(objective, rat(7, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let problem = LpProblem {
            objective: vec![one(), one()],
            constraints: vec![(vec![(0, one())], rat_int(2))],
        };
        assert_eq!(maximize(&problem), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_ties_terminate() {
        // Several identical constraints force degenerate pivots.
        let problem = LpProblem {
            objective: vec![one(), one(), one()],
            constraints: vec![
                (vec![(0, one()), (1, one())], rat_int(0)),
                (vec![(0, one()), (2, one())], rat_int(0)),
                (vec![(1, one()), (2, one())], rat_int(0)),
                (vec![(0, one())], rat_int(0)),
            ],
        };
        match maximize(&problem) {
            LpOutcome::Optimal { objective, .. } => assert_eq!(objective, rat_int(0)),
            other => panic!("{other:?}"),
        }
    }
}
