//! Thin adapter over `microlp` for the small programs that arise in game and DEC
//! computations. Every variable is nonnegative.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    Failed(String),
}

fn solve(direction: OptimizationDirection, cost: &[f64], constraints: &[Constraint]) -> LpOutcome {
    let mut problem = Problem::new(direction);
    let vars: Vec<_> = cost.iter().map(|&c| problem.add_var(c, (0.0, f64::INFINITY))).collect();
    for (i, con) in constraints.iter().enumerate() {
        assert_eq!(con.coeffs.len(), cost.len(), "constraint {i} has the wrong width");
        let terms: Vec<_> = vars.iter().zip(&con.coeffs).filter(|(_, &c)| c != 0.0).map(|(&v, &c)| (v, c)).collect();
        let op = match con.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        problem.add_constraint(terms.as_slice(), op, con.rhs);
    }
    match problem.solve() {
        Ok(sol) => LpOutcome::Optimal {
            x: vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect(),
            objective: sol.objective(),
        },
        Err(microlp::Error::Infeasible) => LpOutcome::Infeasible,
        Err(microlp::Error::Unbounded) => LpOutcome::Unbounded,
        Err(microlp::Error::InternalError(e)) => LpOutcome::Failed(e),
    }
}

/// Minimizes `cost · x` subject to the constraints and `x ≥ 0`.
pub fn minimize(cost: &[f64], constraints: &[Constraint]) -> LpOutcome {
    solve(OptimizationDirection::Minimize, cost, constraints)
}

/// Maximizes `cost · x`; the returned objective is the maximum.
pub fn maximize(cost: &[f64], constraints: &[Constraint]) -> LpOutcome {
    solve(OptimizationDirection::Maximize, cost, constraints)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_program() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let cons = vec![
            Constraint::new(vec![1.0, 0.0], Sense::Le, 4.0),
            Constraint::new(vec![0.0, 2.0], Sense::Le, 12.0),
            Constraint::new(vec![3.0, 2.0], Sense::Le, 18.0),
        ];
        match maximize(&[3.0, 5.0], &cons) {
            LpOutcome::Optimal { x, objective } => {
                assert!((objective - 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y, x + y = 1, y ≥ 0.25 → 1.25
        let cons = vec![
            Constraint::new(vec![1.0, 1.0], Sense::Eq, 1.0),
            Constraint::new(vec![0.0, 1.0], Sense::Ge, 0.25),
        ];
        match minimize(&[1.0, 2.0], &cons) {
            LpOutcome::Optimal { objective, .. } => assert!((objective - 1.25).abs() < 1e-9),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let cons = vec![
            Constraint::new(vec![1.0], Sense::Le, 1.0),
            Constraint::new(vec![1.0], Sense::Ge, 2.0),
        ];
        assert_eq!(minimize(&[1.0], &cons), LpOutcome::Infeasible);
        let cons = vec![Constraint::new(vec![1.0, -1.0], Sense::Le, 1.0)];
        assert_eq!(maximize(&[0.0, 1.0], &cons), LpOutcome::Unbounded);
    }
}
