//! Certified solver for finite two-player zero-sum games.
//!
//! The row player minimizes `p' A q`, the column player maximizes it. Every solution
//! carries an exact duality-gap certificate computed from pure best responses.
//!
//! Solving runs multiplicative-weights self-play first, then closes the gap exactly:
//! support enumeration for small games, a linear program otherwise. The solution with the
//! smaller certified gap is returned.

use serde::{Deserialize, Serialize};

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::lp::{self, Constraint, LpOutcome, Sense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Row,
    Column,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Trivial,
    MultiplicativeWeights,
    SupportEnumeration,
    LinearProgram,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameSolution {
    pub row_strategy: FiniteDistribution,
    pub col_strategy: FiniteDistribution,
    /// Guaranteed value of `row_strategy`: max over columns of `p' A`.
    pub value: f64,
    /// Guaranteed value of `col_strategy`: min over rows of `A q`.
    pub lower: f64,
    pub gap: f64,
    pub method: SolveMethod,
    pub mw_iterations: usize,
    /// True when the requested tolerance was not met.
    pub budget_exhausted: bool,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub tol: f64,
    pub mw_iterations: usize,
    /// Largest side length solved by support enumeration.
    pub support_enumeration_max: usize,
    /// Run the exact refinement when self-play leaves a gap above `tol`.
    pub exact_refinement: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-9, mw_iterations: 200, support_enumeration_max: 5, exact_refinement: true }
    }
}

impl SolverConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Skips self-play; used by inner loops that only need the exact value.
    pub fn exact() -> Self {
        Self { mw_iterations: 0, ..Self::default() }
    }
}

fn validate(payoff: &[Vec<f64>]) -> Result<(usize, usize)> {
    let m = payoff.len();
    if m == 0 || payoff[0].is_empty() {
        return Err(Error::InvalidInput("empty payoff matrix".into()));
    }
    let n = payoff[0].len();
    for (i, row) in payoff.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite payoff at ({i}, {j})")));
        }
    }
    Ok((m, n))
}

/// Exact best-response value against `strategy`. For `Side::Row` the strategy is the
/// row player's and the result is `max_j (p' A)_j`; for `Side::Column` it is
/// `min_i (A q)_i`.
pub fn best_response_value(
    strategy: &FiniteDistribution,
    payoff: &[Vec<f64>],
    side: Side,
) -> Result<f64> {
    let (m, n) = validate(payoff)?;
    match side {
        Side::Row => {
            if strategy.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: strategy.len() });
            }
            Ok(col_payoffs(strategy.weights(), payoff, n).into_iter().fold(f64::NEG_INFINITY, f64::max))
        }
        Side::Column => {
            if strategy.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: strategy.len() });
            }
            Ok(row_payoffs(strategy.weights(), payoff).into_iter().fold(f64::INFINITY, f64::min))
        }
    }
}

fn col_payoffs(p: &[f64], a: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, row) in a.iter().enumerate() {
        if p[i] > 0.0 {
            for (o, v) in out.iter_mut().zip(row) {
                *o += p[i] * v;
            }
        }
    }
    out
}

fn row_payoffs(q: &[f64], a: &[Vec<f64>]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(q).filter(|(_, &w)| w > 0.0).map(|(v, w)| v * w).sum()).collect()
}

fn clean(mut w: Vec<f64>) -> FiniteDistribution {
    for v in &mut w {
        if *v < 0.0 || !v.is_finite() {
            *v = 0.0;
        }
    }
    FiniteDistribution::normalized(w).expect("strategy with positive mass")
}

fn certify(
    p: FiniteDistribution,
    q: FiniteDistribution,
    payoff: &[Vec<f64>],
    method: SolveMethod,
    mw_iterations: usize,
    tol: f64,
) -> GameSolution {
    let n = payoff[0].len();
    let upper = col_payoffs(p.weights(), payoff, n).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let lower = row_payoffs(q.weights(), payoff).into_iter().fold(f64::INFINITY, f64::min);
    let gap = (upper - lower).max(0.0);
    GameSolution {
        row_strategy: p,
        col_strategy: q,
        value: upper,
        lower,
        gap,
        method,
        mw_iterations,
        budget_exhausted: gap > tol,
    }
}

pub fn solve_matrix_game(payoff: &[Vec<f64>], tol: f64) -> Result<GameSolution> {
    solve_matrix_game_with(payoff, &SolverConfig::with_tol(tol))
}

pub fn solve_matrix_game_with(payoff: &[Vec<f64>], cfg: &SolverConfig) -> Result<GameSolution> {
    let (m, n) = validate(payoff)?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidInput("solver tolerance must be positive".into()));
    }
    if m == 1 || n == 1 {
        return Ok(solve_degenerate(payoff, m, n, cfg.tol));
    }
    let mut best: Option<GameSolution> = None;
    if cfg.mw_iterations > 0 {
        best = Some(multiplicative_weights(payoff, m, n, cfg.mw_iterations, cfg.tol));
    }
    let done = |b: &Option<GameSolution>| b.as_ref().is_some_and(|s| s.gap <= cfg.tol);
    if !done(&best) && cfg.exact_refinement {
        let mw_its = best.as_ref().map_or(0, |s| s.mw_iterations);
        let mut candidates = Vec::new();
        if m.max(n) <= cfg.support_enumeration_max {
            if let Some((p, q)) = support_enumeration(payoff, m, n) {
                candidates.push(certify(p, q, payoff, SolveMethod::SupportEnumeration, mw_its, cfg.tol));
            }
        }
        if candidates.iter().all(|c| c.gap > cfg.tol) {
            if let Some((p, q)) = linear_program(payoff, m, n) {
                candidates.push(certify(p, q, payoff, SolveMethod::LinearProgram, mw_its, cfg.tol));
            }
        }
        for c in candidates {
            if best.as_ref().is_none_or(|b| c.gap < b.gap) {
                best = Some(c);
            }
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no solver path produced a strategy".into()))
}

fn solve_degenerate(payoff: &[Vec<f64>], m: usize, n: usize, tol: f64) -> GameSolution {
    // One side has a single pure strategy; the other plays a pure best response,
    // lowest index on ties.
    if m == 1 {
        let j = argmax(&payoff[0]);
        certify(
            FiniteDistribution::point_mass(1, 0),
            FiniteDistribution::point_mass(n, j),
            payoff,
            SolveMethod::Trivial,
            0,
            tol,
        )
    } else {
        let col: Vec<f64> = payoff.iter().map(|r| r[0]).collect();
        let i = argmin(&col);
        certify(
            FiniteDistribution::point_mass(m, i),
            FiniteDistribution::point_mass(1, 0),
            payoff,
            SolveMethod::Trivial,
            0,
            tol,
        )
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut b = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[b] {
            b = i;
        }
    }
    b
}

fn argmin(v: &[f64]) -> usize {
    let mut b = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[b] {
            b = i;
        }
    }
    b
}

fn multiplicative_weights(payoff: &[Vec<f64>], m: usize, n: usize, iters: usize, tol: f64) -> GameSolution {
    let lo = payoff.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let hi = payoff.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = (hi - lo).max(1e-300);
    let mut lw = vec![0.0; m]; // log-weights
    let mut lv = vec![0.0; n];
    let mut p_avg = vec![0.0; m];
    let mut q_avg = vec![0.0; n];
    let softmax = |l: &[f64]| {
        let mx = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = l.iter().map(|x| (x - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let mut done = 0;
    for t in 1..=iters {
        let p = softmax(&lw);
        let q = softmax(&lv);
        for i in 0..m {
            p_avg[i] += p[i];
        }
        for j in 0..n {
            q_avg[j] += q[j];
        }
        let rows = row_payoffs(&q, payoff);
        let cols = col_payoffs(&p, payoff, n);
        let eta_r = (8.0 * (m as f64).ln() / t as f64).sqrt() / range;
        let eta_c = (8.0 * (n as f64).ln() / t as f64).sqrt() / range;
        for i in 0..m {
            lw[i] -= eta_r * (rows[i] - lo);
        }
        for j in 0..n {
            lv[j] += eta_c * (cols[j] - lo);
        }
        done = t;
        if t % 50 == 0 {
            let s = certify(clean(p_avg.clone()), clean(q_avg.clone()), payoff, SolveMethod::MultiplicativeWeights, t, tol);
            if s.gap <= tol {
                return s;
            }
        }
    }
    certify(clean(p_avg), clean(q_avg), payoff, SolveMethod::MultiplicativeWeights, done, tol)
}

/// Solves a square system in place by Gaussian elimination with partial pivoting.
pub(crate) fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for c in 0..k {
        let piv = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for cc in c..k {
                    a[r][cc] -= f * a[c][cc];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Equal-size support pairs in order of size, then lexicographic row and column
/// supports. The first pair passing the optimality checks is returned.
fn support_enumeration(a: &[Vec<f64>], m: usize, n: usize) -> Option<(FiniteDistribution, FiniteDistribution)> {
    let scale = a.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs()));
    let tol = 1e-10 * scale;
    for k in 1..=m.min(n) {
        let row_sets = subsets(m, k);
        let col_sets = subsets(n, k);
        for rs in &row_sets {
            for cs in &col_sets {
                // Row mix x over rs equalizing columns cs: sum_i x_i a_ij - v = 0, sum x = 1.
                let mut mx = vec![vec![0.0; k + 1]; k + 1];
                let mut bx = vec![0.0; k + 1];
                for (r, &j) in cs.iter().enumerate() {
                    for (c, &i) in rs.iter().enumerate() {
                        mx[r][c] = a[i][j];
                    }
                    mx[r][k] = -1.0;
                }
                for c in 0..k {
                    mx[k][c] = 1.0;
                }
                bx[k] = 1.0;
                let Some(xs) = solve_linear(mx, bx) else { continue };
                if xs[..k].iter().any(|&v| v < -1e-12) {
                    continue;
                }
                let mut my = vec![vec![0.0; k + 1]; k + 1];
                let mut by = vec![0.0; k + 1];
                for (r, &i) in rs.iter().enumerate() {
                    for (c, &j) in cs.iter().enumerate() {
                        my[r][c] = a[i][j];
                    }
                    my[r][k] = -1.0;
                }
                for c in 0..k {
                    my[k][c] = 1.0;
                }
                by[k] = 1.0;
                let Some(ys) = solve_linear(my, by) else { continue };
                if ys[..k].iter().any(|&v| v < -1e-12) {
                    continue;
                }
                let mut p = vec![0.0; m];
                for (c, &i) in rs.iter().enumerate() {
                    p[i] = xs[c].max(0.0);
                }
                let mut q = vec![0.0; n];
                for (c, &j) in cs.iter().enumerate() {
                    q[j] = ys[c].max(0.0);
                }
                let v = xs[k];
                let cols = col_payoffs(&p, a, n);
                let rows = row_payoffs(&q, a);
                if cols.iter().all(|&c| c <= v + tol) && rows.iter().all(|&r| r >= v - tol) {
                    return Some((clean(p), clean(q)));
                }
            }
        }
    }
    None
}

fn linear_program(a: &[Vec<f64>], m: usize, n: usize) -> Option<(FiniteDistribution, FiniteDistribution)> {
    let lo = a.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    // Shift so every payoff is at least 1, making the value positive.
    let shift = 1.0 - lo;
    // Row: min v s.t. sum_i p_i (a_ij + shift) <= v, sum p = 1.
    let mut cons = Vec::with_capacity(n + 1);
    for j in 0..n {
        let mut c: Vec<f64> = (0..m).map(|i| a[i][j] + shift).collect();
        c.push(-1.0);
        cons.push(Constraint::new(c, Sense::Le, 0.0));
    }
    let mut c = vec![1.0; m];
    c.push(0.0);
    cons.push(Constraint::new(c, Sense::Eq, 1.0));
    let mut cost = vec![0.0; m];
    cost.push(1.0);
    let p = match lp::minimize(&cost, &cons) {
        LpOutcome::Optimal { x, .. } => x[..m].to_vec(),
        _ => return None,
    };
    // Column: max v s.t. sum_j (a_ij + shift) q_j >= v, sum q = 1.
    let mut cons = Vec::with_capacity(m + 1);
    for row in a.iter() {
        let mut c: Vec<f64> = row.iter().map(|v| v + shift).collect();
        c.push(-1.0);
        cons.push(Constraint::new(c, Sense::Ge, 0.0));
    }
    let mut c = vec![1.0; n];
    c.push(0.0);
    cons.push(Constraint::new(c, Sense::Eq, 1.0));
    let mut cost = vec![0.0; n];
    cost.push(1.0);
    let q = match lp::maximize(&cost, &cons) {
        LpOutcome::Optimal { x, .. } => x[..n].to_vec(),
        _ => return None,
    };
    if p.iter().sum::<f64>() <= 0.0 || q.iter().sum::<f64>() <= 0.0 {
        return None;
    }
    Some((clean(p), clean(q)))
}
