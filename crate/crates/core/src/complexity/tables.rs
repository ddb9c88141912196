//! DEC evaluation on explicit tables: per-model risk rows and divergence-to-reference
//! rows over decisions.
//!
//! Exact solvers enumerate which models are pushed out of the information ball. For a
//! fixed excluded set E the feasibility condition `a_M · p > ε²` is strict, so the
//! infimum over that region equals the minimum over its closure whenever the region is
//! nonempty. Each piece is then a linear program.

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::games::{solve_matrix_game_with, SolverConfig};
use crate::lp::{self, Constraint, LpOutcome, Sense};

/// Strictness margin for `>` comparisons on LP slack.
pub const STRICT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DecTables {
    /// g^M(π), one row per model.
    pub risk: Vec<Vec<f64>>,
    /// Divergence of M(π) from the reference at π, one row per model.
    pub div: Vec<Vec<f64>>,
    /// g^{M̄}(π) of the reference itself.
    pub ref_risk: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TableSolution {
    pub value: f64,
    pub p: FiniteDistribution,
    pub q: Option<FiniteDistribution>,
    /// Grid resolution when produced by the grid search; 0 for exact solves.
    pub resolution: f64,
    /// Models allowed in the information ball at the optimum (exact solvers).
    pub feasible_models: Vec<usize>,
}

impl DecTables {
    pub fn n_models(&self) -> usize {
        self.risk.len()
    }

    pub fn n_decisions(&self) -> usize {
        self.ref_risk.len()
    }

    /// Appends the reference as an always-feasible model (zero divergence).
    pub fn with_reference_member(&self) -> DecTables {
        let mut t = self.clone();
        t.risk.push(self.ref_risk.clone());
        t.div.push(vec![0.0; self.n_decisions()]);
        t
    }
}

fn dot(a: &[f64], p: &[f64]) -> f64 {
    a.iter().zip(p).map(|(x, y)| x * y).sum()
}

fn simplex_row(n: usize, extra: usize) -> Constraint {
    let mut c = vec![1.0; n];
    c.extend(std::iter::repeat_n(0.0, extra));
    Constraint::new(c, Sense::Eq, 1.0)
}

fn to_dist(x: &[f64]) -> FiniteDistribution {
    let w: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    FiniteDistribution::normalized(w).unwrap_or_else(|_| FiniteDistribution::uniform(x.len()))
}

/// Largest t such that some p has `row·p − t ≥ rhs` for every (row, rhs) in `ge` and
/// `row·p + t ≤ rhs` for every (row, rhs) in `lt`, with `eq0` rows forced to zero mass.
/// `None` when even t = 0 is infeasible.
fn strict_margin(n: usize, ge: &[(&[f64], f64)], lt: &[(&[f64], f64)], eq0: &[&[f64]]) -> Option<(f64, Vec<f64>)> {
    let mut cons = Vec::new();
    for &(row, rhs) in ge {
        let mut c = row.to_vec();
        c.push(-1.0);
        cons.push(Constraint::new(c, Sense::Ge, rhs));
    }
    for &(row, rhs) in lt {
        let mut c = row.to_vec();
        c.push(1.0);
        cons.push(Constraint::new(c, Sense::Le, rhs));
    }
    for &row in eq0 {
        let mut c = row.to_vec();
        c.push(0.0);
        cons.push(Constraint::new(c, Sense::Le, 0.0));
    }
    // t ≤ 1 keeps the program bounded when there are no strict rows.
    let mut c = vec![0.0; n];
    c.push(1.0);
    cons.push(Constraint::new(c, Sense::Le, 1.0));
    cons.push(simplex_row(n, 1));
    let mut cost = vec![0.0; n];
    cost.push(1.0);
    match lp::maximize(&cost, &cons) {
        LpOutcome::Optimal { x, objective } => Some((objective, x[..n].to_vec())),
        _ => None,
    }
}

/// min over p of max_k risk_k·p subject to linear side constraints. Returns (value, p).
fn minmax_lp(n: usize, rows: &[&[f64]], ge: &[(&[f64], f64)], le: &[(&[f64], f64)], eq0: &[&[f64]], lin_obj: Option<&[f64]>) -> Option<(f64, Vec<f64>)> {
    // Variables: p (n), v (1). Objective: v, or lin_obj·p when given.
    let mut cons = Vec::new();
    for &r in rows {
        let mut c = r.to_vec();
        c.push(-1.0);
        cons.push(Constraint::new(c, Sense::Le, 0.0));
    }
    for &(row, rhs) in ge {
        let mut c = row.to_vec();
        c.push(0.0);
        cons.push(Constraint::new(c, Sense::Ge, rhs));
    }
    for &(row, rhs) in le {
        let mut c = row.to_vec();
        c.push(0.0);
        cons.push(Constraint::new(c, Sense::Le, rhs));
    }
    for &row in eq0 {
        let mut c = row.to_vec();
        c.push(0.0);
        cons.push(Constraint::new(c, Sense::Le, 0.0));
    }
    cons.push(simplex_row(n, 1));
    let mut cost = match lin_obj {
        Some(o) => o.to_vec(),
        None => vec![0.0; n],
    };
    cost.push(if lin_obj.is_some() { 0.0 } else { 1.0 });
    match lp::minimize(&cost, &cons) {
        LpOutcome::Optimal { x, .. } => {
            let p = x[..n].to_vec();
            let v = match lin_obj {
                Some(o) => dot(o, &p),
                None => rows.iter().map(|r| dot(r, &p)).fold(0.0, f64::max),
            };
            Some((v, p))
        }
        _ => None,
    }
}

fn check_size(k: usize) -> Result<()> {
    if k > MAX_EXACT_MODELS {
        return Err(Error::Unsupported(format!("{k} models exceed the exact-solver limit {MAX_EXACT_MODELS}")));
    }
    Ok(())
}

/// Largest class size handled by subset enumeration.
pub const MAX_EXACT_MODELS: usize = 14;

/// inf_p sup { risk_k·p : div_k·p ≤ ε² } over the rows of `t`, exactly. Rows that must
/// always count (the reference) should be added with zero divergence.
pub fn rdec_constrained_exact(t: &DecTables, eps: f64) -> Result<TableSolution> {
    let k = t.n_models();
    let n = t.n_decisions();
    check_size(k)?;
    let e2 = eps * eps;
    let always: Vec<usize> = (0..k).filter(|&m| t.div[m].iter().all(|&d| d <= e2)).collect();
    let mut best: Option<TableSolution> = None;
    for mask in 0u32..(1u32 << k) {
        let excluded: Vec<usize> = (0..k).filter(|&m| mask >> m & 1 == 1).collect();
        // A model that is feasible at every p cannot be excluded.
        if excluded.iter().any(|m| always.contains(m)) {
            continue;
        }
        let kept: Vec<usize> = (0..k).filter(|&m| mask >> m & 1 == 0).collect();
        let ge: Vec<(&[f64], f64)> = excluded.iter().map(|&m| (t.div[m].as_slice(), e2)).collect();
        if !excluded.is_empty() {
            match strict_margin(n, &ge, &[], &[]) {
                Some((margin, _)) if margin > STRICT_TOL => {}
                _ => continue,
            }
        }
        let rows: Vec<&[f64]> = kept.iter().map(|&m| t.risk[m].as_slice()).collect();
        let Some((v, p)) = minmax_lp(n, &rows, &ge, &[], &[], None) else { continue };
        if best.as_ref().is_none_or(|b| v < b.value - 1e-15) {
            best = Some(TableSolution { value: v.max(0.0), p: to_dist(&p), q: None, resolution: 0.0, feasible_models: kept });
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no feasible exclusion pattern".into()))
}

fn game_value(rows_by_decision: Vec<Vec<f64>>) -> Result<(f64, FiniteDistribution, FiniteDistribution)> {
    let s = solve_matrix_game_with(&rows_by_decision, &SolverConfig::exact())?;
    Ok((s.value, s.row_strategy, s.col_strategy))
}

/// Transposes model rows into a decision-by-model payoff matrix.
fn payoff(rows: &[&[f64]], n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|pi| rows.iter().map(|r| r[pi]).collect()).collect()
}

/// max_q min_{m ∈ excluded} div_m·q, with its maximizer.
fn exclusion_value(t: &DecTables, excluded: &[usize]) -> Result<(f64, FiniteDistribution)> {
    let n = t.n_decisions();
    let neg: Vec<Vec<f64>> = excluded.iter().map(|&m| t.div[m].iter().map(|d| -d).collect()).collect();
    let rows: Vec<&[f64]> = neg.iter().map(Vec::as_slice).collect();
    let (v, q, _) = game_value(payoff(&rows, n))?;
    Ok((-v, q))
}

/// Shared driver for the PAC forms: for each excluded set whose strict exclusion is
/// achievable by some q, evaluate `inner` on the kept models.
fn pac_driver(
    t: &DecTables,
    eps: f64,
    mut inner: impl FnMut(&[usize], f64) -> Result<Option<(f64, FiniteDistribution)>>,
) -> Result<TableSolution> {
    let k = t.n_models();
    let n = t.n_decisions();
    check_size(k)?;
    let e2 = eps * eps;
    let mut best: Option<TableSolution> = None;
    for mask in 0u32..(1u32 << k) {
        let excluded: Vec<usize> = (0..k).filter(|&m| mask >> m & 1 == 1).collect();
        let kept: Vec<usize> = (0..k).filter(|&m| mask >> m & 1 == 0).collect();
        let q = if excluded.is_empty() {
            FiniteDistribution::uniform(n)
        } else {
            let (v, q) = exclusion_value(t, &excluded)?;
            if v <= e2 + STRICT_TOL {
                continue;
            }
            q
        };
        let bound = best.as_ref().map_or(f64::INFINITY, |b| b.value);
        let Some((v, p)) = inner(&kept, bound)? else { continue };
        if v < bound - 1e-15 {
            best = Some(TableSolution { value: v.max(0.0), p, q: Some(q), resolution: 0.0, feasible_models: kept });
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no exclusion pattern evaluated".into()))
}

/// inf_{p,q} sup { risk_k·p : div_k·q ≤ ε² }, exactly.
pub fn pdec_constrained_exact(t: &DecTables, eps: f64) -> Result<TableSolution> {
    let n = t.n_decisions();
    pac_driver(t, eps, |kept, _| {
        if kept.is_empty() {
            return Ok(Some((0.0, FiniteDistribution::uniform(n))));
        }
        let rows: Vec<&[f64]> = kept.iter().map(|&m| t.risk[m].as_slice()).collect();
        let (v, p, _) = game_value(payoff(&rows, n))?;
        Ok(Some((v, p)))
    })
}

/// δ-quantile risk of `risk` under `p`: the largest level ℓ in {0} ∪ g(supp p) with
/// P(g ≥ ℓ) ≥ δ. At δ = 0 this is the largest risk on the support.
pub fn quantile_risk_levels(p: &[f64], risk: &[f64], delta: f64) -> f64 {
    let mut best = 0.0f64;
    for (pi, &g) in risk.iter().enumerate() {
        if p[pi] <= 0.0 || g <= best {
            continue;
        }
        let tail: f64 = risk.iter().zip(p).filter(|(&h, _)| h >= g).map(|(_, &w)| w).sum();
        if tail >= delta - 1e-15 {
            best = g;
        }
    }
    best
}

fn indicator_above(risk: &[f64], level: f64) -> Vec<f64> {
    risk.iter().map(|&g| if g > level + STRICT_TOL { 1.0 } else { 0.0 }).collect()
}

fn sorted_levels<'a>(rows: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut levels: Vec<f64> = std::iter::once(0.0).chain(rows.flat_map(|r| r.iter().copied())).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() <= STRICT_TOL);
    levels
}

/// Whether some p keeps P_p(g_k > level) below δ for every kept model (at δ = 0: equal
/// to zero). Returns the witness p.
fn quantile_level_ok(t: &DecTables, kept: &[usize], level: f64, delta: f64) -> Result<Option<FiniteDistribution>> {
    let n = t.n_decisions();
    let ind: Vec<Vec<f64>> = kept.iter().map(|&m| indicator_above(&t.risk[m], level)).collect();
    let rows: Vec<&[f64]> = ind.iter().map(Vec::as_slice).collect();
    let (w, p, _) = game_value(payoff(&rows, n))?;
    let ok = if delta > 0.0 { w < delta - STRICT_TOL } else { w <= STRICT_TOL };
    Ok(ok.then_some(p))
}

/// inf_{p,q} sup { ĝ_δ^k(p) : div_k·q ≤ ε² }, exactly.
pub fn pdec_quantile_exact(t: &DecTables, eps: f64, delta: f64) -> Result<TableSolution> {
    let n = t.n_decisions();
    pac_driver(t, eps, |kept, bound| {
        if kept.is_empty() {
            return Ok(Some((0.0, FiniteDistribution::uniform(n))));
        }
        let levels = sorted_levels(kept.iter().map(|&m| &t.risk[m]));
        // Acceptance is monotone in the level: binary search for the first that passes.
        let (mut lo, mut hi) = (0usize, levels.len() - 1);
        let mut witness = quantile_level_ok(t, kept, levels[hi], delta)?;
        if witness.is_none() {
            return Err(Error::InvalidInput("top risk level rejected by the quantile test".into()));
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            match quantile_level_ok(t, kept, levels[mid], delta)? {
                Some(p) => {
                    hi = mid;
                    witness = Some(p);
                }
                None => lo = mid + 1,
            }
        }
        let p = match quantile_level_ok(t, kept, levels[hi], delta)? {
            Some(p) => p,
            None => witness.expect("witness recorded"),
        };
        let v = levels[hi];
        Ok((v < bound).then_some((v, p)))
    })
}

/// inf_p sup_{k : div_k·p ≤ ε²} max(ĝ_δ^k(p), ref_risk·p), exactly. The reference term
/// counts even when no model is feasible.
pub fn rdec_quantile_exact(t: &DecTables, eps: f64, delta: f64) -> Result<TableSolution> {
    let k = t.n_models();
    let n = t.n_decisions();
    check_size(k)?;
    let e2 = eps * eps;
    let mut best: Option<TableSolution> = None;
    for mask in 0u32..(1u32 << k) {
        let excluded: Vec<usize> = (0..k).filter(|&m| mask >> m & 1 == 1).collect();
        let kept: Vec<usize> = (0..k).filter(|&m| mask >> m & 1 == 0).collect();
        let ge: Vec<(&[f64], f64)> = excluded.iter().map(|&m| (t.div[m].as_slice(), e2)).collect();
        let levels = sorted_levels(kept.iter().map(|&m| &t.risk[m]));
        for &level in &levels {
            if best.as_ref().is_some_and(|b| level >= b.value) {
                break;
            }
            let ind: Vec<Vec<f64>> = kept.iter().map(|&m| indicator_above(&t.risk[m], level)).collect();
            let (lt, eq0): (Vec<(&[f64], f64)>, Vec<&[f64]>) = if delta > 0.0 {
                (ind.iter().map(|r| (r.as_slice(), delta)).collect(), Vec::new())
            } else {
                (Vec::new(), ind.iter().map(Vec::as_slice).collect())
            };
            let has_strict = !ge.is_empty() || !lt.is_empty();
            match strict_margin(n, &ge, &lt, &eq0) {
                Some((margin, _)) if !has_strict || margin > STRICT_TOL => {}
                _ => continue,
            }
            let le: Vec<(&[f64], f64)> = lt.clone();
            let Some((v_ref, p)) = minmax_lp(n, &[], &ge, &le, &eq0, Some(&t.ref_risk)) else { continue };
            let v = level.max(v_ref);
            if best.as_ref().is_none_or(|b| v < b.value - 1e-15) {
                best = Some(TableSolution { value: v.max(0.0), p: to_dist(&p), q: None, resolution: 0.0, feasible_models: kept.clone() });
            }
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no feasible exclusion pattern".into()))
}

/// Offset DEC payoff: decisions by models, g − γ·div.
pub fn offset_payoff(t: &DecTables, gamma: f64) -> Vec<Vec<f64>> {
    (0..t.n_decisions())
        .map(|pi| (0..t.n_models()).map(|m| t.risk[m][pi] - gamma * t.div[m][pi]).collect())
        .collect()
}

// ---------------------------------------------------------------------------------
// Grid search

/// Simplex grid configuration: base resolution 1/`denominator`, refined by ×`factor`
/// around the incumbent `refinements` times. `max_points` caps the base grid; the
/// denominator is lowered until it fits.
#[derive(Clone, Debug)]
pub struct GridConfig {
    pub denominator: usize,
    pub factor: usize,
    pub refinements: usize,
    pub max_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { denominator: 64, factor: 4, refinements: 2, max_points: 2_000_000 }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Calls `f` on every point of the simplex grid with the given denominator.
pub fn for_each_grid_point(n: usize, denom: usize, mut f: impl FnMut(&[f64])) {
    let mut counts = vec![0usize; n];
    let mut p = vec![0.0; n];
    fn rec(i: usize, left: usize, n: usize, denom: usize, counts: &mut [usize], p: &mut [f64], f: &mut dyn FnMut(&[f64])) {
        if i == n - 1 {
            counts[i] = left;
            for j in 0..n {
                p[j] = counts[j] as f64 / denom as f64;
            }
            f(p);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, n, denom, counts, p, f);
        }
    }
    rec(0, denom, n, denom, &mut counts, &mut p, &mut f);
}

/// Minimizes `objective` over the simplex by grid search with local refinement.
/// Returns (value, argmin, finest resolution).
pub fn grid_minimize(n: usize, cfg: &GridConfig, mut objective: impl FnMut(&[f64]) -> f64) -> Result<(f64, Vec<f64>, f64)> {
    let mut denom = cfg.denominator.max(1);
    while denom > 1 && binom(denom + n - 1, n - 1) > cfg.max_points as f64 {
        denom /= 2;
    }
    if binom(denom + n - 1, n - 1) > cfg.max_points as f64 {
        return Err(Error::Unsupported(format!("simplex grid over {n} decisions exceeds the point budget")));
    }
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for_each_grid_point(n, denom, |p| {
        let v = objective(p);
        if v < best.0 {
            best = (v, p.to_vec());
        }
    });
    let mut step = 1.0 / denom as f64;
    for _ in 0..cfg.refinements {
        let fine = step / cfg.factor as f64;
        let center = best.1.clone();
        let radius = cfg.factor as i64;
        // Local moves: each coordinate except the last shifts by up to ±factor fine steps;
        // the last absorbs the difference. Capped to 3 free coordinates plus pairwise moves.
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if n <= 4 {
            let free = n - 1;
            let total = (2 * radius + 1).pow(free as u32);
            for code in 0..total {
                let mut c = code;
                let mut p = center.clone();
                let mut shift = 0.0;
                for pj in p.iter_mut().take(free) {
                    let k = (c % (2 * radius + 1)) as i64 - radius;
                    c /= 2 * radius + 1;
                    *pj += k as f64 * fine;
                    shift += k as f64 * fine;
                }
                p[n - 1] -= shift;
                candidates.push(p);
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for k in 1..=radius {
                        let mut p = center.clone();
                        p[i] += k as f64 * fine;
                        p[j] -= k as f64 * fine;
                        candidates.push(p);
                    }
                }
            }
        }
        for p in candidates {
            if p.iter().any(|&x| x < -1e-12) {
                continue;
            }
            let p: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
            let v = objective(&p);
            if v < best.0 {
                best = (v, p);
            }
        }
        step = fine;
    }
    Ok((best.0, best.1, step))
}

/// Grid version of [`rdec_constrained_exact`]; an upper bound on the infimum.
pub fn rdec_constrained_grid(t: &DecTables, eps: f64, cfg: &GridConfig) -> Result<TableSolution> {
    let e2 = eps * eps;
    let (v, p, res) = grid_minimize(t.n_decisions(), cfg, |p| {
        (0..t.n_models())
            .filter(|&m| dot(&t.div[m], p) <= e2)
            .map(|m| dot(&t.risk[m], p))
            .fold(0.0, f64::max)
    })?;
    Ok(TableSolution { value: v, p: to_dist(&p), q: None, resolution: res, feasible_models: Vec::new() })
}

/// Grid version of [`rdec_quantile_exact`].
pub fn rdec_quantile_grid(t: &DecTables, eps: f64, delta: f64, cfg: &GridConfig) -> Result<TableSolution> {
    let e2 = eps * eps;
    let (v, p, res) = grid_minimize(t.n_decisions(), cfg, |p| {
        let worst = (0..t.n_models())
            .filter(|&m| dot(&t.div[m], p) <= e2)
            .map(|m| quantile_risk_levels(p, &t.risk[m], delta))
            .fold(0.0, f64::max);
        worst.max(dot(&t.ref_risk, p))
    })?;
    Ok(TableSolution { value: v, p: to_dist(&p), q: None, resolution: res, feasible_models: Vec::new() })
}

/// Grid over (p, q) for the PAC forms, at a coarser resolution since the search is
/// over pairs. `quantile = None` uses expected risk.
pub fn pdec_grid(t: &DecTables, eps: f64, quantile: Option<f64>, denom: usize) -> Result<TableSolution> {
    let n = t.n_decisions();
    let e2 = eps * eps;
    let mut qs = Vec::new();
    for_each_grid_point(n, denom, |q| qs.push(q.to_vec()));
    let mut ps = Vec::new();
    for_each_grid_point(n, denom, |p| ps.push(p.to_vec()));
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for (qi, q) in qs.iter().enumerate() {
        let feasible: Vec<usize> = (0..t.n_models()).filter(|&m| dot(&t.div[m], q) <= e2).collect();
        for (pi, p) in ps.iter().enumerate() {
            let v = feasible
                .iter()
                .map(|&m| match quantile {
                    None => dot(&t.risk[m], p),
                    Some(d) => quantile_risk_levels(p, &t.risk[m], d),
                })
                .fold(0.0, f64::max);
            if v < best.0 {
                best = (v, pi, qi);
            }
        }
    }
    Ok(TableSolution {
        value: best.0,
        p: to_dist(&ps[best.1]),
        q: Some(to_dist(&qs[best.2])),
        resolution: 1.0 / denom as f64,
        feasible_models: Vec::new(),
    })
}
