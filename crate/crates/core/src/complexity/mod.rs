//! Complexity measures on finite model classes: decision dimension, offset,
//! constrained and quantile DECs, the linearized constrained DEC, T^DEC, the per-context
//! DEC of a value class, and the exploration-by-optimization value (see [`exo`]).
//!
//! Constrained and quantile DECs are solved exactly by enumerating which models are
//! pushed outside the information ball (see [`tables`]). Classes too large for that
//! fall back to simplex-grid search, whose resolution is recorded as the certificate.

pub mod exo;
pub mod tables;

use serde::{Deserialize, Serialize};

use crate::distribution::FiniteDistribution;
use crate::divergence::DivergenceKind;
use crate::error::{Error, Result};
use crate::games::{solve_matrix_game_with, SolverConfig};
use crate::model::{Channel, MixtureSpec, Model, ModelClass, RiskMode};
use crate::PolicyDistribution;

pub use exo::{exo_value, ExoConfig, ExoSolution};
pub use tables::{DecTables, GridConfig, TableSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecKind {
    Ddim,
    OffsetR,
    ConstrainedR,
    ConstrainedP,
    QuantileP,
    QuantileR,
    LinConstrainedR,
    Exo,
    Tdec,
    PerContextR,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile: Option<f64>,
}

/// How far the reported value may be from the true quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Certificate {
    /// Closed by exact linear programming; `tol` is the numerical tolerance.
    Exact { tol: f64 },
    /// Duality gap of a game or saddle solve.
    Gap { gap: f64 },
    /// Simplex grid search at the given finest step; the value is an upper bound on the
    /// infimum.
    Grid { resolution: f64 },
    /// Bisection bracket on ε, reported as an interval on the value.
    Bisection { lower: f64, upper: f64 },
}

impl Certificate {
    /// Numerical slack implied by the certificate.
    pub fn slack(&self) -> f64 {
        match *self {
            Certificate::Exact { tol } => tol,
            Certificate::Gap { gap } => gap,
            Certificate::Grid { resolution } => resolution,
            Certificate::Bisection { lower, upper } => upper - lower,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecReport {
    pub kind: DecKind,
    pub params: DecParams,
    pub value: f64,
    pub achieving_p: Option<PolicyDistribution>,
    pub achieving_q: Option<PolicyDistribution>,
    pub witness_model: Option<usize>,
    pub certificate: Certificate,
    /// Name of the reference model (or mixture) the value was computed against.
    pub reference: Option<String>,
    /// Set when the value is a supremum over a finite mixture grid standing in for the
    /// convex hull, so it is only a lower bound on the hull quantity.
    pub lower_certified: bool,
    pub notes: Vec<String>,
}

impl DecReport {
    fn new(kind: DecKind, params: DecParams, value: f64, certificate: Certificate) -> Self {
        Self {
            kind,
            params,
            value,
            achieving_p: None,
            achieving_q: None,
            witness_model: None,
            certificate,
            reference: None,
            lower_certified: false,
            notes: Vec::new(),
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Search strategy for the constrained and quantile DECs.
#[derive(Clone, Debug)]
pub enum DecSolver {
    /// Exact below [`tables::MAX_EXACT_MODELS`] models, grid search above.
    Auto,
    Exact,
    Grid(GridConfig),
}

#[derive(Clone, Debug)]
pub struct DecOptions {
    pub solver: DecSolver,
    pub game: SolverConfig,
    /// Grid denominator for the (p, q) search of the PAC forms in grid mode.
    pub pac_grid_denominator: usize,
}

impl Default for DecOptions {
    fn default() -> Self {
        Self { solver: DecSolver::Auto, game: SolverConfig::exact(), pac_grid_denominator: 16 }
    }
}

impl DecOptions {
    fn use_exact(&self, n_models: usize) -> bool {
        match self.solver {
            DecSolver::Auto => n_models <= tables::MAX_EXACT_MODELS,
            DecSolver::Exact => true,
            DecSolver::Grid(_) => false,
        }
    }

    fn grid(&self) -> GridConfig {
        match &self.solver {
            DecSolver::Grid(g) => g.clone(),
            _ => GridConfig::default(),
        }
    }
}

const EXACT_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------------
// References and the hull proxy

/// A reference model: a class member, a mixture of members, or an arbitrary model.
#[derive(Clone, Debug)]
pub enum Reference {
    Member(usize),
    Mixture(MixtureSpec),
    Model(Model),
}

impl Reference {
    pub fn resolve(&self, class: &ModelClass) -> Result<Model> {
        match self {
            Reference::Member(k) => class
                .models
                .get(*k)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("model index {k} out of range"))),
            Reference::Mixture(spec) => class.mixture(spec),
            Reference::Model(m) => {
                if m.n_decisions() != class.n_decisions() {
                    return Err(Error::DimensionMismatch { expected: class.n_decisions(), got: m.n_decisions() });
                }
                Ok(m.clone())
            }
        }
    }
}

/// Finite stand-in for co(M): all members plus every mixture of at most `sparsity`
/// members with weights in multiples of 1/`denominator`, plus `random_restarts`
/// Dirichlet(1) mixtures drawn from `seed`.
#[derive(Clone, Debug)]
pub struct HullConfig {
    pub sparsity: usize,
    pub denominator: usize,
    pub random_restarts: usize,
    pub seed: u64,
}

impl Default for HullConfig {
    fn default() -> Self {
        Self { sparsity: 2, denominator: 8, random_restarts: 0, seed: 0 }
    }
}

fn compositions(total: usize, parts: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if cur.len() + 1 == parts {
        if total > 0 {
            cur.push(total);
            out.push(cur.clone());
            cur.pop();
        }
        return;
    }
    for c in 1..total {
        cur.push(c);
        compositions(total - c, parts, out, cur);
        cur.pop();
    }
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Mixture weight vectors of the hull proxy, members first.
pub fn hull_weights(n_models: usize, cfg: &HullConfig) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..n_models)
        .map(|k| (0..n_models).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
        .collect();
    for size in 2..=cfg.sparsity.min(n_models) {
        let mut sets = Vec::new();
        subsets(n_models, size, 0, &mut Vec::new(), &mut sets);
        let mut comps = Vec::new();
        compositions(cfg.denominator, size, &mut comps, &mut Vec::new());
        for s in &sets {
            for c in &comps {
                let mut w = vec![0.0; n_models];
                for (&k, &ck) in s.iter().zip(c) {
                    w[k] = ck as f64 / cfg.denominator as f64;
                }
                out.push(w);
            }
        }
    }
    if cfg.random_restarts > 0 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.random_restarts {
            let e: Vec<f64> = (0..n_models).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            out.push(e.iter().map(|x| x / s).collect());
        }
    }
    out
}

/// Reference set standing in for co(M). Classes without linear values (explicit risk,
/// estimation) have no well-defined mixture risk, so their members alone are used.
/// The flag reports whether proper mixtures were included.
pub fn hull_references(class: &ModelClass, cfg: &HullConfig) -> Result<(Vec<Model>, bool)> {
    let mixable = class.risk_mode.is_reward_max()
        && !class.models.iter().any(|m| matches!(m.channel, Channel::ContextGaussian { .. }));
    if !mixable {
        return Ok((class.models.clone(), false));
    }
    let refs = hull_weights(class.n_models(), cfg)
        .into_iter()
        .map(|w| class.mixture(&MixtureSpec::new(FiniteDistribution::normalized(w)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((refs, true))
}

/// Risk and squared-Hellinger tables of `class` against `reference`.
pub fn dec_tables(class: &ModelClass, reference: &Model) -> Result<DecTables> {
    Ok(DecTables {
        risk: class.risk_table(),
        div: class.divergence_table(DivergenceKind::SquaredHellinger, reference)?,
        ref_risk: reference.risk.clone(),
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidInput(format!("ε = {eps} outside (0, 1]")));
    }
    Ok(())
}

fn check_quantile(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!("quantile δ = {delta} outside [0, 1)")));
    }
    Ok(())
}

fn witness_from(sol: &TableSolution, t: &DecTables) -> Option<usize> {
    // The feasible model with the largest risk under the achieving p.
    let p = sol.p.weights();
    let candidates: Vec<usize> =
        if sol.feasible_models.is_empty() { (0..t.n_models()).collect() } else { sol.feasible_models.clone() };
    candidates
        .into_iter()
        .filter(|&m| m < t.n_models())
        .max_by(|&a, &b| {
            let ra: f64 = t.risk[a].iter().zip(p).map(|(x, y)| x * y).sum();
            let rb: f64 = t.risk[b].iter().zip(p).map(|(x, y)| x * y).sum();
            ra.total_cmp(&rb).then(b.cmp(&a))
        })
}

fn table_report(kind: DecKind, params: DecParams, sol: TableSolution, t: &DecTables, reference: &Model) -> DecReport {
    let certificate = if sol.resolution > 0.0 {
        Certificate::Grid { resolution: sol.resolution }
    } else {
        Certificate::Exact { tol: EXACT_TOL }
    };
    let mut r = DecReport::new(kind, params, sol.value, certificate);
    r.witness_model = witness_from(&sol, t);
    r.achieving_p = Some(sol.p);
    r.achieving_q = sol.q;
    r.reference = Some(reference.name.clone());
    r
}

// ---------------------------------------------------------------------------------
// Decision dimension

/// Ddim_Δ = 1 / max_p min_M p(S_M) with S_M the Δ-near-optimal set of M.
pub fn decision_dimension(class: &ModelClass, delta: f64) -> Result<DecReport> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("Δ = {delta} must be nonnegative")));
    }
    let params = DecParams { delta: Some(delta), ..Default::default() };
    let sets: Vec<Vec<usize>> = class.models.iter().map(|m| m.near_optimal(delta)).collect();
    if let Some(k) = sets.iter().position(Vec::is_empty) {
        let mut r = DecReport::new(DecKind::Ddim, params, f64::INFINITY, Certificate::Exact { tol: 0.0 });
        r.witness_model = Some(k);
        r.notes.push(format!("model {} has no decision within {delta} of optimal", class.models[k].name));
        return Ok(r);
    }
    decision_dimension_from_sets(class.n_decisions(), &sets, params)
}

/// Decision dimension from explicit near-optimal sets over `n` decisions.
pub fn decision_dimension_from_sets(n: usize, sets: &[Vec<usize>], params: DecParams) -> Result<DecReport> {
    // Row player picks p to minimize −p(S_M); column player picks M.
    let payoff: Vec<Vec<f64>> =
        (0..n).map(|pi| sets.iter().map(|s| if s.contains(&pi) { -1.0 } else { 0.0 }).collect()).collect();
    let sol = solve_matrix_game_with(&payoff, &SolverConfig::exact())?;
    let cover_lo = -sol.value;
    let cover_hi = -sol.lower;
    let value = 1.0 / cover_lo;
    let mut r = DecReport::new(DecKind::Ddim, params, value, Certificate::Gap { gap: (value - 1.0 / cover_hi).max(0.0) });
    let p = sol.row_strategy;
    // Witness: the model with the smallest coverage under p.
    r.witness_model = (0..sets.len()).min_by(|&a, &b| {
        let ca: f64 = sets[a].iter().map(|&i| p.get(i)).sum();
        let cb: f64 = sets[b].iter().map(|&i| p.get(i)).sum();
        ca.total_cmp(&cb)
    });
    r.achieving_p = Some(p);
    Ok(r)
}

/// Coverage min_M p(S_M) of a given distribution; 1 / coverage upper-bounds Ddim_Δ.
pub fn coverage(class: &ModelClass, p: &[f64], delta: f64) -> f64 {
    class
        .models
        .iter()
        .map(|m| m.near_optimal(delta).iter().map(|&i| p[i]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------------
// Offset DEC

/// inf_p max_M { E_p g^M − γ E_p D_H²(M(π), M̄(π)) } over the class members.
pub fn offset_rdec(class: &ModelClass, reference: &Reference, gamma: f64, opts: &DecOptions) -> Result<DecReport> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("γ = {gamma} must be positive")));
    }
    let m_ref = reference.resolve(class)?;
    let t = dec_tables(class, &m_ref)?;
    let sol = solve_matrix_game_with(&tables::offset_payoff(&t, gamma), &opts.game)?;
    let params = DecParams { gamma: Some(gamma), ..Default::default() };
    let mut r = DecReport::new(DecKind::OffsetR, params, sol.value, Certificate::Gap { gap: sol.gap });
    r.witness_model = sol.col_strategy.weights().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|x| x.0);
    r.achieving_p = Some(sol.row_strategy);
    r.reference = Some(m_ref.name);
    if sol.budget_exhausted {
        r.notes.push("game solver budget exhausted".into());
    }
    Ok(r)
}

// ---------------------------------------------------------------------------------
// Constrained DECs

/// r-dec^c_ε(M ∪ {M̄}, M̄).
pub fn constrained_rdec(class: &ModelClass, reference: &Reference, eps: f64, opts: &DecOptions) -> Result<DecReport> {
    check_eps(eps)?;
    let m_ref = reference.resolve(class)?;
    constrained_rdec_model(class, &m_ref, eps, opts)
}

fn constrained_rdec_model(class: &ModelClass, m_ref: &Model, eps: f64, opts: &DecOptions) -> Result<DecReport> {
    let t = dec_tables(class, m_ref)?.with_reference_member();
    let sol = if opts.use_exact(t.n_models()) {
        tables::rdec_constrained_exact(&t, eps)?
    } else {
        tables::rdec_constrained_grid(&t, eps, &opts.grid())?
    };
    let params = DecParams { eps: Some(eps), ..Default::default() };
    let mut r = table_report(DecKind::ConstrainedR, params, sol, &t, m_ref);
    // Index n_models refers to the appended reference.
    if r.witness_model == Some(class.n_models()) {
        r.witness_model = None;
        r.notes.push("worst case attained by the reference itself".into());
    }
    Ok(r)
}

/// p-dec^c_ε(M, M̄): the pair (p, q) with the Hellinger constraint on q.
pub fn constrained_pdec(class: &ModelClass, reference: &Reference, eps: f64, opts: &DecOptions) -> Result<DecReport> {
    check_eps(eps)?;
    let m_ref = reference.resolve(class)?;
    let t = dec_tables(class, &m_ref)?;
    let sol = if opts.use_exact(t.n_models()) {
        tables::pdec_constrained_exact(&t, eps)?
    } else {
        tables::pdec_grid(&t, eps, None, opts.pac_grid_denominator)?
    };
    let params = DecParams { eps: Some(eps), ..Default::default() };
    Ok(table_report(DecKind::ConstrainedP, params, sol, &t, &m_ref))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRiskValue {
    pub delta: f64,
    pub value: f64,
}

/// ĝ^M_δ(p) = sup{Δ ≥ 0 : P_{π∼p}(g^M(π) ≥ Δ) ≥ δ}, attained on {0} ∪ g(supp p).
pub fn quantile_risk(p: &PolicyDistribution, model: &Model, delta: f64) -> Result<QuantileRiskValue> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!("quantile δ = {delta} outside [0, 1]")));
    }
    if p.len() != model.n_decisions() {
        return Err(Error::DimensionMismatch { expected: model.n_decisions(), got: p.len() });
    }
    Ok(QuantileRiskValue { delta, value: tables::quantile_risk_levels(p.weights(), &model.risk, delta) })
}

/// p-dec^q_{ε,δ}(M, M̄).
pub fn quantile_pdec(class: &ModelClass, reference: &Reference, eps: f64, delta: f64, opts: &DecOptions) -> Result<DecReport> {
    check_eps(eps)?;
    check_quantile(delta)?;
    let m_ref = reference.resolve(class)?;
    let t = dec_tables(class, &m_ref)?;
    let sol = if opts.use_exact(t.n_models()) {
        tables::pdec_quantile_exact(&t, eps, delta)?
    } else {
        tables::pdec_grid(&t, eps, Some(delta), opts.pac_grid_denominator)?
    };
    let params = DecParams { eps: Some(eps), quantile: Some(delta), ..Default::default() };
    Ok(table_report(DecKind::QuantileP, params, sol, &t, &m_ref))
}

/// r-dec^q_{ε,δ}(M ∪ {M̄}, M̄) over p ∈ Δ(Π).
pub fn quantile_rdec(class: &ModelClass, reference: &Reference, eps: f64, delta: f64, opts: &DecOptions) -> Result<DecReport> {
    check_eps(eps)?;
    check_quantile(delta)?;
    let m_ref = reference.resolve(class)?;
    let t = dec_tables(class, &m_ref)?;
    let sol = if opts.use_exact(t.n_models()) {
        tables::rdec_quantile_exact(&t, eps, delta)?
    } else {
        tables::rdec_quantile_grid(&t, eps, delta, &opts.grid())?
    };
    let params = DecParams { eps: Some(eps), quantile: Some(delta), ..Default::default() };
    let mut r = table_report(DecKind::QuantileR, params, sol, &t, &m_ref);
    r.notes.push("optimized over single-round decision distributions, not T-round mixture policies".into());
    Ok(r)
}

// ---------------------------------------------------------------------------------
// Suprema over references

/// sup over `references` of r-dec^c_ε(M ∪ {M̄}, M̄). `hull` marks the result
/// lower-certified.
pub fn constrained_rdec_sup(class: &ModelClass, references: &[Model], eps: f64, hull: bool, opts: &DecOptions) -> Result<DecReport> {
    check_eps(eps)?;
    if references.is_empty() {
        return Err(Error::InvalidInput("empty reference set".into()));
    }
    let mut best: Option<DecReport> = None;
    for m_ref in references {
        let r = constrained_rdec_model(class, m_ref, eps, opts)?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    let mut r = best.expect("nonempty reference set");
    r.lower_certified = hull;
    Ok(r)
}

/// ε · max over ε′ ∈ grid ∩ [ε, 1] of r-dec^c_{ε′} / ε′, with r-dec^c taken as the
/// supremum over `references`.
pub fn lin_constrained_rdec(
    class: &ModelClass,
    references: &[Model],
    eps: f64,
    eps_grid: &[f64],
    hull: bool,
    opts: &DecOptions,
) -> Result<DecReport> {
    check_eps(eps)?;
    let grid: Vec<f64> = eps_grid.iter().copied().filter(|&e| e >= eps - 1e-15 && e <= 1.0).collect();
    if grid.is_empty() {
        return Err(Error::InvalidInput("ε′ grid has no point in [ε, 1]".into()));
    }
    let mut best: Option<(f64, DecReport, f64)> = None;
    for &e in &grid {
        let r = constrained_rdec_sup(class, references, e, hull, opts)?;
        let ratio = r.value / e;
        if best.as_ref().is_none_or(|b| ratio > b.0) {
            best = Some((ratio, r, e));
        }
    }
    let (ratio, inner, at) = best.expect("nonempty grid");
    let params = DecParams { eps: Some(eps), ..Default::default() };
    let slack = eps * inner.certificate.slack() / at;
    let mut r = DecReport::new(
        DecKind::LinConstrainedR,
        params,
        eps * ratio,
        if matches!(inner.certificate, Certificate::Grid { .. }) {
            Certificate::Grid { resolution: slack }
        } else {
            Certificate::Exact { tol: slack.max(EXACT_TOL) }
        },
    );
    r.achieving_p = inner.achieving_p;
    r.witness_model = inner.witness_model;
    r.reference = inner.reference;
    r.lower_certified = hull;
    r.notes.push(format!("ratio maximized at ε′ = {at}"));
    Ok(r)
}

/// T^DEC(Δ) = inf { ε^{−2} : ε ∈ (0, 1), sup_M̄ r-dec^c_ε ≤ Δ }, by bisection on ε.
/// The certificate brackets the value.
pub fn tdec(class: &ModelClass, references: &[Model], delta: f64, hull: bool, opts: &DecOptions) -> Result<DecReport> {
    if references.is_empty() {
        return Err(Error::InvalidInput("empty reference set".into()));
    }
    tdec_over(delta, hull, references.len(), |i, e| constrained_rdec_model(class, &references[i], e, opts).map(|r| r.value))
}

/// T^DEC of a value class through its per-context DEC, maximized over contexts and the
/// hull proxy.
pub fn tdec_per_context(value_class: &[Vec<Vec<f64>>], delta: f64, cfg: &HullConfig, opts: &DecOptions) -> Result<DecReport> {
    tdec_with(delta, true, |e| per_context_rdec_hull(value_class, None, e, cfg, opts).map(|r| r.value))
}

/// Bisection on ε for any DEC that is nondecreasing in ε.
pub fn tdec_with(delta: f64, hull: bool, dec: impl Fn(f64) -> Result<f64>) -> Result<DecReport> {
    tdec_over(delta, hull, 1, |_, e| dec(e))
}

/// T^DEC for a supremum of `n` DECs, each nondecreasing in ε.
///
/// The feasible ε form the intersection of the per-term intervals, so each term is
/// tested once at the running threshold and bisected only when it fails there.
pub fn tdec_over(delta: f64, hull: bool, n: usize, dec: impl Fn(usize, f64) -> Result<f64>) -> Result<DecReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("Δ = {delta} must be positive")));
    }
    const EPS_FLOOR: f64 = 1e-6;
    const EPS_TOL: f64 = 1e-7;
    let params = DecParams { delta: Some(delta), ..Default::default() };
    let report = |value: f64, lower: f64, upper: f64| {
        let mut r = DecReport::new(DecKind::Tdec, params.clone(), value, Certificate::Bisection { lower, upper });
        r.lower_certified = hull;
        r
    };
    // Lowers lo to term i's threshold if i fails at lo. Returns false when i fails
    // even at the floor.
    let settle = |i: usize, lo: &mut f64, hi: &mut Option<f64>| -> Result<bool> {
        if dec(i, *lo)? <= delta {
            return Ok(true);
        }
        if dec(i, EPS_FLOOR)? > delta {
            return Ok(false);
        }
        let (mut a, mut b) = (EPS_FLOOR, *lo);
        while b - a > EPS_TOL * b {
            let mid = 0.5 * (a + b);
            if dec(i, mid)? <= delta {
                a = mid;
            } else {
                b = mid;
            }
        }
        *lo = a;
        *hi = Some(b);
        Ok(true)
    };
    // Every term settled so far satisfies the condition at lo; hi is where one fails.
    let (mut lo, mut hi) = (1.0, None::<f64>);
    for i in 0..n {
        if !settle(i, &mut lo, &mut hi)? {
            let mut r = report(f64::INFINITY, 1.0 / (EPS_FLOOR * EPS_FLOOR), f64::INFINITY);
            r.notes.push(format!("r-dec^c exceeds Δ already at ε = {EPS_FLOOR}"));
            return Ok(r);
        }
    }
    Ok(match hi {
        None => report(1.0, 1.0, 1.0),
        Some(hi) => report(1.0 / (lo * lo), 1.0 / (hi * hi), 1.0 / (lo * lo)),
    })
}

// ---------------------------------------------------------------------------------
// Per-context DEC for value classes

/// Risk and squared-mean-difference tables of H restricted to `context`, against the
/// reference value function `reference` (one value per action).
pub fn per_context_tables(value_class: &[Vec<Vec<f64>>], context: usize, reference: &[f64]) -> Result<DecTables> {
    let n_act = reference.len();
    let mut risk = Vec::new();
    let mut div = Vec::new();
    for (i, h) in value_class.iter().enumerate() {
        let row = h.get(context).ok_or_else(|| Error::InvalidInput(format!("context {context} out of range")))?;
        if row.len() != n_act {
            return Err(Error::Schema(format!("value function {i} has {} actions, expected {n_act}", row.len())));
        }
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        risk.push(row.iter().map(|v| best - v).collect());
        div.push(row.iter().zip(reference).map(|(v, r)| (v - r) * (v - r)).collect());
    }
    let best = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DecTables { risk, div, ref_risk: reference.iter().map(|v| best - v).collect() })
}

/// r-dec^c_ε(H ∪ {h̄} |_c, h̄) for explicit reference values h̄(c, ·).
pub fn per_context_rdec(
    value_class: &[Vec<Vec<f64>>],
    context: usize,
    reference: &[f64],
    eps: f64,
    opts: &DecOptions,
) -> Result<DecReport> {
    check_eps(eps)?;
    let t = per_context_tables(value_class, context, reference)?.with_reference_member();
    let sol = if opts.use_exact(t.n_models()) {
        tables::rdec_constrained_exact(&t, eps)?
    } else {
        tables::rdec_constrained_grid(&t, eps, &opts.grid())?
    };
    let certificate = if sol.resolution > 0.0 {
        Certificate::Grid { resolution: sol.resolution }
    } else {
        Certificate::Exact { tol: EXACT_TOL }
    };
    let params = DecParams { eps: Some(eps), ..Default::default() };
    let mut r = DecReport::new(DecKind::PerContextR, params, sol.value, certificate);
    r.witness_model = witness_from(&sol, &t).filter(|&k| k < value_class.len());
    r.achieving_p = Some(sol.p);
    r.reference = Some(format!("{reference:?}"));
    r.notes.push(format!("context {context}"));
    Ok(r)
}

/// sup over the hull proxy of H|_c of the per-context DEC, then over contexts when
/// `context` is `None`.
pub fn per_context_rdec_hull(
    value_class: &[Vec<Vec<f64>>],
    context: Option<usize>,
    eps: f64,
    cfg: &HullConfig,
    opts: &DecOptions,
) -> Result<DecReport> {
    let n_ctx = value_class.first().map_or(0, Vec::len);
    let contexts: Vec<usize> = match context {
        Some(c) => vec![c],
        None => (0..n_ctx).collect(),
    };
    let weights = hull_weights(value_class.len(), cfg);
    let mut best: Option<DecReport> = None;
    for &c in &contexts {
        for w in &weights {
            let n_act = value_class[0][c].len();
            let reference: Vec<f64> =
                (0..n_act).map(|a| value_class.iter().zip(w).map(|(h, wi)| wi * h[c][a]).sum()).collect();
            let r = per_context_rdec(value_class, c, &reference, eps, opts)?;
            if best.as_ref().is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
    }
    let mut r = best.ok_or_else(|| Error::InvalidInput("empty value class".into()))?;
    r.lower_certified = true;
    Ok(r)
}

/// The bandit model class of H restricted to one context: Gaussian rewards with means
/// h(c, ·).
pub fn restricted_bandit_class(value_class: &[Vec<Vec<f64>>], context: usize) -> Result<ModelClass> {
    let hyps: Vec<Vec<f64>> = value_class
        .iter()
        .map(|h| h.get(context).cloned().ok_or_else(|| Error::InvalidInput(format!("context {context} out of range"))))
        .collect::<Result<_>>()?;
    Ok(crate::builders::build_gaussian_mab(&hyps)?.0)
}

/// True when every model of `class` is compatible with the quantile and PAC forms'
/// exact solver, i.e. the class is small enough.
pub fn exact_solvable(class: &ModelClass) -> bool {
    class.n_models() < tables::MAX_EXACT_MODELS
}

/// Risk mode label used in reports.
pub fn risk_mode_label(mode: &RiskMode) -> &'static str {
    match mode {
        RiskMode::RewardMax => "reward-max",
        RiskMode::ExplicitRisk => "explicit-risk",
        RiskMode::Estimation { .. } => "estimation",
    }
}
