//! Lower bounds evaluated on concrete instances, and the sample-complexity sandwich.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::AlgorithmFactory;
use crate::complexity::{self, decision_dimension, DecOptions, HullConfig};
use crate::distribution::FiniteDistribution;
use crate::divergence::{bernoulli_quantile_div, divergence_slices, linear_bandit_mi_bound, DivergenceKind};
use crate::error::{Error, Result};
use crate::model::{Model, ModelClass};
use crate::simulator::estimate_occupancy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    General,
    Fano,
    FanoDmso,
    Mixmix,
    QuantileHellinger,
    DdimSample,
    Sandwich,
}

/// Enough to recompute a bound's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    /// Reference law Q or reference model name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_law: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard_model: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile: Option<f64>,
    /// The divergence side of the qualifying condition, and its threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value: f64,
    pub witness: Witness,
    /// SHA-256 of the JSON-serialized inputs, hex.
    pub inputs_digest: String,
    /// Named constituent values (sandwich parts, fitted constants, ...).
    pub components: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// Hex SHA-256 of the JSON form of `inputs`.
pub fn digest<T: Serialize + ?Sized>(inputs: &T) -> String {
    let bytes = serde_json::to_vec(inputs).expect("inputs serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl BoundReport {
    fn new<T: Serialize + ?Sized>(kind: BoundKind, value: f64, inputs: &T) -> Self {
        Self { kind, value, witness: Witness::default(), inputs_digest: digest(inputs), components: BTreeMap::new(), notes: Vec::new() }
    }
}

fn distinct_levels(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

// ---------------------------------------------------------------------------------
// General bound

#[derive(Serialize)]
struct GeneralInputs<'a> {
    prior: &'a [f64],
    laws: &'a [Vec<f64>],
    loss: &'a [Vec<f64>],
    delta: f64,
    candidates: &'a [Vec<f64>],
    gaps: &'a [f64],
    kind: DivergenceKind,
}

/// ρ_{Δ,Q} = P_{M∼μ, X∼Q}(L(M, X) < Δ).
pub fn rho(prior: &[f64], loss: &[Vec<f64>], q: &[f64], gap: f64) -> f64 {
    prior
        .iter()
        .zip(loss)
        .map(|(mu, l)| mu * l.iter().zip(q).filter(|(x, _)| **x < gap).map(|(_, w)| w).sum::<f64>())
        .sum()
}

/// δ · max over (Q, Δ) of Δ subject to E_μ D_f(P^M, Q) < d_{f,δ}(ρ_{Δ,Q}).
/// `candidates` defaults to the model laws plus their μ-average; `gaps` defaults to
/// the distinct loss levels.
pub fn general_lower_bound(
    prior: &FiniteDistribution,
    laws: &[Vec<f64>],
    loss: &[Vec<f64>],
    delta: f64,
    candidates: Option<&[Vec<f64>]>,
    gaps: Option<&[f64]>,
    kind: DivergenceKind,
) -> Result<BoundReport> {
    let k = prior.len();
    if laws.len() != k || loss.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: laws.len().min(loss.len()) });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("quantile δ = {delta} outside (0, 1)")));
    }
    let nx = laws.first().map_or(0, Vec::len);
    if laws.iter().chain(loss).any(|r| r.len() != nx) {
        return Err(Error::Schema("laws and losses must share the outcome set".into()));
    }
    let mu = prior.weights();
    let default_candidates: Vec<Vec<f64>>;
    let candidates = match candidates {
        Some(c) => c,
        None => {
            let mut c = laws.to_vec();
            c.push((0..nx).map(|x| (0..k).map(|m| mu[m] * laws[m][x]).sum()).collect());
            default_candidates = c;
            &default_candidates
        }
    };
    let default_gaps: Vec<f64>;
    let gaps = match gaps {
        Some(g) => g,
        None => {
            default_gaps = distinct_levels(loss.iter().flatten().copied()).into_iter().filter(|&x| x > 0.0).collect();
            &default_gaps
        }
    };
    let inputs = GeneralInputs { prior: mu, laws, loss, delta, candidates, gaps, kind };
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for (qi, q) in candidates.iter().enumerate() {
        if q.len() != nx {
            return Err(Error::DimensionMismatch { expected: nx, got: q.len() });
        }
        let div: f64 = (0..k).filter(|&m| mu[m] > 0.0).map(|m| mu[m] * divergence_slices(kind, &laws[m], q)).sum();
        for &gap in gaps {
            let threshold = bernoulli_quantile_div(kind, delta, rho(mu, loss, q, gap));
            if div < threshold && best.is_none_or(|b| gap > b.0) {
                best = Some((gap, qi, div, threshold));
            }
        }
    }
    let mut r = BoundReport::new(BoundKind::General, 0.0, &inputs);
    r.witness.prior = Some(mu.to_vec());
    r.witness.quantile = Some(delta);
    match best {
        Some((gap, qi, div, threshold)) => {
            r.value = delta * gap;
            r.witness.gap = Some(gap);
            r.witness.reference_law = Some(candidates[qi].clone());
            r.witness.divergence = Some(div);
            r.witness.budget = Some(threshold);
        }
        None => r.notes.push("no (Q, Δ) pair satisfies the divergence condition".into()),
    }
    r.notes.push("certified lower bound over the candidate set, possibly loose".into());
    Ok(r)
}

// ---------------------------------------------------------------------------------
// Fano

/// Δ · (1 + (I + log 2) / log sup_x μ(L(M, x) < Δ)), clamped at 0.
pub fn generalized_fano(prior: &FiniteDistribution, laws: &[Vec<f64>], loss: &[Vec<f64>], gap: f64) -> Result<BoundReport> {
    let rows: Vec<FiniteDistribution> =
        laws.iter().map(|l| FiniteDistribution::new(l.clone())).collect::<Result<_>>()?;
    let info: f64 = crate::divergence::mutual_information(prior, &rows)?;
    let mu = prior.weights();
    let nx = laws.first().map_or(0, Vec::len);
    let s = (0..nx)
        .map(|x| (0..mu.len()).filter(|&m| loss[m][x] < gap).map(|m| mu[m]).sum::<f64>())
        .fold(0.0, f64::max);
    #[derive(Serialize)]
    struct In<'a> {
        prior: &'a [f64],
        laws: &'a [Vec<f64>],
        loss: &'a [Vec<f64>],
        gap: f64,
    }
    let mut r = BoundReport::new(BoundKind::Fano, 0.0, &In { prior: mu, laws, loss, gap });
    r.witness.prior = Some(mu.to_vec());
    r.witness.gap = Some(gap);
    r.witness.divergence = Some(info);
    r.witness.budget = Some(s);
    r.components.insert("mutual_information".into(), info);
    r.components.insert("sup_mass".into(), s);
    if s >= 1.0 - 1e-15 {
        r.notes.push("degenerate: some outcome has loss below Δ under every model".into());
        return Ok(r);
    }
    if s <= 0.0 {
        r.notes.push("degenerate: no outcome has loss below Δ, the risk is at least Δ".into());
        r.value = gap;
        return Ok(r);
    }
    r.value = (gap * (1.0 + (info + std::f64::consts::LN_2) / s.ln())).max(0.0);
    Ok(r)
}

/// P(θ₁ ≥ √(1 − Δ)) for θ uniform on the unit sphere in R^d, i.e. the integral of
/// Γ(d/2)/(Γ((d−1)/2)√π)·(1 − t²)^{(d−3)/2} over [√(1 − Δ), 1].
pub fn cap_measure(d: usize, gap: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    if gap >= 1.0 {
        return 0.5;
    }
    // θ₁² ~ Beta(1/2, (d−1)/2), so P(θ₁ ≥ t) = ½ P(θ₁² ≥ t²) = ½ I_{1−t²}((d−1)/2, 1/2).
    0.5 * statrs::function::beta::beta_reg((d as f64 - 1.0) / 2.0, 0.5, gap)
}

/// Mutual-information cap for [`fano_dmso`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiBound {
    /// Caller-supplied bound on I_μ(T) for a finite class and prior.
    Cap(f64),
    /// Linear bandit with the truncated Gaussian prior of radius r = min(c₀d/√T, 1).
    Linear { d: usize, c0: f64 },
}

fn default_gap_grid() -> Vec<f64> {
    (1..=1000).map(|i| i as f64 / 1000.0).collect()
}

/// Fano bound for DMSO: ½ · max{Δ in grid : sup_π μ(g^M(π) ≤ Δ) ≤ ¼ exp(−2I)}.
///
/// For a finite class pass `class` and `prior` with [`MiBound::Cap`]. For the linear
/// mode the mass uses the spherical cap and the result is scaled by the prior radius r,
/// giving the risk bound up to the absolute norm constant.
pub fn fano_dmso(
    class: Option<(&ModelClass, &FiniteDistribution)>,
    horizon: usize,
    mi: &MiBound,
    gap_grid: Option<&[f64]>,
) -> Result<BoundReport> {
    let default_grid = default_gap_grid();
    #[derive(Serialize)]
    struct In<'a> {
        horizon: usize,
        mi: &'a MiBound,
        grid: Option<&'a [f64]>,
        class: Option<&'a ModelClass>,
        prior: Option<&'a FiniteDistribution>,
    }
    let inputs = In { horizon, mi, grid: gap_grid, class: class.map(|c| c.0), prior: class.map(|c| c.1) };
    let mut r = BoundReport::new(BoundKind::FanoDmso, 0.0, &inputs);
    let (info, scale, mass): (f64, f64, Box<dyn Fn(f64) -> f64>) = match (mi, class) {
        (MiBound::Cap(i), Some((cls, prior))) => {
            if prior.len() != cls.n_models() {
                return Err(Error::DimensionMismatch { expected: cls.n_models(), got: prior.len() });
            }
            let risk = cls.risk_table();
            let mu = prior.weights().to_vec();
            let n = cls.n_decisions();
            (
                *i,
                1.0,
                Box::new(move |gap: f64| {
                    (0..n)
                        .map(|pi| risk.iter().zip(&mu).filter(|(g, _)| g[pi] <= gap).map(|(_, w)| w).sum::<f64>())
                        .fold(0.0, f64::max)
                }),
            )
        }
        (MiBound::Linear { d, c0 }, _) => {
            if *d < 2 {
                return Err(Error::InvalidInput("linear mode needs d ≥ 2".into()));
            }
            let radius = (c0 * *d as f64 / (horizon as f64).sqrt()).min(1.0);
            r.components.insert("radius".into(), radius);
            let d = *d;
            (linear_bandit_mi_bound(d, radius, horizon as f64), radius, Box::new(move |gap: f64| cap_measure(d, gap)))
        }
        (MiBound::Cap(_), None) => return Err(Error::InvalidInput("finite mode needs a class and prior".into())),
    };
    let grid = gap_grid.unwrap_or(&default_grid);
    let threshold = 0.25 * (-2.0 * info).exp();
    let best = grid.iter().copied().filter(|&g| mass(g) <= threshold).fold(None, |a: Option<f64>, g| Some(a.map_or(g, |x| x.max(g))));
    r.components.insert("mutual_information".into(), info);
    r.components.insert("threshold".into(), threshold);
    r.witness.budget = Some(threshold);
    r.witness.divergence = Some(info);
    match best {
        Some(g) => {
            r.value = 0.5 * g * scale;
            r.witness.gap = Some(g);
            r.components.insert("mass_at_gap".into(), mass(g));
        }
        None => r.notes.push("no Δ in the grid qualifies".into()),
    }
    Ok(r)
}

// ---------------------------------------------------------------------------------
// Mixture vs mixture

/// Two-point style bound: checks L(θ0, a) + L(θ1, a) ≥ 2Δ over the supports and
/// TV(ν0 P, ν1 P) ≤ 1/2; returns Δ/4 when both hold and 0 otherwise.
pub fn mix_vs_mix(
    nu0: &FiniteDistribution,
    nu1: &FiniteDistribution,
    loss: &[Vec<f64>],
    gap: f64,
    laws: &[Vec<f64>],
) -> Result<BoundReport> {
    let k = laws.len();
    if nu0.len() != k || nu1.len() != k || loss.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: nu0.len() });
    }
    let ny = laws.first().map_or(0, Vec::len);
    let mix = |nu: &FiniteDistribution| -> Vec<f64> {
        (0..ny).map(|y| (0..k).map(|t| nu.get(t) * laws[t][y]).sum()).collect()
    };
    let tv = divergence_slices(DivergenceKind::Tv, &mix(nu0), &mix(nu1));
    #[derive(Serialize)]
    struct In<'a> {
        nu0: &'a FiniteDistribution,
        nu1: &'a FiniteDistribution,
        loss: &'a [Vec<f64>],
        gap: f64,
        laws: &'a [Vec<f64>],
    }
    let mut r = BoundReport::new(BoundKind::Mixmix, 0.0, &In { nu0, nu1, loss, gap, laws });
    r.witness.gap = Some(gap);
    r.witness.divergence = Some(tv);
    r.witness.budget = Some(0.5);
    r.components.insert("tv".into(), tv);
    let n_actions = loss.first().map_or(0, Vec::len);
    for a in 0..n_actions {
        for t0 in nu0.support() {
            for t1 in nu1.support() {
                if loss[t0][a] + loss[t1][a] < 2.0 * gap - 1e-12 {
                    r.notes.push(format!("separation fails at action {a} for parameters {t0}, {t1}"));
                    r.witness.hard_model = Some(t1);
                    return Ok(r);
                }
            }
        }
    }
    if tv > 0.5 + 1e-12 {
        r.notes.push(format!("mixtures too far apart: TV = {tv}"));
        return Ok(r);
    }
    r.value = gap / 4.0;
    Ok(r)
}

// ---------------------------------------------------------------------------------
// Quantile-Hellinger bound

/// Replicates needed so that three standard errors of a probability estimate stay
/// below δ/2.
pub fn required_replicates(delta: f64) -> usize {
    (36.0 * (1.0 - delta) / delta).ceil() as usize
}

/// sup over (M̄, M, Δ) of Δ subject to
/// p̂_{M̄}(g^M ≥ Δ) − 3·se > δ + √(14 T (E_{q̂} D_H²(M, M̄) + 3·se)),
/// with the occupancy measures estimated by simulation under each reference.
#[allow(clippy::too_many_arguments)]
pub fn quantile_hellinger_bound(
    class: &ModelClass,
    factory: &AlgorithmFactory<'_>,
    horizon: usize,
    delta: f64,
    references: &[Model],
    n_mc: usize,
    seed: u64,
) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("quantile δ = {delta} outside (0, 1)")));
    }
    let need = required_replicates(delta);
    if n_mc < need {
        return Err(Error::InvalidInput(format!("{n_mc} replicates are too few for δ = {delta}; need at least {need}")));
    }
    #[derive(Serialize)]
    struct In<'a> {
        class: &'a ModelClass,
        horizon: usize,
        delta: f64,
        references: &'a [Model],
        n_mc: usize,
        seed: u64,
    }
    let mut r = BoundReport::new(BoundKind::QuantileHellinger, 0.0, &In { class, horizon, delta, references, n_mc, seed });
    r.witness.quantile = Some(delta);
    let reward = class.reward.as_deref();
    for m_ref in references {
        let occ = estimate_occupancy(factory, m_ref, reward, horizon, n_mc, seed)?;
        let div = class.divergence_table(DivergenceKind::SquaredHellinger, m_ref)?;
        let p = occ.p_hat.weights();
        let q = occ.q_hat.weights();
        for (k, model) in class.models.iter().enumerate() {
            let e_div: f64 = div[k].iter().zip(q).map(|(d, w)| d * w).sum();
            let e_div_se: f64 = div[k].iter().zip(&occ.std_err_q).map(|(d, s)| d * s).sum();
            let rhs = delta + (14.0 * horizon as f64 * (e_div + 3.0 * e_div_se)).sqrt();
            for gap in distinct_levels(model.risk.iter().copied()).into_iter().filter(|&g| g > 0.0) {
                let mass: f64 = (0..p.len()).filter(|&pi| model.risk[pi] >= gap).map(|pi| p[pi]).sum();
                let var = mass * (1.0 - mass) / n_mc as f64;
                let lhs = mass - 3.0 * var.sqrt();
                if lhs > rhs && gap > r.value {
                    r.value = gap;
                    r.witness.reference = Some(m_ref.name.clone());
                    r.witness.hard_model = Some(k);
                    r.witness.gap = Some(gap);
                    r.witness.divergence = Some(e_div);
                    r.witness.budget = Some(lhs);
                }
            }
        }
    }
    r.notes.push("Monte Carlo occupancy; three standard errors subtracted".into());
    Ok(r)
}

// ---------------------------------------------------------------------------------
// Decision-dimension sample complexity and the sandwich

/// max(0, (log Ddim_{2Δ} − 2) / (2 C_KL)); +∞ when Ddim_{2Δ} is infinite.
pub fn ddim_sample_lower(class: &ModelClass, gap: f64, c_kl: f64) -> Result<BoundReport> {
    if !(c_kl > 0.0) {
        return Err(Error::InvalidInput("C_KL must be positive".into()));
    }
    let dd = decision_dimension(class, 2.0 * gap)?;
    #[derive(Serialize)]
    struct In<'a> {
        class: &'a ModelClass,
        gap: f64,
        c_kl: f64,
    }
    let mut r = BoundReport::new(BoundKind::DdimSample, 0.0, &In { class, gap, c_kl });
    r.witness.gap = Some(gap);
    r.witness.budget = Some(c_kl);
    r.components.insert("ddim".into(), dd.value);
    if dd.is_infinite() {
        r.value = f64::INFINITY;
        r.witness.hard_model = dd.witness_model;
        r.notes.push("unlearnable: decision dimension is infinite".into());
        return Ok(r);
    }
    r.value = ((dd.value.ln() - 2.0) / (2.0 * c_kl)).max(0.0);
    Ok(r)
}

/// Source of T^DEC in the sandwich.
#[derive(Clone, Debug, Serialize)]
pub enum TdecSource<'a> {
    /// Constrained DEC of the model class itself.
    Class,
    /// Per-context DEC of the value class behind a contextual class.
    PerContext(&'a [Vec<Vec<f64>>]),
}

#[derive(Clone, Debug)]
pub struct SandwichConfig<'a> {
    /// Reference set for r-dec^c_ε(M).
    pub hull: HullConfig,
    /// Mixtures forming the proxy class for co(M) in the upper bound.
    pub upper_hull: HullConfig,
    pub source: TdecSource<'a>,
    pub opts: DecOptions,
}

impl Default for SandwichConfig<'_> {
    fn default() -> Self {
        Self {
            hull: HullConfig::default(),
            upper_hull: HullConfig { sparsity: 2, denominator: 2, random_restarts: 0, seed: 0 },
            source: TdecSource::Class,
            opts: DecOptions::default(),
        }
    }
}

/// lower = max(T^DEC(M, Δ), (log Ddim_{2Δ} − 2)/(2 C_KL)),
/// upper = T^DEC(co(M), Δ) · log Ddim_{Δ/2}, and the alternative
/// upper′ = T^DEC(M, Δ) · log|M|, flagging whether upper ≤ upper′.
pub fn sandwich_report(class: &ModelClass, c_kl: f64, gap: f64, cfg: &SandwichConfig<'_>) -> Result<BoundReport> {
    let (tdec_lower, tdec_upper) = match cfg.source {
        TdecSource::Class => {
            let (refs, mixed) = complexity::hull_references(class, &cfg.hull)?;
            let lower = complexity::tdec(class, &refs, gap, mixed, &cfg.opts)?;
            let (hull_models, hull_mixed) = complexity::hull_references(class, &cfg.upper_hull)?;
            let upper = if hull_mixed {
                let hull_class = ModelClass::new(
                    class.decisions.clone(),
                    class.observations.clone(),
                    class.reward.clone(),
                    class.risk_mode.clone(),
                    None,
                    hull_models.clone(),
                )?;
                complexity::tdec(&hull_class, &hull_models, gap, true, &cfg.opts)?
            } else {
                lower.clone()
            };
            (lower.value, upper.value)
        }
        TdecSource::PerContext(h) => {
            let lower = complexity::tdec_per_context(h, gap, &cfg.hull, &cfg.opts)?;
            let upper = complexity::tdec_per_context(h, gap, &cfg.upper_hull, &cfg.opts)?;
            (lower.value, upper.value.max(lower.value))
        }
    };
    let ddim_lower = ddim_sample_lower(class, gap, c_kl)?;
    let ddim_half = decision_dimension(class, gap / 2.0)?;
    let log_ddim_half = ddim_half.value.ln();
    let log_m = (class.n_models() as f64).ln();
    let lower = tdec_lower.max(ddim_lower.value);
    let upper = tdec_upper * log_ddim_half.max(1.0);
    let upper_alt = tdec_lower * log_m.max(1.0);
    #[derive(Serialize)]
    struct In<'a> {
        class: &'a ModelClass,
        c_kl: f64,
        gap: f64,
        source: &'a TdecSource<'a>,
    }
    let mut r = BoundReport::new(BoundKind::Sandwich, lower, &In { class, c_kl, gap, source: &cfg.source });
    r.witness.gap = Some(gap);
    r.witness.budget = Some(c_kl);
    r.components.insert("lower".into(), lower);
    r.components.insert("upper".into(), upper);
    r.components.insert("upper_log_models".into(), upper_alt);
    r.components.insert("tdec".into(), tdec_lower);
    r.components.insert("tdec_hull".into(), tdec_upper);
    r.components.insert("ddim_sample_lower".into(), ddim_lower.value);
    r.components.insert("ddim_half".into(), ddim_half.value);
    r.components.insert("log_ddim_half".into(), log_ddim_half);
    r.components.insert("log_models".into(), log_m);
    let flag = log_ddim_half <= log_m + 1e-12;
    r.components.insert("ddim_below_log_models".into(), if flag { 1.0 } else { 0.0 });
    r.notes.push("logarithms below 1 are raised to 1 in the upper bounds".into());
    r.notes.push("hull quantities are lower-certified".into());
    Ok(r)
}
