//! Canonical instance builders and reference-model constructors.

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::model::{Channel, Model, ModelClass, ObservationSpace, ReferenceModel, RiskMode};

/// Default cap on materialized contextual policies.
pub const DEFAULT_POLICY_CAP: usize = 4096;

fn arm_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("arm{i}")).collect()
}

/// Gaussian multi-armed bandit class, one model per mean vector, with the all-zero
/// reference at KL radius 1/2.
pub fn build_gaussian_mab(hypotheses: &[Vec<f64>]) -> Result<(ModelClass, ReferenceModel)> {
    let k = hypotheses.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::InvalidInput("empty arm set".into()));
    }
    let mut models = Vec::with_capacity(hypotheses.len());
    for (h, means) in hypotheses.iter().enumerate() {
        if means.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: means.len() });
        }
        if let Some(a) = means.iter().position(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::InvalidInput(format!("hypothesis {h}: mean of arm {a} outside [0, 1]")));
        }
        models.push(Model::reward_max(format!("h{h}"), Channel::Gaussian(means.clone()), means.clone())?);
    }
    let class = ModelClass::new(arm_names(k), ObservationSpace::Gaussian, None, RiskMode::RewardMax, None, models)?;
    let reference = reference_model_for(&class)?;
    Ok((class, reference))
}

/// K hypotheses, hypothesis i has mean `high` on arm i and `low` elsewhere.
pub fn distinct_optimum_means(k: usize, low: f64, high: f64) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|a| if a == i { high } else { low }).collect()).collect()
}

/// Linear bandit on a caller-supplied grid: Gaussian observation with mean ⟨π, θ⟩.
pub fn build_linear_bandit(decisions: &[Vec<f64>], parameters: &[Vec<f64>]) -> Result<ModelClass> {
    let d = decisions.first().map_or(0, Vec::len);
    if decisions.is_empty() || parameters.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension {d} < 2")));
    }
    for v in decisions.iter().chain(parameters) {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
        if v.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::InvalidInput("grid point outside the unit ball".into()));
        }
    }
    let models = parameters
        .iter()
        .enumerate()
        .map(|(j, theta)| {
            let means: Vec<f64> = decisions.iter().map(|a| a.iter().zip(theta).map(|(x, y)| x * y).sum()).collect();
            Model::reward_max(format!("theta{j}"), Channel::Gaussian(means.clone()), means)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = (0..decisions.len()).map(|i| format!("x{i}")).collect();
    ModelClass::new(names, ObservationSpace::Gaussian, None, RiskMode::RewardMax, None, models)
}

/// ±e_i for i < d.
pub fn signed_axes(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * d);
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = s;
            out.push(v);
        }
    }
    out
}

/// n equally spaced unit vectors in the plane, starting at e1.
pub fn circle_directions(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

/// Action taken at `context` by policy index `policy` (base-|A| digits, context 0 least
/// significant).
pub fn policy_action(policy: usize, context: usize, n_actions: usize) -> usize {
    (policy / n_actions.pow(context as u32)) % n_actions
}

/// Contextual bandit class over all deterministic policies C → A. One model per pair
/// (value function h[c][a], context distribution ν). The reference draws contexts
/// uniformly with zero means, at KL radius log|C| + 1.
pub fn build_contextual_bandit(
    value_class: &[Vec<Vec<f64>>],
    context_distributions: &[FiniteDistribution],
    cap: usize,
) -> Result<(ModelClass, ReferenceModel)> {
    let n_ctx = value_class.first().map_or(0, Vec::len);
    let n_act = value_class.first().and_then(|h| h.first()).map_or(0, Vec::len);
    if n_ctx == 0 || n_act == 0 {
        return Err(Error::InvalidInput("empty context or action set".into()));
    }
    if context_distributions.is_empty() {
        return Err(Error::InvalidInput("no context distributions".into()));
    }
    let count = (n_act as u128).checked_pow(n_ctx as u32).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::PolicyCap { count, cap });
    }
    let n_pol = count as usize;
    for (i, h) in value_class.iter().enumerate() {
        if h.len() != n_ctx || h.iter().any(|r| r.len() != n_act) {
            return Err(Error::Schema(format!("value function {i} has the wrong shape")));
        }
        if h.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!("value function {i} leaves [0, 1]")));
        }
    }
    if let Some(nu) = context_distributions.iter().find(|nu| nu.len() != n_ctx) {
        return Err(Error::DimensionMismatch { expected: n_ctx, got: nu.len() });
    }
    let mut models = Vec::new();
    for (i, h) in value_class.iter().enumerate() {
        let means: Vec<Vec<f64>> = (0..n_pol)
            .map(|pol| (0..n_ctx).map(|c| h[c][policy_action(pol, c, n_act)]).collect())
            .collect();
        for (j, nu) in context_distributions.iter().enumerate() {
            let channel = Channel::ContextGaussian { nu: nu.clone(), means: means.clone() };
            models.push(Model::derived(format!("h{i}/nu{j}"), channel, None)?);
        }
    }
    let decisions = (0..n_pol)
        .map(|pol| {
            let acts: Vec<String> = (0..n_ctx).map(|c| policy_action(pol, c, n_act).to_string()).collect();
            format!("pi[{}]", acts.join(","))
        })
        .collect();
    let contexts = (0..n_ctx).map(|c| format!("c{c}")).collect();
    let class = ModelClass::new(decisions, ObservationSpace::Contexts(contexts), None, RiskMode::RewardMax, None, models)?;
    let reference = reference_model_for(&class)?;
    Ok((class, reference))
}

/// Value class of the sparse-bonus example: h_x(c, 0) = 1/2, h_x(c, 1) = 1 iff c = x.
pub fn sparse_bonus_value_class(n_contexts: usize) -> Vec<Vec<Vec<f64>>> {
    (0..n_contexts)
        .map(|x| (0..n_contexts).map(|c| vec![0.5, if c == x { 1.0 } else { 0.0 }]).collect())
        .collect()
}

/// Interactive estimation: decisions are (explore decision, estimate index) pairs, the
/// channel ignores the estimate, and the risk is the distance from the model's
/// parameter to the estimate.
pub fn build_interactive_estimation(base: &ModelClass, params: &[usize], distance: &[Vec<f64>]) -> Result<ModelClass> {
    crate::model::validate_distance(distance)?;
    if params.len() != base.n_models() {
        return Err(Error::DimensionMismatch { expected: base.n_models(), got: params.len() });
    }
    let k = distance.len();
    if let Some(&p) = params.iter().find(|&&p| p >= k) {
        return Err(Error::InvalidInput(format!("parameter index {p} outside the distance table")));
    }
    let n0 = base.n_decisions();
    let expand = |ch: &Channel| -> Channel {
        let idx = |d: usize| d / k;
        match ch {
            Channel::Finite(rows) => Channel::Finite((0..n0 * k).map(|d| rows[idx(d)].clone()).collect()),
            Channel::Gaussian(m) => Channel::Gaussian((0..n0 * k).map(|d| m[idx(d)]).collect()),
            Channel::GaussianMixture(m) => Channel::GaussianMixture((0..n0 * k).map(|d| m[idx(d)].clone()).collect()),
            Channel::ContextGaussian { nu, means } => Channel::ContextGaussian {
                nu: nu.clone(),
                means: (0..n0 * k).map(|d| means[idx(d)].clone()).collect(),
            },
        }
    };
    let models = base
        .models
        .iter()
        .zip(params)
        .map(|(m, &theta)| {
            let risk = (0..n0 * k).map(|d| distance[theta][d % k]).collect();
            Model::explicit(m.name.clone(), expand(&m.channel), risk, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let decisions = (0..n0 * k).map(|d| format!("{}|est{}", base.decisions[d / k], d % k)).collect();
    ModelClass::new(
        decisions,
        base.observations.clone(),
        base.reward.clone(),
        RiskMode::Estimation { distance: distance.to_vec() },
        None,
        models,
    )
}

/// Canonical reference: uniform observations at radius log|O|, zero-mean Gaussians at
/// radius 1/2, or uniform contexts with zero means at radius log|C| + 1.
pub fn reference_model_for(class: &ModelClass) -> Result<ReferenceModel> {
    let n = class.n_decisions();
    let (channel, c_kl) = match &class.observations {
        ObservationSpace::Finite(obs) => {
            let u = FiniteDistribution::uniform(obs.len());
            (Channel::Finite(vec![u; n]), (obs.len() as f64).ln())
        }
        ObservationSpace::Gaussian => {
            for m in &class.models {
                let means: Vec<f64> = match &m.channel {
                    Channel::Gaussian(v) => v.clone(),
                    Channel::GaussianMixture(c) => c.iter().flatten().map(|x| x.1).collect(),
                    _ => unreachable!("validated channel kinds"),
                };
                if means.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::Unsupported(format!(
                        "model {} has Gaussian means outside [0, 1]; no canonical reference",
                        m.name
                    )));
                }
            }
            (Channel::Gaussian(vec![0.0; n]), 0.5)
        }
        ObservationSpace::Contexts(ctx) => {
            let u = FiniteDistribution::uniform(ctx.len());
            (Channel::ContextGaussian { nu: u, means: vec![vec![0.0; ctx.len()]; n] }, (ctx.len() as f64).ln() + 1.0)
        }
    };
    let model = Model::explicit("reference", channel, vec![0.0; n], Some(vec![0.0; n]))?;
    ReferenceModel::validated(class, model, c_kl)
}
