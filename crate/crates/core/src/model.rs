//! Models, model classes, reference models and convex mixtures.

use serde::{Deserialize, Serialize};

use crate::distribution::FiniteDistribution;
use crate::divergence::{
    contextual_gaussian_divergence, divergence_slices, gaussian_divergence, gaussian_mixture_divergence,
    DivergenceKind,
};
use crate::error::{Error, Result};

/// Decision-indexed observation kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// One probability vector over the shared observation set per decision.
    Finite(Vec<FiniteDistribution>),
    /// Unit-variance Gaussian observation with one mean per decision.
    Gaussian(Vec<f64>),
    /// Finite mixture of unit-variance Gaussians per decision, as (weight, mean).
    /// Arises from convex combinations of Gaussian models.
    GaussianMixture(Vec<Vec<(f64, f64)>>),
    /// Context c ~ nu, then reward ~ N(means[decision][c], 1); the observation is the
    /// pair (c, reward).
    ContextGaussian { nu: FiniteDistribution, means: Vec<Vec<f64>> },
}

/// Observation law of a channel at one decision.
#[derive(Clone, Copy, Debug)]
pub enum ObsLaw<'a> {
    Finite(&'a [f64]),
    Gaussian(f64),
    Mixture(&'a [(f64, f64)]),
    Context { nu: &'a [f64], means: &'a [f64] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Index(usize),
    Real(f64),
    Context { context: usize, reward: f64 },
}

impl Observation {
    /// Reward carried by the observation; finite observations go through `reward_map`.
    pub fn reward(&self, reward_map: Option<&[f64]>) -> f64 {
        match *self {
            Observation::Index(o) => reward_map.map_or(0.0, |r| r[o]),
            Observation::Real(x) => x,
            Observation::Context { reward, .. } => reward,
        }
    }
}

impl Channel {
    pub fn n_decisions(&self) -> usize {
        match self {
            Channel::Finite(rows) => rows.len(),
            Channel::Gaussian(m) => m.len(),
            Channel::GaussianMixture(m) => m.len(),
            Channel::ContextGaussian { means, .. } => means.len(),
        }
    }

    pub fn law(&self, pi: usize) -> ObsLaw<'_> {
        match self {
            Channel::Finite(rows) => ObsLaw::Finite(rows[pi].weights()),
            Channel::Gaussian(m) => ObsLaw::Gaussian(m[pi]),
            Channel::GaussianMixture(m) => ObsLaw::Mixture(&m[pi]),
            Channel::ContextGaussian { nu, means } => ObsLaw::Context { nu: nu.weights(), means: &means[pi] },
        }
    }

    /// Expected reward at `pi`; finite channels need a reward map over observations.
    pub fn mean_reward(&self, pi: usize, reward_map: Option<&[f64]>) -> Option<f64> {
        match self.law(pi) {
            ObsLaw::Finite(p) => reward_map.map(|r| p.iter().zip(r).map(|(a, b)| a * b).sum()),
            ObsLaw::Gaussian(m) => Some(m),
            ObsLaw::Mixture(c) => Some(c.iter().map(|(w, m)| w * m).sum()),
            ObsLaw::Context { nu, means } => Some(nu.iter().zip(means).map(|(a, b)| a * b).sum()),
        }
    }

    pub fn finite_rows(&self) -> Option<&[FiniteDistribution]> {
        match self {
            Channel::Finite(rows) => Some(rows),
            _ => None,
        }
    }
}

/// D_f between two observation laws. Gaussian and Gaussian-mixture laws mix freely;
/// any other pairing of kinds is an error.
pub fn law_divergence(kind: DivergenceKind, a: ObsLaw<'_>, b: ObsLaw<'_>) -> Result<f64> {
    use ObsLaw::*;
    Ok(match (a, b) {
        (Finite(p), Finite(q)) => {
            if p.len() != q.len() {
                return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
            }
            divergence_slices(kind, p, q)
        }
        (Gaussian(x), Gaussian(y)) => gaussian_divergence(kind, x, y),
        (Gaussian(x), Mixture(c)) => gaussian_mixture_divergence(kind, &[(1.0, x)], c),
        (Mixture(c), Gaussian(y)) => gaussian_mixture_divergence(kind, c, &[(1.0, y)]),
        (Mixture(c), Mixture(d)) => gaussian_mixture_divergence(kind, c, d),
        (Context { nu: n1, means: m1 }, Context { nu: n2, means: m2 }) => {
            if n1.len() != n2.len() {
                return Err(Error::DimensionMismatch { expected: n1.len(), got: n2.len() });
            }
            contextual_gaussian_divergence(kind, n1, m1, n2, m2)
        }
        _ => return Err(Error::Unsupported("divergence between observation laws of different kinds".into())),
    })
}

pub fn channel_divergence(kind: DivergenceKind, a: &Channel, b: &Channel, pi: usize) -> Result<f64> {
    law_divergence(kind, a.law(pi), b.law(pi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub name: String,
    pub channel: Channel,
    /// f^M per decision.
    pub value: Vec<f64>,
    /// g^M per decision, nonnegative.
    pub risk: Vec<f64>,
    /// π_M, lowest index among minimizers of the risk.
    pub optimal: usize,
}

fn argmax_lowest(v: &[f64]) -> usize {
    let mut b = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[b] {
            b = i;
        }
    }
    b
}

impl Model {
    /// Reward-maximization model: g(π) = max f − f(π).
    pub fn reward_max(name: impl Into<String>, channel: Channel, value: Vec<f64>) -> Result<Self> {
        if value.len() != channel.n_decisions() {
            return Err(Error::DimensionMismatch { expected: channel.n_decisions(), got: value.len() });
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value entry".into()));
        }
        let optimal = argmax_lowest(&value);
        let best = value[optimal];
        let risk = value.iter().map(|v| best - v).collect();
        Ok(Self { name: name.into(), channel, value, risk, optimal })
    }

    /// Reward-maximization model whose value is the channel's mean reward.
    pub fn derived(name: impl Into<String>, channel: Channel, reward_map: Option<&[f64]>) -> Result<Self> {
        let value = (0..channel.n_decisions())
            .map(|pi| channel.mean_reward(pi, reward_map))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::InvalidInput("finite channel needs a reward map to derive values".into()))?;
        Self::reward_max(name, channel, value)
    }

    /// Model with an explicit risk table. Without a value table, f = −g.
    pub fn explicit(name: impl Into<String>, channel: Channel, risk: Vec<f64>, value: Option<Vec<f64>>) -> Result<Self> {
        let n = channel.n_decisions();
        if risk.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: risk.len() });
        }
        if let Some(i) = risk.iter().position(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidInput(format!("risk entry {i} is negative or non-finite")));
        }
        let value = match value {
            Some(v) if v.len() != n => return Err(Error::DimensionMismatch { expected: n, got: v.len() }),
            Some(v) => v,
            None => risk.iter().map(|g| -g).collect(),
        };
        let neg: Vec<f64> = risk.iter().map(|g| -g).collect();
        let optimal = argmax_lowest(&neg);
        Ok(Self { name: name.into(), channel, value, risk, optimal })
    }

    pub fn n_decisions(&self) -> usize {
        self.risk.len()
    }

    /// Decisions with risk at most `delta`.
    pub fn near_optimal(&self, delta: f64) -> Vec<usize> {
        (0..self.risk.len()).filter(|&pi| self.risk[pi] <= delta).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationSpace {
    Finite(Vec<String>),
    Gaussian,
    Contexts(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMode {
    RewardMax,
    ExplicitRisk,
    /// Interactive estimation; the table is the distance between parameter indices.
    Estimation { distance: Vec<Vec<f64>> },
}

impl RiskMode {
    pub fn is_reward_max(&self) -> bool {
        matches!(self, RiskMode::RewardMax)
    }
}

/// Finite model class over shared decision and observation spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    pub decisions: Vec<String>,
    pub observations: ObservationSpace,
    /// Reward per finite observation.
    pub reward: Option<Vec<f64>>,
    pub risk_mode: RiskMode,
    /// L_r with |f^M(π) − f^M'(π)| ≤ L_r · D_H(M(π), M'(π)) over the class.
    pub lipschitz_lr: f64,
    pub models: Vec<Model>,
}

fn channel_matches(space: &ObservationSpace, ch: &Channel) -> Result<()> {
    match (space, ch) {
        (ObservationSpace::Finite(obs), Channel::Finite(rows)) => {
            if let Some(r) = rows.iter().find(|r| r.len() != obs.len()) {
                return Err(Error::DimensionMismatch { expected: obs.len(), got: r.len() });
            }
            Ok(())
        }
        (ObservationSpace::Gaussian, Channel::Gaussian(_) | Channel::GaussianMixture(_)) => Ok(()),
        (ObservationSpace::Contexts(ctx), Channel::ContextGaussian { nu, means }) => {
            if nu.len() != ctx.len() {
                return Err(Error::DimensionMismatch { expected: ctx.len(), got: nu.len() });
            }
            if let Some(m) = means.iter().find(|m| m.len() != ctx.len()) {
                return Err(Error::DimensionMismatch { expected: ctx.len(), got: m.len() });
            }
            Ok(())
        }
        _ => Err(Error::Schema("channel kind does not match the observation space".into())),
    }
}

impl ModelClass {
    /// Validates shapes and risk consistency and sets L_r: a supplied constant is checked
    /// against the measured supremum, a missing one is replaced by it.
    pub fn new(
        decisions: Vec<String>,
        observations: ObservationSpace,
        reward: Option<Vec<f64>>,
        risk_mode: RiskMode,
        lipschitz_lr: Option<f64>,
        models: Vec<Model>,
    ) -> Result<Self> {
        if decisions.is_empty() {
            return Err(Error::InvalidInput("empty decision set".into()));
        }
        if models.is_empty() {
            return Err(Error::InvalidInput("empty model class".into()));
        }
        let n = decisions.len();
        if let (ObservationSpace::Finite(obs), Some(r)) = (&observations, &reward) {
            if r.len() != obs.len() {
                return Err(Error::DimensionMismatch { expected: obs.len(), got: r.len() });
            }
        }
        for (k, m) in models.iter().enumerate() {
            if m.channel.n_decisions() != n || m.risk.len() != n || m.value.len() != n {
                return Err(Error::Schema(format!("model {k} ({}) does not cover {n} decisions", m.name)));
            }
            channel_matches(&observations, &m.channel)?;
            if let Some(i) = m.risk.iter().position(|g| !g.is_finite() || *g < 0.0) {
                return Err(Error::Schema(format!("model {k} has a negative risk at decision {i}")));
            }
            if risk_mode.is_reward_max() {
                let best = m.value[m.optimal];
                for pi in 0..n {
                    if (m.risk[pi] - (best - m.value[pi])).abs() > 1e-9 || m.value[pi] > best + 1e-12 {
                        return Err(Error::Schema(format!(
                            "model {k}: risk at decision {pi} is not the value gap to the optimum"
                        )));
                    }
                }
            }
        }
        if let RiskMode::Estimation { distance } = &risk_mode {
            validate_distance(distance)?;
        }
        let mut class = Self { decisions, observations, reward, risk_mode, lipschitz_lr: 0.0, models };
        let (measured, witness) = class.measured_lipschitz()?;
        class.lipschitz_lr = match lipschitz_lr {
            Some(l) => {
                if measured > l + 1e-9 {
                    let (a, b, decision) = witness.expect("a violation has a witness");
                    return Err(Error::LipschitzViolation { a, b, decision, stored: l, needed: measured });
                }
                l
            }
            None => measured,
        };
        Ok(class)
    }

    pub fn n_decisions(&self) -> usize {
        self.decisions.len()
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn risk_table(&self) -> Vec<Vec<f64>> {
        self.models.iter().map(|m| m.risk.clone()).collect()
    }

    /// sup |f^M(π) − f^M'(π)| / D_H(M(π), M'(π)) over pairs and decisions, with the
    /// maximizing (model, model, decision) triple.
    pub fn measured_lipschitz(&self) -> Result<(f64, Option<(usize, usize, usize)>)> {
        let mut best = 0.0;
        let mut witness = None;
        for a in 0..self.models.len() {
            for b in a + 1..self.models.len() {
                for pi in 0..self.n_decisions() {
                    let df = (self.models[a].value[pi] - self.models[b].value[pi]).abs();
                    if df <= 1e-12 {
                        continue;
                    }
                    let h2 = channel_divergence(
                        DivergenceKind::SquaredHellinger,
                        &self.models[a].channel,
                        &self.models[b].channel,
                        pi,
                    )?;
                    let ratio = if h2 <= 0.0 { f64::INFINITY } else { df / h2.sqrt() };
                    if ratio > best {
                        best = ratio;
                        witness = Some((a, b, pi));
                    }
                }
            }
        }
        Ok((best, witness))
    }

    /// Per-model, per-decision divergence to `reference`.
    pub fn divergence_table(&self, kind: DivergenceKind, reference: &Model) -> Result<Vec<Vec<f64>>> {
        self.models
            .iter()
            .map(|m| {
                (0..self.n_decisions())
                    .map(|pi| channel_divergence(kind, &m.channel, &reference.channel, pi))
                    .collect()
            })
            .collect()
    }

    /// Convex combination of class members. Only defined for reward maximization,
    /// where the value is linear in the mixture weights.
    pub fn mixture(&self, spec: &MixtureSpec) -> Result<Model> {
        if !self.risk_mode.is_reward_max() {
            return Err(Error::Unsupported("mixtures need a reward-maximization class".into()));
        }
        if spec.weights.len() != self.models.len() {
            return Err(Error::DimensionMismatch { expected: self.models.len(), got: spec.weights.len() });
        }
        let n = self.n_decisions();
        let w = spec.weights.weights();
        let support: Vec<usize> = spec.weights.support().collect();
        if support.len() == 1 {
            return Ok(self.models[support[0]].clone());
        }
        let value: Vec<f64> = (0..n).map(|pi| support.iter().map(|&k| w[k] * self.models[k].value[pi]).sum()).collect();
        let channel = match &self.models[0].channel {
            Channel::Finite(_) => {
                let rows = (0..n)
                    .map(|pi| {
                        let k0 = self.models[0].channel.finite_rows().unwrap()[pi].len();
                        let mut row = vec![0.0; k0];
                        for &k in &support {
                            let r = self.models[k].channel.finite_rows().unwrap()[pi].weights();
                            for (o, v) in row.iter_mut().enumerate() {
                                *v += w[k] * r[o];
                            }
                        }
                        FiniteDistribution::normalized(row)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Channel::Finite(rows)
            }
            Channel::Gaussian(_) | Channel::GaussianMixture(_) => {
                let comps = (0..n)
                    .map(|pi| {
                        let mut c: Vec<(f64, f64)> = Vec::new();
                        for &k in &support {
                            match self.models[k].channel.law(pi) {
                                ObsLaw::Gaussian(m) => c.push((w[k], m)),
                                ObsLaw::Mixture(cs) => c.extend(cs.iter().map(|&(cw, m)| (w[k] * cw, m))),
                                _ => unreachable!("validated channel kinds"),
                            }
                        }
                        merge_components(c)
                    })
                    .collect::<Vec<_>>();
                if comps.iter().all(|c| c.len() == 1) {
                    Channel::Gaussian(comps.iter().map(|c| c[0].1).collect())
                } else {
                    Channel::GaussianMixture(comps)
                }
            }
            Channel::ContextGaussian { .. } => {
                return Err(Error::Unsupported("mixtures of contextual models".into()));
            }
        };
        let names: Vec<String> = support.iter().map(|&k| format!("{:.4}*{}", w[k], self.models[k].name)).collect();
        Model::reward_max(format!("mix({})", names.join("+")), channel, value)
    }

    /// Class restricted to the given model indices.
    pub fn subclass(&self, keep: &[usize]) -> Result<Self> {
        let models = keep.iter().map(|&k| self.models[k].clone()).collect();
        Self::new(
            self.decisions.clone(),
            self.observations.clone(),
            self.reward.clone(),
            self.risk_mode.clone(),
            None,
            models,
        )
    }

    /// Class with an extra member appended; used for M ∪ {M̄}.
    pub fn with_model(&self, extra: Model) -> Result<Self> {
        let mut models = self.models.clone();
        models.push(extra);
        Self::new(
            self.decisions.clone(),
            self.observations.clone(),
            self.reward.clone(),
            self.risk_mode.clone(),
            None,
            models,
        )
    }
}

fn merge_components(mut c: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    c.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (w, m) in c {
        match out.last_mut() {
            Some(last) if (last.1 - m).abs() < 1e-15 => last.0 += w,
            _ => out.push((w, m)),
        }
    }
    out
}

pub(crate) fn validate_distance(distance: &[Vec<f64>]) -> Result<()> {
    let k = distance.len();
    if k == 0 {
        return Err(Error::InvalidInput("empty distance table".into()));
    }
    for (i, row) in distance.iter().enumerate() {
        if row.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: row.len() });
        }
        if row.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidInput(format!("distance row {i} has a negative or non-finite entry")));
        }
        if row[i] != 0.0 {
            return Err(Error::InvalidInput(format!("distance is not zero on the diagonal at {i}")));
        }
    }
    Ok(())
}

/// Weights over class members defining an element of the convex hull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weights: FiniteDistribution,
}

impl MixtureSpec {
    pub fn new(weights: FiniteDistribution) -> Self {
        Self { weights }
    }

    pub fn member(n_models: usize, k: usize) -> Self {
        Self { weights: FiniteDistribution::point_mass(n_models, k) }
    }
}

/// A model with a certified KL radius around it: KL(M(π) ‖ reference(π)) ≤ c_kl for
/// every member M and decision π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub model: Model,
    pub c_kl: f64,
}

impl ReferenceModel {
    /// Checks the radius against every (model, decision) pair of `class`.
    pub fn validated(class: &ModelClass, model: Model, c_kl: f64) -> Result<Self> {
        let (sup, witness) = kl_radius(class, &model)?;
        if sup > c_kl + 1e-9 {
            let (m, pi) = witness.expect("positive divergence has a witness");
            return Err(Error::ReferenceViolation { model: m, decision: pi, divergence: sup, c_kl });
        }
        Ok(Self { model, c_kl })
    }
}

/// max over (M, π) of KL(M(π) ‖ reference(π)) and its maximizer.
pub fn kl_radius(class: &ModelClass, reference: &Model) -> Result<(f64, Option<(usize, usize)>)> {
    let mut sup = 0.0;
    let mut witness = None;
    for (k, m) in class.models.iter().enumerate() {
        for pi in 0..class.n_decisions() {
            let d = channel_divergence(DivergenceKind::Kl, &m.channel, &reference.channel, pi)?;
            if d > sup || (witness.is_none() && d >= sup) {
                sup = d;
                witness = Some((k, pi));
            }
        }
    }
    Ok((sup, witness))
}
