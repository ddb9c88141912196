//! Episode execution, regret and risk accounting, Monte Carlo replication, occupancy
//! estimation and the Hellinger chain-rule check.
//!
//! Seeds: round t of an episode with seed s draws from ChaCha8 seeded with s on stream
//! t. Replicate i of a run with master seed m uses seed [`derive_seed`]`(m, i)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, AlgorithmFactory};
use crate::divergence::{divergence_slices, DivergenceKind};
use crate::error::{Error, Result};
use crate::model::{Model, ObsLaw, Observation};
use crate::FiniteDistribution;

/// Generator for one round of one episode.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Seed of task `index` under `master`: first word of ChaCha8(master) on stream
/// 2^63 + index. The high stream bit keeps task seeds apart from round streams.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((1u64 << 63) | index);
    rng.next_u64()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; 1 − u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draws an observation of `model` at `decision`.
pub fn sample_observation(model: &Model, decision: usize, rng: &mut ChaCha8Rng) -> Observation {
    match model.channel.law(decision) {
        ObsLaw::Finite(p) => {
            let u: f64 = rng.random();
            Observation::Index(FiniteDistribution::sample_slice(p, u))
        }
        ObsLaw::Gaussian(m) => Observation::Real(m + standard_normal(rng)),
        ObsLaw::Mixture(c) => {
            let u: f64 = rng.random();
            let w: Vec<f64> = c.iter().map(|x| x.0).collect();
            let k = FiniteDistribution::sample_slice(&w, u);
            Observation::Real(c[k].1 + standard_normal(rng))
        }
        ObsLaw::Context { nu, means } => {
            let u: f64 = rng.random();
            let context = FiniteDistribution::sample_slice(nu, u);
            Observation::Context { context, reward: means[context] + standard_normal(rng) }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub t: usize,
    pub decision: usize,
    pub observation: Observation,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub rounds: Vec<Round>,
    pub final_decision: usize,
    /// "algorithm" when π̂ came from the algorithm, "empirical-best" for the default.
    pub output_rule: String,
    pub cumulative_regret: f64,
    pub risk: f64,
}

pub const TRACE_CSV_HEADER: &str = "t,decision,observation,instant_regret,cumulative_regret";
pub const SUMMARY_CSV_HEADER: &str = "seed,T,regret,risk";

fn obs_field(o: &Observation) -> String {
    match o {
        Observation::Index(i) => i.to_string(),
        Observation::Real(x) => format!("{x}"),
        Observation::Context { context, reward } => format!("{context}:{reward}"),
    }
}

impl Trace {
    /// Per-round CSV with [`TRACE_CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_CSV_HEADER);
        s.push('\n');
        for r in &self.rounds {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t,
                r.decision,
                obs_field(&r.observation),
                r.instant_regret,
                r.cumulative_regret
            ));
        }
        s
    }
}

/// Default π̂: the played decision with the highest sample-mean reward, lowest index
/// on ties.
pub fn empirical_best(rounds: &[Round], rewards: &[f64], n_decisions: usize) -> usize {
    let mut sums = vec![0.0; n_decisions];
    let mut counts = vec![0u64; n_decisions];
    for (r, &x) in rounds.iter().zip(rewards) {
        sums[r.decision] += x;
        counts[r.decision] += 1;
    }
    let mut best: Option<(usize, f64)> = None;
    for d in 0..n_decisions {
        if counts[d] > 0 {
            let m = sums[d] / counts[d] as f64;
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((d, m));
            }
        }
    }
    best.map_or(0, |b| b.0)
}

/// Runs `algorithm` against `model` for `horizon` rounds. Finite observations are
/// mapped to rewards through `reward_map`.
pub fn run_episode(
    model: &Model,
    reward_map: Option<&[f64]>,
    algorithm: &mut dyn Algorithm,
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    let n = model.n_decisions();
    let mut rounds = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut cum = 0.0;
    for t in 1..=horizon {
        let mut rng = round_rng(seed, t as u64);
        let decision = algorithm.select(t, &mut rng)?;
        if decision >= n {
            return Err(Error::DecisionOutOfRange { round: t, decision, n });
        }
        let observation = sample_observation(model, decision, &mut rng);
        let reward = observation.reward(reward_map);
        algorithm.observe(t, decision, &observation, reward);
        let g = model.risk[decision];
        cum += g;
        rounds.push(Round { t, decision, observation, instant_regret: g, cumulative_regret: cum });
        rewards.push(reward);
    }
    let (final_decision, output_rule) = match algorithm.output() {
        Some(d) if d < n => (d, "algorithm"),
        Some(d) => return Err(Error::DecisionOutOfRange { round: horizon + 1, decision: d, n }),
        None => (empirical_best(&rounds, &rewards, n), "empirical-best"),
    };
    Ok(Trace {
        seed,
        rounds,
        final_decision,
        output_rule: output_rule.into(),
        cumulative_regret: cum,
        risk: model.risk[final_decision],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub std_err: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Normal-approximation 95% interval of the mean.
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = if x.len() > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let se = (var / n).sqrt();
        Self { mean, std_err: se, lo: mean - 1.96 * se, hi: mean + 1.96 * se }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

fn quantiles(x: &[f64]) -> Quantiles {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    Quantiles { q10: at(0.1), q50: at(0.5), q90: at(0.9) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n: usize,
    pub horizon: usize,
    pub regret: Interval,
    pub regret_quantiles: Quantiles,
    pub risk: Interval,
    pub risk_quantiles: Quantiles,
    /// (seed, regret, risk), ascending by seed.
    pub per_seed: Vec<(u64, f64, f64)>,
}

impl McSummary {
    /// CSV with [`SUMMARY_CSV_HEADER`], one row per seed.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SUMMARY_CSV_HEADER);
        s.push('\n');
        for (seed, reg, risk) in &self.per_seed {
            s.push_str(&format!("{seed},{},{reg},{risk}\n", self.horizon));
        }
        s
    }
}

/// Runs one episode per seed in parallel and aggregates in seed order.
pub fn monte_carlo(
    model: &Model,
    reward_map: Option<&[f64]>,
    factory: &AlgorithmFactory<'_>,
    horizon: usize,
    seeds: &[u64],
) -> Result<McSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no seeds".into()));
    }
    let mut per_seed = seeds
        .par_iter()
        .map(|&s| {
            let mut alg = factory();
            run_episode(model, reward_map, alg.as_mut(), horizon, s).map(|t| (s, t.cumulative_regret, t.risk))
        })
        .collect::<Result<Vec<_>>>()?;
    per_seed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let regrets: Vec<f64> = per_seed.iter().map(|x| x.1).collect();
    let risks: Vec<f64> = per_seed.iter().map(|x| x.2).collect();
    Ok(McSummary {
        n: per_seed.len(),
        horizon,
        regret: Interval::from_samples(&regrets),
        regret_quantiles: quantiles(&regrets),
        risk: Interval::from_samples(&risks),
        risk_quantiles: quantiles(&risks),
        per_seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    /// Mean in-round profile (1/T) Σ_t 1[π^t = ·].
    pub q_hat: FiniteDistribution,
    /// Empirical law of π̂.
    pub p_hat: FiniteDistribution,
    pub n_mc: usize,
    pub std_err_q: Vec<f64>,
    pub std_err_p: Vec<f64>,
}

/// Monte Carlo occupancy measures of an algorithm under `model`. Replicate i uses
/// seed `derive_seed(seed, i)`.
pub fn estimate_occupancy(
    factory: &AlgorithmFactory<'_>,
    model: &Model,
    reward_map: Option<&[f64]>,
    horizon: usize,
    n_mc: usize,
    seed: u64,
) -> Result<OccupancyEstimate> {
    if n_mc == 0 || horizon == 0 {
        return Err(Error::InvalidInput("need at least one replicate and one round".into()));
    }
    let n = model.n_decisions();
    let reps = (0..n_mc as u64)
        .into_par_iter()
        .map(|i| {
            let mut alg = factory();
            let tr = run_episode(model, reward_map, alg.as_mut(), horizon, derive_seed(seed, i))?;
            let mut prof = vec![0.0; n];
            for r in &tr.rounds {
                prof[r.decision] += 1.0 / horizon as f64;
            }
            Ok((prof, tr.final_decision))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = n_mc as f64;
    let mut q = vec![0.0; n];
    let mut q2 = vec![0.0; n];
    let mut p = vec![0.0; n];
    for (prof, fin) in &reps {
        for d in 0..n {
            q[d] += prof[d] / m;
            q2[d] += prof[d] * prof[d] / m;
        }
        p[*fin] += 1.0 / m;
    }
    let se = |mean: f64, sq: f64| {
        if n_mc > 1 {
            ((sq - mean * mean).max(0.0) * m / (m - 1.0) / m).sqrt()
        } else {
            0.0
        }
    };
    let std_err_q = (0..n).map(|d| se(q[d], q2[d])).collect();
    let std_err_p = (0..n).map(|d| se(p[d], p[d])).collect();
    Ok(OccupancyEstimate {
        q_hat: FiniteDistribution::normalized(q)?,
        p_hat: FiniteDistribution::normalized(p)?,
        n_mc,
        std_err_q,
        std_err_p,
    })
}

/// Sequential kernels over a finite outcome alphabet: `steps[t][h]` is the law of X_t
/// given history index h = Σ_s x_s |X|^s over the earlier outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernels {
    pub alphabet: usize,
    pub steps: Vec<Vec<Vec<f64>>>,
}

impl Kernels {
    fn validate(&self) -> Result<()> {
        for (t, s) in self.steps.iter().enumerate() {
            let expected = self.alphabet.pow(t as u32);
            if s.len() != expected || s.iter().any(|r| r.len() != self.alphabet) {
                return Err(Error::Schema(format!("step {t} needs {expected} rows of length {}", self.alphabet)));
            }
        }
        Ok(())
    }

    /// Probability of every full path, indexed like histories.
    pub fn path_law(&self) -> Vec<f64> {
        let mut law = vec![1.0];
        for (t, step) in self.steps.iter().enumerate() {
            let width = self.alphabet.pow(t as u32);
            let mut next = vec![0.0; width * self.alphabet];
            for (h, &ph) in law.iter().enumerate() {
                for x in 0..self.alphabet {
                    next[h + x * width] = ph * step[h][x];
                }
            }
            law = next;
        }
        law
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// D_H²(P, Q) over full paths against 7 · E_P Σ_t D_H²(P_t(·|h), Q_t(·|h)).
pub fn hellinger_chain_check(p: &Kernels, q: &Kernels) -> Result<ChainCheck> {
    p.validate()?;
    q.validate()?;
    if p.alphabet != q.alphabet || p.steps.len() != q.steps.len() {
        return Err(Error::InvalidInput("kernel shapes differ".into()));
    }
    if p.steps.len() > 3 {
        return Err(Error::Unsupported("exact path enumeration is limited to T ≤ 3".into()));
    }
    let h2 = DivergenceKind::SquaredHellinger;
    let lhs = divergence_slices(h2, &p.path_law(), &q.path_law());
    let mut rhs = 0.0;
    let mut law = vec![1.0];
    for (t, (ps, qs)) in p.steps.iter().zip(&q.steps).enumerate() {
        for (h, &ph) in law.iter().enumerate() {
            if ph > 0.0 {
                rhs += ph * divergence_slices(h2, &ps[h], &qs[h]);
            }
        }
        let width = p.alphabet.pow(t as u32);
        let mut next = vec![0.0; width * p.alphabet];
        for (h, &ph) in law.iter().enumerate() {
            for x in 0..p.alphabet {
                next[h + x * width] = ph * ps[h][x];
            }
        }
        law = next;
    }
    rhs *= 7.0;
    Ok(ChainCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}
