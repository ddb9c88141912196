//! Interactive algorithms: UCB, the decision-dimension reduction, ExO+ and the
//! exponential-weights update it relies on.
//!
//! Every algorithm draws its randomness from the per-round generator handed to it by
//! the simulator, so a trace is a pure function of (instance, seed).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complexity::exo::{EstimationFunction, ExoConfig, ExoProblem};
use crate::complexity::{decision_dimension, DecReport};
use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::model::{ModelClass, Observation};
use crate::PolicyDistribution;

/// A T-round interactive learner.
pub trait Algorithm: Send {
    fn name(&self) -> String;
    /// Decision for `round` (1-based).
    fn select(&mut self, round: usize, rng: &mut ChaCha8Rng) -> Result<usize>;
    fn observe(&mut self, round: usize, decision: usize, observation: &Observation, reward: f64);
    /// Output decision π̂ after the last round, if the algorithm has its own rule.
    fn output(&self) -> Option<usize> {
        None
    }
}

/// Builds a fresh algorithm instance per replicate.
pub type AlgorithmFactory<'a> = dyn Fn() -> Box<dyn Algorithm> + Sync + 'a;

/// Always plays the same decision.
#[derive(Clone, Debug)]
pub struct FixedDecision(pub usize);

impl Algorithm for FixedDecision {
    fn name(&self) -> String {
        format!("fixed({})", self.0)
    }
    fn select(&mut self, _: usize, _: &mut ChaCha8Rng) -> Result<usize> {
        Ok(self.0)
    }
    fn observe(&mut self, _: usize, _: usize, _: &Observation, _: f64) {}
    fn output(&self) -> Option<usize> {
        Some(self.0)
    }
}

/// Samples decisions from a fixed distribution and outputs a fresh sample.
#[derive(Clone, Debug)]
pub struct Sampler {
    pub p: PolicyDistribution,
    last: usize,
}

impl Sampler {
    pub fn new(p: PolicyDistribution) -> Self {
        Self { p, last: 0 }
    }
}

impl Algorithm for Sampler {
    fn name(&self) -> String {
        "sampler".into()
    }
    fn select(&mut self, _: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        self.last = self.p.sample_index(rng.random::<f64>());
        Ok(self.last)
    }
    fn observe(&mut self, _: usize, _: usize, _: &Observation, _: f64) {}
    fn output(&self) -> Option<usize> {
        Some(self.last)
    }
}

// ---------------------------------------------------------------------------------
// UCB

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UcbConfig {
    /// Confidence width multiplier.
    pub width: f64,
    /// Horizon T inside the log.
    pub horizon: usize,
    /// Failure probability δ′ inside the log.
    pub conf_delta: f64,
}

impl UcbConfig {
    pub fn new(horizon: usize) -> Self {
        Self { width: 2.0, horizon, conf_delta: 1.0 / horizon.max(1) as f64 }
    }
}

/// UCB over a subset of decisions (`arms[i]` is a decision index).
#[derive(Clone, Debug)]
pub struct Ucb {
    pub arms: Vec<usize>,
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
    pub cfg: UcbConfig,
}

impl Ucb {
    pub fn new(arms: Vec<usize>, cfg: UcbConfig) -> Self {
        let k = arms.len();
        Self { arms, counts: vec![0; k], sums: vec![0.0; k], cfg }
    }

    /// Position in `arms` of the next pull: unpulled arms first in index order, then the
    /// largest index mean + width·√(log(T/δ′)/count), lowest position on ties.
    pub fn choose(&self) -> usize {
        if let Some(i) = self.counts.iter().position(|&c| c == 0) {
            return i;
        }
        let log_term = (self.cfg.horizon.max(1) as f64 / self.cfg.conf_delta).ln().max(0.0);
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..self.arms.len() {
            let n = self.counts[i] as f64;
            let v = self.sums[i] / n + self.cfg.width * (log_term / n).sqrt();
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        best
    }

    pub fn update(&mut self, decision: usize, reward: f64) {
        if let Some(i) = self.arms.iter().position(|&a| a == decision) {
            self.counts[i] += 1;
            self.sums[i] += reward;
        }
    }

    /// Arm with the best empirical mean among pulled arms.
    pub fn empirical_best(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.arms.len() {
            if self.counts[i] == 0 {
                continue;
            }
            let m = self.sums[i] / self.counts[i] as f64;
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((i, m));
            }
        }
        best.map(|(i, _)| self.arms[i])
    }
}

/// Decision chosen by UCB in the given state (decision index, not arm position).
pub fn ucb_policy(state: &Ucb) -> usize {
    state.arms[state.choose()]
}

impl Algorithm for Ucb {
    fn name(&self) -> String {
        "ucb".into()
    }
    fn select(&mut self, _: usize, _: &mut ChaCha8Rng) -> Result<usize> {
        Ok(ucb_policy(self))
    }
    fn observe(&mut self, _: usize, decision: usize, _: &Observation, reward: f64) {
        self.update(decision, reward);
    }
}

// ---------------------------------------------------------------------------------
// Reduction to a bandit over a sampled decision subset

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Reduction {
    pub ddim: DecReport,
    /// N = ⌈Ddim · ln(1/δ)⌉.
    pub n_draws: usize,
    /// Draws from p*_Δ in sampling order, with repeats.
    pub draws: Vec<usize>,
    /// Distinct drawn decisions, ascending.
    pub subset: Vec<usize>,
}

/// N = ⌈Ddim · ln(1/δ)⌉ draws, at least one.
pub fn reduction_draw_count(ddim: f64, delta: f64) -> usize {
    // Solver noise on ddim must not push an integral product to the next count.
    let x = ddim * (1.0 / delta).ln();
    ((x - 1e-9 * x.max(1.0)).ceil() as usize).max(1)
}

/// Samples Π_sub from the decision-dimension distribution p*_Δ.
pub fn reduction_prepare(class: &ModelClass, delta_gap: f64, delta: f64, rng: &mut ChaCha8Rng) -> Result<Reduction> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("confidence δ = {delta} outside (0, 1)")));
    }
    let ddim = decision_dimension(class, delta_gap)?;
    if ddim.is_infinite() {
        return Err(Error::InvalidInput(format!("decision dimension is infinite at Δ = {delta_gap}")));
    }
    let n_draws = reduction_draw_count(ddim.value, delta);
    let p = ddim.achieving_p.clone().expect("finite decision dimension has a distribution");
    Ok(reduction_from(ddim, &p, n_draws, rng))
}

fn reduction_from(ddim: DecReport, p: &PolicyDistribution, n_draws: usize, rng: &mut ChaCha8Rng) -> Reduction {
    let draws: Vec<usize> = (0..n_draws).map(|_| p.sample_index(rng.random::<f64>())).collect();
    let mut subset = draws.clone();
    subset.sort_unstable();
    subset.dedup();
    Reduction { ddim, n_draws, draws, subset }
}

impl Reduction {
    /// Whether some member of Π_sub is Δ-optimal for `risk`.
    pub fn covers(&self, risk: &[f64], delta_gap: f64) -> bool {
        self.subset.iter().any(|&pi| risk[pi] <= delta_gap)
    }

    /// Redraws the subset with a new generator, keeping N and p*_Δ.
    pub fn resample(&self, rng: &mut ChaCha8Rng) -> Reduction {
        let p = self.ddim.achieving_p.clone().expect("finite decision dimension has a distribution");
        reduction_from(self.ddim.clone(), &p, self.n_draws, rng)
    }
}

/// Algorithm 1: draws Π_sub in the first round, then runs UCB on it.
pub struct ReductionAlgorithm {
    reduction: Reduction,
    ucb: Option<Ucb>,
    ucb_cfg: UcbConfig,
}

impl ReductionAlgorithm {
    /// `reduction` supplies N and p*_Δ; the subset itself is drawn from the episode's
    /// own generator in round 1.
    pub fn new(reduction: Reduction, ucb_cfg: UcbConfig) -> Self {
        Self { reduction, ucb: None, ucb_cfg }
    }

    pub fn subset(&self) -> &[usize] {
        &self.reduction.subset
    }
}

impl Algorithm for ReductionAlgorithm {
    fn name(&self) -> String {
        "reduction-ucb".into()
    }
    fn select(&mut self, _: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        if self.ucb.is_none() {
            self.reduction = self.reduction.resample(rng);
            self.ucb = Some(Ucb::new(self.reduction.subset.clone(), self.ucb_cfg.clone()));
        }
        Ok(ucb_policy(self.ucb.as_ref().expect("initialized")))
    }
    fn observe(&mut self, _: usize, decision: usize, _: &Observation, reward: f64) {
        if let Some(u) = self.ucb.as_mut() {
            u.update(decision, reward);
        }
    }
}

// ---------------------------------------------------------------------------------
// ExO+

/// q^{t+1}(π) ∝ q^t(π) exp(ℓ(π)), computed with a max shift. Zero entries stay zero.
pub fn exp_weights(q: &[f64], ell: &[f64]) -> Vec<f64> {
    let m = q
        .iter()
        .zip(ell)
        .filter(|(w, _)| **w > 0.0)
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = q.iter().zip(ell).map(|(&w, &l)| if w > 0.0 { w * (l - m).exp() } else { 0.0 }).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// ExO+ prior update with weights ℓ(·; π^t, o^t).
pub fn exo_update(q: &PolicyDistribution, ell: &EstimationFunction, decision: usize, observation: usize) -> PolicyDistribution {
    let w = exp_weights(q.weights(), ell.slice(decision, observation));
    FiniteDistribution::normalized(w).expect("exponential weights keep positive mass")
}

/// Per-round record of the saddle solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExoRoundLog {
    pub round: usize,
    pub value: f64,
    pub lower: f64,
    pub iterations: usize,
    pub decision: usize,
}

/// Output of one ExO+ round.
#[derive(Clone, Debug)]
pub struct ExoRound {
    pub p: PolicyDistribution,
    pub ell: EstimationFunction,
    pub decision: usize,
    pub value: f64,
    pub lower: f64,
}

pub struct ExoPlus {
    problem: ExoProblem,
    pub gamma: f64,
    pub q: PolicyDistribution,
    cfg: ExoConfig,
    warm: Option<Vec<f64>>,
    current: Option<ExoRound>,
    /// ℓ^t(·; π^t, o^t) per completed round, for the FTRL check.
    pub weights_used: Vec<Vec<f64>>,
    pub log: Vec<ExoRoundLog>,
    prior: PolicyDistribution,
}

impl ExoPlus {
    pub fn new(class: &ModelClass, gamma: f64, prior: PolicyDistribution, cfg: ExoConfig) -> Result<Self> {
        let problem = ExoProblem::from_class(class)?;
        if prior.len() != class.n_decisions() {
            return Err(Error::DimensionMismatch { expected: class.n_decisions(), got: prior.len() });
        }
        Ok(Self {
            problem,
            gamma,
            q: prior.clone(),
            cfg,
            warm: None,
            current: None,
            weights_used: Vec::new(),
            log: Vec::new(),
            prior,
        })
    }

    pub fn prior(&self) -> &PolicyDistribution {
        &self.prior
    }

    /// Solves the round's saddle problem at the current q and samples a decision.
    pub fn exo_round(&mut self, round: usize, rng: &mut ChaCha8Rng) -> Result<ExoRound> {
        let sol = self.problem.solve(self.q.weights(), self.gamma, &self.cfg, self.warm.as_deref())?;
        self.warm = Some(sol.nu.clone());
        let decision = sol.p.sample_index(rng.random::<f64>());
        self.log.push(ExoRoundLog { round, value: sol.value, lower: sol.lower, iterations: sol.iterations, decision });
        Ok(ExoRound { p: sol.p, ell: sol.ell, decision, value: sol.value, lower: sol.lower })
    }
}

impl Algorithm for ExoPlus {
    fn name(&self) -> String {
        format!("exo+(gamma={})", self.gamma)
    }
    fn select(&mut self, round: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let r = self.exo_round(round, rng)?;
        let d = r.decision;
        self.current = Some(r);
        Ok(d)
    }
    fn observe(&mut self, _: usize, decision: usize, observation: &Observation, _: f64) {
        let (Some(cur), Observation::Index(o)) = (self.current.take(), observation) else { return };
        self.weights_used.push(cur.ell.slice(decision, *o).to_vec());
        self.q = exo_update(&self.q, &cur.ell, decision, *o);
    }
}

// ---------------------------------------------------------------------------------
// FTRL check

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FtrlCheck {
    /// KL(q′‖q) − Σ_t (E_{q′} ℓ^t − log E_{q^t} exp ℓ^t); nonnegative in exact arithmetic.
    pub slack: f64,
    /// q′ puts mass where q has none: the slack is +∞ and the check is vacuous.
    pub vacuous: bool,
}

/// Checks the exponential-weights inequality for the sequence of weight vectors `ells`
/// starting from `q`, against comparator `q_prime`.
pub fn ftrl_inequality_check(q: &[f64], q_prime: &[f64], ells: &[Vec<f64>]) -> Result<FtrlCheck> {
    if q.len() != q_prime.len() || ells.iter().any(|l| l.len() != q.len()) {
        return Err(Error::DimensionMismatch { expected: q.len(), got: q_prime.len() });
    }
    let kl = crate::divergence::divergence_slices(crate::DivergenceKind::Kl, q_prime, q);
    if kl.is_infinite() {
        return Ok(FtrlCheck { slack: f64::INFINITY, vacuous: true });
    }
    let mut qt = q.to_vec();
    let mut total = 0.0;
    for ell in ells {
        let gain: f64 = q_prime.iter().zip(ell).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * l).sum();
        total += gain - log_mean_exp(&qt, ell);
        qt = exp_weights(&qt, ell);
    }
    Ok(FtrlCheck { slack: kl - total, vacuous: false })
}

/// log E_{π∼q} exp ℓ(π), stable.
pub fn log_mean_exp(q: &[f64], ell: &[f64]) -> f64 {
    let m = q.iter().zip(ell).filter(|(w, _)| **w > 0.0).map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    m + q.iter().zip(ell).filter(|(w, _)| **w > 0.0).map(|(w, l)| w * (l - m).exp()).sum::<f64>().ln()
}

/// (Σ_t −log E_{q^t} exp ℓ^t computed round by round, −log E_q exp Σ_t ℓ^t). The two
/// agree exactly in real arithmetic.
pub fn telescoping_pair(q: &[f64], ells: &[Vec<f64>]) -> (f64, f64) {
    let mut qt = q.to_vec();
    let mut inc = 0.0;
    let mut cum = vec![0.0; q.len()];
    for ell in ells {
        inc -= log_mean_exp(&qt, ell);
        qt = exp_weights(&qt, ell);
        for (c, l) in cum.iter_mut().zip(ell) {
            *c += l;
        }
    }
    (inc, -log_mean_exp(q, &cum))
}
