//! Exploration-by-optimization value
//!
//! exo_γ(M, q) = inf_{p, ℓ} max_{M, π*} Γ_{q,γ}(p, ℓ; M, π*), where
//! Γ = E_p[f^M(π*) − f^M(π)] − γ + γ E_p E_{o∼M(π)} E_{π'∼q} exp(ℓ(π'; π, o) − ℓ(π*; π, o)).
//!
//! For a mixture ν over pairs (M, π*), the infimum over ℓ has the closed form
//! ℓ(π*; π, o) = ½ ln(W_{π,o}(π*) / q(π*)) with W_{π,o}(π*) = Σ_M ν(M, π*) M(o | π),
//! which leaves ψ(π, ν) = E_ν[f^M(π*) − f^M(π)] − γ + γ Σ_o (Σ_{π*} √(W_{π,o}(π*) q(π*)))².
//! ψ is linear in p and concave in ν, so the value is min_p max_ν Σ_π p(π) ψ(π, ν).
//! We run multiplicative weights on p against exponentiated-gradient ascent on ν.
//! Every iterate gives a lower bound min_π ψ(π, ν_t). The upper bound comes from
//! turning averaged ν into ℓ tables and solving the resulting matrix game over p
//! exactly.

use serde::{Deserialize, Serialize};

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::games::{solve_matrix_game_with, SolverConfig};
use crate::model::ModelClass;
use crate::PolicyDistribution;

use super::{Certificate, DecKind, DecParams, DecReport};

/// ℓ(π'; π, o), stored densely in (π, o, π') order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationFunction {
    pub n_decisions: usize,
    pub n_observations: usize,
    pub table: Vec<f64>,
}

impl EstimationFunction {
    pub fn zeros(n_decisions: usize, n_observations: usize) -> Self {
        Self { n_decisions, n_observations, table: vec![0.0; n_decisions * n_decisions * n_observations] }
    }

    fn offset(&self, pi: usize, o: usize) -> usize {
        (pi * self.n_observations + o) * self.n_decisions
    }

    /// ℓ(π'; π, o).
    pub fn get(&self, pi_prime: usize, pi: usize, o: usize) -> f64 {
        self.table[self.offset(pi, o) + pi_prime]
    }

    /// The slice ℓ(·; π, o).
    pub fn slice(&self, pi: usize, o: usize) -> &[f64] {
        let s = self.offset(pi, o);
        &self.table[s..s + self.n_decisions]
    }

    fn slice_mut(&mut self, pi: usize, o: usize) -> &mut [f64] {
        let s = self.offset(pi, o);
        let n = self.n_decisions;
        &mut self.table[s..s + n]
    }
}

#[derive(Clone, Debug)]
pub struct ExoConfig {
    /// Saddle iterations for a cold start.
    pub iterations: usize,
    /// Saddle iterations when a warm start is supplied.
    pub warm_iterations: usize,
    /// Weight on the uniform distribution mixed into a warm start.
    pub warm_mix: f64,
    /// Mixing levels toward uniform tried when extracting ℓ from ν.
    pub lambdas: Vec<f64>,
    /// ℓ entries are clipped to [−clip, clip].
    pub clip: f64,
    /// Stop early once the certified gap is below this.
    pub tol: f64,
}

impl Default for ExoConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            warm_iterations: 300,
            warm_mix: 0.1,
            lambdas: vec![0.0, 1e-4, 1e-3, 1e-2, 0.1],
            clip: 30.0,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExoSolution {
    /// Certified upper bound: exact Γ_{q,γ}(p, ℓ) of the returned pair.
    pub value: f64,
    /// Certified lower bound on exo_γ(M, q).
    pub lower: f64,
    pub p: PolicyDistribution,
    pub ell: EstimationFunction,
    /// Averaged adversary mixture over (model, π*) pairs, model-major. Reusable as a
    /// warm start.
    pub nu: Vec<f64>,
    pub iterations: usize,
}

impl ExoSolution {
    pub fn gap(&self) -> f64 {
        (self.value - self.lower).max(0.0)
    }
}

/// Finite-observation data for the saddle problem.
#[derive(Clone, Debug)]
pub struct ExoProblem {
    /// f^M(π) per model.
    pub value: Vec<Vec<f64>>,
    /// M(o | π) per model, decision.
    pub obs: Vec<Vec<Vec<f64>>>,
    pub n_decisions: usize,
    pub n_observations: usize,
}

impl ExoProblem {
    pub fn from_class(class: &ModelClass) -> Result<Self> {
        let mut obs = Vec::with_capacity(class.n_models());
        for m in &class.models {
            let rows = m
                .channel
                .finite_rows()
                .ok_or_else(|| Error::Unsupported("exploration-by-optimization needs finite observations".into()))?;
            obs.push(rows.iter().map(|r| r.weights().to_vec()).collect::<Vec<_>>());
        }
        let n_observations = obs[0][0].len();
        Ok(Self { value: class.models.iter().map(|m| m.value.clone()).collect(), obs, n_decisions: class.n_decisions(), n_observations })
    }

    fn n_models(&self) -> usize {
        self.value.len()
    }

    fn n_pairs(&self) -> usize {
        self.n_models() * self.n_decisions
    }

    fn value_spread(&self) -> f64 {
        self.value
            .iter()
            .map(|v| {
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// W_{π,o}(π*) for all o, π*.
    fn mixture_obs(&self, nu: &[f64], pi: usize) -> Vec<Vec<f64>> {
        let n = self.n_decisions;
        let mut w = vec![vec![0.0; n]; self.n_observations];
        for m in 0..self.n_models() {
            let row = &self.obs[m][pi];
            for ps in 0..n {
                let v = nu[m * n + ps];
                if v == 0.0 {
                    continue;
                }
                for (o, &po) in row.iter().enumerate() {
                    w[o][ps] += v * po;
                }
            }
        }
        w
    }

    /// ψ(π, ν) and optionally its gradient in ν.
    fn psi(&self, q: &[f64], gamma: f64, nu: &[f64], pi: usize, grad: Option<&mut [f64]>) -> f64 {
        let n = self.n_decisions;
        let w = self.mixture_obs(nu, pi);
        let s: Vec<f64> = w.iter().map(|wo| wo.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum()).collect();
        let mut val = -gamma + gamma * s.iter().map(|x| x * x).sum::<f64>();
        for m in 0..self.n_models() {
            for ps in 0..n {
                val += nu[m * n + ps] * (self.value[m][ps] - self.value[m][pi]);
            }
        }
        if let Some(g) = grad {
            for m in 0..self.n_models() {
                let row = &self.obs[m][pi];
                for ps in 0..n {
                    let mut d = self.value[m][ps] - self.value[m][pi];
                    if q[ps] > 0.0 {
                        for (o, &po) in row.iter().enumerate() {
                            if po > 0.0 {
                                let wv = w[o][ps].max(1e-300);
                                d += gamma * s[o] * (q[ps] / wv).sqrt() * po;
                            }
                        }
                    }
                    g[m * n + ps] += d;
                }
            }
        }
        val
    }

    /// Γ_{q,γ}(·, ℓ; M, π*) as a matrix: rows π, columns (M, π*) model-major.
    pub fn gamma_payoff(&self, q: &[f64], gamma: f64, ell: &EstimationFunction) -> Vec<Vec<f64>> {
        let n = self.n_decisions;
        (0..n)
            .map(|pi| {
                // E_{o∼M(π)} E_{π'∼q} exp(ℓ(π') − ℓ(π*)) = Σ_o M(o|π) Z_o e^{−ℓ(π*)}.
                let z: Vec<f64> = (0..self.n_observations)
                    .map(|o| ell.slice(pi, o).iter().zip(q).map(|(l, w)| w * l.exp()).sum())
                    .collect();
                let mut row = Vec::with_capacity(self.n_pairs());
                for m in 0..self.n_models() {
                    for ps in 0..n {
                        let e: f64 = (0..self.n_observations)
                            .map(|o| self.obs[m][pi][o] * z[o] * (-ell.get(ps, pi, o)).exp())
                            .sum();
                        row.push(self.value[m][ps] - self.value[m][pi] - gamma + gamma * e);
                    }
                }
                row
            })
            .collect()
    }

    /// Γ_{q,γ}(p, ℓ) = max over (M, π*) of the expected payoff under p.
    pub fn objective(&self, q: &[f64], gamma: f64, p: &[f64], ell: &EstimationFunction) -> f64 {
        let a = self.gamma_payoff(q, gamma, ell);
        (0..self.n_pairs())
            .map(|j| a.iter().zip(p).map(|(row, w)| w * row[j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// ℓ = ½ ln(W / q), centered per (π, o) and clipped.
    pub fn ell_from_nu(&self, q: &[f64], nu: &[f64], clip: f64) -> EstimationFunction {
        let n = self.n_decisions;
        let mut ell = EstimationFunction::zeros(n, self.n_observations);
        for pi in 0..n {
            let w = self.mixture_obs(nu, pi);
            for (o, wo) in w.iter().enumerate() {
                let raw: Vec<Option<f64>> = (0..n)
                    .map(|ps| (q[ps] > 0.0 && wo[ps] > 0.0).then(|| 0.5 * (wo[ps] / q[ps]).ln()))
                    .collect();
                let finite: Vec<f64> = raw.iter().flatten().copied().collect();
                let center = if finite.is_empty() { 0.0 } else { finite.iter().sum::<f64>() / finite.len() as f64 };
                let slice = ell.slice_mut(pi, o);
                for ps in 0..n {
                    slice[ps] = match raw[ps] {
                        Some(v) => (v - center).clamp(-clip, clip),
                        // q(π*) = 0: a large ℓ(π*) only shrinks that column.
                        None if q[ps] == 0.0 => clip,
                        None => -clip,
                    };
                }
            }
        }
        ell
    }

    /// Exact min over p of Γ(p, ℓ) for fixed ℓ.
    fn best_p(&self, q: &[f64], gamma: f64, ell: &EstimationFunction) -> Result<(f64, PolicyDistribution)> {
        let a = self.gamma_payoff(q, gamma, ell);
        let s = solve_matrix_game_with(&a, &SolverConfig::exact())?;
        Ok((s.value, s.row_strategy))
    }

    /// Solves the saddle problem at prior `q`. `warm` is a previous averaged ν.
    pub fn solve(&self, q: &[f64], gamma: f64, cfg: &ExoConfig, warm: Option<&[f64]>) -> Result<ExoSolution> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("γ = {gamma} must be positive")));
        }
        if q.len() != self.n_decisions {
            return Err(Error::DimensionMismatch { expected: self.n_decisions, got: q.len() });
        }
        let n = self.n_decisions;
        let nj = self.n_pairs();
        let uniform = 1.0 / nj as f64;
        let (mut log_nu, iterations) = match warm {
            Some(w) if w.len() == nj => (
                w.iter().map(|&x| ((1.0 - cfg.warm_mix) * x + cfg.warm_mix * uniform).ln()).collect::<Vec<_>>(),
                cfg.warm_iterations,
            ),
            _ => (vec![uniform.ln(); nj], cfg.iterations),
        };
        let range = self.value_spread() + gamma;
        let grad_cap = 4.0 * range.max(1e-12);
        let mut loss_p = vec![0.0; n];
        let mut nu_sum = vec![0.0; nj];
        let mut lower = f64::NEG_INFINITY;
        let mut best_nu: Vec<f64> = Vec::new();
        let mut psi_row = vec![0.0; n];
        let mut grad = vec![0.0; nj];
        let mut done = 0;
        for t in 1..=iterations {
            let nu = softmax(&log_nu);
            // p from multiplicative weights on the cumulative ψ losses.
            let p = if t == 1 {
                vec![1.0 / n as f64; n]
            } else {
                let eta = (8.0 * (n as f64).ln().max(1e-12) / t as f64).sqrt() / range.max(1e-12);
                softmax(&loss_p.iter().map(|l| -eta * l).collect::<Vec<_>>())
            };
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut pg = vec![0.0; nj];
            for pi in 0..n {
                grad.iter_mut().for_each(|g| *g = 0.0);
                psi_row[pi] = self.psi(q, gamma, &nu, pi, Some(&mut grad));
                for (a, g) in pg.iter_mut().zip(&grad) {
                    *a += p[pi] * g;
                }
            }
            let d = psi_row.iter().copied().fold(f64::INFINITY, f64::min);
            if d > lower {
                lower = d;
                best_nu = nu.clone();
            }
            for (l, v) in loss_p.iter_mut().zip(&psi_row) {
                *l += v;
            }
            for (s, v) in nu_sum.iter_mut().zip(&nu) {
                *s += v;
            }
            let eta_nu = ((nj as f64).ln().max(1.0) / t as f64).sqrt() / grad_cap;
            for (l, g) in log_nu.iter_mut().zip(&pg) {
                *l += eta_nu * g.clamp(-grad_cap, grad_cap);
            }
            done = t;
        }
        let nu_bar: Vec<f64> = nu_sum.iter().map(|s| s / done as f64).collect();
        let d_bar = (0..n).map(|pi| self.psi(q, gamma, &nu_bar, pi, None)).fold(f64::INFINITY, f64::min);
        if d_bar > lower {
            lower = d_bar;
            best_nu = nu_bar.clone();
        }
        // Upper bound: ℓ ≡ 0 plus ℓ tables extracted from smoothed ν.
        let zero = EstimationFunction::zeros(n, self.n_observations);
        let (mut value, mut p_best) = self.best_p(q, gamma, &zero)?;
        let mut ell_best = zero;
        'outer: for base in [&nu_bar, &best_nu] {
            for &lam in &cfg.lambdas {
                let nu: Vec<f64> = base.iter().map(|&x| (1.0 - lam) * x + lam * uniform).collect();
                let ell = self.ell_from_nu(q, &nu, cfg.clip);
                let (v, p) = self.best_p(q, gamma, &ell)?;
                if v < value {
                    value = v;
                    p_best = p;
                    ell_best = ell;
                }
                if value - lower <= cfg.tol {
                    break 'outer;
                }
            }
        }
        Ok(ExoSolution { value, lower: lower.min(value), p: p_best, ell: ell_best, nu: nu_bar, iterations: done })
    }
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// exo_γ(M, q) as a report. The value is the certified upper end; the certificate is the
/// saddle gap. Unlike the DECs this value can be negative for a diffuse prior.
pub fn exo_value(class: &ModelClass, prior: &PolicyDistribution, gamma: f64, cfg: &ExoConfig) -> Result<(DecReport, ExoSolution)> {
    let problem = ExoProblem::from_class(class)?;
    let sol = problem.solve(prior.weights(), gamma, cfg, None)?;
    let params = DecParams { gamma: Some(gamma), ..Default::default() };
    let mut r = DecReport::new(DecKind::Exo, params, sol.value, Certificate::Gap { gap: sol.gap() });
    r.achieving_p = Some(sol.p.clone());
    r.notes.push(format!("lower bound {}", sol.lower));
    r.notes.push(format!("{} saddle iterations", sol.iterations));
    Ok((r, sol))
}

/// Uniform prior helper.
pub fn uniform_prior(class: &ModelClass) -> PolicyDistribution {
    FiniteDistribution::uniform(class.n_decisions())
}
