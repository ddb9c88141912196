//! Exact f-divergences between finite distributions, closed forms for unit-variance
//! Gaussians, quadrature for Gaussian mixtures, the Bernoulli quantile divergence and
//! mutual information.
//!
//! KL with an absolute-continuity violation evaluates to `+inf`; `0 log 0 = 0`.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceKind {
    Kl,
    Tv,
    SquaredHellinger,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 3] = [Self::Kl, Self::Tv, Self::SquaredHellinger];

    /// Generator f with D_f(P, Q) = E_Q[f(dP/dQ)].
    pub fn generator<T: Float>(self, x: T) -> T {
        let half = T::from(0.5).unwrap();
        match self {
            Self::Kl => {
                if x == T::zero() {
                    T::zero()
                } else {
                    x * x.ln()
                }
            }
            Self::Tv => half * (x - T::one()).abs(),
            Self::SquaredHellinger => {
                let d = x.sqrt() - T::one();
                half * d * d
            }
        }
    }
}

/// D_f(p, q) for probability vectors given as slices.
pub fn divergence_slices<T: Float>(kind: DivergenceKind, p: &[T], q: &[T]) -> T {
    debug_assert_eq!(p.len(), q.len());
    let half = T::from(0.5).unwrap();
    match kind {
        DivergenceKind::Kl => {
            let mut s = T::zero();
            for (&a, &b) in p.iter().zip(q) {
                if a > T::zero() {
                    if b <= T::zero() {
                        return T::infinity();
                    }
                    s = s + a * (a / b).ln();
                }
            }
            s.max(T::zero())
        }
        DivergenceKind::Tv => {
            half * p.iter().zip(q).fold(T::zero(), |s, (&a, &b)| s + (a - b).abs())
        }
        DivergenceKind::SquaredHellinger => {
            let s = p.iter().zip(q).fold(T::zero(), |s, (&a, &b)| {
                let d = a.max(T::zero()).sqrt() - b.max(T::zero()).sqrt();
                s + d * d
            });
            (half * s).min(T::one())
        }
    }
}

pub fn f_divergence<T: Float>(
    kind: DivergenceKind,
    p: &FiniteDistribution<T>,
    q: &FiniteDistribution<T>,
) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    Ok(divergence_slices(kind, p.weights(), q.weights()))
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Divergence between N(mu1, 1) and N(mu2, 1).
pub fn gaussian_divergence<T: Float>(kind: DivergenceKind, mu1: T, mu2: T) -> T {
    let d = (mu1 - mu2).to_f64().unwrap();
    let v = match kind {
        DivergenceKind::Kl => d * d / 2.0,
        DivergenceKind::SquaredHellinger => -(-d * d / 8.0).exp_m1(),
        DivergenceKind::Tv => erf(d.abs() / (2.0 * std::f64::consts::SQRT_2)),
    };
    T::from(v).unwrap()
}

/// ∫ |a·φ(x − m1) − b·φ(x − m2)| dx for unit-variance Gaussian densities φ.
fn scaled_gaussian_l1(a: f64, m1: f64, b: f64, m2: f64) -> f64 {
    if a <= 0.0 {
        return b.max(0.0);
    }
    if b <= 0.0 {
        return a;
    }
    if (m1 - m2).abs() < 1e-300 {
        return (a - b).abs();
    }
    let (a, m1, b, m2) = if m1 > m2 { (a, m1, b, m2) } else { (b, m2, a, m1) };
    // Unique crossing point; the density centred at m1 dominates to its right.
    let x = (2.0 * (b / a).ln() + m1 * m1 - m2 * m2) / (2.0 * (m1 - m2));
    let v = a * (1.0 - 2.0 * std_normal_cdf(x - m1)) + b * (2.0 * std_normal_cdf(x - m2) - 1.0);
    v.max((a - b).abs())
}

/// Divergence between two laws of (context, reward): contexts drawn from `nu`, then
/// reward ~ N(means[c], 1).
pub fn contextual_gaussian_divergence(
    kind: DivergenceKind,
    nu_a: &[f64],
    means_a: &[f64],
    nu_b: &[f64],
    means_b: &[f64],
) -> f64 {
    match kind {
        DivergenceKind::Kl => {
            let mut s = 0.0;
            for c in 0..nu_a.len() {
                if nu_a[c] > 0.0 {
                    if nu_b[c] <= 0.0 {
                        return f64::INFINITY;
                    }
                    let d = means_a[c] - means_b[c];
                    s += nu_a[c] * ((nu_a[c] / nu_b[c]).ln() + d * d / 2.0);
                }
            }
            s.max(0.0)
        }
        DivergenceKind::SquaredHellinger => {
            let mut bc = 0.0;
            for c in 0..nu_a.len() {
                let d = means_a[c] - means_b[c];
                bc += (nu_a[c] * nu_b[c]).sqrt() * (-d * d / 8.0).exp();
            }
            (1.0 - bc).clamp(0.0, 1.0)
        }
        DivergenceKind::Tv => {
            let mut s = 0.0;
            for c in 0..nu_a.len() {
                s += scaled_gaussian_l1(nu_a[c], means_a[c], nu_b[c], means_b[c]);
            }
            (0.5 * s).clamp(0.0, 1.0)
        }
    }
}

fn mixture_density(components: &[(f64, f64)], x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    components
        .iter()
        .map(|&(w, m)| w * INV_SQRT_2PI * (-(x - m) * (x - m) / 2.0).exp())
        .sum()
}

/// Divergence between finite mixtures of unit-variance Gaussians, components given as
/// (weight, mean). Composite Simpson quadrature on a window 14 standard deviations past
/// the extreme means.
pub fn gaussian_mixture_divergence(
    kind: DivergenceKind,
    a: &[(f64, f64)],
    b: &[(f64, f64)],
) -> f64 {
    if a.len() == 1 && b.len() == 1 {
        return gaussian_divergence(kind, a[0].1, b[0].1);
    }
    let lo = a.iter().chain(b).map(|c| c.1).fold(f64::INFINITY, f64::min) - 14.0;
    let hi = a.iter().chain(b).map(|c| c.1).fold(f64::NEG_INFINITY, f64::max) + 14.0;
    let n = 8000usize;
    let h = (hi - lo) / n as f64;
    let integrand = |x: f64| {
        let p = mixture_density(a, x);
        let q = mixture_density(b, x);
        match kind {
            DivergenceKind::Kl => {
                if p <= 0.0 {
                    0.0
                } else if q <= 0.0 {
                    f64::INFINITY
                } else {
                    p * (p / q).ln()
                }
            }
            DivergenceKind::Tv => 0.5 * (p - q).abs(),
            DivergenceKind::SquaredHellinger => {
                let d = p.sqrt() - q.sqrt();
                0.5 * d * d
            }
        }
    };
    let mut s = integrand(lo) + integrand(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * integrand(lo + i as f64 * h);
    }
    let v = s * h / 3.0;
    match kind {
        DivergenceKind::Kl => v.max(0.0),
        _ => v.clamp(0.0, 1.0),
    }
}

/// d_{f,δ}(p) = D_f(Bern(1 − δ), Bern(p)) when p ≤ 1 − δ, else 0.
pub fn bernoulli_quantile_div<T: Float>(kind: DivergenceKind, delta: T, p: T) -> T {
    let x = T::one() - delta;
    if p > x {
        return T::zero();
    }
    divergence_slices(kind, &[x, T::one() - x], &[p, T::one() - p])
}

/// D_f(Bern(x), Bern(y)).
pub fn bernoulli_divergence<T: Float>(kind: DivergenceKind, x: T, y: T) -> T {
    divergence_slices(kind, &[x, T::one() - x], &[y, T::one() - y])
}

/// I(M; X) = E_{M~prior} KL(P(.|M) || P_marginal).
pub fn mutual_information<T: Float>(
    prior: &FiniteDistribution<T>,
    conditionals: &[FiniteDistribution<T>],
) -> Result<T> {
    if conditionals.len() != prior.len() {
        return Err(Error::DimensionMismatch { expected: prior.len(), got: conditionals.len() });
    }
    let k = conditionals[0].len();
    if let Some(bad) = conditionals.iter().find(|c| c.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, got: bad.len() });
    }
    let mut marginal = vec![T::zero(); k];
    for (m, cond) in conditionals.iter().enumerate() {
        let w = prior.get(m);
        for (x, &px) in cond.weights().iter().enumerate() {
            marginal[x] = marginal[x] + w * px;
        }
    }
    let mut total = T::zero();
    for (m, cond) in conditionals.iter().enumerate() {
        let w = prior.get(m);
        if w > T::zero() {
            total = total + w * divergence_slices(DivergenceKind::Kl, cond.weights(), &marginal);
        }
    }
    Ok(total.max(T::zero()))
}

/// d · log(1 + r²T / (4d²)): the T-round information cap for the spherical prior of
/// radius r on a d-dimensional linear bandit.
pub fn linear_bandit_mi_bound(d: usize, r: f64, t: f64) -> f64 {
    let d = d as f64;
    d * (r * r * t / (4.0 * d * d)).ln_1p()
}
