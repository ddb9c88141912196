mod common;

use approx::assert_abs_diff_eq;
use common::{fd, random_dist};
use decdim::divergence::*;
use decdim::{DivergenceKind, FiniteDistribution};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use DivergenceKind::{Kl, SquaredHellinger as H2, Tv};

/// D_f(P, Q) = Σ_x q(x) f(p(x)/q(x)), with the q = 0 terms handled by the limit
/// p·f(t)/t as t → ∞: +∞ for KL, p/2 for TV and H².
fn generator_oracle(kind: DivergenceKind, p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if b > 0.0 {
            s += b * kind.generator(a / b);
        } else if a > 0.0 {
            s += match kind {
                Kl => f64::INFINITY,
                _ => a / 2.0,
            };
        }
    }
    s
}

#[test]
fn identical_distributions_have_zero_divergence() {
    let p = fd(&[0.5, 0.5]);
    for k in DivergenceKind::ALL {
        assert_eq!(f_divergence(k, &p, &p).unwrap(), 0.0);
    }
}

#[test]
fn disjoint_supports_have_unit_tv() {
    assert_eq!(f_divergence(Tv, &fd(&[1.0, 0.0]), &fd(&[0.0, 1.0])).unwrap(), 1.0);
    assert_eq!(f_divergence(H2, &fd(&[1.0, 0.0]), &fd(&[0.0, 1.0])).unwrap(), 1.0);
}

#[test]
fn hellinger_example_matches_closed_form_and_generator() {
    let (p, q) = (fd(&[0.5, 0.5]), fd(&[0.9, 0.1]));
    let closed = 1.0 - (0.45f64.sqrt() + 0.05f64.sqrt());
    let v = f_divergence(H2, &p, &q).unwrap();
    assert_abs_diff_eq!(v, closed, epsilon = 1e-15);
    assert_abs_diff_eq!(v, 0.105573, epsilon = 1e-6);
    assert_abs_diff_eq!(v, generator_oracle(H2, p.weights(), q.weights()), epsilon = 1e-15);
}

#[test]
fn kl_without_absolute_continuity_is_infinite() {
    let v = f_divergence(Kl, &fd(&[0.5, 0.5]), &fd(&[1.0, 0.0])).unwrap();
    assert!(v.is_infinite() && v > 0.0);
    // The reverse direction is finite.
    assert_abs_diff_eq!(f_divergence(Kl, &fd(&[1.0, 0.0]), &fd(&[0.5, 0.5])).unwrap(), 2f64.ln(), epsilon = 1e-15);
}

#[test]
fn mismatched_lengths_are_errors() {
    assert!(f_divergence(Kl, &fd(&[1.0]), &fd(&[0.5, 0.5])).is_err());
}

/// ∫ f(x) dx by composite Simpson on [lo, hi].
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

fn phi(x: f64, m: f64) -> f64 {
    (-(x - m) * (x - m) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn gaussian_equal_means() {
    for k in DivergenceKind::ALL {
        assert_eq!(gaussian_divergence(k, 0.3, 0.3), 0.0);
    }
}

#[test]
fn gaussian_hellinger_at_distance_two() {
    let v = gaussian_divergence(H2, 0.0, 2.0);
    assert_abs_diff_eq!(v, 1.0 - (-0.5f64).exp(), epsilon = 1e-15);
    assert_abs_diff_eq!(v, 0.393469, epsilon = 1e-6);
    assert!(v <= 4.0 / 8.0);
}

#[test]
fn gaussian_divergences_match_numeric_integration() {
    let (m1, m2) = (0.1, 0.5);
    assert_abs_diff_eq!(gaussian_divergence(Kl, m1, m2), 0.08, epsilon = 1e-15);
    let kl = simpson(|x| phi(x, m1) * (phi(x, m1) / phi(x, m2)).ln(), -15.0, 15.0, 20_000);
    assert_abs_diff_eq!(gaussian_divergence(Kl, m1, m2), kl, epsilon = 1e-9);
    let tv = simpson(|x| 0.5 * (phi(x, m1) - phi(x, m2)).abs(), -15.0, 15.0, 200_000);
    assert_abs_diff_eq!(gaussian_divergence(Tv, m1, m2), tv, epsilon = 1e-8);
    let h2 = simpson(|x| 0.5 * (phi(x, m1).sqrt() - phi(x, m2).sqrt()).powi(2), -15.0, 15.0, 20_000);
    assert_abs_diff_eq!(gaussian_divergence(H2, m1, m2), h2, epsilon = 1e-10);
}

#[test]
fn gaussian_mixture_reduces_to_single_gaussian() {
    for k in DivergenceKind::ALL {
        let a = gaussian_mixture_divergence(k, &[(0.5, 0.2), (0.5, 0.2)], &[(1.0, 0.7)]);
        assert_abs_diff_eq!(a, gaussian_divergence(k, 0.2, 0.7), epsilon = 1e-8);
    }
}

#[test]
fn contextual_gaussian_divergence_matches_product_form() {
    let nu = [0.3, 0.7];
    let (ma, mb) = ([0.1, 0.9], [0.5, 0.2]);
    let kl = contextual_gaussian_divergence(Kl, &nu, &ma, &nu, &mb);
    let oracle: f64 = (0..2).map(|c| nu[c] * gaussian_divergence(Kl, ma[c], mb[c])).sum();
    assert_abs_diff_eq!(kl, oracle, epsilon = 1e-15);
    let h2 = contextual_gaussian_divergence(H2, &nu, &ma, &nu, &mb);
    let oracle: f64 = (0..2).map(|c| nu[c] * gaussian_divergence(H2, ma[c], mb[c])).sum();
    assert_abs_diff_eq!(h2, oracle, epsilon = 1e-15);
}

#[test]
fn bernoulli_quantile_examples() {
    assert_eq!(bernoulli_quantile_div(Kl, 0.5, 0.6), 0.0);
    assert_eq!(bernoulli_quantile_div(Kl, 0.5, 0.5), 0.0);
    let v = bernoulli_quantile_div(Kl, 0.25, 0.5);
    assert_abs_diff_eq!(v, 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln(), epsilon = 1e-15);
    assert_abs_diff_eq!(v, 0.130812, epsilon = 1e-6);
}

#[test]
fn mutual_information_examples() {
    let prior = FiniteDistribution::uniform(2);
    let same = vec![fd(&[0.3, 0.7]), fd(&[0.3, 0.7])];
    assert_eq!(mutual_information(&prior, &same).unwrap(), 0.0);
    let disjoint = vec![fd(&[1.0, 0.0]), fd(&[0.0, 1.0])];
    assert_abs_diff_eq!(mutual_information(&prior, &disjoint).unwrap(), 2f64.ln(), epsilon = 1e-15);
}

#[test]
fn mutual_information_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let prior = random_dist(&mut rng, 3);
        let conds: Vec<Vec<f64>> = (0..3).map(|_| random_dist(&mut rng, 3)).collect();
        let marginal: Vec<f64> = (0..3).map(|x| (0..3).map(|m| prior[m] * conds[m][x]).sum()).collect();
        let mut oracle = 0.0;
        for m in 0..3 {
            for x in 0..3 {
                let joint = prior[m] * conds[m][x];
                if joint > 0.0 {
                    oracle += joint * (conds[m][x] / marginal[x]).ln();
                }
            }
        }
        let rows: Vec<FiniteDistribution> = conds.into_iter().map(|c| FiniteDistribution::new(c).unwrap()).collect();
        let v = mutual_information(&FiniteDistribution::new(prior).unwrap(), &rows).unwrap();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
        assert!(v <= 3f64.ln() + 1e-12);
    }
}

#[test]
fn linear_bandit_information_cap() {
    assert_eq!(linear_bandit_mi_bound(3, 0.5, 0.0), 0.0);
    assert_abs_diff_eq!(linear_bandit_mi_bound(2, 1.0, 16.0), 2.0 * 2f64.ln(), epsilon = 1e-15);
    let mut last = 0.0;
    for t in (0..2000).step_by(50) {
        let v = linear_bandit_mi_bound(4, 0.3, t as f64);
        assert!(v >= last);
        last = v;
    }
}

fn dist_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![1 => Just(0.0), 6 => 0.0f64..1.0], n).prop_filter_map("nonzero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (dist_strategy(n), dist_strategy(n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn agrees_with_generator_form((p, q) in (2usize..6).prop_flat_map(pair)) {
        for k in DivergenceKind::ALL {
            let a = divergence_slices(k, &p, &q);
            let b = generator_oracle(k, &p, &q);
            if b.is_infinite() {
                prop_assert!(a.is_infinite());
            } else {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{k:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bounded_and_nonnegative((p, q) in (2usize..6).prop_flat_map(pair)) {
        for k in DivergenceKind::ALL {
            prop_assert!(divergence_slices(k, &p, &q) >= 0.0);
        }
        prop_assert!(divergence_slices(Tv, &p, &q) <= 1.0 + 1e-15);
        prop_assert!(divergence_slices(H2, &p, &q) <= 1.0 + 1e-15);
    }

    #[test]
    fn data_processing((p, q) in (3usize..7).prop_flat_map(pair), cut in 1usize..6) {
        // Coarsening map: merge all indices ≥ cut into one cell.
        let cut = cut.min(p.len() - 1);
        let coarse = |v: &[f64]| {
            let mut c = v[..cut].to_vec();
            c.push(v[cut..].iter().sum());
            c
        };
        for k in DivergenceKind::ALL {
            let before = divergence_slices(k, &p, &q);
            let after = divergence_slices(k, &coarse(&p), &coarse(&q));
            prop_assert!(after <= before + 1e-12, "{k:?}: {after} > {before}");
        }
    }

    #[test]
    fn tv_hellinger_sandwich((p, q) in (2usize..6).prop_flat_map(pair)) {
        let tv = divergence_slices(Tv, &p, &q);
        let h2 = divergence_slices(H2, &p, &q);
        prop_assert!(tv * tv / 2.0 <= h2 + 1e-12);
        prop_assert!(h2 <= tv + 1e-12);
    }

    #[test]
    fn bernoulli_divergence_grows_with_separation(y in 0.01f64..0.99, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        // For x ≥ y, x ↦ D_f(Bern(x), Bern(y)) is nondecreasing.
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let x1 = y + lo * (1.0 - y);
        let x2 = y + hi * (1.0 - y);
        for k in DivergenceKind::ALL {
            prop_assert!(bernoulli_divergence(k, x1, y) <= bernoulli_divergence(k, x2, y) + 1e-12);
        }
    }

    #[test]
    fn quantile_divergence_grows_as_p_falls(delta in 0.01f64..0.99, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for k in DivergenceKind::ALL {
            prop_assert!(bernoulli_quantile_div(k, delta, lo) + 1e-12 >= bernoulli_quantile_div(k, delta, hi));
        }
    }

    #[test]
    fn mean_difference_bounded_by_hellinger(n in 2usize..6, s in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let support: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let p = random_dist(&mut rng, n);
        let q = random_dist(&mut rng, n);
        let mean = |w: &[f64]| w.iter().zip(&support).map(|(a, x)| a * x).sum::<f64>();
        let var = |w: &[f64], m: f64| w.iter().zip(&support).map(|(a, x)| a * (x - m).powi(2)).sum::<f64>();
        let (mp, mq) = (mean(&p), mean(&q));
        let d = mp - mq;
        let h2 = divergence_slices(H2, &p, &q);
        prop_assert!(d * d <= 4.0 * (var(&p, mp) + var(&q, mq) + 0.5 * d * d) * h2 + 1e-9);
    }

    #[test]
    fn gaussian_hellinger_below_squared_mean_gap(m1 in -1.0f64..1.0, m2 in -1.0f64..1.0) {
        prop_assert!(gaussian_divergence(H2, m1, m2) <= (m1 - m2).powi(2) / 8.0 + 1e-15);
    }
}
