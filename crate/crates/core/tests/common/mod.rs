//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use decdim::model::{Channel, Model, ModelClass, ObservationSpace, RiskMode};
use decdim::FiniteDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fd(w: &[f64]) -> FiniteDistribution {
    FiniteDistribution::new(w.to_vec()).unwrap()
}

/// Two decisions a, b; two observations. M1 has g = (0, 1), M2 has g = (1, 0). The
/// channels agree at a and have disjoint supports at b.
pub fn worked_instance() -> ModelClass {
    let same = fd(&[1.0, 0.0]);
    let other = fd(&[0.0, 1.0]);
    let m1 = Model::explicit("M1", Channel::Finite(vec![same.clone(), same.clone()]), vec![0.0, 1.0], None).unwrap();
    let m2 = Model::explicit("M2", Channel::Finite(vec![same.clone(), other]), vec![1.0, 0.0], None).unwrap();
    ModelClass::new(
        vec!["a".into(), "b".into()],
        ObservationSpace::Finite(vec!["x".into(), "y".into()]),
        None,
        RiskMode::ExplicitRisk,
        None,
        vec![m1, m2],
    )
    .unwrap()
}

pub fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Occasional exact zeros exercise support edge cases.
    let mut w: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random::<f64>() }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Random reward-maximization class with finite observations in [0, 1]-valued reward
/// map, sizes drawn up to the given caps.
pub fn random_reward_class(seed: u64, max_pi: usize, max_obs: usize, max_models: usize) -> ModelClass {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pi = rng.random_range(2..=max_pi);
    let n_obs = rng.random_range(2..=max_obs);
    let n_m = rng.random_range(2..=max_models);
    let reward: Vec<f64> = (0..n_obs).map(|o| o as f64 / (n_obs - 1) as f64).collect();
    let models = (0..n_m)
        .map(|k| {
            let rows: Vec<FiniteDistribution> =
                (0..n_pi).map(|_| FiniteDistribution::new(random_dist(&mut rng, n_obs)).unwrap()).collect();
            Model::derived(format!("m{k}"), Channel::Finite(rows), Some(&reward)).unwrap()
        })
        .collect();
    ModelClass::new(
        (0..n_pi).map(|i| format!("d{i}")).collect(),
        ObservationSpace::Finite((0..n_obs).map(|o| format!("o{o}")).collect()),
        Some(reward),
        RiskMode::RewardMax,
        None,
        models,
    )
    .unwrap()
}
