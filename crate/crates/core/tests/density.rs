use ommirt_core::data::{Observation, SetCatalog};
use ommirt_core::density::{grad_log_density, joint_log_density, LogDensity, Model};
use ommirt_core::math::LN_2PI;
use ommirt_core::observation::{ordered_probit_log_pmf, NoiseScale};
use ommirt_core::spec::{Dimensionality, FixedInputs, ModelSpec, OtherVariant, Tier};
use ommirt_core::{logistic, CutpointLadder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog(k: usize, per_topic: usize) -> SetCatalog {
    let topics = (0..k).map(|t| format!("t{t}")).collect();
    let sets = (0..k * per_topic).map(|s| format!("{}", s + 1)).collect();
    SetCatalog::new(topics, sets, (0..k * per_topic).map(|s| s / per_topic).collect()).unwrap()
}

fn fixed(k: usize, j: usize) -> FixedInputs {
    FixedInputs {
        underlying_ability: Some((0..k).map(|i| 0.3 * i as f64 - 0.2).collect()),
        underlying_difficulty: Some((0..j).map(|i| 0.1 * i as f64 - 0.5).collect()),
        self_ability: Some((0..k).map(|i| 0.5 - 0.25 * i as f64).collect()),
        self_difficulty: Some((0..j).map(|i| 0.05 * i as f64 - 0.3).collect()),
        self_noise: Some(0.12),
    }
}

fn model(tier: Tier, dims: Dimensionality, k: usize, n: usize, seed: u64) -> Model {
    let per_topic = 3;
    let cat = catalog(k, per_topic);
    let j = k * per_topic;
    let people: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let a = if dims == Dimensionality::One { 1 } else { k };
    let spec = ModelSpec::new(tier, dims, cat, people, fixed(a, j), CutpointLadder::equally_spaced(13).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = (0..n)
        .flat_map(|p| (0..j).map(move |s| (p, s)))
        .map(|(p, s)| Observation { participant: p, set: s, score: rng.random_range(0..=12), round: 1 })
        .collect();
    Model::new(spec, obs).unwrap()
}

fn all_models() -> Vec<(String, Model)> {
    let mut out = Vec::new();
    for dims in [Dimensionality::One, Dimensionality::Multi] {
        let mut tiers = vec![Tier::Underlying, Tier::SelfAssessment];
        tiers.extend(OtherVariant::ALL.map(Tier::Other));
        for tier in tiers {
            let n = if tier == Tier::Underlying { 4 } else { 1 };
            out.push((format!("{}/{}", tier.label(), dims.as_str()), model(tier, dims, 3, n, 9)));
        }
    }
    out
}

fn max_rel_fd_error(m: &Model, q: &[f64]) -> f64 {
    let g = m.grad_log_density(q).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut x = q.to_vec();
    for i in 0..q.len() {
        x[i] = q[i] + h;
        let up = m.log_density(&x);
        x[i] = q[i] - h;
        let down = m.log_density(&x);
        x[i] = q[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / fd.abs().max(1.0));
    }
    worst
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (name, m) in all_models() {
        for _ in 0..20 {
            let q: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let err = max_rel_fd_error(&m, &q);
            assert!(err < 1e-5, "{name}: relative error {err}");
        }
    }
}

#[test]
fn prior_only_by_ability_is_standard_normal() {
    let mut m = model(Tier::Other(OtherVariant::DifferentiatedByAbility), Dimensionality::Multi, 4, 1, 1);
    m = Model::new(m.spec().clone(), vec![]).unwrap();
    let g = m.grad_log_density(&[0.0; 4]).unwrap();
    assert!(g.iter().all(|x| *x == 0.0));
    let lp = m.joint_log_density(&[0.0; 4]).unwrap();
    assert!((lp + 2.0 * LN_2PI).abs() < 1e-12);
}

#[test]
fn single_observation_equals_hand_sum() {
    // Undifferentiated: only the likelihood of the fixed self point.
    let base = model(Tier::Other(OtherVariant::Undifferentiated), Dimensionality::Multi, 2, 1, 3);
    let o = Observation { participant: 0, set: 4, score: 9, round: 1 };
    let m = Model::new(base.spec().clone(), vec![o]).unwrap();
    let f = &m.spec().fixed;
    let theta = f.self_ability.as_ref().unwrap()[1] - f.self_difficulty.as_ref().unwrap()[4];
    let expect = ordered_probit_log_pmf(
        logistic(theta).unwrap(),
        &m.spec().ladder,
        NoiseScale::new(0.12).unwrap(),
        9,
    )
    .unwrap();
    assert!((m.joint_log_density(&[]).unwrap() - expect).abs() < 1e-14);
}

#[test]
fn zero_offset_reduces_to_undifferentiated() {
    let by = model(Tier::Other(OtherVariant::DifferentiatedByAbility), Dimensionality::Multi, 3, 1, 5);
    let undiff = Model::new(
        ModelSpec::new(
            Tier::Other(OtherVariant::Undifferentiated),
            Dimensionality::Multi,
            by.spec().catalog.clone(),
            by.spec().participants.clone(),
            by.spec().fixed.clone(),
            by.spec().ladder.clone(),
        )
        .unwrap(),
        by.observations().to_vec(),
    )
    .unwrap();
    let prior_at_zero = -1.5 * LN_2PI;
    let lhs = by.joint_log_density(&[0.0; 3]).unwrap() - prior_at_zero;
    assert!((lhs - undiff.joint_log_density(&[]).unwrap()).abs() < 1e-10);
}

#[test]
fn one_dimensional_equals_single_topic_multidimensional() {
    for tier in [
        Tier::SelfAssessment,
        Tier::Other(OtherVariant::Undifferentiated),
        Tier::Other(OtherVariant::FullyDifferentiated),
    ] {
        let one = model(tier, Dimensionality::One, 1, 1, 8);
        let md = model(tier, Dimensionality::Multi, 1, 1, 8);
        assert_eq!(one.dim(), md.dim());
        let q: Vec<f64> = (0..one.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = one.joint_log_density(&q).unwrap();
        let b = md.joint_log_density(&q).unwrap();
        assert!((a - b).abs() < 1e-12, "{}", tier.label());
    }
}

#[test]
fn free_functions_agree_with_model() {
    let m = model(Tier::Underlying, Dimensionality::Multi, 3, 2, 4);
    let q: Vec<f64> = (0..m.dim()).map(|i| 0.1 * i as f64 - 1.0).collect();
    assert_eq!(joint_log_density(&q, m.spec(), m.observations()).unwrap(), m.joint_log_density(&q).unwrap());
    assert_eq!(grad_log_density(&q, m.spec(), m.observations()).unwrap(), m.grad_log_density(&q).unwrap());
    assert!(m.joint_log_density(&q[1..]).is_err());
}

#[test]
fn pointwise_rows_sum_to_likelihood() {
    // Likelihood = joint − joint with no data (priors and Jacobians only).
    let m = model(Tier::SelfAssessment, Dimensionality::Multi, 3, 1, 6);
    let prior = Model::new(m.spec().clone(), vec![]).unwrap();
    let q: Vec<f64> = (0..m.dim()).map(|i| (i as f64).cos()).collect();
    let mut rows = vec![0.0; m.n_pointwise()];
    m.pointwise_loglik(&q, &mut rows);
    let lik = m.log_density(&q) - prior.log_density(&q);
    assert!((rows.iter().sum::<f64>() - lik).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn duplicated_rows_double_the_likelihood(seed in 0u64..1000) {
        let m = model(Tier::Other(OtherVariant::FullyDifferentiated), Dimensionality::Multi, 2, 1, seed);
        let prior = Model::new(m.spec().clone(), vec![]).unwrap();
        let mut twice = m.observations().to_vec();
        twice.extend_from_slice(m.observations());
        let m2 = Model::new(m.spec().clone(), twice).unwrap();
        let q: Vec<f64> = (0..m.dim()).map(|i| ((i as u64 + seed) as f64 * 0.7).sin()).collect();
        let l1 = m.log_density(&q) - prior.log_density(&q);
        let l2 = m2.log_density(&q) - prior.log_density(&q);
        prop_assert!((l2 - 2.0 * l1).abs() < 1e-9 * l1.abs().max(1.0));
    }
}
