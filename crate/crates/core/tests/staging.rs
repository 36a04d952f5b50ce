use ommirt_core::density::{LogDensity, Model};
use ommirt_core::sampler::{ChainDraws, ChainStats, PosteriorDraws, SamplerConfig};
use ommirt_core::sim::{simulate_experiment, AssessmentGenerator, ExperimentDesign, GroundTruth, UnderlyingGenerator};
use ommirt_core::spec::{build_other, build_self, build_underlying, Dimensionality, OtherVariant, PointEstimates, Tier};
use ommirt_core::staging::{
    delta_summary, execute, extract_correlations, fit_model, fit_seed, posterior_mean, stage_hierarchy, Sequential,
    StageSettings,
};
use ommirt_core::{Error, ResponseTable, ScoreKind};
use proptest::prelude::*;

fn quick(warmup: usize, samples: usize) -> SamplerConfig {
    SamplerConfig { warmup, samples, chains: 2, ..SamplerConfig::per_participant(0) }
}

fn settings() -> StageSettings {
    StageSettings {
        underlying: quick(150, 100),
        self_tier: SamplerConfig { target_accept: 0.95, ..quick(150, 100) },
        per_participant: quick(150, 100),
    }
}

fn experiment(n: usize, seed: u64, variant: OtherVariant, agen: AssessmentGenerator) -> (ResponseTable, GroundTruth) {
    let design = ExperimentDesign::standard(n, seed);
    simulate_experiment(&design, &UnderlyingGenerator::new(Dimensionality::Multi, 4), &agen, variant).unwrap()
}

fn constant_draws(rows: Vec<Vec<f64>>) -> PosteriorDraws {
    let dim = rows[0].len();
    let n = rows.len();
    let chain = ChainDraws {
        draws: rows.concat(),
        pointwise: vec![],
        log_density: vec![0.0; n],
        stats: ChainStats {
            step_size: 0.1,
            inv_metric: vec![1.0; dim],
            divergences: 0,
            mean_accept: 0.8,
            mean_tree_depth: 1.0,
            max_depth_hits: 0,
            total_leapfrogs: 0,
        },
    };
    PosteriorDraws::from_chains(dim, 0, vec![chain]).unwrap()
}

/// Truth values as point estimates, bypassing the fitted tiers.
fn true_estimates(truth: &GroundTruth, selfs: bool) -> PointEstimates {
    let mut out = PointEstimates::default();
    let a = truth.assessments.as_ref().unwrap();
    for (i, p) in truth.design.participants.iter().enumerate() {
        if selfs {
            let s = &a.self_params[&p.id];
            out.ability.insert(p.id.clone(), s.ability.clone());
            out.difficulty.insert(p.id.clone(), s.difficulty.clone());
            out.noise.insert(p.id.clone(), s.sigma);
        } else {
            out.ability.insert(p.id.clone(), truth.underlying.ability[i].clone());
        }
    }
    if !selfs {
        out.difficulty.insert(PointEstimates::SHARED.into(), truth.underlying.difficulty.clone());
        out.noise.insert(PointEstimates::SHARED.into(), truth.underlying.sigma);
    }
    out
}

#[test]
fn plan_shape_and_determinism() {
    let (table, _) = experiment(2, 1, OtherVariant::Undifferentiated, AssessmentGenerator::new(4));
    let plan = stage_hierarchy(&table, Dimensionality::Multi, &OtherVariant::ALL, 99).unwrap();
    assert_eq!(plan.fits.len(), 1 + 2 + 6);
    assert_eq!(plan.fits.iter().filter(|f| f.tier == Tier::SelfAssessment).count(), 2);
    assert!(plan.fits[1..3].iter().all(|f| f.inputs_from == Some(0)));
    for f in &plan.fits[3..] {
        let src = &plan.fits[f.inputs_from.unwrap()];
        assert_eq!(src.tier, Tier::SelfAssessment);
        assert_eq!(src.participant, f.participant);
    }
    let mut seeds: Vec<u64> = plan.fits.iter().map(|f| f.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 9);
    assert_eq!(plan, stage_hierarchy(&table, Dimensionality::Multi, &OtherVariant::ALL, 99).unwrap());
    assert!(matches!(
        stage_hierarchy(&table.of_kind(ScoreKind::True), Dimensionality::Multi, &OtherVariant::ALL, 99),
        Err(Error::Config(_))
    ));
}

#[test]
fn staged_inputs_are_posterior_means() {
    let (table, truth) = experiment(2, 2, OtherVariant::DifferentiatedByAbility, AssessmentGenerator::new(4));
    let cat = truth.design.catalog().unwrap();
    let plan = stage_hierarchy(&table, Dimensionality::Multi, &OtherVariant::ALL, 5).unwrap();
    let staged = execute(&plan, &table, &cat, &settings(), &Sequential).unwrap();
    assert_eq!(staged.all().count(), 9);

    let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    let u = posterior_mean(staged.underlying.model.spec(), &staged.underlying.draws).unwrap();
    for (i, s) in staged.selves.iter().enumerate() {
        let fixed = &s.model.spec().fixed;
        assert!(close(fixed.underlying_ability.as_ref().unwrap(), &u.get("ability").unwrap()[i * 4..(i + 1) * 4]));
        assert!(close(fixed.underlying_difficulty.as_ref().unwrap(), u.get("difficulty").unwrap()));
    }
    for o in &staged.others {
        let p = o.planned.participant.clone().unwrap();
        let src = staged.selves.iter().find(|s| s.planned.participant.as_deref() == Some(&p)).unwrap();
        let m = posterior_mean(src.model.spec(), &src.draws).unwrap();
        let prov = o.provenance.as_ref().unwrap();
        assert_eq!(prov.source, src.label());
        let fixed = &o.model.spec().fixed;
        assert!((fixed.self_noise.unwrap() - m.scalar("sigma").unwrap()).abs() < 1e-12);
        if o.planned.tier != Tier::Other(OtherVariant::FullyDifferentiated) {
            assert!(close(fixed.self_ability.as_ref().unwrap(), m.get("ability").unwrap()));
            assert!(close(fixed.self_difficulty.as_ref().unwrap(), m.get("difficulty").unwrap()));
        }
    }
    let undiff = staged.other("1", OtherVariant::Undifferentiated).unwrap();
    assert_eq!(undiff.draws.total_draws(), 1);
}

#[test]
fn self_fits_ignore_other_participants() {
    let (table, truth) = experiment(3, 3, OtherVariant::Undifferentiated, AssessmentGenerator::new(4));
    let cat = truth.design.catalog().unwrap();
    let est = true_estimates(&truth, false);
    let cfg = quick(100, 50).with_seed(fit_seed(1, Tier::SelfAssessment, Some("1"), 0));
    let fit = |t: &ResponseTable| {
        let (spec, obs) = build_self(Dimensionality::Multi, &est, t, "1", &cat).unwrap();
        fit_model(&Model::new(spec, obs).unwrap(), &cfg).unwrap()
    };
    let perturbed = ResponseTable::new(
        table
            .rows()
            .iter()
            .cloned()
            .map(|mut r| {
                if r.participant != "1" {
                    r.score = 12 - r.score;
                }
                r
            })
            .collect(),
        12,
    )
    .unwrap();
    assert_eq!(fit(&table).raw(), fit(&perturbed).raw());
}

#[test]
fn correlation_summaries() {
    let (table, truth) = experiment(3, 4, OtherVariant::Undifferentiated, AssessmentGenerator::new(4));
    let cat = truth.design.catalog().unwrap();
    let (spec, _) = build_underlying(Dimensionality::Multi, &table, ScoreKind::True, &cat).unwrap();
    let zero = constant_draws(vec![vec![0.0; spec.dim()]; 5]);
    let r = extract_correlations(&spec, &zero).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((r.get(i, j) - f64::from(i == j)).abs() < 1e-12);
        }
    }

    let (spec1, _) = build_underlying(Dimensionality::One, &table, ScoreKind::True, &cat).unwrap();
    assert!(matches!(extract_correlations(&spec1, &constant_draws(vec![vec![0.0; spec1.dim()]])), Err(Error::Unsupported(_))));

    // Every draw of random coordinates yields a valid mean correlation matrix.
    let rows: Vec<Vec<f64>> = (0..20).map(|s| (0..spec.dim()).map(|i| ((s * 31 + i) as f64).sin() * 2.0).collect()).collect();
    let r = extract_correlations(&spec, &constant_draws(rows)).unwrap();
    for i in 0..4 {
        assert_eq!(r.get(i, i), 1.0);
        for j in 0..4 {
            assert_eq!(r.get(i, j), r.get(j, i));
            assert!(r.get(i, j).abs() <= 1.0);
        }
    }
}

#[test]
fn delta_summary_reports_constrained_offsets() {
    let (table, truth) = experiment(1, 5, OtherVariant::DifferentiatedByAbility, AssessmentGenerator::new(4));
    let cat = truth.design.catalog().unwrap();
    let mut est = PointEstimates::default();
    est.ability.insert("1".into(), vec![0.3]);
    est.difficulty.insert("1".into(), vec![0.0; 16]);
    est.noise.insert("1".into(), 0.1);
    let (spec, _) = build_other(OtherVariant::DifferentiatedByAbility, Dimensionality::One, &est, &table, "1", &cat).unwrap();
    // One-dimensional δ = μ_δ + σ_δ·z.
    let names = spec.unconstrained_names();
    let mut q = vec![0.0; spec.dim()];
    for (i, n) in names.iter().enumerate() {
        if n.starts_with("z_delta") {
            q[i] = 1.5;
        } else if n.starts_with("mu_delta") {
            q[i] = 0.2;
        }
    }
    let s = delta_summary(&spec, &constant_draws(vec![q; 4])).unwrap();
    assert_eq!(s.labels, vec!["all"]);
    assert!((s.mean[0] - 1.7).abs() < 1e-12, "{:?}", s.mean);

    let (fspec, _) = build_other(OtherVariant::FullyDifferentiated, Dimensionality::One, &est, &table, "1", &cat).unwrap();
    let err = delta_summary(&fspec, &constant_draws(vec![vec![0.0; fspec.dim()]]));
    assert!(matches!(err, Err(Error::Unsupported(_))));
}

#[test]
fn self_scores_matching_true_scores() {
    let (table, truth) = experiment(1, 6, OtherVariant::Undifferentiated, AssessmentGenerator::new(4));
    let cat = truth.design.catalog().unwrap();
    let copied = ResponseTable::new(
        table
            .rows()
            .iter()
            .filter(|r| r.kind != ScoreKind::Other)
            .cloned()
            .map(|mut r| {
                if r.kind == ScoreKind::SelfAssessed {
                    r.score = table
                        .rows()
                        .iter()
                        .find(|t| t.kind == ScoreKind::True && t.problem_set == r.problem_set)
                        .unwrap()
                        .score;
                }
                r
            })
            .collect(),
        12,
    )
    .unwrap();
    let (spec, obs) = build_self(Dimensionality::Multi, &true_estimates(&truth, false), &copied, "1", &cat).unwrap();
    let model = Model::new(spec, obs).unwrap();
    let cfg = SamplerConfig { target_accept: 0.95, ..SamplerConfig::per_participant(8) };
    let m = posterior_mean(model.spec(), &fit_model(&model, &cfg).unwrap()).unwrap();
    assert!(m.scalar("gamma").unwrap() > 0.5, "γ {:?}", m.scalar("gamma"));
    assert!(m.scalar("sigma_a").unwrap() < 0.5, "σ_a {:?}", m.scalar("sigma_a"));
}

#[test]
fn planted_offset_is_recovered() {
    let agen = AssessmentGenerator { delta_mean: vec![1.0, 0.0, 0.0, 0.0], delta_sd: 0.0, ..AssessmentGenerator::new(4) };
    let (table, truth) = experiment(4, 7, OtherVariant::DifferentiatedByAbility, agen);
    let cat = truth.design.catalog().unwrap();
    let plan = stage_hierarchy(&table, Dimensionality::Multi, &[OtherVariant::DifferentiatedByAbility], 21).unwrap();
    let staged = execute(&plan, &table, &cat, &StageSettings::default(), &Sequential).unwrap();
    let mut topic0 = 0.0;
    for p in &plan.participants {
        let f = staged.other(p, OtherVariant::DifferentiatedByAbility).unwrap();
        topic0 += delta_summary(f.model.spec(), &f.draws).unwrap().mean[0] / plan.participants.len() as f64;
    }
    assert!((topic0 - 1.0).abs() < 0.3, "mean δ on the planted topic {topic0}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn offset_model_nests_undifferentiated(seed in 0u64..500) {
        let (table, truth) = experiment(1, seed, OtherVariant::DifferentiatedByAbility, AssessmentGenerator::new(4));
        let cat = truth.design.catalog().unwrap();
        let est = true_estimates(&truth, true);
        let (us, uo) = build_other(OtherVariant::Undifferentiated, Dimensionality::Multi, &est, &table, "1", &cat).unwrap();
        let (bs, bo) = build_other(OtherVariant::DifferentiatedByAbility, Dimensionality::Multi, &est, &table, "1", &cat).unwrap();
        let (u, b) = (Model::new(us, uo).unwrap(), Model::new(bs, bo).unwrap());
        let lik = |m: &Model, q: &[f64]| {
            let mut rows = vec![0.0; m.n_pointwise()];
            m.pointwise_loglik(q, &mut rows);
            rows.iter().sum::<f64>()
        };
        let base = lik(&u, &[]);
        let best = (0..9).map(|i| lik(&b, &[0.25 * i as f64 - 1.0; 4])).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(best >= base - 1e-12);
        prop_assert!((lik(&b, &[0.0; 4]) - base).abs() < 1e-10);
    }
}
