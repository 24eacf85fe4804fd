use agecurve::dataset::Variable;
use agecurve::design::{AgeScheme, Codebook};
use agecurve::models::{adjusted_levels, fit_spec, ModelSpec};
use agecurve::simulate::{derive_seed, generate, DgpConfig, SpecSummary, TrueAgeFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn independent_control_leaves_age_slope_alone() {
    let base = DgpConfig {
        n: 3000,
        seed: 11,
        true_age_fn: TrueAgeFn::Quadratic { b1: -0.04, b2: 0.0004 },
        ..DgpConfig::default()
    };
    let plain = ModelSpec::no_controls_all_ages();
    let with_sex = ModelSpec::no_controls_all_ages().with_controls(&[Variable::Sex]);
    let mut without = Vec::new();
    let mut with = Vec::new();
    for i in 0..40 {
        let config = DgpConfig {
            seed: derive_seed(base.seed, i),
            ..base.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1 << 40));
        let records: Vec<_> = generate(&config)
            .unwrap()
            .into_iter()
            .map(|mut r| {
                let female = rng.random_bool(0.5);
                if female {
                    r.happiness += 0.3;
                }
                r.with_control(Variable::Sex, if female { "2" } else { "1" })
            })
            .collect();
        let a = fit_spec(&records, &plain, "SIM", &Codebook::default()).unwrap();
        let b = fit_spec(&records, &with_sex, "SIM", &Codebook::default()).unwrap();
        without.push(a.fit.coefficient("age").unwrap());
        with.push(b.fit.coefficient("age").unwrap());
    }
    let a = SpecSummary::new("without", without);
    let b = SpecSummary::new("with", with);
    assert!((a.mean - b.mean).abs() < 3.0 * a.mc_se, "{} vs {} (se {})", a.mean, b.mean, a.mc_se);
    assert!((a.mean + 0.04).abs() < 3.0 * a.mc_se);
}

#[test]
fn adjusted_curve_tracks_true_profile_under_period_and_cohort_shifts() {
    let mut config = DgpConfig {
        n: 40_000,
        seed: 5,
        true_age_fn: TrueAgeFn::Quadratic { b1: -0.06, b2: 0.0006 },
        ..DgpConfig::default()
    };
    config.period_effect = [(3, 0.3), (6, -0.2)].into_iter().collect();
    config.cohort_effect = [(1940, 0.25), (1985, -0.15)].into_iter().collect();
    let records = generate(&config).unwrap();
    let fit = fit_spec(&records, &ModelSpec::fine_ranges(), "SIM", &Codebook::default()).unwrap();
    let curve = adjusted_levels(&fit.fit, "SIM").unwrap();
    assert_eq!(curve.points.len(), AgeScheme::Fine.bins().len());
    let lowest = curve
        .points
        .iter()
        .min_by(|a, b| a.level.total_cmp(&b.level))
        .unwrap();
    // true minimum at age 50
    assert_eq!(lowest.label, "45-54");
    let contrast = curve.level("15-24").unwrap() - curve.level("45-54").unwrap();
    let truth = config.true_age_fn.value(19.5) - config.true_age_fn.value(49.5);
    assert!((contrast - truth).abs() < 0.15, "{contrast} vs {truth}");
}
