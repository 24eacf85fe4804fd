//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 10 needs real survey extracts: set `AGECURVE_ESS_CSV` to a CSV
//! of rounds 1-8 with the default column names (and optionally
//! `AGECURVE_GERMANY` to the country code used for Germany, default `DE`).

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use agecurve::dataset::{load_csv, ColumnMapping};
use agecurve::design::{AgeScheme, Codebook, DesignMatrix};
use agecurve::fixtures::{self, DEPTH_EXCLUDED, PUBLISHED_MEAN_DEPTH};
use agecurve::models::{adjusted_means, fit_spec, ModelSpec};
use agecurve::shape::{depth, detect_quad, detect_ranges, ReductionEntry, QUAD_THRESHOLD, RANGE_THRESHOLD};
use agecurve::simulate::{experiment_attrition, experiment_mediator, experiment_truncation, AttritionConfig, DgpConfig};
use agecurve::wls::{fit_wls, rank_check, RANK_TOLERANCE};
use common::{normal_equations, rel_diff, Instance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

enum Status {
    Pass,
    Fail(String),
    Skipped(String),
}

fn check(ok: bool, detail: impl Into<String>) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail(detail.into())
    }
}

fn within_budget(status: Status, elapsed: Duration, budget: Duration) -> Status {
    match status {
        Status::Pass if elapsed > budget => Status::Fail(format!("took {elapsed:.2?}, budget {budget:?}")),
        other => other,
    }
}

fn solver_oracle() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let inst = Instance::random(&mut rng, 50, 5, false);
        let fit = match fit_wls(&inst.design()) {
            Ok(f) => f,
            Err(e) => return Status::Fail(format!("fit failed: {e}")),
        };
        let oracle = normal_equations(&inst.x, &inst.y, &inst.w).expect("oracle solvable");
        worst = worst.max(rel_diff(&fit.coefficients, &oracle));
    }
    check(worst <= 1e-8, format!("max relative difference {worst:e}"))
}

fn replication() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let inst = Instance::random(&mut rng, 50, 5, true);
        let weighted = fit_wls(&inst.design()).unwrap();
        let replicated = fit_wls(&inst.replicated().design()).unwrap();
        worst = worst.max(rel_diff(&weighted.coefficients, &replicated.coefficients));
    }
    check(worst <= 1e-10, format!("max relative difference {worst:e}"))
}

fn apc_rank() -> Status {
    let mut age = Vec::new();
    let mut year = Vec::new();
    for round in 1..=8 {
        for a in (15..=90).step_by(3) {
            age.push(a as f64 + (round % 3) as f64);
            year.push(2000.0 + 2.0 * round as f64);
        }
    }
    let n = age.len();
    let birth: Vec<f64> = year.iter().zip(&age).map(|(y, a)| y - a).collect();
    let y: Vec<f64> = (0..n).map(|i| (i % 11) as f64).collect();
    let build = |names: &[&str]| {
        let mut labels = vec!["intercept".to_string()];
        let mut cols = vec![vec![1.0; n]];
        for name in names {
            labels.push(name.to_string());
            cols.push(match *name {
                "age" => age.clone(),
                "period_year" => year.clone(),
                _ => birth.clone(),
            });
        }
        DesignMatrix::from_columns(labels, cols, y.clone(), vec![1.0; n]).unwrap()
    };
    let all = rank_check(&build(&["age", "period_year", "birth_year"]), RANK_TOLERANCE).unwrap();
    if all.is_full_rank() {
        return Status::Fail("full design reported full rank".into());
    }
    let suspects = all.suspects();
    if !["age", "period_year", "birth_year"].iter().all(|s| suspects.iter().any(|x| x == s)) {
        return Status::Fail(format!("suspect set {suspects:?}"));
    }
    for pair in [["age", "period_year"], ["age", "birth_year"], ["period_year", "birth_year"]] {
        if !rank_check(&build(&pair), RANK_TOLERANCE).unwrap().is_full_rank() {
            return Status::Fail(format!("{pair:?} still rank deficient"));
        }
    }
    Status::Pass
}

fn detectors() -> Status {
    let quad: Vec<_> = fixtures::quadratic_table()
        .unwrap()
        .iter()
        .map(|r| detect_quad(&r.country, &r.evidence(), QUAD_THRESHOLD))
        .collect();
    let mut failures: Vec<&str> = quad.iter().filter(|v| !v.is_ushape).map(|v| v.country.as_str()).collect();
    failures.sort();
    let expected_fail = ["Austria", "Cyprus", "Denmark", "Finland", "Iceland", "Israel", "Italy"];
    let quad_ok = quad.iter().filter(|v| v.is_ushape).count() == 23 && failures == expected_fail;

    let ranges: Vec<_> = fixtures::range_table()
        .unwrap()
        .iter()
        .map(|r| detect_ranges(&r.country, &r.evidence(), RANGE_THRESHOLD))
        .collect();
    let mut hits: Vec<&str> = ranges.iter().filter(|v| v.is_ushape).map(|v| v.country.as_str()).collect();
    hits.sort();
    let mut expected = ["Austria", "Switzerland", "Norway", "Poland", "Portugal", "Russia"];
    expected.sort();
    let notes = fixtures::published_discrepancies(&ranges);
    for note in &notes {
        println!("  note: {note}");
    }
    let logged = notes.len() == 1 && notes[0].starts_with("Luxembourg");
    check(
        quad_ok && hits == expected && logged,
        format!("quad failures {failures:?}; range hits {hits:?}; notes {notes:?}"),
    )
}

fn depth_metrics() -> Status {
    let rows = fixtures::level_table().unwrap();
    let mut mismatches = Vec::new();
    let mut kept = Vec::new();
    for r in &rows {
        let d = depth(&r.curve()).unwrap();
        if format!("{:.2}", d.difference) != r.printed_difference {
            mismatches.push(r.country.clone());
        }
        if !DEPTH_EXCLUDED.contains(&r.country.as_str()) {
            kept.push(d.difference);
        }
    }
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let german = rows.iter().find(|r| r.country == "Germany").map(|r| depth(&r.curve()).unwrap().difference);
    let turkey = rows.iter().find(|r| r.country == "Turkey").map(|r| depth(&r.curve()).unwrap().difference);
    check(
        mismatches.is_empty()
            && kept.len() == 21
            && (mean - PUBLISHED_MEAN_DEPTH).abs() <= 0.02
            && german.map(|g| format!("{g:.2}")) == Some("0.27".into())
            && turkey.map(|t| format!("{t:.2}")) == Some("2.14".into()),
        format!("mismatches {mismatches:?}; mean {mean:.4} over {}", kept.len()),
    )
}

fn reductions() -> Status {
    let age = ReductionEntry::new("age", -0.11463, -0.02073);
    let sq = ReductionEntry::new("age_sq", 0.00120, 0.00017);
    let austria = fixtures::quadratic_table()
        .unwrap()
        .into_iter()
        .find(|r| r.country == "Austria")
        .unwrap();
    let old = fixtures::QuadRow::implied_baseline(austria.age_sq, austria.reduction_age_sq);
    let at = ReductionEntry::new("age_sq", old, austria.age_sq);
    check(
        age.formatted() == "81.9"
            && sq.formatted() == "85.8"
            && at.percent.is_some_and(|p| p > 100.0)
            && at.sign_flipped,
        format!("{} {} {:?}", age.formatted(), sq.formatted(), at),
    )
}

fn simulation(result: agecurve::Result<agecurve::simulate::SimResult>) -> Status {
    match result {
        Ok(r) => {
            for s in &r.specs {
                println!("  {}: mean {:.5} (mc se {:.5})", s.label, s.mean, s.mc_se);
            }
            let failed: Vec<_> = r.hypotheses.iter().filter(|h| !h.passed).map(|h| h.name.clone()).collect();
            check(failed.is_empty() && r.seeds.len() == r.reps, format!("failed {failed:?}"))
        }
        Err(e) => Status::Fail(e.to_string()),
    }
}

fn attrition() -> Status {
    let on = simulation(experiment_attrition(&DgpConfig::attrition_default(), 200));
    if !matches!(on, Status::Pass) {
        return on;
    }
    let off = DgpConfig {
        attrition: Some(AttritionConfig {
            knee: 75,
            strength: 0.0,
        }),
        ..DgpConfig::attrition_default()
    };
    simulation(experiment_attrition(&off, 200))
}

fn real_data() -> Status {
    let Ok(path) = std::env::var("AGECURVE_ESS_CSV") else {
        return Status::Skipped("set AGECURVE_ESS_CSV to an ESS rounds 1-8 extract".into());
    };
    let germany = std::env::var("AGECURVE_GERMANY").unwrap_or_else(|_| "DE".into());
    let (records, _) = match load_csv(&path, &ColumnMapping::default()) {
        Ok(r) => r,
        Err(e) => return Status::Fail(e.to_string()),
    };
    let codebook = Codebook::default();
    let fit = match fit_spec(&records, &ModelSpec::no_controls_all_ages(), &germany, &codebook) {
        Ok(f) => f.fit,
        Err(e) => return Status::Fail(e.to_string()),
    };
    let close = |est: Option<f64>, target: f64| est.is_some_and(|e| ((e - target) / target).abs() <= 0.10);
    let quad_ok = close(fit.coefficient("age"), -0.02073) && close(fit.coefficient("age_sq"), 0.00017);
    let published = fixtures::level_table()
        .unwrap()
        .into_iter()
        .find(|r| r.country == "Germany")
        .unwrap();
    let curve = match adjusted_means(&records, &germany, AgeScheme::Fine, &codebook) {
        Ok((c, _)) => c,
        Err(e) => return Status::Fail(e.to_string()),
    };
    let bins_ok = AgeScheme::Fine
        .bins()
        .iter()
        .zip(&published.levels)
        .all(|(b, p)| curve.level(&b.label()).is_some_and(|l| (l - p).abs() <= 0.05));
    check(
        quad_ok && bins_ok,
        format!("age {:?}, age_sq {:?}, curve {:?}", fit.coefficient("age"), fit.coefficient("age_sq"), curve.points),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Status, Duration);
    let secs = Duration::from_secs;
    let criteria: [Criterion; 10] = [
        ("solver oracle equivalence (500 instances)", solver_oracle, secs(5)),
        ("weight/replication equivalence (100 instances)", replication, secs(2)),
        ("APC rank diagnostic", apc_rank, secs(1)),
        ("detector regression on published tables", detectors, secs(1)),
        ("depth metrics on published levels", depth_metrics, secs(1)),
        ("reduction formula", reductions, secs(1)),
        (
            "mediator bias experiment",
            || simulation(experiment_mediator(&DgpConfig::mediator_default(), 200)),
            secs(60),
        ),
        (
            "truncation bias experiment",
            || simulation(experiment_truncation(&DgpConfig::truncation_default(), 200)),
            secs(60),
        ),
        ("attrition experiment", attrition, secs(60)),
        ("real-data replication", real_data, secs(600)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let status = within_budget(run(), start.elapsed(), budget);
        let elapsed = start.elapsed();
        match status {
            Status::Pass => println!("PASS {:>2} {name} ({elapsed:.2?})", i + 1),
            Status::Fail(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({elapsed:.2?}): {why}", i + 1);
            }
            Status::Skipped(why) => println!("SKIPPED {:>2} {name}: {why}", i + 1),
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
