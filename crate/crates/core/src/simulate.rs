//! Synthetic data-generating processes and Monte Carlo experiments for
//! three bias mechanisms: controlling for a mediator, truncating the age
//! range, and selective attrition of unhappy older respondents.
//!
//! Replicate `i` of an experiment with master seed `s` is generated from
//! `derive_seed(s, i)`, so results do not depend on how replicates are
//! scheduled across threads.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{cohort_bin, SurveyRecord, WaveMapping, MIN_AGE};
use crate::design::{build_design, AgeScheme, Codebook, TermSpec};
use crate::error::{Error, Result};
use crate::models::adjusted_means;
use crate::wls::fit_wls;

/// Stream tag mixed into the seed for attrition draws, so the main sample
/// is identical whether or not attrition is enabled.
const ATTRITION_STREAM: u64 = 0xA77E_0000_0000_0001;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate (or stream) `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// `n` standard normal draws from a seeded stream.
pub fn normal_draws(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Age profile of expected happiness, excluding the intercept. Coefficients
/// apply to raw age in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrueAgeFn {
    Flat,
    Quadratic { b1: f64, b2: f64 },
    Cubic { b1: f64, b2: f64, b3: f64 },
}

impl TrueAgeFn {
    pub fn value(&self, age: f64) -> f64 {
        match *self {
            TrueAgeFn::Flat => 0.0,
            TrueAgeFn::Quadratic { b1, b2 } => b1 * age + b2 * age * age,
            TrueAgeFn::Cubic { b1, b2, b3 } => b1 * age + b2 * age * age + b3 * age.powi(3),
        }
    }

    /// Cubic with turning points at `low` and `high` (falls to `low`, rises
    /// to `high`, declines after), scaled by `c`: `f'(a) = −c (a − low)(a − high)`.
    pub fn s_shape(low: f64, high: f64, c: f64) -> Self {
        TrueAgeFn::Cubic {
            b1: -c * low * high,
            b2: c * (low + high) / 2.0,
            b3: -c / 3.0,
        }
    }

    /// Constant slope, when the function is linear in age.
    pub fn linear_slope(&self) -> Option<f64> {
        match *self {
            TrueAgeFn::Flat => Some(0.0),
            TrueAgeFn::Quadratic { b1, b2 } if b2 == 0.0 => Some(b1),
            TrueAgeFn::Cubic { b1, b2, b3 } if b2 == 0.0 && b3 == 0.0 => Some(b1),
            _ => None,
        }
    }
}

/// Age → mediator → happiness chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediatorConfig {
    /// Age → mediator slope.
    pub a: f64,
    /// Mediator → happiness slope.
    pub b: f64,
    /// Direct age → happiness slope net of the mediator.
    pub direct: f64,
    pub noise_sd: f64,
}

impl MediatorConfig {
    /// Total age effect `direct + a·b`.
    pub fn total_effect(&self) -> f64 {
        self.direct + self.a * self.b
    }
}

/// Respondents at or above `knee` whose latent happiness is below the
/// conditional median are dropped with probability `strength`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttritionConfig {
    pub knee: u32,
    pub strength: f64,
}

impl AttritionConfig {
    /// Expected shift of the surviving mean at or above the knee, in units
    /// of the latent noise sd: `½·s·m / (1 − ½·s)` with `m = √(2/π)` the
    /// mean of the upper half of a standard normal.
    pub fn expected_inflation(&self, noise_sd: f64) -> f64 {
        let upper_half_mean = (2.0 / PI).sqrt();
        let s = self.strength;
        noise_sd * 0.5 * s * upper_half_mean / (1.0 - 0.5 * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub seed: u64,
    pub country: String,
    pub age_min: u32,
    pub age_max: u32,
    /// Rounds are drawn uniformly from `1..=rounds`.
    pub rounds: u32,
    pub waves: WaveMapping,
    pub intercept: f64,
    pub true_age_fn: TrueAgeFn,
    pub cohort_width: u32,
    /// Additive effect keyed by cohort-bin start year; absent bins are 0.
    pub cohort_effect: BTreeMap<i32, f64>,
    /// Additive effect per round; absent rounds are 0.
    pub period_effect: BTreeMap<u32, f64>,
    pub mediator: Option<MediatorConfig>,
    pub attrition: Option<AttritionConfig>,
    pub noise_sd: f64,
    /// Clamp to 0..=10 and round to integers.
    pub clamp: bool,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n: 5000,
            seed: 20_220_101,
            country: "SIM".into(),
            age_min: 15,
            age_max: 90,
            rounds: 8,
            waves: WaveMapping::default(),
            intercept: 6.0,
            true_age_fn: TrueAgeFn::Flat,
            cohort_width: 5,
            cohort_effect: BTreeMap::new(),
            period_effect: BTreeMap::new(),
            mediator: None,
            attrition: None,
            noise_sd: 1.0,
            clamp: false,
        }
    }
}

impl DgpConfig {
    /// a = 0.5, b = 1.0, direct = 0 over a flat profile.
    pub fn mediator_default() -> Self {
        DgpConfig {
            mediator: Some(MediatorConfig {
                a: 0.5,
                b: 1.0,
                direct: 0.0,
                noise_sd: 5.0,
            }),
            ..DgpConfig::default()
        }
    }

    /// S-shaped profile: minimum near 50, peak near 80, decline after.
    pub fn truncation_default() -> Self {
        DgpConfig {
            true_age_fn: TrueAgeFn::s_shape(50.0, 80.0, 2.5e-5),
            ..DgpConfig::default()
        }
    }

    /// Declining old-age profile with attrition of strength 0.5 from 75.
    pub fn attrition_default() -> Self {
        DgpConfig {
            true_age_fn: TrueAgeFn::Quadratic { b1: 0.02, b2: -0.0002 },
            attrition: Some(AttritionConfig {
                knee: 75,
                strength: 0.5,
            }),
            ..DgpConfig::default()
        }
    }

    /// Every invalid field, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n == 0 {
            problems.push("n must be positive".to_string());
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            problems.push(format!("noise_sd must be positive (got {})", self.noise_sd));
        }
        if self.age_min < MIN_AGE {
            problems.push(format!("age_min must be at least {MIN_AGE} (got {})", self.age_min));
        }
        if self.age_max < self.age_min {
            problems.push(format!("age_max {} is below age_min {}", self.age_max, self.age_min));
        }
        if self.rounds == 0 {
            problems.push("rounds must be at least 1".into());
        }
        if self.cohort_width == 0 {
            problems.push("cohort_width must be at least 1".into());
        }
        if let Some(m) = &self.mediator {
            if !(m.noise_sd > 0.0) {
                problems.push(format!("mediator noise_sd must be positive (got {})", m.noise_sd));
            }
        }
        if let Some(a) = &self.attrition {
            if !(0.0..=1.0).contains(&a.strength) {
                problems.push(format!("attrition strength must lie in [0, 1] (got {})", a.strength));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// A generated respondent with its latent noise draw.
#[derive(Debug, Clone)]
struct Draw {
    record: SurveyRecord,
    /// Standardized noise; below zero ⇔ below the conditional median.
    z: f64,
}

fn draw_sample(config: &DgpConfig) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let age = rng.random_range(config.age_min..=config.age_max);
        let round = rng.random_range(1..=config.rounds);
        let year = config.waves.year(round);
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut latent = config.intercept + config.true_age_fn.value(age as f64) + config.noise_sd * z;
        latent += config.period_effect.get(&round).copied().unwrap_or(0.0);
        let cohort = cohort_bin(year - age as i32, config.cohort_width);
        latent += config.cohort_effect.get(&cohort.start).copied().unwrap_or(0.0);
        let mut mediator = None;
        if let Some(m) = &config.mediator {
            let eta: f64 = StandardNormal.sample(&mut rng);
            let value = m.a * age as f64 + m.noise_sd * eta;
            latent += m.direct * age as f64 + m.b * value;
            mediator = Some(value);
        }
        let happiness = if config.clamp {
            latent.clamp(0.0, 10.0).round()
        } else {
            latent
        };
        let mut record = SurveyRecord::new(config.country.clone(), round, year, age, happiness, 1.0);
        record.mediator = mediator;
        out.push(Draw { record, z });
    }
    out
}

/// Keeps the draws that survive attrition. Uses its own random stream.
fn attrite(config: &DgpConfig, draws: &[Draw]) -> Vec<SurveyRecord> {
    let Some(attrition) = config.attrition else {
        return draws.iter().map(|d| d.record.clone()).collect();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, ATTRITION_STREAM));
    draws
        .iter()
        .filter(|d| {
            let u: f64 = rng.random();
            !(d.record.age >= attrition.knee && d.z < 0.0 && u < attrition.strength)
        })
        .map(|d| d.record.clone())
        .collect()
}

/// Generates a sample, applying attrition when configured. Weights are 1.
pub fn generate(config: &DgpConfig) -> Result<Vec<SurveyRecord>> {
    config.validate()?;
    Ok(attrite(config, &draw_sample(config)))
}

/// The full sample and its attrited subset, from the same draws.
pub fn generate_pair(config: &DgpConfig) -> Result<(Vec<SurveyRecord>, Vec<SurveyRecord>)> {
    config.validate()?;
    let draws = draw_sample(config);
    let full = draws.iter().map(|d| d.record.clone()).collect();
    Ok((full, attrite(config, &draws)))
}

/// Replicate estimates of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSummary {
    pub label: String,
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Monte Carlo standard error of the mean, `sd / √reps`.
    pub mc_se: f64,
}

impl SpecSummary {
    pub fn new(label: &str, estimates: Vec<f64>) -> Self {
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let var = if estimates.len() > 1 {
            estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        SpecSummary {
            label: label.to_string(),
            mean,
            sd: var.sqrt(),
            mc_se: (var / n).sqrt(),
            estimates,
        }
    }
}

/// One asserted property of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub statistic: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub description: String,
}

impl Hypothesis {
    /// |statistic − target| ≤ tolerance.
    fn within(name: &str, statistic: f64, target: f64, tolerance: f64, description: String) -> Self {
        Hypothesis {
            name: name.into(),
            statistic,
            target,
            tolerance,
            passed: (statistic - target).abs() <= tolerance,
            description,
        }
    }

    /// statistic ≥ target.
    fn at_least(name: &str, statistic: f64, target: f64, description: String) -> Self {
        Hypothesis {
            name: name.into(),
            statistic,
            target,
            tolerance: 0.0,
            passed: statistic >= target,
            description,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub experiment: String,
    pub reps: usize,
    pub n: usize,
    pub master_seed: u64,
    /// Seed of each replicate, in replicate order.
    pub seeds: Vec<u64>,
    pub specs: Vec<SpecSummary>,
    /// Analytic target values.
    pub targets: Vec<(String, f64)>,
    pub hypotheses: Vec<Hypothesis>,
}

impl SimResult {
    pub fn passed(&self) -> bool {
        self.hypotheses.iter().all(|h| h.passed)
    }

    pub fn spec(&self, label: &str) -> Option<&SpecSummary> {
        self.specs.iter().find(|s| s.label == label)
    }

    pub fn hypothesis(&self, name: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }
}

/// Number of Monte Carlo standard errors allowed for centering checks.
pub const MC_SE_TOLERANCE: f64 = 3.0;
/// Minimum replicate share for directional checks.
pub const DIRECTION_SHARE: f64 = 0.95;

fn replicate_configs(config: &DgpConfig, reps: usize) -> Vec<DgpConfig> {
    (0..reps)
        .map(|i| DgpConfig {
            seed: derive_seed(config.seed, i as u64),
            ..config.clone()
        })
        .collect()
}

fn age_coefficient(records: &[SurveyRecord], terms: &[TermSpec], label: &str) -> Result<f64> {
    let design = build_design(records, terms, &Codebook::default())?;
    let fit = fit_wls(&design)?;
    fit.coefficient(label)
        .ok_or_else(|| Error::MissingCoefficient(label.to_string()))
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    (0..width).map(|k| rows.iter().map(|r| r[k]).collect()).collect()
}

fn share(values: &[bool]) -> f64 {
    values.iter().filter(|v| **v).count() as f64 / values.len() as f64
}

/// Fits age + period with and without the mediator. The first centers on
/// the total effect `direct + a·b`, the second on `direct`.
pub fn experiment_mediator(config: &DgpConfig, reps: usize) -> Result<SimResult> {
    config.validate()?;
    let mediator = config
        .mediator
        .ok_or_else(|| Error::Config("mediator experiment needs a mediator".into()))?;
    let base_slope = config
        .true_age_fn
        .linear_slope()
        .ok_or_else(|| Error::Config("mediator experiment needs a flat or linear age profile".into()))?;
    let configs = replicate_configs(config, reps);
    let plain = [TermSpec::Intercept, TermSpec::AgeLinear, TermSpec::PeriodFactor];
    let with_mediator = [
        TermSpec::Intercept,
        TermSpec::AgeLinear,
        TermSpec::PeriodFactor,
        TermSpec::Mediator,
    ];
    let rows = configs
        .par_iter()
        .map(|c| {
            let sample = generate(c)?;
            Ok(vec![
                age_coefficient(&sample, &plain, "age")?,
                age_coefficient(&sample, &with_mediator, "age")?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let cols = transpose(rows, 2);
    let no_controls = SpecSummary::new("no_controls", cols[0].clone());
    let controlled = SpecSummary::new("with_mediator", cols[1].clone());
    let total = base_slope + mediator.total_effect();
    let direct = base_slope + mediator.direct;
    let hypotheses = vec![
        Hypothesis::within(
            "no_controls_centers_on_total",
            no_controls.mean,
            total,
            MC_SE_TOLERANCE * no_controls.mc_se,
            "age slope without the mediator is within 3 MC standard errors of direct + a*b".into(),
        ),
        Hypothesis::within(
            "with_mediator_centers_on_direct",
            controlled.mean,
            direct,
            MC_SE_TOLERANCE * controlled.mc_se,
            "age slope controlling for the mediator is within 3 MC standard errors of direct".into(),
        ),
    ];
    Ok(SimResult {
        experiment: "mediator".into(),
        reps,
        n: config.n,
        master_seed: config.seed,
        seeds: configs.iter().map(|c| c.seed).collect(),
        specs: vec![no_controls, controlled],
        targets: vec![("total_effect".into(), total), ("direct_effect".into(), direct)],
        hypotheses,
    })
}

/// Inclusive age cap of the truncated fits.
pub const TRUNCATION_CAP: u32 = 69;

/// Fits the quadratic on the full age range and on ages ≤ 69.
pub fn experiment_truncation(config: &DgpConfig, reps: usize) -> Result<SimResult> {
    config.validate()?;
    let configs = replicate_configs(config, reps);
    let terms = [
        TermSpec::Intercept,
        TermSpec::AgeLinear,
        TermSpec::AgeSquared,
        TermSpec::PeriodFactor,
    ];
    let rows = configs
        .par_iter()
        .map(|c| {
            let sample = generate(c)?;
            let capped: Vec<SurveyRecord> = sample.iter().filter(|r| r.age <= TRUNCATION_CAP).cloned().collect();
            let full_design = build_design(&sample, &terms, &Codebook::default())?;
            let capped_design = build_design(&capped, &terms, &Codebook::default())?;
            let full = fit_wls(&full_design)?;
            let cap = fit_wls(&capped_design)?;
            Ok(vec![
                full.coefficient("age").unwrap(),
                full.coefficient("age_sq").unwrap(),
                cap.coefficient("age").unwrap(),
                cap.coefficient("age_sq").unwrap(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let sq_larger: Vec<bool> = rows.iter().map(|r| r[3] > r[1]).collect();
    let age_more_negative: Vec<bool> = rows.iter().map(|r| r[2] < r[0]).collect();
    let sq_diff: Vec<f64> = rows.iter().map(|r| r[3] - r[1]).collect();
    let cols = transpose(rows, 4);
    let specs = vec![
        SpecSummary::new("full_age", cols[0].clone()),
        SpecSummary::new("full_age_sq", cols[1].clone()),
        SpecSummary::new("capped_age", cols[2].clone()),
        SpecSummary::new("capped_age_sq", cols[3].clone()),
        SpecSummary::new("age_sq_difference", sq_diff),
    ];
    let sq_share = share(&sq_larger);
    let both_share = share(
        &sq_larger
            .iter()
            .zip(&age_more_negative)
            .map(|(a, b)| *a && *b)
            .collect::<Vec<_>>(),
    );
    let mut hypotheses = Vec::new();
    match config.true_age_fn {
        TrueAgeFn::Cubic { b3, .. } if b3 != 0.0 => hypotheses.push(Hypothesis::at_least(
            "capped_age_sq_exceeds_full",
            sq_share,
            DIRECTION_SHARE,
            "share of replicates where the capped age_sq strictly exceeds the full-range age_sq".into(),
        )),
        _ => {
            let d = &specs[4];
            hypotheses.push(Hypothesis::within(
                "capped_and_full_agree",
                d.mean,
                0.0,
                MC_SE_TOLERANCE * d.mc_se,
                "mean capped-minus-full age_sq within 3 MC standard errors of 0".into(),
            ));
            if config.true_age_fn == TrueAgeFn::Flat {
                for s in [&specs[1], &specs[3]] {
                    hypotheses.push(Hypothesis::within(
                        &format!("{}_is_zero", s.label),
                        s.mean,
                        0.0,
                        MC_SE_TOLERANCE * s.mc_se,
                        format!("mean {} within 3 MC standard errors of 0", s.label),
                    ));
                }
            }
        }
    }
    Ok(SimResult {
        experiment: "truncation".into(),
        reps,
        n: config.n,
        master_seed: config.seed,
        seeds: configs.iter().map(|c| c.seed).collect(),
        specs,
        targets: vec![
            ("share_capped_age_sq_larger".into(), sq_share),
            ("share_capped_more_u_shaped".into(), both_share),
        ],
        hypotheses,
    })
}

/// Compares fine-bin adjusted curves of the attrited and full samples for
/// every bin reaching the knee.
pub fn experiment_attrition(config: &DgpConfig, reps: usize) -> Result<SimResult> {
    config.validate()?;
    let attrition = config
        .attrition
        .ok_or_else(|| Error::Config("attrition experiment needs an attrition block".into()))?;
    let late_bins: Vec<String> = AgeScheme::Fine
        .bins()
        .iter()
        .filter(|b| b.end.map_or(true, |e| e >= attrition.knee))
        .map(|b| b.label())
        .collect();
    if late_bins.is_empty() {
        return Err(Error::Config("attrition knee lies beyond every age bin".into()));
    }
    let configs = replicate_configs(config, reps);
    let codebook = Codebook::default();
    let rows = configs
        .par_iter()
        .map(|c| {
            let (full, attrited) = generate_pair(c)?;
            let (full_curve, _) = adjusted_means(&full, &c.country, AgeScheme::Fine, &codebook)?;
            let (attr_curve, _) = adjusted_means(&attrited, &c.country, AgeScheme::Fine, &codebook)?;
            late_bins
                .iter()
                .map(|b| match (attr_curve.level(b), full_curve.level(b)) {
                    (Some(a), Some(f)) => Ok(a - f),
                    _ => Err(Error::Config(format!("bin {b} is empty in a replicate"))),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let width = late_bins.len();
    let cols = transpose(rows, width);
    let expected = attrition.expected_inflation(config.noise_sd);
    let mut specs = Vec::new();
    let mut hypotheses = Vec::new();
    for (label, diffs) in late_bins.iter().zip(cols) {
        let positive = share(&diffs.iter().map(|d| *d > 0.0).collect::<Vec<_>>());
        let summary = SpecSummary::new(&format!("inflation_{label}"), diffs);
        if attrition.strength > 0.0 {
            hypotheses.push(Hypothesis::at_least(
                &format!("attrited_exceeds_full_{label}"),
                positive,
                DIRECTION_SHARE,
                format!("share of replicates where the attrited {label} level exceeds the full-sample level"),
            ));
        } else {
            hypotheses.push(Hypothesis::within(
                &format!("no_inflation_{label}"),
                summary.mean,
                0.0,
                MC_SE_TOLERANCE * summary.mc_se,
                format!("mean {label} difference within 3 MC standard errors of 0"),
            ));
        }
        specs.push(summary);
    }
    Ok(SimResult {
        experiment: "attrition".into(),
        reps,
        n: config.n,
        master_seed: config.seed,
        seeds: configs.iter().map(|c| c.seed).collect(),
        specs,
        targets: vec![("expected_inflation".into(), expected)],
        hypotheses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_mean_matches_intercept() {
        let config = DgpConfig {
            n: 10_000,
            ..DgpConfig::default()
        };
        let sample = generate(&config).unwrap();
        let mean = sample.iter().map(|r| r.happiness).sum::<f64>() / sample.len() as f64;
        assert!((mean - config.intercept).abs() < 3.0 / (10_000f64).sqrt());
        assert!(sample.iter().all(|r| r.weight == 1.0 && (15..=90).contains(&r.age)));
        assert!(sample.iter().all(|r| r.birth_year == r.period_year - r.age as i32));
    }

    #[test]
    fn path_product_recovered_in_large_sample() {
        let config = DgpConfig {
            n: 100_000,
            seed: 99,
            ..DgpConfig::mediator_default()
        };
        assert_eq!(config.mediator.unwrap().total_effect(), 0.5);
        let sample = generate(&config).unwrap();
        let terms = [TermSpec::Intercept, TermSpec::AgeLinear, TermSpec::PeriodFactor];
        let fit = fit_wls(&build_design(&sample, &terms, &Codebook::default()).unwrap()).unwrap();
        let est = fit.estimate("age").unwrap();
        assert!((est.coefficient - 0.5).abs() <= 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn zero_strength_attrition_is_identity() {
        let base = DgpConfig {
            n: 2000,
            true_age_fn: TrueAgeFn::Quadratic { b1: 0.01, b2: -0.0001 },
            ..DgpConfig::default()
        };
        let with = DgpConfig {
            attrition: Some(AttritionConfig {
                knee: 75,
                strength: 0.0,
            }),
            ..base.clone()
        };
        assert_eq!(generate(&base).unwrap(), generate(&with).unwrap());
    }

    #[test]
    fn additive_model_recovers_configured_effects() {
        let mut config = DgpConfig {
            n: 60_000,
            seed: 4,
            true_age_fn: TrueAgeFn::Quadratic { b1: -0.03, b2: 0.0003 },
            ..DgpConfig::default()
        };
        config.period_effect = [(2, 0.2), (5, -0.3), (8, 0.15)].into_iter().collect();
        let sample = generate(&config).unwrap();
        let terms = [
            TermSpec::Intercept,
            TermSpec::AgeLinear,
            TermSpec::AgeSquared,
            TermSpec::PeriodFactor,
        ];
        let fit = fit_wls(&build_design(&sample, &terms, &Codebook::default()).unwrap()).unwrap();
        let check = |label: &str, truth: f64| {
            let e = fit.estimate(label).unwrap();
            assert!((e.coefficient - truth).abs() <= 4.0 * e.std_error, "{label}: {e:?} vs {truth}");
        };
        check("intercept", 6.0);
        check("age", -0.03);
        check("age_sq", 0.0003);
        for round in 2..=8u32 {
            let truth = config.period_effect.get(&round).copied().unwrap_or(0.0);
            check(&format!("period:{}", 2000 + 2 * round), truth);
        }
    }

    #[test]
    fn cohort_effects_shift_cohort_contrasts() {
        let mut config = DgpConfig {
            n: 60_000,
            seed: 8,
            ..DgpConfig::default()
        };
        config.cohort_effect = [(1950, 0.4), (1980, -0.25)].into_iter().collect();
        let sample = generate(&config).unwrap();
        let terms = [
            TermSpec::Intercept,
            TermSpec::AgeBins(AgeScheme::Fine),
            TermSpec::PeriodFactor,
            TermSpec::CohortFactor { width: 5 },
        ];
        let fit = fit_wls(&build_design(&sample, &terms, &Codebook::default()).unwrap()).unwrap();
        let diff = fit.coefficient("cohort:1950-1954").unwrap() - fit.coefficient("cohort:1960-1964").unwrap();
        let se = (fit.covariance[(fit.index("cohort:1950-1954").unwrap(), fit.index("cohort:1950-1954").unwrap())]
            + fit.covariance[(fit.index("cohort:1960-1964").unwrap(), fit.index("cohort:1960-1964").unwrap())]
            - 2.0 * fit.covariance[(fit.index("cohort:1950-1954").unwrap(), fit.index("cohort:1960-1964").unwrap())])
        .sqrt();
        assert!((diff - 0.4).abs() <= 4.0 * se, "{diff} ± {se}");
    }

    #[test]
    fn invalid_fields_are_enumerated() {
        let bad = DgpConfig {
            noise_sd: 0.0,
            attrition: Some(AttritionConfig { knee: 75, strength: 1.5 }),
            ..DgpConfig::default()
        };
        let Err(Error::Config(msg)) = bad.validate() else { panic!() };
        assert!(msg.contains("noise_sd"));
        assert!(msg.contains("strength"));
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        assert_eq!(a, b);
        let unique: std::collections::BTreeSet<_> = a.iter().collect();
        assert_eq!(unique.len(), 100);
    }

    #[test]
    fn mediator_experiment_with_dead_paths() {
        for (a, b) in [(0.5, 0.0), (0.0, 1.0)] {
            let config = DgpConfig {
                n: 1500,
                mediator: Some(MediatorConfig {
                    a,
                    b,
                    direct: -0.01,
                    noise_sd: 5.0,
                }),
                ..DgpConfig::default()
            };
            let result = experiment_mediator(&config, 40).unwrap();
            assert!(result.passed(), "{:?}", result.hypotheses);
            assert_eq!(result.targets[0].1, -0.01);
            assert_eq!(result.targets[1].1, -0.01);
        }
    }

    #[test]
    fn truncation_benign_for_quadratic_and_flat_truth() {
        for truth in [TrueAgeFn::Quadratic { b1: -0.03, b2: 0.0003 }, TrueAgeFn::Flat] {
            let config = DgpConfig {
                n: 2000,
                true_age_fn: truth,
                ..DgpConfig::default()
            };
            let result = experiment_truncation(&config, 60).unwrap();
            assert!(result.passed(), "{truth:?}: {:?}", result.hypotheses);
        }
    }

    #[test]
    fn full_strength_attrition_matches_truncated_normal_mean() {
        let config = DgpConfig {
            n: 4000,
            attrition: Some(AttritionConfig {
                knee: 75,
                strength: 1.0,
            }),
            ..DgpConfig::default()
        };
        let result = experiment_attrition(&config, 60).unwrap();
        let expected = (2.0 / PI).sqrt();
        assert!((result.targets[0].1 - expected).abs() < 1e-12);
        let oldest = result.spec("inflation_85+").unwrap();
        assert!(
            (oldest.mean - expected).abs() <= 3.0 * oldest.mc_se,
            "{} vs {expected} (se {})",
            oldest.mean,
            oldest.mc_se
        );
    }

    #[test]
    fn zero_strength_attrition_has_no_inflation() {
        let config = DgpConfig {
            n: 2000,
            attrition: Some(AttritionConfig {
                knee: 75,
                strength: 0.0,
            }),
            ..DgpConfig::default()
        };
        let result = experiment_attrition(&config, 10).unwrap();
        assert!(result.passed());
        assert!(result.specs.iter().all(|s| s.mean == 0.0));
    }

    #[test]
    fn experiments_are_reproducible() {
        let config = DgpConfig {
            n: 800,
            ..DgpConfig::mediator_default()
        };
        let a = experiment_mediator(&config, 12).unwrap();
        let b = experiment_mediator(&config, 12).unwrap();
        assert_eq!(a, b);
        let seq: Vec<u64> = (0..12).map(|i| derive_seed(config.seed, i)).collect();
        assert_eq!(a.seeds, seq);
    }
}
