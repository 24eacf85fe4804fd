//! The model battery: named specifications, per-country fits, quadratic
//! curve prediction and period/cohort-adjusted bin levels.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{apply_filter, distinct_rounds, FilterSpec, SurveyRecord, Variable};
use crate::design::{build_design, AgeScheme, Codebook, TermSpec};
use crate::error::{Error, Result};
use crate::wls::{fit_wls, FitResult};

/// Age functional form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Form {
    Quadratic,
    Ranges(AgeScheme),
}

/// Declarative description of one model variant. Period is always
/// controlled as a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub form: Form,
    /// Individual-circumstance controls; empty means "controls off".
    pub controls: Vec<Variable>,
    /// Inclusive upper age bound (69 = younger than 70).
    pub age_cap: Option<u32>,
    pub cohort_control: bool,
    pub cohort_width: u32,
}

impl ModelSpec {
    pub fn quadratic(name: &str) -> Self {
        ModelSpec {
            name: name.to_string(),
            form: Form::Quadratic,
            controls: Vec::new(),
            age_cap: None,
            cohort_control: false,
            cohort_width: 5,
        }
    }

    pub fn ranges(name: &str, scheme: AgeScheme) -> Self {
        ModelSpec {
            name: name.to_string(),
            form: Form::Ranges(scheme),
            controls: Vec::new(),
            age_cap: None,
            cohort_control: true,
            cohort_width: 5,
        }
    }

    pub fn with_controls(mut self, controls: &[Variable]) -> Self {
        self.controls = controls.to_vec();
        self
    }

    pub fn with_age_cap(mut self, cap: u32) -> Self {
        self.age_cap = Some(cap);
        self
    }

    /// Controls on, age < 70: the specification the reductions are measured against.
    pub fn controls_capped() -> Self {
        Self::quadratic("controls_capped")
            .with_controls(&Variable::CONTROLS)
            .with_age_cap(69)
    }

    /// Controls off, age < 70.
    pub fn no_controls_capped() -> Self {
        Self::quadratic("no_controls_capped").with_age_cap(69)
    }

    /// Controls off, all ages: the per-country quadratic battery.
    pub fn no_controls_all_ages() -> Self {
        Self::quadratic("no_controls_all_ages")
    }

    /// Four-bin ranges with period and 5-year cohort factors.
    pub fn coarse_ranges() -> Self {
        Self::ranges("coarse_ranges", AgeScheme::Coarse)
    }

    /// Eight-bin ranges with period and 5-year cohort factors.
    pub fn fine_ranges() -> Self {
        Self::ranges("fine_ranges", AgeScheme::Fine)
    }

    pub fn terms(&self) -> Vec<TermSpec> {
        let mut terms = vec![TermSpec::Intercept];
        match self.form {
            Form::Quadratic => {
                terms.push(TermSpec::AgeLinear);
                terms.push(TermSpec::AgeSquared);
            }
            Form::Ranges(scheme) => terms.push(TermSpec::AgeBins(scheme)),
        }
        terms.push(TermSpec::PeriodFactor);
        if self.cohort_control {
            terms.push(TermSpec::CohortFactor {
                width: self.cohort_width,
            });
        }
        terms.extend(self.controls.iter().map(|v| TermSpec::control(*v)));
        terms
    }

    pub fn filter(&self, country: &str) -> FilterSpec {
        FilterSpec {
            max_age: self.age_cap,
            ..FilterSpec::default()
        }
        .with_country(country)
        .with_listwise(self.controls.iter().copied())
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A fitted specification for one country.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryFit {
    pub country: String,
    pub spec: String,
    pub fit: FitResult,
    pub warnings: Vec<String>,
}

/// Filters to `country` and the spec's sample, builds the design and fits it.
pub fn fit_spec(records: &[SurveyRecord], spec: &ModelSpec, country: &str, codebook: &Codebook) -> Result<CountryFit> {
    let filtered = apply_filter(records, &spec.filter(country))?;
    let mut warnings = Vec::new();
    let periods = distinct_rounds(&filtered.records);
    if spec.cohort_control && periods < 2 {
        return Err(Error::TooFewPeriods {
            country: country.to_string(),
            periods,
        });
    }
    if periods < 3 {
        let msg = format!("{country}: only {periods} distinct rounds; period/cohort leverage is weak");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let design = build_design(&filtered.records, &spec.terms(), codebook)?;
    for d in &design.dropped_levels {
        warnings.push(format!("{}: dropped {} level {} ({})", country, d.term, d.level, d.reason));
    }
    let fit = fit_wls(&design)?;
    Ok(CountryFit {
        country: country.to_string(),
        spec: spec.name.clone(),
        fit,
        warnings,
    })
}

/// One row of a batch: a fit or the error that prevented it.
#[derive(Debug)]
pub struct BatchRow<T> {
    pub country: String,
    pub result: Result<T>,
}

/// Fits `spec` for every country, in parallel, returning rows in input order.
pub fn batch_fit(
    records: &[SurveyRecord],
    spec: &ModelSpec,
    countries: &[String],
    codebook: &Codebook,
) -> Vec<BatchRow<CountryFit>> {
    countries
        .par_iter()
        .map(|c| BatchRow {
            country: c.clone(),
            result: fit_spec(records, spec, c, codebook),
        })
        .collect()
}

/// `intercept + age·a + age_sq·a² + offset`, where `offset` fixes every
/// other regressor at its weighted sample mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCurve {
    pub intercept: f64,
    pub age: f64,
    pub age_sq: f64,
    pub offset: f64,
}

impl QuadraticCurve {
    pub fn from_fit(fit: &FitResult) -> Result<Self> {
        let (Some(intercept), Some(age), Some(age_sq)) = (
            fit.coefficient("intercept"),
            fit.coefficient("age"),
            fit.coefficient("age_sq"),
        ) else {
            return Err(Error::NotQuadratic);
        };
        let offset = fit
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| !matches!(l.as_str(), "intercept" | "age" | "age_sq"))
            .map(|(j, _)| fit.column_means[j] * fit.coefficients[j])
            .sum();
        Ok(QuadraticCurve {
            intercept,
            age,
            age_sq,
            offset,
        })
    }

    pub fn value(&self, age: f64) -> f64 {
        self.intercept + self.offset + self.age * age + self.age_sq * age * age
    }

    /// Turning point `-age / (2·age_sq)`; `None` for a linear curve.
    pub fn vertex(&self) -> Option<f64> {
        (self.age_sq != 0.0).then(|| -self.age / (2.0 * self.age_sq))
    }
}

/// Predicted happiness for each age, with period (and any other non-age
/// regressor) standardized to its weighted sample distribution.
pub fn predict_curve(fit: &FitResult, ages: impl IntoIterator<Item = u32>) -> Result<Vec<(u32, f64)>> {
    let curve = QuadraticCurve::from_fit(fit)?;
    Ok(ages.into_iter().map(|a| (a, curve.value(a as f64))).collect())
}

/// One adjusted level on an age curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub label: String,
    /// Bin midpoint in years, for plotting.
    pub midpoint: f64,
    pub level: f64,
}

/// Adjusted happiness per age bin for one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeCurve {
    pub country: String,
    pub points: Vec<CurvePoint>,
    pub max: f64,
    pub min: f64,
    pub depth: f64,
}

impl AgeCurve {
    pub fn new(country: impl Into<String>, points: Vec<CurvePoint>) -> Self {
        let max = points.iter().map(|p| p.level).fold(f64::NEG_INFINITY, f64::max);
        let min = points.iter().map(|p| p.level).fold(f64::INFINITY, f64::min);
        let depth = if points.is_empty() { 0.0 } else { max - min };
        AgeCurve {
            country: country.into(),
            points,
            max,
            min,
            depth,
        }
    }

    /// Builds a curve from levels over a scheme's bins, in bin order.
    pub fn from_levels(country: impl Into<String>, scheme: AgeScheme, levels: &[f64]) -> Self {
        let points = scheme
            .bins()
            .iter()
            .zip(levels)
            .map(|(b, l)| CurvePoint {
                label: b.label(),
                midpoint: b.midpoint(),
                level: *l,
            })
            .collect();
        AgeCurve::new(country, points)
    }

    pub fn level(&self, label: &str) -> Option<f64> {
        self.points.iter().find(|p| p.label == label).map(|p| p.level)
    }
}

/// Adjusted bin levels from a ranges fit: `intercept + β_bin + Σ share·β`
/// over every other regressor, with `β_reference = 0`. Bins without
/// observations are omitted.
pub fn adjusted_levels(fit: &FitResult, country: &str) -> Result<AgeCurve> {
    let block = fit
        .blocks
        .iter()
        .find(|b| matches!(b.term, TermSpec::AgeBins(_)))
        .ok_or_else(|| Error::InvalidTerms("fit has no age-bin term".into()))?;
    let TermSpec::AgeBins(scheme) = block.term else { unreachable!() };
    let reference = block.reference.clone().expect("factor reference");
    let intercept = fit
        .coefficient("intercept")
        .ok_or_else(|| Error::MissingCoefficient("intercept".into()))?;
    let intercept_ix = fit.index("intercept").expect("intercept present");
    let standardized: f64 = (0..fit.labels.len())
        .filter(|j| *j != intercept_ix && !block.columns.contains(j))
        .map(|j| fit.column_means[j] * fit.coefficients[j])
        .sum();
    let constant = intercept + standardized;

    let mut points = Vec::new();
    for bin in scheme.bins() {
        let label = bin.label();
        let effect = if label == reference {
            Some(0.0)
        } else {
            block
                .levels
                .iter()
                .position(|l| *l == label)
                .map(|k| fit.coefficients[block.columns.start + k])
        };
        match effect {
            Some(beta) => points.push(CurvePoint {
                label,
                midpoint: bin.midpoint(),
                level: constant + beta,
            }),
            None => log::warn!("{country}: bin {label} has no observations; omitted from curve"),
        }
    }
    Ok(AgeCurve::new(country, points))
}

/// Fits the ranges specification (period and cohort factors, no other
/// controls) and returns the standardized bin levels.
pub fn adjusted_means(
    records: &[SurveyRecord],
    country: &str,
    scheme: AgeScheme,
    codebook: &Codebook,
) -> Result<(AgeCurve, CountryFit)> {
    let spec = ModelSpec::ranges(&format!("{}_ranges", scheme.name()), scheme);
    let fit = fit_spec(records, &spec, country, codebook)?;
    Ok((adjusted_levels(&fit.fit, country)?, fit))
}

/// [`adjusted_means`] for each country, in input order.
pub fn batch_curves(
    records: &[SurveyRecord],
    countries: &[String],
    scheme: AgeScheme,
    codebook: &Codebook,
) -> Vec<BatchRow<(AgeCurve, CountryFit)>> {
    countries
        .par_iter()
        .map(|c| BatchRow {
            country: c.clone(),
            result: adjusted_means(records, c, scheme, codebook),
        })
        .collect()
}
