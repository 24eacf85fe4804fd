//! U-shape detection rules, coefficient-reduction metrics and curve depth.
//!
//! Every verdict carries the quantities it was decided from, and
//! [`ShapeVerdict::recompute`] re-derives the decision from those alone.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::AgeCurve;
use crate::wls::FitResult;

pub const QUAD_THRESHOLD: f64 = 1.5;
pub const RANGE_THRESHOLD: f64 = 1.0;
pub const RISE_EPSILON: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// Quadratic signs plus both |t| above a threshold (default 1.5).
    QuadT15,
    /// Positive 15-34 and 60-74 contrasts against 35-59, both |t| above a threshold (default 1).
    RangeT1,
    /// Interior minimum followed by a rise on an adjusted fine-bin curve.
    CurveHeuristic,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::QuadT15 => "quad_t15",
            Rule::RangeT1 => "range_t1",
            Rule::CurveHeuristic => "curve_heuristic",
        }
    }

    pub fn parse(name: &str) -> Option<Rule> {
        match name.trim() {
            "quad_t15" => Some(Rule::QuadT15),
            "range_t1" => Some(Rule::RangeT1),
            "curve_heuristic" | "curve" => Some(Rule::CurveHeuristic),
            _ => None,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A signed coefficient with its absolute t statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefT {
    pub coefficient: f64,
    pub t_abs: f64,
}

impl CoefT {
    pub fn new(coefficient: f64, t: f64) -> Self {
        CoefT {
            coefficient,
            t_abs: t.abs(),
        }
    }

    fn from_fit(fit: &FitResult, label: &str) -> Result<Self> {
        let e = fit.estimate(label)?;
        Ok(CoefT::new(e.coefficient, e.t_abs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeVerdict {
    pub country: String,
    pub rule: Rule,
    pub is_ushape: bool,
    /// Named quantities, in a fixed order per rule.
    pub evidence: Vec<(String, f64)>,
    /// Free-form notes (e.g. which bins attain the minimum).
    pub notes: Vec<String>,
}

impl ShapeVerdict {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.evidence.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Re-derives the decision from the evidence fields only.
    pub fn recompute(&self) -> Option<bool> {
        let g = |n: &str| self.get(n);
        Some(match self.rule {
            Rule::QuadT15 => {
                let th = g("threshold")?;
                g("age")? < 0.0 && g("age_sq")? > 0.0 && g("t_age")? > th && g("t_age_sq")? > th
            }
            Rule::RangeT1 => {
                let th = g("threshold")?;
                g("b_15_34")? > 0.0 && g("b_60_74")? > 0.0 && g("t_15_34")? > th && g("t_60_74")? > th
            }
            Rule::CurveHeuristic => {
                g("min_is_interior")? == 1.0 && g("later_rise")? >= g("rise_epsilon")?
            }
        })
    }
}

/// Age and age² estimates of a quadratic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadEvidence {
    pub age: CoefT,
    pub age_sq: CoefT,
}

impl QuadEvidence {
    pub fn from_fit(fit: &FitResult) -> Result<Self> {
        Ok(QuadEvidence {
            age: CoefT::from_fit(fit, "age")?,
            age_sq: CoefT::from_fit(fit, "age_sq")?,
        })
    }
}

/// u-shape ⇔ age < 0, age² > 0 and both |t| > threshold.
pub fn detect_quad(country: &str, ev: &QuadEvidence, threshold: f64) -> ShapeVerdict {
    let is_ushape = ev.age.coefficient < 0.0
        && ev.age_sq.coefficient > 0.0
        && ev.age.t_abs > threshold
        && ev.age_sq.t_abs > threshold;
    ShapeVerdict {
        country: country.to_string(),
        rule: Rule::QuadT15,
        is_ushape,
        evidence: vec![
            ("age".into(), ev.age.coefficient),
            ("t_age".into(), ev.age.t_abs),
            ("age_sq".into(), ev.age_sq.coefficient),
            ("t_age_sq".into(), ev.age_sq.t_abs),
            ("threshold".into(), threshold),
        ],
        notes: Vec::new(),
    }
}

/// Coarse-range contrasts against the 35-59 reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEvidence {
    pub young: CoefT,
    pub old: CoefT,
    pub oldest: Option<CoefT>,
}

impl RangeEvidence {
    pub fn from_fit(fit: &FitResult) -> Result<Self> {
        if !fit.labels.iter().any(|l| l == "bin:15-34") || fit.index("bin:35-59").is_some() {
            return Err(Error::InvalidTerms(
                "range rule needs a coarse-bin fit with reference 35-59".into(),
            ));
        }
        Ok(RangeEvidence {
            young: CoefT::from_fit(fit, "bin:15-34")?,
            old: CoefT::from_fit(fit, "bin:60-74")?,
            oldest: CoefT::from_fit(fit, "bin:75+").ok(),
        })
    }
}

/// u-shape ⇔ both the 15-34 and 60-74 contrasts are positive with |t| > threshold.
pub fn detect_ranges(country: &str, ev: &RangeEvidence, threshold: f64) -> ShapeVerdict {
    let is_ushape = ev.young.coefficient > 0.0
        && ev.old.coefficient > 0.0
        && ev.young.t_abs > threshold
        && ev.old.t_abs > threshold;
    let mut evidence = vec![
        ("b_15_34".into(), ev.young.coefficient),
        ("t_15_34".into(), ev.young.t_abs),
        ("b_60_74".into(), ev.old.coefficient),
        ("t_60_74".into(), ev.old.t_abs),
    ];
    if let Some(o) = ev.oldest {
        evidence.push(("b_75".into(), o.coefficient));
        evidence.push(("t_75".into(), o.t_abs));
    }
    evidence.push(("threshold".into(), threshold));
    ShapeVerdict {
        country: country.to_string(),
        rule: Rule::RangeT1,
        is_ushape,
        evidence,
        notes: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionEntry {
    pub label: String,
    pub old: f64,
    pub new: f64,
    /// `(1 − new/old)·100`; `None` when `old == 0`.
    pub percent: Option<f64>,
    pub sign_flipped: bool,
}

impl ReductionEntry {
    pub fn new(label: &str, old: f64, new: f64) -> Self {
        let percent = (old != 0.0).then(|| (1.0 - new / old) * 100.0);
        ReductionEntry {
            label: label.to_string(),
            old,
            new,
            percent,
            sign_flipped: old != 0.0 && new != 0.0 && old.signum() != new.signum(),
        }
    }

    /// One decimal place, or "undefined".
    pub fn formatted(&self) -> String {
        match self.percent {
            Some(p) => format!("{p:.1}"),
            None => "undefined".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub entries: Vec<ReductionEntry>,
}

impl ReductionReport {
    pub fn get(&self, label: &str) -> Option<&ReductionEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// Percent reduction of each labeled coefficient from `old` to `new`.
/// Values above 100 mean the sign changed.
pub fn reduction(old: &FitResult, new: &FitResult, labels: &[&str]) -> Result<ReductionReport> {
    let entries = labels
        .iter()
        .map(|l| {
            let o = old.coefficient(l).ok_or_else(|| Error::MissingCoefficient(l.to_string()))?;
            let n = new.coefficient(l).ok_or_else(|| Error::MissingCoefficient(l.to_string()))?;
            Ok(ReductionEntry::new(l, o, n))
        })
        .collect::<Result<_>>()?;
    Ok(ReductionReport { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub country: String,
    pub max: f64,
    pub min: f64,
    pub difference: f64,
    pub max_bins: Vec<String>,
    pub min_bins: Vec<String>,
}

/// Max, min and their difference over a curve's bins.
pub fn depth(curve: &AgeCurve) -> Result<DepthReport> {
    if curve.points.len() < 2 {
        return Err(Error::TooFewBins(curve.points.len()));
    }
    let max = curve.points.iter().map(|p| p.level).fold(f64::NEG_INFINITY, f64::max);
    let min = curve.points.iter().map(|p| p.level).fold(f64::INFINITY, f64::min);
    let at = |v: f64| {
        curve
            .points
            .iter()
            .filter(|p| p.level == v)
            .map(|p| p.label.clone())
            .collect()
    };
    Ok(DepthReport {
        country: curve.country.clone(),
        max,
        min,
        difference: max - min,
        max_bins: at(max),
        min_bins: at(min),
    })
}

/// Parameters of the curve heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRule {
    /// Bins where the minimum must fall.
    pub interior_bins: Vec<String>,
    pub rise_epsilon: f64,
}

impl Default for CurveRule {
    fn default() -> Self {
        CurveRule {
            interior_bins: vec!["35-44".into(), "45-54".into(), "55-64".into()],
            rise_epsilon: RISE_EPSILON,
        }
    }
}

/// u-shape ⇔ the (first) minimum lies in an interior bin and the curve
/// rises by at least `rise_epsilon` from it to the maximum of later bins.
///
/// The pre-minimum condition ("falls by ε, or starts within ε of the
/// minimum") holds for every curve, so it only contributes the recorded
/// `initial_fall` to the evidence.
pub fn classify_curve(curve: &AgeCurve, rule: &CurveRule) -> ShapeVerdict {
    let mut notes = Vec::new();
    let mut min_ix = 0;
    for (i, p) in curve.points.iter().enumerate() {
        if p.level < curve.points[min_ix].level {
            min_ix = i;
        }
    }
    let (min_is_interior, initial_fall, later_rise) = match curve.points.get(min_ix) {
        Some(min_point) => {
            notes.push(format!("minimum at {}", min_point.label));
            let interior = rule.interior_bins.iter().any(|b| *b == min_point.label);
            let fall = curve.points[0].level - min_point.level;
            let rise = curve.points[min_ix + 1..]
                .iter()
                .map(|p| p.level - min_point.level)
                .fold(0.0f64, f64::max);
            (interior, fall, rise)
        }
        None => (false, 0.0, 0.0),
    };
    let is_ushape = min_is_interior && later_rise >= rule.rise_epsilon;
    ShapeVerdict {
        country: curve.country.clone(),
        rule: Rule::CurveHeuristic,
        is_ushape,
        evidence: vec![
            ("min_is_interior".into(), f64::from(u8::from(min_is_interior))),
            ("initial_fall".into(), initial_fall),
            ("later_rise".into(), later_rise),
            ("rise_epsilon".into(), rule.rise_epsilon),
        ],
        notes,
    }
}

/// "k of m countries u-shaped under rule R".
pub fn summary_line(verdicts: &[ShapeVerdict], rule: Rule) -> String {
    let k = verdicts.iter().filter(|v| v.is_ushape).count();
    format!("{k} of {} countries u-shaped under rule {rule}", verdicts.len())
}
