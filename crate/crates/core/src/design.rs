//! Labeled design matrices: dummy coding, age polynomials, age bins, period
//! and cohort factors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{cohort_bin, SurveyRecord, Variable, MIN_AGE};
use crate::error::{Error, Result};

/// Age-range scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgeScheme {
    /// 15-34, 35-59, 60-74, 75+ (reference 35-59).
    Coarse,
    /// Ten-year ranges 15-24 .. 75-84 plus 85+ (reference 35-44).
    Fine,
}

impl AgeScheme {
    pub fn bins(self) -> Vec<AgeBin> {
        let bounds: &[(u32, Option<u32>)] = match self {
            AgeScheme::Coarse => &[(15, Some(34)), (35, Some(59)), (60, Some(74)), (75, None)],
            AgeScheme::Fine => &[
                (15, Some(24)),
                (25, Some(34)),
                (35, Some(44)),
                (45, Some(54)),
                (55, Some(64)),
                (65, Some(74)),
                (75, Some(84)),
                (85, None),
            ],
        };
        bounds.iter().map(|&(start, end)| AgeBin { start, end }).collect()
    }

    pub fn reference(self) -> AgeBin {
        match self {
            AgeScheme::Coarse => AgeBin { start: 35, end: Some(59) },
            AgeScheme::Fine => AgeBin { start: 35, end: Some(44) },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgeScheme::Coarse => "coarse",
            AgeScheme::Fine => "fine",
        }
    }

    pub fn parse(name: &str) -> Option<AgeScheme> {
        match name.trim() {
            "coarse" => Some(AgeScheme::Coarse),
            "fine" => Some(AgeScheme::Fine),
            _ => None,
        }
    }
}

/// Inclusive age range; `end == None` is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgeBin {
    pub start: u32,
    pub end: Option<u32>,
}

impl AgeBin {
    pub fn label(&self) -> String {
        match self.end {
            Some(end) => format!("{}-{}", self.start, end),
            None => format!("{}+", self.start),
        }
    }

    pub fn contains(&self, age: u32) -> bool {
        age >= self.start && self.end.map_or(true, |e| age <= e)
    }

    /// Midpoint used for plotting; open-ended bins use `start + 5`.
    pub fn midpoint(&self) -> f64 {
        match self.end {
            Some(end) => (self.start + end) as f64 / 2.0,
            None => self.start as f64 + 5.0,
        }
    }
}

impl fmt::Display for AgeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The bin containing `age`. Ages below 15 are rejected.
pub fn age_bins(age: u32, scheme: AgeScheme) -> Result<AgeBin> {
    if age < MIN_AGE {
        return Err(Error::AgeBelowMinimum(age));
    }
    Ok(scheme
        .bins()
        .into_iter()
        .find(|b| b.contains(age))
        .expect("schemes cover every age >= 15"))
}

/// One model term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TermSpec {
    Intercept,
    AgeLinear,
    AgeSquared,
    AgeBins(AgeScheme),
    /// One indicator per survey year beyond the first.
    PeriodFactor,
    CohortFactor { width: u32 },
    Control { variable: Variable, reference: Option<String> },
    /// Continuous mediator column (simulation only).
    Mediator,
}

impl TermSpec {
    pub fn control(variable: Variable) -> Self {
        TermSpec::Control {
            variable,
            reference: None,
        }
    }

    fn kind_key(&self) -> String {
        match self {
            TermSpec::Intercept => "intercept".into(),
            TermSpec::AgeLinear => "age_linear".into(),
            TermSpec::AgeSquared => "age_squared".into(),
            TermSpec::AgeBins(_) => "age_bins".into(),
            TermSpec::PeriodFactor => "period_factor".into(),
            TermSpec::CohortFactor { .. } => "cohort_factor".into(),
            TermSpec::Control { variable, .. } => format!("control:{variable}"),
            TermSpec::Mediator => "mediator".into(),
        }
    }

    fn required_variable(&self) -> Option<Variable> {
        match self {
            TermSpec::Control { variable, .. } => Some(*variable),
            TermSpec::Mediator => Some(Variable::Mediator),
            _ => None,
        }
    }
}

impl fmt::Display for TermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermSpec::AgeBins(s) => write!(f, "age_bins({})", s.name()),
            TermSpec::CohortFactor { width } => write!(f, "cohort_factor({width})"),
            other => f.write_str(&other.kind_key()),
        }
    }
}

/// Declared category levels and default references for the control factors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub levels: BTreeMap<Variable, Vec<String>>,
    pub references: BTreeMap<Variable, String>,
}

impl Codebook {
    pub fn declare(mut self, variable: Variable, levels: &[&str], reference: &str) -> Self {
        self.levels
            .insert(variable, levels.iter().map(|s| s.to_string()).collect());
        self.references.insert(variable, reference.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedLevel {
    pub term: String,
    pub level: String,
    pub reason: String,
}

/// Indicator columns for one categorical variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumns {
    pub labels: Vec<String>,
    /// Non-reference levels, parallel to `labels` and `columns`.
    pub levels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub reference: String,
    pub dropped: Vec<DroppedLevel>,
}

/// Dummy-codes `values`. `declared` fixes the level set (observed values
/// outside it are rejected); without it the sorted observed levels are used.
/// Declared levels that never occur get no column and are recorded.
pub fn encode_factor(
    name: &str,
    label_prefix: &str,
    values: &[String],
    reference: &str,
    declared: Option<&[String]>,
) -> Result<CategoricalColumns> {
    let observed: BTreeSet<&str> = values.iter().map(String::as_str).collect();
    let levels: Vec<String> = match declared {
        Some(declared) => {
            if let Some(bad) = observed.iter().find(|v| !declared.iter().any(|d| d == *v)) {
                return Err(Error::UndeclaredLevel {
                    variable: name.to_string(),
                    value: bad.to_string(),
                });
            }
            if !declared.iter().any(|d| d == reference) {
                return Err(Error::ReferenceUndeclared {
                    variable: name.to_string(),
                    reference: reference.to_string(),
                });
            }
            declared.to_vec()
        }
        None => observed.iter().map(|s| s.to_string()).collect(),
    };
    if !observed.contains(reference) {
        return Err(Error::ReferenceUnobserved {
            variable: name.to_string(),
            reference: reference.to_string(),
        });
    }
    let mut out = CategoricalColumns {
        labels: Vec::new(),
        levels: Vec::new(),
        columns: Vec::new(),
        reference: reference.to_string(),
        dropped: Vec::new(),
    };
    for level in levels.iter().filter(|l| *l != reference) {
        if !observed.contains(level.as_str()) {
            log::warn!("{name}: level `{level}` has no observations; column dropped");
            out.dropped.push(DroppedLevel {
                term: name.to_string(),
                level: level.clone(),
                reason: "no observations".into(),
            });
            continue;
        }
        out.labels.push(format!("{label_prefix}{level}"));
        out.levels.push(level.clone());
        out.columns
            .push(values.iter().map(|v| f64::from(u8::from(v == level))).collect());
    }
    Ok(out)
}

/// Dummy-codes one control variable of `records` against `reference`.
/// Every record must carry the variable.
pub fn encode_categorical(
    records: &[SurveyRecord],
    variable: Variable,
    reference: &str,
    declared: Option<&[String]>,
) -> Result<CategoricalColumns> {
    let values = records
        .iter()
        .map(|r| {
            r.category(variable).map(str::to_string).ok_or_else(|| {
                Error::InvalidTerms(format!(
                    "`{variable}` is missing for some records; apply listwise deletion first"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    encode_factor(variable.name(), &format!("{variable}="), &values, reference, declared)
}

/// Columns contributed by one term.
#[derive(Debug, Clone, PartialEq)]
pub struct TermBlock {
    pub term: TermSpec,
    pub columns: Range<usize>,
    /// Reference level for factor terms.
    pub reference: Option<String>,
    /// Level represented by each column, for factor terms.
    pub levels: Vec<String>,
}

/// Dense n×p regressor matrix with labels, weights and response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub column_labels: Vec<String>,
    pub row_weights: Vec<f64>,
    pub response: Vec<f64>,
    pub dropped_levels: Vec<DroppedLevel>,
    pub blocks: Vec<TermBlock>,
    /// Records removed because a term's variable was missing.
    pub listwise_dropped: usize,
}

impl DesignMatrix {
    /// Assembles a design from raw columns. Used for ad hoc diagnostics
    /// (the APC identity check uses continuous age, year and birth year).
    pub fn from_columns(
        labels: Vec<String>,
        columns: Vec<Vec<f64>>,
        response: Vec<f64>,
        row_weights: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        if labels.len() != columns.len() {
            return Err(Error::InvalidTerms("label/column count mismatch".into()));
        }
        if columns.iter().any(|c| c.len() != n) || row_weights.len() != n {
            return Err(Error::InvalidTerms("column lengths differ from response".into()));
        }
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::InvalidTerms("duplicate column labels".into()));
        }
        let p = columns.len();
        let flat: Vec<f64> = columns.into_iter().flatten().collect();
        Ok(DesignMatrix {
            values: DMatrix::from_vec(n, p, flat),
            column_labels: labels,
            row_weights,
            response,
            dropped_levels: Vec::new(),
            blocks: Vec::new(),
            listwise_dropped: 0,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.column_labels.iter().position(|l| l == label)
    }

    /// Weighted mean of every column; for an indicator this is the weighted
    /// sample share of its level.
    pub fn weighted_column_means(&self) -> Vec<f64> {
        let total: f64 = self.row_weights.iter().sum();
        (0..self.ncols())
            .map(|j| {
                self.values
                    .column(j)
                    .iter()
                    .zip(&self.row_weights)
                    .map(|(x, w)| x * w)
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    pub fn block(&self, pred: impl Fn(&TermSpec) -> bool) -> Option<&TermBlock> {
        self.blocks.iter().find(|b| pred(&b.term))
    }
}

fn validate_terms(terms: &[TermSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for t in terms {
        if !seen.insert(t.kind_key()) {
            return Err(Error::InvalidTerms(format!("duplicate term `{t}`")));
        }
    }
    let intercepts = terms.iter().filter(|t| **t == TermSpec::Intercept).count();
    if intercepts != 1 {
        return Err(Error::InvalidTerms("exactly one intercept is required".into()));
    }
    if seen.contains("age_linear") && seen.contains("age_bins") {
        return Err(Error::InvalidTerms(
            "age_linear and age_bins are mutually exclusive".into(),
        ));
    }
    if let Some(TermSpec::CohortFactor { width: 0 }) =
        terms.iter().find(|t| matches!(t, TermSpec::CohortFactor { .. }))
    {
        return Err(Error::InvalidTerms("cohort width must be at least 1".into()));
    }
    Ok(())
}

/// Builds the design for `terms` in declared order. Records missing any
/// variable used by the terms are dropped first.
pub fn build_design(records: &[SurveyRecord], terms: &[TermSpec], codebook: &Codebook) -> Result<DesignMatrix> {
    validate_terms(terms)?;
    let needed: Vec<Variable> = terms.iter().filter_map(TermSpec::required_variable).collect();
    let kept: Vec<&SurveyRecord> = records
        .iter()
        .filter(|r| needed.iter().all(|v| r.has(*v)))
        .collect();
    let listwise_dropped = records.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::EmptySample {
            context: "after listwise deletion for model terms".into(),
        });
    }
    let n = kept.len();

    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut blocks = Vec::new();
    let mut dropped_levels = Vec::new();

    for term in terms {
        let start = columns.len();
        let mut reference = None;
        let mut levels = Vec::new();
        match term {
            TermSpec::Intercept => {
                labels.push("intercept".to_string());
                columns.push(vec![1.0; n]);
            }
            TermSpec::AgeLinear => {
                labels.push("age".to_string());
                columns.push(kept.iter().map(|r| r.age as f64).collect());
            }
            TermSpec::AgeSquared => {
                labels.push("age_sq".to_string());
                columns.push(kept.iter().map(|r| (r.age as f64).powi(2)).collect());
            }
            TermSpec::Mediator => {
                labels.push("mediator".to_string());
                columns.push(kept.iter().map(|r| r.mediator.unwrap_or(f64::NAN)).collect());
            }
            TermSpec::AgeBins(scheme) => {
                let values = kept
                    .iter()
                    .map(|r| age_bins(r.age, *scheme).map(|b| b.label()))
                    .collect::<Result<Vec<_>>>()?;
                let declared: Vec<String> = scheme.bins().iter().map(AgeBin::label).collect();
                let enc = encode_factor("age_bins", "bin:", &values, &scheme.reference().label(), Some(&declared))?;
                reference = Some(enc.reference.clone());
                levels = enc.levels.clone();
                push_factor(enc, &mut labels, &mut columns, &mut dropped_levels);
            }
            TermSpec::PeriodFactor => {
                let values: Vec<String> = kept.iter().map(|r| r.period_year.to_string()).collect();
                let first = values.iter().min().cloned().expect("non-empty");
                let enc = encode_factor("period", "period:", &values, &first, None)?;
                if enc.columns.is_empty() {
                    log::warn!("period factor has a single level; no period columns");
                    dropped_levels.push(DroppedLevel {
                        term: "period".into(),
                        level: first.clone(),
                        reason: "single period: factor reduces to its reference".into(),
                    });
                }
                reference = Some(enc.reference.clone());
                levels = enc.levels.clone();
                push_factor(enc, &mut labels, &mut columns, &mut dropped_levels);
            }
            TermSpec::CohortFactor { width } => {
                let bins: Vec<_> = kept.iter().map(|r| cohort_bin(r.birth_year, *width)).collect();
                let first = bins.iter().min().expect("non-empty").label();
                let values: Vec<String> = bins.iter().map(|b| b.label()).collect();
                // chronological, not lexical, level order
                let ordered: BTreeSet<_> = bins.iter().copied().collect();
                let declared: Vec<String> = ordered.iter().map(|b| b.label()).collect();
                let enc = encode_factor("cohort", "cohort:", &values, &first, Some(&declared))?;
                reference = Some(enc.reference.clone());
                levels = enc.levels.clone();
                push_factor(enc, &mut labels, &mut columns, &mut dropped_levels);
            }
            TermSpec::Control { variable, reference: explicit } => {
                let values: Vec<String> = kept
                    .iter()
                    .map(|r| r.category(*variable).expect("listwise").to_string())
                    .collect();
                let declared = codebook.levels.get(variable).map(Vec::as_slice);
                let reference_level = explicit
                    .clone()
                    .or_else(|| codebook.references.get(variable).cloned())
                    .or_else(|| declared.and_then(|d| d.first().cloned()))
                    .unwrap_or_else(|| values.iter().min().cloned().expect("non-empty"));
                let enc = encode_factor(
                    variable.name(),
                    &format!("{variable}="),
                    &values,
                    &reference_level,
                    declared,
                )?;
                reference = Some(enc.reference.clone());
                levels = enc.levels.clone();
                push_factor(enc, &mut labels, &mut columns, &mut dropped_levels);
            }
        }
        blocks.push(TermBlock {
            term: term.clone(),
            columns: start..columns.len(),
            reference,
            levels,
        });
    }

    let response = kept.iter().map(|r| r.happiness).collect();
    let weights = kept.iter().map(|r| r.weight).collect();
    let mut design = DesignMatrix::from_columns(labels, columns, response, weights)?;
    design.blocks = blocks;
    design.dropped_levels = dropped_levels;
    design.listwise_dropped = listwise_dropped;
    Ok(design)
}

fn push_factor(
    enc: CategoricalColumns,
    labels: &mut Vec<String>,
    columns: &mut Vec<Vec<f64>>,
    dropped: &mut Vec<DroppedLevel>,
) {
    labels.extend(enc.labels);
    columns.extend(enc.columns);
    dropped.extend(enc.dropped);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_level_sex() {
        let values = strings(&["male", "female", "male"]);
        let enc = encode_factor("sex", "sex=", &values, "male", None).unwrap();
        assert_eq!(enc.labels, vec!["sex=female"]);
        assert_eq!(enc.columns[0], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn six_marital_levels_give_five_columns() {
        let declared = strings(&["married", "civil", "separated", "divorced", "widowed", "other"]);
        let values = declared.clone();
        let enc = encode_factor("marital", "marital=", &values, "married", Some(&declared)).unwrap();
        assert_eq!(enc.columns.len(), 5);
        assert!(enc.dropped.is_empty());
    }

    #[test]
    fn unobserved_declared_level_is_dropped_and_recorded() {
        let declared = strings(&["1", "2", "3", "4", "5"]);
        let values = strings(&["1", "2", "3", "5", "5"]);
        let enc = encode_factor("education", "education=", &values, "1", Some(&declared)).unwrap();
        assert_eq!(enc.columns.len(), 3);
        assert_eq!(enc.dropped.len(), 1);
        assert_eq!(enc.dropped[0].level, "4");
    }

    #[test]
    fn unobserved_reference_is_an_error() {
        let declared = strings(&["1", "2"]);
        let values = strings(&["2", "2"]);
        assert!(matches!(
            encode_factor("sex", "sex=", &values, "1", Some(&declared)),
            Err(Error::ReferenceUnobserved { .. })
        ));
        assert!(matches!(
            encode_factor("sex", "sex=", &values, "9", Some(&declared)),
            Err(Error::ReferenceUndeclared { .. })
        ));
        assert!(matches!(
            encode_factor("sex", "sex=", &strings(&["3"]), "3", Some(&declared)),
            Err(Error::UndeclaredLevel { .. })
        ));
    }

    #[test]
    fn age_bin_boundaries() {
        let label = |a, s| age_bins(a, s).unwrap().label();
        assert_eq!(label(59, AgeScheme::Coarse), "35-59");
        assert_eq!(label(60, AgeScheme::Coarse), "60-74");
        assert_eq!(label(15, AgeScheme::Coarse), "15-34");
        assert_eq!(label(85, AgeScheme::Fine), "85+");
        assert_eq!(label(84, AgeScheme::Fine), "75-84");
        assert!(matches!(age_bins(14, AgeScheme::Fine), Err(Error::AgeBelowMinimum(14))));
        assert_eq!(AgeScheme::Fine.reference().label(), "35-44");
    }

    #[test]
    fn schemes_partition_ages() {
        for scheme in [AgeScheme::Coarse, AgeScheme::Fine] {
            for age in 15..=120 {
                let hits = scheme.bins().iter().filter(|b| b.contains(age)).count();
                assert_eq!(hits, 1, "age {age} under {scheme:?}");
            }
        }
    }

    fn panel(rounds: &[u32]) -> Vec<SurveyRecord> {
        let mut out = Vec::new();
        for &round in rounds {
            for age in (15..95).step_by(3) {
                out.push(SurveyRecord::new("DE", round, 2000 + 2 * round as i32, age, 7.0, 1.0));
            }
        }
        out
    }

    #[test]
    fn quadratic_with_period_over_eight_rounds_has_ten_columns() {
        let records = panel(&[1, 2, 3, 4, 5, 6, 7, 8]);
        let terms = [TermSpec::Intercept, TermSpec::AgeLinear, TermSpec::AgeSquared, TermSpec::PeriodFactor];
        let d = build_design(&records, &terms, &Codebook::default()).unwrap();
        assert_eq!(d.ncols(), 10);
        assert_eq!(d.nrows(), records.len());
        assert_eq!(&d.column_labels[..3], &["intercept", "age", "age_sq"]);
        assert_eq!(d.column_labels[3], "period:2004");
        let age_sq = d.values.column(2);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(age_sq[i], (r.age * r.age) as f64);
        }
    }

    #[test]
    fn coarse_bins_contribute_three_columns() {
        let records = panel(&[1, 2, 3]);
        let terms = [
            TermSpec::Intercept,
            TermSpec::AgeBins(AgeScheme::Coarse),
            TermSpec::PeriodFactor,
            TermSpec::CohortFactor { width: 5 },
        ];
        let d = build_design(&records, &terms, &Codebook::default()).unwrap();
        let bins = d.block(|t| matches!(t, TermSpec::AgeBins(_))).unwrap();
        assert_eq!(bins.columns.len(), 3);
        assert_eq!(
            &d.column_labels[bins.columns.clone()],
            &["bin:15-34", "bin:60-74", "bin:75+"]
        );
        assert_eq!(bins.reference.as_deref(), Some("35-59"));
    }

    #[test]
    fn single_round_period_factor_is_empty_with_warning() {
        let records = panel(&[4]);
        let terms = [TermSpec::Intercept, TermSpec::AgeLinear, TermSpec::PeriodFactor];
        let d = build_design(&records, &terms, &Codebook::default()).unwrap();
        assert_eq!(d.ncols(), 2);
        assert_eq!(d.dropped_levels.len(), 1);
        assert_eq!(d.dropped_levels[0].term, "period");
    }

    #[test]
    fn invalid_term_lists() {
        let records = panel(&[1]);
        let cb = Codebook::default();
        let dup = [TermSpec::Intercept, TermSpec::AgeLinear, TermSpec::AgeLinear];
        assert!(matches!(build_design(&records, &dup, &cb), Err(Error::InvalidTerms(_))));
        let none = [TermSpec::AgeLinear];
        assert!(matches!(build_design(&records, &none, &cb), Err(Error::InvalidTerms(_))));
        let both = [TermSpec::Intercept, TermSpec::AgeLinear, TermSpec::AgeBins(AgeScheme::Fine)];
        assert!(matches!(build_design(&records, &both, &cb), Err(Error::InvalidTerms(_))));
        let ctrl = [TermSpec::Intercept, TermSpec::control(Variable::Sex)];
        assert!(matches!(build_design(&records, &ctrl, &cb), Err(Error::EmptySample { .. })));
    }

    #[test]
    fn controls_respect_codebook_and_listwise() {
        let mut records = panel(&[1, 2]);
        for (i, r) in records.iter_mut().enumerate() {
            if i % 7 != 0 {
                r.sex = Some(if i % 2 == 0 { "1" } else { "2" }.into());
            }
        }
        let cb = Codebook::default().declare(Variable::Sex, &["1", "2"], "2");
        let terms = [TermSpec::Intercept, TermSpec::control(Variable::Sex)];
        let d = build_design(&records, &terms, &cb).unwrap();
        assert_eq!(d.column_labels, vec!["intercept", "sex=1"]);
        assert_eq!(d.listwise_dropped, records.iter().filter(|r| r.sex.is_none()).count());
        assert_eq!(d.nrows() + d.listwise_dropped, records.len());
    }

    #[test]
    fn indicator_rows_sum_to_zero_or_one() {
        let records = panel(&[1, 2, 3, 5]);
        let terms = [
            TermSpec::Intercept,
            TermSpec::AgeBins(AgeScheme::Fine),
            TermSpec::PeriodFactor,
            TermSpec::CohortFactor { width: 5 },
        ];
        let d = build_design(&records, &terms, &Codebook::default()).unwrap();
        for block in d.blocks.iter().skip(1) {
            for i in 0..d.nrows() {
                let s: f64 = block.columns.clone().map(|j| d.values[(i, j)]).sum();
                assert!(s == 0.0 || s == 1.0);
            }
        }
        // no all-zero columns, unique labels
        for j in 0..d.ncols() {
            assert!(d.values.column(j).iter().any(|v| *v != 0.0));
        }
        let unique: BTreeSet<_> = d.column_labels.iter().collect();
        assert_eq!(unique.len(), d.ncols());
    }
}
