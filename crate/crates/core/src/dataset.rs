//! Survey microdata: loading, validation, filtering and derived fields.
//!
//! A [`SurveyRecord`] is one respondent. Records are validated once at load
//! time and are immutable afterwards; every other operation in the crate
//! takes `&[SurveyRecord]` and returns new collections.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Youngest age accepted anywhere in the toolkit.
pub const MIN_AGE: u32 = 15;
/// Ages above this are treated as unparseable (survey missing codes such as 999).
pub const MAX_PLAUSIBLE_AGE: u32 = 120;

/// Categorical control variables, plus the continuous mediator used by the
/// simulation engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variable {
    Sex,
    Education,
    Marital,
    LaborStatus,
    Mediator,
}

impl Variable {
    pub const CONTROLS: [Variable; 4] = [
        Variable::Sex,
        Variable::Education,
        Variable::Marital,
        Variable::LaborStatus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Sex => "sex",
            Variable::Education => "education",
            Variable::Marital => "marital",
            Variable::LaborStatus => "labor_status",
            Variable::Mediator => "mediator",
        }
    }

    pub fn parse(name: &str) -> Option<Variable> {
        match name.trim() {
            "sex" => Some(Variable::Sex),
            "education" => Some(Variable::Education),
            "marital" => Some(Variable::Marital),
            "labor_status" | "labor" => Some(Variable::LaborStatus),
            "mediator" => Some(Variable::Mediator),
            _ => None,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One respondent row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub country: String,
    pub round: u32,
    pub period_year: i32,
    pub age: u32,
    /// Response on the 0..=10 scale for survey data. Simulated records may
    /// carry an unclamped continuous value.
    pub happiness: f64,
    pub weight: f64,
    pub birth_year: i32,
    pub sex: Option<String>,
    pub education: Option<String>,
    pub marital: Option<String>,
    pub labor_status: Option<String>,
    pub mediator: Option<f64>,
}

impl SurveyRecord {
    /// Builds a record with no controls; `birth_year` is derived.
    pub fn new(
        country: impl Into<String>,
        round: u32,
        period_year: i32,
        age: u32,
        happiness: f64,
        weight: f64,
    ) -> Self {
        SurveyRecord {
            country: country.into(),
            round,
            period_year,
            age,
            happiness,
            weight,
            birth_year: period_year - age as i32,
            sex: None,
            education: None,
            marital: None,
            labor_status: None,
            mediator: None,
        }
    }

    pub fn with_control(mut self, variable: Variable, value: impl Into<String>) -> Self {
        let value = Some(value.into());
        match variable {
            Variable::Sex => self.sex = value,
            Variable::Education => self.education = value,
            Variable::Marital => self.marital = value,
            Variable::LaborStatus => self.labor_status = value,
            Variable::Mediator => {
                self.mediator = value.as_deref().and_then(|v| v.parse().ok());
            }
        }
        self
    }

    pub fn category(&self, variable: Variable) -> Option<&str> {
        match variable {
            Variable::Sex => self.sex.as_deref(),
            Variable::Education => self.education.as_deref(),
            Variable::Marital => self.marital.as_deref(),
            Variable::LaborStatus => self.labor_status.as_deref(),
            Variable::Mediator => None,
        }
    }

    pub fn has(&self, variable: Variable) -> bool {
        match variable {
            Variable::Mediator => self.mediator.is_some(),
            v => self.category(v).is_some(),
        }
    }
}

/// Affine survey-wave to calendar-year mapping, `year = base + step * round`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveMapping {
    pub base: i32,
    pub step: i32,
}

impl Default for WaveMapping {
    /// ESS rounds 1..8 map to 2002..2016.
    fn default() -> Self {
        WaveMapping { base: 2000, step: 2 }
    }
}

impl WaveMapping {
    pub fn year(&self, round: u32) -> i32 {
        self.base + self.step * round as i32
    }

    pub fn round(&self, year: i32) -> Option<u32> {
        if self.step == 0 {
            return None;
        }
        let offset = year - self.base;
        if offset % self.step != 0 {
            return None;
        }
        u32::try_from(offset / self.step).ok().filter(|r| *r >= 1)
    }
}

/// Maps logical fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub country: String,
    /// Survey wave column. When absent, `period_year` must be mapped.
    pub round: Option<String>,
    pub period_year: Option<String>,
    pub age: String,
    pub happiness: String,
    pub weight: String,
    pub sex: Option<String>,
    pub education: Option<String>,
    pub marital: Option<String>,
    pub labor_status: Option<String>,
    /// Cell values (after trimming) treated as missing, in addition to the empty cell.
    pub missing: Vec<String>,
    pub waves: WaveMapping,
    /// Raw labor-status level folded into another when the 9-level coding appears.
    pub labor_merge: Option<(String, String)>,
}

impl Default for ColumnMapping {
    /// ESS variable names.
    fn default() -> Self {
        ColumnMapping {
            country: "cntry".into(),
            round: Some("essround".into()),
            period_year: None,
            age: "agea".into(),
            happiness: "happy".into(),
            weight: "dweight".into(),
            sex: Some("gndr".into()),
            education: Some("eisced".into()),
            marital: Some("maritalb".into()),
            labor_status: Some("mnactic".into()),
            missing: vec![
                "NA".into(),
                ".".into(),
                "77".into(),
                "88".into(),
                "99".into(),
                "777".into(),
                "888".into(),
                "999".into(),
            ],
            waves: WaveMapping::default(),
            // community or military service -> other
            labor_merge: Some(("7".into(), "9".into())),
        }
    }
}

impl ColumnMapping {
    pub fn control_column(&self, variable: Variable) -> Option<&str> {
        match variable {
            Variable::Sex => self.sex.as_deref(),
            Variable::Education => self.education.as_deref(),
            Variable::Marital => self.marital.as_deref(),
            Variable::LaborStatus => self.labor_status.as_deref(),
            Variable::Mediator => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    HappinessOutOfRange,
    MissingHappiness,
    NonpositiveWeight,
    UnparseableAge,
    AgeBelowMinimum,
    UnparseablePeriod,
    MissingCountry,
}

impl DropReason {
    pub fn describe(self) -> &'static str {
        match self {
            DropReason::HappinessOutOfRange => "happiness out of range",
            DropReason::MissingHappiness => "missing happiness",
            DropReason::NonpositiveWeight => "nonpositive weight",
            DropReason::UnparseableAge => "unparseable age",
            DropReason::AgeBelowMinimum => "age below 15",
            DropReason::UnparseablePeriod => "unparseable round or year",
            DropReason::MissingCountry => "missing country",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    /// Set when the labor-status merge fired.
    pub labor_levels_merged: Option<(String, String)>,
}

impl LoadReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped.values().sum()
    }

    pub fn dropped_for(&self, reason: DropReason) -> usize {
        self.dropped.get(&reason).copied().unwrap_or(0)
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dropped", self.total_dropped())?;
        let mut first = true;
        for (reason, count) in &self.dropped {
            let sep = if first { ": " } else { ", " };
            first = false;
            if *count == self.total_dropped() && self.dropped.len() == 1 {
                write!(f, "{sep}{}", reason.describe())?;
            } else {
                write!(f, "{sep}{} {}", count, reason.describe())?;
            }
        }
        Ok(())
    }
}

/// Loads and validates survey rows from a CSV file. Row order is preserved.
pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<(Vec<SurveyRecord>, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, mapping)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, mapping: &ColumnMapping) -> Result<(Vec<SurveyRecord>, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |field: &str, column: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| Error::MissingColumn {
                field: field.to_string(),
                column: column.to_string(),
            })
    };

    let country_ix = find("country", &mapping.country)?;
    let round_ix = mapping.round.as_deref().map(|c| find("round", c)).transpose()?;
    let year_ix = mapping
        .period_year
        .as_deref()
        .map(|c| find("period_year", c))
        .transpose()?;
    if round_ix.is_none() && year_ix.is_none() {
        return Err(Error::MissingColumn {
            field: "round or period_year".into(),
            column: "<unmapped>".into(),
        });
    }
    let age_ix = find("age", &mapping.age)?;
    let happy_ix = find("happiness", &mapping.happiness)?;
    let weight_ix = find("weight", &mapping.weight)?;
    let mut control_ix = Vec::new();
    for variable in Variable::CONTROLS {
        if let Some(column) = mapping.control_column(variable) {
            control_ix.push((variable, find(variable.name(), column)?));
        }
    }

    let is_missing = |cell: &str| cell.is_empty() || mapping.missing.iter().any(|m| m == cell);
    let mut report = LoadReport::default();
    let mut records = Vec::new();

    for row in rdr.records() {
        let row = row?;
        report.rows_read += 1;
        let cell = |ix: usize| row.get(ix).unwrap_or("");

        let outcome = (|| -> std::result::Result<SurveyRecord, DropReason> {
            let country = cell(country_ix);
            if is_missing(country) {
                return Err(DropReason::MissingCountry);
            }
            // Happiness range is checked before sentinel handling so that
            // codes like 77/88 count as out of range.
            let happy_raw = cell(happy_ix);
            if happy_raw.is_empty() {
                return Err(DropReason::MissingHappiness);
            }
            let happiness: f64 = match happy_raw.parse() {
                Ok(h) => h,
                Err(_) if is_missing(happy_raw) => return Err(DropReason::MissingHappiness),
                Err(_) => return Err(DropReason::HappinessOutOfRange),
            };
            if !(0.0..=10.0).contains(&happiness) {
                return Err(DropReason::HappinessOutOfRange);
            }
            let weight: f64 = cell(weight_ix).parse().unwrap_or(f64::NAN);
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(DropReason::NonpositiveWeight);
            }
            let age = parse_age(cell(age_ix)).ok_or(DropReason::UnparseableAge)?;
            if age < MIN_AGE {
                return Err(DropReason::AgeBelowMinimum);
            }
            let (round, period_year) = match (round_ix, year_ix) {
                (Some(r), Some(y)) => {
                    let round = parse_positive(cell(r)).ok_or(DropReason::UnparseablePeriod)?;
                    let year: i32 = cell(y).parse().map_err(|_| DropReason::UnparseablePeriod)?;
                    (round, year)
                }
                (Some(r), None) => {
                    let round = parse_positive(cell(r)).ok_or(DropReason::UnparseablePeriod)?;
                    (round, mapping.waves.year(round))
                }
                (None, Some(y)) => {
                    let year: i32 = cell(y).parse().map_err(|_| DropReason::UnparseablePeriod)?;
                    (mapping.waves.round(year).ok_or(DropReason::UnparseablePeriod)?, year)
                }
                (None, None) => unreachable!(),
            };
            let mut record = SurveyRecord::new(country, round, period_year, age, happiness, weight);
            for (variable, ix) in &control_ix {
                let value = cell(*ix);
                if !is_missing(value) {
                    record = record.with_control(*variable, value);
                }
            }
            Ok(record)
        })();

        match outcome {
            Ok(record) => records.push(record),
            Err(reason) => *report.dropped.entry(reason).or_insert(0) += 1,
        }
    }

    if records.is_empty() {
        return Err(Error::NoValidRows {
            rows_read: report.rows_read,
        });
    }
    if let Some((from, into)) = &mapping.labor_merge {
        if merge_labor_levels(&mut records, from, into) {
            report.labor_levels_merged = Some((from.clone(), into.clone()));
        }
    }
    report.rows_kept = records.len();
    Ok((records, report))
}

fn parse_age(cell: &str) -> Option<u32> {
    let age: f64 = cell.parse().ok()?;
    if age.fract() != 0.0 || age < 0.0 || age > MAX_PLAUSIBLE_AGE as f64 {
        return None;
    }
    Some(age as u32)
}

fn parse_positive(cell: &str) -> Option<u32> {
    cell.parse::<u32>().ok().filter(|r| *r >= 1)
}

/// Folds `from` into `into` when the labor-status variable shows the raw
/// 9-level coding. Returns whether the merge happened.
fn merge_labor_levels(records: &mut [SurveyRecord], from: &str, into: &str) -> bool {
    let levels: BTreeSet<&str> = records.iter().filter_map(|r| r.labor_status.as_deref()).collect();
    if levels.len() != 9 || !levels.contains(from) {
        return false;
    }
    for record in records.iter_mut() {
        if record.labor_status.as_deref() == Some(from) {
            record.labor_status = Some(into.to_string());
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub min_age: u32,
    /// Inclusive upper bound. `Some(69)` is the "younger than 70" restriction.
    pub max_age: Option<u32>,
    pub countries: Option<BTreeSet<String>>,
    pub listwise: BTreeSet<Variable>,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            min_age: MIN_AGE,
            max_age: None,
            countries: None,
            listwise: BTreeSet::new(),
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        match self.max_age {
            Some(max) if max < self.min_age => Err(Error::InvalidFilter(format!(
                "min_age {} exceeds max_age {}",
                self.min_age, max
            ))),
            _ => Ok(()),
        }
    }

    pub fn with_max_age(mut self, max_age: u32) -> Self {
        self.max_age = Some(max_age);
        self
    }

    pub fn with_country(mut self, country: impl Into<String>) -> Self {
        self.countries.get_or_insert_with(BTreeSet::new).insert(country.into());
        self
    }

    pub fn with_listwise(mut self, variables: impl IntoIterator<Item = Variable>) -> Self {
        self.listwise.extend(variables);
        self
    }

    fn keeps(&self, r: &SurveyRecord) -> bool {
        self.keeps_age(r) && self.keeps_country(r) && self.listwise.iter().all(|v| r.has(*v))
    }

    fn keeps_age(&self, r: &SurveyRecord) -> bool {
        r.age >= self.min_age && self.max_age.map_or(true, |max| r.age <= max)
    }

    fn keeps_country(&self, r: &SurveyRecord) -> bool {
        self.countries.as_ref().map_or(true, |set| set.contains(&r.country))
    }
}

/// Filtered records plus deletion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub records: Vec<SurveyRecord>,
    pub dropped_age: usize,
    pub dropped_country: usize,
    /// Records removed by listwise deletion, attributed to the first missing
    /// variable in declaration order.
    pub dropped_listwise: BTreeMap<Variable, usize>,
}

/// Applies age bounds, the country set and listwise deletion. An empty
/// result is an error since no model can be fitted on it.
pub fn apply_filter(records: &[SurveyRecord], spec: &FilterSpec) -> Result<Filtered> {
    spec.validate()?;
    let mut out = Filtered {
        records: Vec::with_capacity(records.len()),
        dropped_age: 0,
        dropped_country: 0,
        dropped_listwise: BTreeMap::new(),
    };
    for r in records {
        if !spec.keeps_country(r) {
            out.dropped_country += 1;
        } else if !spec.keeps_age(r) {
            out.dropped_age += 1;
        } else if let Some(v) = spec.listwise.iter().find(|v| !r.has(**v)) {
            *out.dropped_listwise.entry(*v).or_insert(0) += 1;
        } else {
            debug_assert!(spec.keeps(r));
            out.records.push(r.clone());
        }
    }
    if out.records.is_empty() {
        let context = match &spec.countries {
            Some(set) => format!("countries {}", set.iter().cloned().collect::<Vec<_>>().join(",")),
            None => String::new(),
        };
        return Err(Error::EmptySample { context });
    }
    Ok(out)
}

/// Inclusive birth-year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CohortBin {
    pub start: i32,
    pub end: i32,
}

impl CohortBin {
    pub fn label(&self) -> String {
        format!("{}-{}", self.start, self.end)
    }

    pub fn contains(&self, birth_year: i32) -> bool {
        (self.start..=self.end).contains(&birth_year)
    }
}

impl fmt::Display for CohortBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Floor-anchored birth-year bin of the given width (`width >= 1`).
pub fn cohort_bin(birth_year: i32, width: u32) -> CohortBin {
    assert!(width >= 1, "cohort width must be at least 1");
    let width = width as i32;
    let start = birth_year.div_euclid(width) * width;
    CohortBin {
        start,
        end: start + width - 1,
    }
}

/// Distinct countries in first-appearance order.
pub fn countries(records: &[SurveyRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.country.as_str()))
        .map(|r| r.country.clone())
        .collect()
}

pub fn distinct_rounds(records: &[SurveyRecord]) -> usize {
    records.iter().map(|r| r.round).collect::<BTreeSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping() -> ColumnMapping {
        ColumnMapping {
            country: "country".into(),
            round: Some("round".into()),
            period_year: None,
            age: "age".into(),
            happiness: "happiness".into(),
            weight: "weight".into(),
            sex: Some("sex".into()),
            education: None,
            marital: Some("marital".into()),
            labor_status: None,
            missing: vec!["NA".into()],
            waves: WaveMapping::default(),
            labor_merge: None,
        }
    }

    fn load(text: &str) -> Result<(Vec<SurveyRecord>, LoadReport)> {
        read_csv(text.as_bytes(), &mapping())
    }

    #[test]
    fn out_of_range_happiness_is_dropped() {
        let csv = "country,round,age,happiness,weight,sex,marital\n\
                   DE,1,30,5,1.0,1,1\n\
                   DE,1,40,11,1.0,2,1\n\
                   DE,2,50,7,1.0,1,2\n";
        let (records, report) = load(csv).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(report.dropped_for(DropReason::HappinessOutOfRange), 1);
        assert_eq!(report.to_string(), "1 dropped: happiness out of range");
        assert_eq!(records[0].happiness, 5.0);
        assert_eq!(records[1].happiness, 7.0);
    }

    #[test]
    fn zero_weight_is_dropped() {
        let csv = "country,round,age,happiness,weight,sex,marital\n\
                   DE,1,30,5,0,1,1\n\
                   DE,1,40,6,2.5,2,1\n";
        let (records, report) = load(csv).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report.to_string(), "1 dropped: nonpositive weight");
    }

    #[test]
    fn birth_year_is_period_minus_age() {
        let csv = "country,round,age,happiness,weight,sex,marital\n\
                   DE,1,15,5,1,1,1\n\
                   DE,2,30,6,1,2,1\n\
                   DE,3,45,7,1,1,2\n\
                   DE,4,60,8,1,2,2\n\
                   DE,5,75,9,1,1,3\n\
                   DE,6,90,4,1,2,3\n\
                   DE,7,21,3,1,1,4\n\
                   DE,8,33,2,1,2,4\n\
                   DE,1,69,1,1,1,5\n\
                   DE,8,70,0,1,2,6\n";
        let (records, report) = load(csv).unwrap();
        assert_eq!(records.len(), 10);
        assert_eq!(report.total_dropped(), 0);
        // Hand-computed: year = 2000 + 2 * round, birth = year - age.
        let expected = [1987, 1974, 1961, 1948, 1935, 1922, 1993, 1983, 1933, 1946];
        let got: Vec<i32> = records.iter().map(|r| r.birth_year).collect();
        assert_eq!(got, expected);
        assert!(records.iter().all(|r| r.birth_year == r.period_year - r.age as i32));
    }

    #[test]
    fn missing_column_and_empty_file_are_errors() {
        let err = load("country,round,age,happiness\nDE,1,30,5\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn { .. }));
        let err = load("country,round,age,happiness,weight,sex,marital\nDE,1,30,12,1,1,1\n").unwrap_err();
        assert!(matches!(err, Error::NoValidRows { rows_read: 1 }));
        let err = load_csv("/definitely/not/here.csv", &mapping()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn sentinel_controls_are_missing() {
        let csv = "country,round,age,happiness,weight,sex,marital\n\
                   DE,1,30,5,1,NA,\n";
        let (records, _) = load(csv).unwrap();
        assert_eq!(records[0].sex, None);
        assert_eq!(records[0].marital, None);
    }

    #[test]
    fn year_only_mapping_derives_round() {
        let mut m = mapping();
        m.round = None;
        m.period_year = Some("year".into());
        let csv = "country,year,age,happiness,weight,sex,marital\nDE,2016,30,5,1,1,1\nDE,2003,30,5,1,1,1\n";
        let (records, report) = read_csv(csv.as_bytes(), &m).unwrap();
        assert_eq!(records[0].round, 8);
        assert_eq!(report.dropped_for(DropReason::UnparseablePeriod), 1);
    }

    #[test]
    fn nine_level_labor_coding_is_condensed() {
        let mut m = mapping();
        m.labor_status = Some("labor".into());
        m.labor_merge = Some(("7".into(), "9".into()));
        let mut csv = String::from("country,round,age,happiness,weight,sex,marital,labor\n");
        for level in 1..=9 {
            csv.push_str(&format!("DE,1,30,5,1,1,1,{level}\n"));
        }
        let (records, report) = read_csv(csv.as_bytes(), &m).unwrap();
        let levels: BTreeSet<_> = records.iter().filter_map(|r| r.labor_status.clone()).collect();
        assert_eq!(levels.len(), 8);
        assert!(!levels.contains("7"));
        assert_eq!(report.labor_levels_merged, Some(("7".into(), "9".into())));
    }

    fn aged(ages: &[u32]) -> Vec<SurveyRecord> {
        ages.iter().map(|a| SurveyRecord::new("DE", 1, 2002, *a, 5.0, 1.0)).collect()
    }

    #[test]
    fn under_seventy_keeps_69() {
        let spec = FilterSpec::default().with_max_age(69);
        let out = apply_filter(&aged(&[68, 69, 70, 71]), &spec).unwrap();
        let ages: Vec<u32> = out.records.iter().map(|r| r.age).collect();
        assert_eq!(ages, vec![68, 69]);
        assert_eq!(out.dropped_age, 2);
    }

    #[test]
    fn no_bounds_is_identity() {
        let records = aged(&[15, 40, 99]);
        let out = apply_filter(&records, &FilterSpec::default()).unwrap();
        assert_eq!(out.records, records);
    }

    #[test]
    fn listwise_drops_missing_marital() {
        let mut records = aged(&[30, 40]);
        records[0] = records[0].clone().with_control(Variable::Marital, "1");
        let spec = FilterSpec::default().with_listwise([Variable::Marital]);
        let out = apply_filter(&records, &spec).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.dropped_listwise[&Variable::Marital], 1);
    }

    #[test]
    fn empty_result_is_distinct_error() {
        let spec = FilterSpec::default().with_country("XX");
        assert!(matches!(
            apply_filter(&aged(&[30]), &spec),
            Err(Error::EmptySample { .. })
        ));
        let bad = FilterSpec {
            min_age: 50,
            max_age: Some(40),
            ..FilterSpec::default()
        };
        assert!(matches!(apply_filter(&aged(&[30]), &bad), Err(Error::InvalidFilter(_))));
    }

    #[test]
    fn cohort_bins() {
        // Enumerate 1970..=1974: all land in the same bin.
        for y in 1970..=1974 {
            assert_eq!(cohort_bin(y, 5), CohortBin { start: 1970, end: 1974 });
        }
        assert_eq!(cohort_bin(1972, 5).label(), "1970-1974");
        assert_eq!(cohort_bin(1970, 5).label(), "1970-1974");
        assert_eq!(cohort_bin(1969, 1).label(), "1969-1969");
        assert_eq!(cohort_bin(1969, 5).label(), "1965-1969");
        assert_eq!(cohort_bin(-3, 5).label(), "-5--1");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn record_strategy() -> impl Strategy<Value = SurveyRecord> {
            (15u32..100, 1u32..9, prop::bool::ANY, prop::sample::select(vec!["AT", "DE", "NO"])).prop_map(
                |(age, round, has_marital, country)| {
                    let r = SurveyRecord::new(country, round, 2000 + 2 * round as i32, age, 5.0, 1.0);
                    if has_marital {
                        r.with_control(Variable::Marital, "1")
                    } else {
                        r
                    }
                },
            )
        }

        proptest! {
            #[test]
            fn filter_is_idempotent(
                records in prop::collection::vec(record_strategy(), 1..60),
                max_age in prop::option::of(20u32..90),
                listwise in prop::bool::ANY,
            ) {
                let mut spec = FilterSpec { max_age, ..FilterSpec::default() }.with_country("DE").with_country("NO");
                if listwise {
                    spec = spec.with_listwise([Variable::Marital]);
                }
                if let Ok(once) = apply_filter(&records, &spec) {
                    let twice = apply_filter(&once.records, &spec).unwrap();
                    prop_assert_eq!(&twice.records, &once.records);
                    // order preserved: output is a subsequence of the input
                    let mut it = records.iter();
                    for r in &once.records {
                        prop_assert!(it.any(|x| x == r));
                    }
                }
            }

            #[test]
            fn cohort_bins_partition(year in -5000i32..5000, width in 1u32..30) {
                let bin = cohort_bin(year, width);
                prop_assert!(bin.contains(year));
                prop_assert_eq!(bin.end - bin.start + 1, width as i32);
                let next = cohort_bin(bin.end + 1, width);
                prop_assert_eq!(next.start, bin.end + 1);
                let prev = cohort_bin(bin.start - 1, width);
                prop_assert_eq!(prev.end, bin.start - 1);
            }
        }
    }
}
