//! Bundled published values for the German model comparison, the
//! per-country quadratic table, the coarse age-range table and the
//! adjusted-level table.
//!
//! These are transcribed numbers, used for detector and metric regression
//! tests. They are never tool output. Printed strings are kept alongside the
//! parsed values so rounding-sensitive checks can compare text exactly.

use serde::Deserialize;

use crate::design::AgeScheme;
use crate::error::{Error, Result};
use crate::models::AgeCurve;
use crate::shape::{CoefT, QuadEvidence, RangeEvidence, Rule, ShapeVerdict};

pub const TABLE1_CSV: &str = include_str!("../fixtures/table1.csv");
pub const TABLE2_CSV: &str = include_str!("../fixtures/table2.csv");
pub const TABLE3_CSV: &str = include_str!("../fixtures/table3.csv");
pub const TABLE4_CSV: &str = include_str!("../fixtures/table4.csv");

/// Countries whose adjusted curves are judged not u-shaped and are left out
/// of the average depth.
pub const DEPTH_EXCLUDED: [&str; 9] = [
    "Turkey",
    "Slovakia",
    "Portugal",
    "Czech Rep.",
    "Bulgaria",
    "Estonia",
    "Finland",
    "Ireland",
    "Italy",
];

/// Published average depth over the remaining countries.
pub const PUBLISHED_MEAN_DEPTH: f64 = 0.44;

/// Published count of quadratic u-shapes at |t| > 1.5.
pub const PUBLISHED_QUAD_USHAPES: usize = 23;

/// Countries published as u-shaped under the age-range rule at |t| > 1.
pub const PUBLISHED_RANGE_USHAPES: [&str; 7] = [
    "Austria",
    "Switzerland",
    "Luxembourg",
    "Norway",
    "Poland",
    "Portugal",
    "Russia",
];

/// Differences between computed verdicts on a bundled table and the
/// published classification of the same table.
pub fn published_discrepancies(verdicts: &[ShapeVerdict]) -> Vec<String> {
    let Some(rule) = verdicts.first().map(|v| v.rule) else {
        return Vec::new();
    };
    let detail = |v: &ShapeVerdict| {
        v.evidence
            .iter()
            .filter(|(n, _)| n != "threshold" && n != "rise_epsilon")
            .map(|(n, x)| {
                let v = format!("{x:.4}");
                format!("{n} = {}", v.trim_end_matches('0').trim_end_matches('.'))
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut out = Vec::new();
    match rule {
        Rule::QuadT15 => {
            let k = verdicts.iter().filter(|v| v.is_ushape).count();
            if k != PUBLISHED_QUAD_USHAPES {
                out.push(format!("{k} u-shapes computed; {PUBLISHED_QUAD_USHAPES} published"));
            }
        }
        Rule::RangeT1 => {
            for v in verdicts {
                let published = PUBLISHED_RANGE_USHAPES.contains(&v.country.as_str());
                if published != v.is_ushape {
                    let (was, now) = if published { ("", "not ") } else { ("not ", "") };
                    out.push(format!(
                        "{}: published as {was}u-shaped but {now}u-shaped under the literal rule ({})",
                        v.country,
                        detail(v)
                    ));
                }
            }
        }
        Rule::CurveHeuristic => {
            for v in verdicts {
                let published = !DEPTH_EXCLUDED.contains(&v.country.as_str());
                if published != v.is_ushape {
                    let (was, now) = if published { ("", "not ") } else { ("not ", "") };
                    out.push(format!(
                        "{}: published as {was}u-shaped but {now}u-shaped under the curve heuristic ({})",
                        v.country,
                        detail(v)
                    ));
                }
            }
        }
    }
    out
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, name: &str) -> Result<Vec<T>> {
    reader(text)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Fixture(format!("{name}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GermanModelRow {
    pub model: String,
    pub age: f64,
    pub t_age: f64,
    pub age_sq: f64,
    pub t_age_sq: f64,
    pub constant: Option<f64>,
    pub controls: String,
    pub includes_70plus: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct QuadRow {
    pub country: String,
    pub age: f64,
    pub t_age: f64,
    pub age_sq: f64,
    pub t_age_sq: f64,
    pub reduction_age: f64,
    pub reduction_age_sq: f64,
}

impl QuadRow {
    pub fn evidence(&self) -> QuadEvidence {
        QuadEvidence {
            age: CoefT::new(self.age, self.t_age),
            age_sq: CoefT::new(self.age_sq, self.t_age_sq),
        }
    }

    /// Baseline coefficient implied by a printed reduction:
    /// `new / (1 − percent/100)`.
    pub fn implied_baseline(new: f64, percent: f64) -> f64 {
        new / (1.0 - percent / 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RangeRow {
    pub country: String,
    pub b_15_34: f64,
    pub t_15_34: f64,
    pub b_60_74: f64,
    pub t_60_74: f64,
    pub b_75: f64,
    pub t_75: f64,
}

impl RangeRow {
    pub fn evidence(&self) -> RangeEvidence {
        RangeEvidence {
            young: CoefT::new(self.b_15_34, self.t_15_34),
            old: CoefT::new(self.b_60_74, self.t_60_74),
            oldest: Some(CoefT::new(self.b_75, self.t_75)),
        }
    }
}

/// One adjusted-level row with its printed summary columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub country: String,
    pub levels: Vec<f64>,
    pub printed_max: String,
    pub printed_min: String,
    pub printed_difference: String,
}

impl LevelRow {
    pub fn curve(&self) -> AgeCurve {
        AgeCurve::from_levels(self.country.clone(), AgeScheme::Fine, &self.levels)
    }
}

pub fn german_models() -> Result<Vec<GermanModelRow>> {
    parse(TABLE1_CSV, "table1")
}

pub fn quadratic_table() -> Result<Vec<QuadRow>> {
    parse(TABLE2_CSV, "table2")
}

pub fn range_table() -> Result<Vec<RangeRow>> {
    parse(TABLE3_CSV, "table3")
}

pub fn level_table() -> Result<Vec<LevelRow>> {
    parse_level_table(TABLE4_CSV)
}

/// Parses an adjusted-level table (country, eight bins, max, min, difference).
pub fn parse_level_table(text: &str) -> Result<Vec<LevelRow>> {
    let mut rdr = reader(text);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Fixture(e.to_string()))?;
        if row.len() != 12 {
            return Err(Error::Fixture(format!("expected 12 columns, got {}", row.len())));
        }
        let levels = (1..9)
            .map(|i| {
                row[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Fixture(format!("{}: {e}", &row[0])))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(LevelRow {
            country: row[0].to_string(),
            levels,
            printed_max: row[9].to_string(),
            printed_min: row[10].to_string(),
            printed_difference: row[11].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        assert_eq!(german_models().unwrap().len(), 4);
        assert_eq!(quadratic_table().unwrap().len(), 30);
        assert_eq!(range_table().unwrap().len(), 32);
        let levels = level_table().unwrap();
        assert_eq!(levels.len(), 30);
        assert!(levels.iter().all(|r| r.levels.len() == 8));
        let de = levels.iter().find(|r| r.country == "Germany").unwrap();
        assert_eq!(de.printed_difference, "0.27");
    }

    #[test]
    fn luxembourg_is_the_only_range_discrepancy() {
        let verdicts: Vec<_> = range_table()
            .unwrap()
            .iter()
            .map(|r| crate::shape::detect_ranges(&r.country, &r.evidence(), 1.0))
            .collect();
        let notes = published_discrepancies(&verdicts);
        assert_eq!(notes.len(), 1, "{notes:?}");
        assert!(notes[0].starts_with("Luxembourg: published as u-shaped"));
        assert!(notes[0].contains("b_60_74 = -0.03"));
    }

    #[test]
    fn implied_baseline_inverts_reduction() {
        // Austria age_sq: -0.000004 after a printed 100.8% reduction.
        let old = QuadRow::implied_baseline(-0.000004, 100.8);
        assert!((old - 0.0005).abs() < 1e-12);
    }
}
