//! CSV and text-table emitters, with readers for every CSV written.
//!
//! CSVs carry full precision; text tables round at presentation only.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AgeCurve, CurvePoint};
use crate::shape::{ReductionEntry, Rule, ShapeVerdict};
use crate::simulate::SimResult;
use crate::wls::FitResult;

/// Decimal places used for quadratic coefficients in text tables.
pub const QUADRATIC_DECIMALS: usize = 5;
/// Decimal places used for age-range contrasts in text tables.
pub const RANGE_DECIMALS: usize = 2;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().from_reader(r)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Csv(e.into()))
}

fn parse_f64(cell: &str, what: &str) -> Result<f64> {
    cell.trim()
        .parse()
        .map_err(|_| Error::Fixture(format!("{what}: cannot parse `{cell}` as a number")))
}

/// One coefficient of one country's fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub country: String,
    pub coefficient: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_abs: f64,
    pub n: usize,
    pub rank: usize,
}

pub fn fit_rows(country: &str, fit: &FitResult) -> Vec<FitRow> {
    fit.labels
        .iter()
        .enumerate()
        .map(|(i, label)| FitRow {
            country: country.to_string(),
            coefficient: label.clone(),
            estimate: fit.coefficients[i],
            std_error: fit.std_errors[i],
            t_abs: fit.t_stats[i],
            n: fit.n_obs,
            rank: fit.rank,
        })
        .collect()
}

pub fn write_fit_csv<W: Write>(w: W, rows: &[FitRow]) -> Result<()> {
    let mut w = writer(w);
    if rows.is_empty() {
        w.write_record(["country", "coefficient", "estimate", "std_error", "t_abs", "n", "rank"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    finish(w)
}

pub fn read_fit_csv<R: Read>(r: R) -> Result<Vec<FitRow>> {
    Ok(reader(r).deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Aligned text table; estimates and standard errors use `decimals`.
pub fn fit_text_table(rows: &[FitRow], decimals: usize) -> String {
    let header = ["country", "coefficient", "estimate", "std_error", "t_abs", "n", "rank"]
        .map(String::from)
        .to_vec();
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.country.clone(),
                r.coefficient.clone(),
                format!("{:.*}", decimals, r.estimate),
                format!("{:.*}", decimals, r.std_error),
                format!("{:.2}", r.t_abs),
                r.n.to_string(),
                r.rank.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    text_table(&header, &body)
}

/// Left-aligned first two columns, right-aligned rest.
pub fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub bin_label: String,
    pub adjusted_mean: f64,
}

pub fn write_curve_csv<W: Write>(w: W, curve: &AgeCurve) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["bin_label", "adjusted_mean"])?;
    for p in &curve.points {
        w.write_record([p.label.clone(), p.level.to_string()])?;
    }
    finish(w)
}

pub fn read_curve_csv<R: Read>(r: R) -> Result<Vec<CurveRow>> {
    Ok(reader(r).deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Combined table: country, one column per bin label, max, min, difference.
/// Bins a country lacks are left empty.
pub fn write_curve_table<W: Write>(w: W, curves: &[AgeCurve]) -> Result<()> {
    let mut labels: Vec<String> = Vec::new();
    for c in curves {
        for p in &c.points {
            if !labels.contains(&p.label) {
                labels.push(p.label.clone());
            }
        }
    }
    let mut w = writer(w);
    let mut header = vec!["country".to_string()];
    header.extend(labels.iter().cloned());
    header.extend(["max", "min", "difference"].map(String::from));
    w.write_record(&header)?;
    for c in curves {
        let mut row = vec![c.country.clone()];
        row.extend(labels.iter().map(|l| c.level(l).map(|v| v.to_string()).unwrap_or_default()));
        row.extend([c.max, c.min, c.depth].map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    finish(w)
}

/// A combined-table row as read back.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTableRow {
    pub country: String,
    pub levels: Vec<(String, f64)>,
    pub max: f64,
    pub min: f64,
    pub difference: f64,
}

impl CurveTableRow {
    /// Rebuilds the curve; midpoints are not stored and are left at 0.
    pub fn curve(&self) -> AgeCurve {
        let points = self
            .levels
            .iter()
            .map(|(label, level)| CurvePoint {
                label: label.clone(),
                midpoint: 0.0,
                level: *level,
            })
            .collect();
        AgeCurve::new(self.country.clone(), points)
    }
}

pub fn read_curve_table<R: Read>(r: R) -> Result<Vec<CurveTableRow>> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    let k = header.len();
    if k < 4 || &header[0] != "country" || &header[k - 1] != "difference" {
        return Err(Error::Fixture("curve table header must run country, bins…, max, min, difference".into()));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut levels = Vec::new();
        for i in 1..k - 3 {
            if !row[i].trim().is_empty() {
                levels.push((header[i].to_string(), parse_f64(&row[i], &header[i])?));
            }
        }
        out.push(CurveTableRow {
            country: row[0].to_string(),
            levels,
            max: parse_f64(&row[k - 3], "max")?,
            min: parse_f64(&row[k - 2], "min")?,
            difference: parse_f64(&row[k - 1], "difference")?,
        });
    }
    Ok(out)
}

/// Verdicts of one rule: country, rule, u_shape, evidence columns, notes.
pub fn write_verdict_csv<W: Write>(w: W, verdicts: &[ShapeVerdict]) -> Result<()> {
    let mut names: Vec<String> = Vec::new();
    for v in verdicts {
        for (n, _) in &v.evidence {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    let mut w = writer(w);
    let mut header = vec!["country".to_string(), "rule".into(), "u_shape".into()];
    header.extend(names.iter().cloned());
    header.push("notes".into());
    w.write_record(&header)?;
    for v in verdicts {
        let mut row = vec![v.country.clone(), v.rule.name().to_string(), v.is_ushape.to_string()];
        row.extend(names.iter().map(|n| v.get(n).map(|x| x.to_string()).unwrap_or_default()));
        row.push(v.notes.join("; "));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn read_verdict_csv<R: Read>(r: R) -> Result<Vec<ShapeVerdict>> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    let k = header.len();
    if k < 4 || &header[0] != "country" || &header[k - 1] != "notes" {
        return Err(Error::Fixture("verdict header must run country, rule, u_shape, evidence…, notes".into()));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let rule = Rule::parse(&row[1]).ok_or_else(|| Error::Fixture(format!("unknown rule `{}`", &row[1])))?;
        let is_ushape = match &row[2] {
            "true" => true,
            "false" => false,
            other => return Err(Error::Fixture(format!("u_shape must be true or false, got `{other}`"))),
        };
        let mut evidence = Vec::new();
        for i in 3..k - 1 {
            if !row[i].trim().is_empty() {
                evidence.push((header[i].to_string(), parse_f64(&row[i], &header[i])?));
            }
        }
        let notes = if row[k - 1].is_empty() {
            Vec::new()
        } else {
            row[k - 1].split("; ").map(String::from).collect()
        };
        out.push(ShapeVerdict {
            country: row[0].to_string(),
            rule,
            is_ushape,
            evidence,
            notes,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub country: String,
    pub coefficient: String,
    pub old: f64,
    pub new: f64,
    /// Empty when the baseline is zero.
    pub percent: Option<f64>,
    pub sign_flipped: bool,
}

impl ReductionRow {
    pub fn new(country: &str, entry: &ReductionEntry) -> Self {
        ReductionRow {
            country: country.to_string(),
            coefficient: entry.label.clone(),
            old: entry.old,
            new: entry.new,
            percent: entry.percent,
            sign_flipped: entry.sign_flipped,
        }
    }
}

pub fn write_reduction_csv<W: Write>(w: W, rows: &[ReductionRow]) -> Result<()> {
    let mut w = writer(w);
    if rows.is_empty() {
        w.write_record(["country", "coefficient", "old", "new", "percent", "sign_flipped"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    finish(w)
}

pub fn read_reduction_csv<R: Read>(r: R) -> Result<Vec<ReductionRow>> {
    Ok(reader(r).deserialize().collect::<std::result::Result<_, _>>()?)
}

/// One line of a simulation summary: either a spec summary or a hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub experiment: String,
    /// `spec`, `target` or `hypothesis`.
    pub kind: String,
    pub name: String,
    pub reps: usize,
    pub n: usize,
    pub master_seed: u64,
    pub value: f64,
    pub sd: Option<f64>,
    pub mc_se: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
}

pub fn sim_rows(result: &SimResult) -> Vec<SimRow> {
    let base = |kind: &str, name: &str, value: f64| SimRow {
        experiment: result.experiment.clone(),
        kind: kind.into(),
        name: name.into(),
        reps: result.reps,
        n: result.n,
        master_seed: result.master_seed,
        value,
        sd: None,
        mc_se: None,
        target: None,
        tolerance: None,
        passed: None,
    };
    let mut rows = Vec::new();
    for s in &result.specs {
        rows.push(SimRow {
            sd: Some(s.sd),
            mc_se: Some(s.mc_se),
            ..base("spec", &s.label, s.mean)
        });
    }
    for (name, value) in &result.targets {
        rows.push(base("target", name, *value));
    }
    for h in &result.hypotheses {
        rows.push(SimRow {
            target: Some(h.target),
            tolerance: Some(h.tolerance),
            passed: Some(h.passed),
            ..base("hypothesis", &h.name, h.statistic)
        });
    }
    rows
}

pub fn write_sim_csv<W: Write>(w: W, rows: &[SimRow]) -> Result<()> {
    let mut w = writer(w);
    for row in rows {
        w.serialize(row)?;
    }
    finish(w)
}

pub fn read_sim_csv<R: Read>(r: R) -> Result<Vec<SimRow>> {
    Ok(reader(r).deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Per-replicate estimates: experiment, replicate, seed, spec, estimate.
pub fn write_replicates_csv<W: Write>(w: W, result: &SimResult) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["experiment", "replicate", "seed", "spec", "estimate"])?;
    for (i, seed) in result.seeds.iter().enumerate() {
        for s in &result.specs {
            w.write_record([
                result.experiment.clone(),
                i.to_string(),
                seed.to_string(),
                s.label.clone(),
                s.estimates[i].to_string(),
            ])?;
        }
    }
    finish(w)
}

/// Human-readable pass/fail lines.
pub fn sim_summary(result: &SimResult) -> String {
    let mut out = format!(
        "experiment {}: {} replicates of n = {}, master seed {}\n",
        result.experiment, result.reps, result.n, result.master_seed
    );
    for s in &result.specs {
        out.push_str(&format!("  {:<28} mean {:>10.5}  sd {:>9.5}  mc_se {:>9.5}\n", s.label, s.mean, s.sd, s.mc_se));
    }
    for (name, v) in &result.targets {
        out.push_str(&format!("  target {name} = {v:.5}\n"));
    }
    for h in &result.hypotheses {
        let verdict = if h.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("  {verdict} {}: {} ({:.5})\n", h.name, h.description, h.statistic));
    }
    out
}
