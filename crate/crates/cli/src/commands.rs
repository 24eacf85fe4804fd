use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use agecurve::chart::{line_chart, ChartOptions};
use agecurve::config::Format;
use agecurve::dataset::{SurveyRecord, Variable};
use agecurve::design::AgeScheme;
use agecurve::fixtures::{self, DEPTH_EXCLUDED};
use agecurve::models::{batch_curves, batch_fit, AgeCurve, BatchRow, CountryFit, ModelSpec};
use agecurve::output::{self, FitRow, ReductionRow, QUADRATIC_DECIMALS, RANGE_DECIMALS};
use agecurve::shape::{
    classify_curve, depth, detect_quad, detect_ranges, reduction, summary_line, CoefT, CurveRule, QuadEvidence,
    RangeEvidence, ReductionEntry, Rule, ShapeVerdict, QUAD_THRESHOLD, RANGE_THRESHOLD,
};
use agecurve::simulate::{self, DgpConfig, SimResult};
use anyhow::{anyhow, bail, Context as _};

use crate::context::{file_stem, Context, Sink};
use crate::{ExperimentArg, Outcome, SchemeArg, TableSpec};

const DEFAULT_REPS: usize = 200;

/// Splits batch rows into fits and recorded failures.
fn collect(rows: Vec<BatchRow<CountryFit>>, what: &str, outcome: &mut Outcome) -> Vec<CountryFit> {
    let mut fits = Vec::new();
    for row in rows {
        match row.result {
            Ok(fit) => {
                for w in &fit.warnings {
                    log::warn!("{what}: {w}");
                }
                fits.push(fit);
            }
            Err(e) => outcome.fail(format!("{what} {}: {e}", row.country)),
        }
    }
    fits
}

fn write_fits(ctx: &Context, sink: &Sink, stem: &str, fits: &[CountryFit], decimals: usize) -> anyhow::Result<()> {
    let rows: Vec<FitRow> = fits.iter().flat_map(|f| output::fit_rows(&f.country, &f.fit)).collect();
    if ctx.wants(Format::Csv) {
        sink.write_with(&format!("{stem}.csv"), |w| output::write_fit_csv(w, &rows))?;
    }
    if ctx.wants(Format::Text) {
        let text = output::fit_text_table(&rows, decimals);
        sink.write(&format!("{stem}.txt"), &text)?;
        print!("{text}");
    }
    Ok(())
}

fn write_reductions(ctx: &Context, sink: &Sink, stem: &str, rows: &[ReductionRow]) -> anyhow::Result<()> {
    if ctx.wants(Format::Csv) {
        sink.write_with(&format!("{stem}.csv"), |w| output::write_reduction_csv(w, rows))?;
    }
    if ctx.wants(Format::Text) {
        let header = ["country", "coefficient", "old", "new", "reduction_pct", "sign_flipped"].map(String::from);
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let entry = ReductionEntry::new(&r.coefficient, r.old, r.new);
                vec![
                    r.country.clone(),
                    r.coefficient.clone(),
                    format!("{:.5}", r.old),
                    format!("{:.5}", r.new),
                    entry.formatted(),
                    r.sign_flipped.to_string(),
                ]
            })
            .collect();
        let text = output::text_table(&header, &body);
        sink.write(&format!("{stem}.txt"), &text)?;
        print!("{text}");
    }
    Ok(())
}

/// Reductions of age and age_sq from `baseline` to `target`, matched by country.
fn reductions(baseline: &[CountryFit], target: &[CountryFit], outcome: &mut Outcome) -> Vec<ReductionRow> {
    let mut rows = Vec::new();
    for t in target {
        let Some(b) = baseline.iter().find(|b| b.country == t.country) else {
            continue;
        };
        match reduction(&b.fit, &t.fit, &["age", "age_sq"]) {
            Ok(report) => rows.extend(report.entries.iter().map(|e| ReductionRow::new(&t.country, e))),
            Err(e) => outcome.fail(format!("reduction {}: {e}", t.country)),
        }
    }
    rows
}

fn fit_table(
    ctx: &Context,
    sink: &Sink,
    records: &[SurveyRecord],
    countries: &[String],
    table: TableSpec,
    outcome: &mut Outcome,
) -> anyhow::Result<Vec<CountryFit>> {
    let run = |spec: &ModelSpec, outcome: &mut Outcome| {
        collect(batch_fit(records, spec, countries, &ctx.codebook), &spec.name, outcome)
    };
    match table {
        TableSpec::Table1 => {
            let mut with_sex = ModelSpec::no_controls_capped().with_controls(&[Variable::Sex]);
            with_sex.name = "model_3_sex".into();
            let models = [
                ("model_2", ModelSpec::controls_capped()),
                ("model_3", ModelSpec::no_controls_capped()),
                ("model_3_sex", with_sex),
                ("model_4", ModelSpec::no_controls_all_ages()),
            ];
            let mut all = Vec::new();
            for (name, spec) in models {
                let fits = run(&spec, outcome);
                write_fits(ctx, sink, &format!("fit_table1_{name}"), &fits, QUADRATIC_DECIMALS)?;
                all.push(fits);
            }
            let rows = reductions(&all[0], &all[3], outcome);
            write_reductions(ctx, sink, "reductions_table1", &rows)?;
            Ok(all.swap_remove(3))
        }
        TableSpec::Table2 => {
            let fits = run(&ModelSpec::no_controls_all_ages(), outcome);
            write_fits(ctx, sink, "fit_table2", &fits, QUADRATIC_DECIMALS)?;
            let baseline = run(&ModelSpec::controls_capped(), outcome);
            let rows = reductions(&baseline, &fits, outcome);
            write_reductions(ctx, sink, "reductions_table2", &rows)?;
            Ok(fits)
        }
        TableSpec::Table3 => {
            let fits = run(&ModelSpec::coarse_ranges(), outcome);
            write_fits(ctx, sink, "fit_table3", &fits, RANGE_DECIMALS)?;
            Ok(fits)
        }
    }
}

pub fn fit(ctx: &Context, tables: &[TableSpec]) -> anyhow::Result<Outcome> {
    let (records, countries) = ctx.load()?;
    let sink = ctx.sink()?;
    let mut outcome = Outcome::default();
    let mut seen = Vec::new();
    for table in tables {
        if seen.contains(table) {
            continue;
        }
        seen.push(*table);
        let fits = fit_table(ctx, &sink, &records, &countries, *table, &mut outcome)?;
        if fits.is_empty() {
            bail!("no country could be fitted for {table:?}: {}", outcome.failures.join("; "));
        }
    }
    Ok(outcome)
}

fn scheme_of(arg: SchemeArg) -> AgeScheme {
    match arg {
        SchemeArg::Coarse => AgeScheme::Coarse,
        SchemeArg::Fine => AgeScheme::Fine,
    }
}

fn write_curves(ctx: &Context, sink: &Sink, scheme: AgeScheme, curves: &[AgeCurve], autoscale: bool) -> anyhow::Result<()> {
    let name = scheme.name();
    if ctx.wants(Format::Csv) {
        for c in curves {
            sink.write_with(&format!("curve_{name}_{}.csv", file_stem(&c.country)), |w| {
                output::write_curve_csv(w, c)
            })?;
        }
        sink.write_with(&format!("curves_{name}.csv"), |w| output::write_curve_table(w, curves))?;
    }
    if ctx.wants(Format::Text) {
        let labels: Vec<String> = scheme.bins().iter().map(|b| b.label()).collect();
        let mut header = vec!["country".to_string()];
        header.extend(labels.iter().cloned());
        header.extend(["max", "min", "difference"].map(String::from));
        let body: Vec<Vec<String>> = curves
            .iter()
            .map(|c| {
                let mut row = vec![c.country.clone()];
                row.extend(labels.iter().map(|l| c.level(l).map(|v| format!("{v:.2}")).unwrap_or_default()));
                row.extend([c.max, c.min, c.depth].map(|v| format!("{v:.2}")));
                row
            })
            .collect();
        let text = output::text_table(&header, &body);
        sink.write(&format!("curves_{name}.txt"), &text)?;
        print!("{text}");
    }
    if ctx.wants(Format::Svg) {
        let options = ChartOptions {
            autoscale,
            ..ChartOptions::default()
        };
        sink.write(&format!("curves_{name}.svg"), line_chart(curves, &options))?;
    }
    Ok(())
}

fn data_curves(
    ctx: &Context,
    records: &[SurveyRecord],
    countries: &[String],
    scheme: AgeScheme,
    outcome: &mut Outcome,
) -> Vec<AgeCurve> {
    let mut curves = Vec::new();
    for row in batch_curves(records, countries, scheme, &ctx.codebook) {
        match row.result {
            Ok((curve, fit)) => {
                for w in &fit.warnings {
                    log::warn!("curves: {w}");
                }
                if curve.points.len() < scheme.bins().len() {
                    log::warn!("{}: {} of {} bins observed", curve.country, curve.points.len(), scheme.bins().len());
                }
                curves.push(curve);
            }
            Err(e) => outcome.fail(format!("curves {}: {e}", row.country)),
        }
    }
    curves
}

pub fn curves(ctx: &Context, scheme: SchemeArg, autoscale: bool) -> anyhow::Result<Outcome> {
    let (records, countries) = ctx.load()?;
    let sink = ctx.sink()?;
    let scheme = scheme_of(scheme);
    let mut outcome = Outcome::default();
    let curves = data_curves(ctx, &records, &countries, scheme, &mut outcome);
    if curves.is_empty() {
        bail!("no curve could be computed: {}", outcome.failures.join("; "));
    }
    write_curves(ctx, &sink, scheme, &curves, autoscale)?;
    Ok(outcome)
}

fn filter_countries<T>(ctx: &Context, items: Vec<T>, country: impl Fn(&T) -> &str) -> anyhow::Result<Vec<T>> {
    if ctx.countries.is_empty() {
        return Ok(items);
    }
    let kept: Vec<T> = items
        .into_iter()
        .filter(|i| ctx.countries.iter().any(|c| c == country(i)))
        .collect();
    if kept.is_empty() {
        bail!("no valid countries: none of [{}] occur in the table", ctx.countries.join(", "));
    }
    Ok(kept)
}

/// Evidence grouped by country from a fit CSV written by `fit`.
fn fit_csv_evidence(path: &Path) -> anyhow::Result<Vec<(String, BTreeMap<String, CoefT>)>> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let rows = output::read_fit_csv(file)?;
    let mut out: Vec<(String, BTreeMap<String, CoefT>)> = Vec::new();
    for r in rows {
        let coef = CoefT::new(r.estimate, r.t_abs);
        match out.iter_mut().find(|(c, _)| *c == r.country) {
            Some((_, map)) => {
                map.insert(r.coefficient, coef);
            }
            None => out.push((r.country, BTreeMap::from([(r.coefficient, coef)]))),
        }
    }
    Ok(out)
}

fn verdicts_from_source(ctx: &Context, rule: Rule, source: Option<&str>, threshold: f64) -> anyhow::Result<(Vec<ShapeVerdict>, bool)> {
    let curve_rule = CurveRule {
        rise_epsilon: threshold,
        ..CurveRule::default()
    };
    let bundled = |name: &str| -> anyhow::Result<Vec<ShapeVerdict>> {
        Ok(match (name, rule) {
            ("table2", Rule::QuadT15) => filter_countries(ctx, fixtures::quadratic_table()?, |r| &r.country)?
                .iter()
                .map(|r| detect_quad(&r.country, &r.evidence(), threshold))
                .collect(),
            ("table3", Rule::RangeT1) => filter_countries(ctx, fixtures::range_table()?, |r| &r.country)?
                .iter()
                .map(|r| detect_ranges(&r.country, &r.evidence(), threshold))
                .collect(),
            ("table4", Rule::CurveHeuristic) => filter_countries(ctx, fixtures::level_table()?, |r| &r.country)?
                .iter()
                .map(|r| classify_curve(&r.curve(), &curve_rule))
                .collect(),
            _ => bail!(
                "bundled {name} does not carry the evidence for rule {rule} (table2: quad_t15, table3: range_t1, table4: curve_heuristic)"
            ),
        })
    };
    match source {
        Some(name @ ("table2" | "table3" | "table4")) => Ok((bundled(name)?, true)),
        Some(path) => {
            let path = Path::new(path);
            let verdicts = match rule {
                Rule::CurveHeuristic => {
                    let file = std::fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
                    let rows = output::read_curve_table(file)?;
                    filter_countries(ctx, rows, |r| &r.country)?
                        .iter()
                        .map(|r| classify_curve(&r.curve(), &curve_rule))
                        .collect()
                }
                Rule::QuadT15 | Rule::RangeT1 => {
                    let groups = filter_countries(ctx, fit_csv_evidence(path)?, |g| &g.0)?;
                    let mut verdicts = Vec::new();
                    for (country, map) in groups {
                        let get = |l: &str| map.get(l).copied().ok_or_else(|| anyhow!("{country}: fit table has no `{l}` row"));
                        verdicts.push(if rule == Rule::QuadT15 {
                            let ev = QuadEvidence {
                                age: get("age")?,
                                age_sq: get("age_sq")?,
                            };
                            detect_quad(&country, &ev, threshold)
                        } else {
                            let ev = RangeEvidence {
                                young: get("bin:15-34")?,
                                old: get("bin:60-74")?,
                                oldest: get("bin:75+").ok(),
                            };
                            detect_ranges(&country, &ev, threshold)
                        });
                    }
                    verdicts
                }
            };
            Ok((verdicts, false))
        }
        None => {
            let (records, countries) = ctx.load()?;
            let mut outcome = Outcome::default();
            let verdicts = match rule {
                Rule::QuadT15 | Rule::RangeT1 => {
                    let spec = if rule == Rule::QuadT15 {
                        ModelSpec::no_controls_all_ages()
                    } else {
                        ModelSpec::coarse_ranges()
                    };
                    let fits = collect(batch_fit(&records, &spec, &countries, &ctx.codebook), &spec.name, &mut outcome);
                    let mut verdicts = Vec::new();
                    for f in &fits {
                        verdicts.push(if rule == Rule::QuadT15 {
                            detect_quad(&f.country, &QuadEvidence::from_fit(&f.fit)?, threshold)
                        } else {
                            detect_ranges(&f.country, &RangeEvidence::from_fit(&f.fit)?, threshold)
                        });
                    }
                    verdicts
                }
                Rule::CurveHeuristic => data_curves(ctx, &records, &countries, AgeScheme::Fine, &mut outcome)
                    .iter()
                    .map(|c| classify_curve(c, &curve_rule))
                    .collect(),
            };
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!("skipped {f}");
                }
            }
            Ok((verdicts, false))
        }
    }
}

fn default_threshold(rule: Rule) -> f64 {
    match rule {
        Rule::QuadT15 => QUAD_THRESHOLD,
        Rule::RangeT1 => RANGE_THRESHOLD,
        Rule::CurveHeuristic => CurveRule::default().rise_epsilon,
    }
}

/// Runs one rule, writes verdicts and returns the printed lines.
fn run_detect(ctx: &Context, sink: &Sink, rule: Rule, source: Option<&str>, threshold: Option<f64>) -> anyhow::Result<String> {
    let threshold = threshold.unwrap_or(default_threshold(rule));
    let (mut verdicts, bundled) = verdicts_from_source(ctx, rule, source, threshold)?;
    let mut text = String::new();
    if bundled && ctx.countries.is_empty() && threshold == default_threshold(rule) {
        let notes = fixtures::published_discrepancies(&verdicts);
        for note in &notes {
            let country = note.split(':').next().unwrap_or_default();
            if let Some(v) = verdicts.iter_mut().find(|v| v.country == country) {
                v.notes.push(note.clone());
            }
            let _ = writeln!(text, "note: {note}");
        }
    }
    let _ = writeln!(text, "{}", summary_line(&verdicts, rule));
    let positives: Vec<&str> = verdicts.iter().filter(|v| v.is_ushape).map(|v| v.country.as_str()).collect();
    let _ = writeln!(text, "u-shaped: {}", positives.join(", "));
    let stem = format!("verdicts_{}", rule.name());
    if ctx.wants(Format::Csv) {
        sink.write_with(&format!("{stem}.csv"), |w| output::write_verdict_csv(w, &verdicts))?;
    }
    if ctx.wants(Format::Text) {
        sink.write(&format!("{stem}.txt"), &text)?;
    }
    Ok(text)
}

pub fn detect(ctx: &Context, rule: &str, source: Option<&str>, threshold: Option<f64>) -> anyhow::Result<Outcome> {
    let rule = Rule::parse(rule).ok_or_else(|| anyhow!("unknown rule `{rule}` (expected quad_t15, range_t1 or curve_heuristic)"))?;
    let sink = ctx.sink()?;
    print!("{}", run_detect(ctx, &sink, rule, source, threshold)?);
    Ok(Outcome::default())
}

fn experiment_config(ctx: &Context, which: ExperimentArg, n: Option<usize>) -> anyhow::Result<DgpConfig> {
    let mut config = match which {
        ExperimentArg::Mediator => DgpConfig::mediator_default(),
        ExperimentArg::Truncation => DgpConfig::truncation_default(),
        ExperimentArg::Attrition => DgpConfig::attrition_default(),
        ExperimentArg::All => unreachable!("expanded by caller"),
    };
    ctx.config.simulate.apply(&mut config)?;
    if let Some(n) = n {
        config.n = n;
    }
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run_experiment(ctx: &Context, which: ExperimentArg, reps: Option<usize>, n: Option<usize>) -> anyhow::Result<SimResult> {
    let config = experiment_config(ctx, which, n)?;
    let reps = reps.or(ctx.config.simulate.reps).unwrap_or(DEFAULT_REPS);
    if reps < 2 {
        bail!("reps must be at least 2 (got {reps})");
    }
    Ok(match which {
        ExperimentArg::Mediator => simulate::experiment_mediator(&config, reps)?,
        ExperimentArg::Truncation => simulate::experiment_truncation(&config, reps)?,
        ExperimentArg::Attrition => simulate::experiment_attrition(&config, reps)?,
        ExperimentArg::All => unreachable!(),
    })
}

fn write_sim(ctx: &Context, sink: &Sink, result: &SimResult) -> anyhow::Result<String> {
    let stem = format!("sim_{}", result.experiment);
    if ctx.wants(Format::Csv) {
        let rows = output::sim_rows(result);
        sink.write_with(&format!("{stem}.csv"), |w| output::write_sim_csv(w, &rows))?;
        sink.write_with(&format!("{stem}_replicates.csv"), |w| output::write_replicates_csv(w, result))?;
    }
    let summary = output::sim_summary(result);
    if ctx.wants(Format::Text) {
        sink.write(&format!("{stem}.txt"), &summary)?;
    }
    Ok(summary)
}

fn expand(which: ExperimentArg) -> Vec<ExperimentArg> {
    match which {
        ExperimentArg::All => vec![ExperimentArg::Mediator, ExperimentArg::Truncation, ExperimentArg::Attrition],
        one => vec![one],
    }
}

pub fn simulate(ctx: &Context, which: ExperimentArg, reps: Option<usize>, n: Option<usize>) -> anyhow::Result<Outcome> {
    let sink = ctx.sink()?;
    let mut outcome = Outcome::default();
    for exp in expand(which) {
        let result = run_experiment(ctx, exp, reps, n)?;
        print!("{}", write_sim(ctx, &sink, &result)?);
        for h in result.hypotheses.iter().filter(|h| !h.passed) {
            outcome.fail(format!("{}: hypothesis {} failed ({})", result.experiment, h.name, h.statistic));
        }
    }
    Ok(outcome)
}

/// Mean printed difference over the bundled level rows not in the excluded list.
fn fixture_depth_lines() -> anyhow::Result<String> {
    let mut text = String::new();
    let rows = fixtures::level_table()?;
    let mut mismatches = Vec::new();
    let mut kept = Vec::new();
    for r in &rows {
        let d = depth(&r.curve())?;
        if format!("{:.2}", d.difference) != r.printed_difference {
            mismatches.push(r.country.clone());
        }
        if !DEPTH_EXCLUDED.contains(&r.country.as_str()) {
            kept.push(d.difference);
        }
    }
    let _ = writeln!(
        text,
        "depth: {} of {} printed differences reproduced",
        rows.len() - mismatches.len(),
        rows.len()
    );
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let _ = writeln!(
        text,
        "depth: mean difference {mean:.4} over {} u-shaped countries (published {:.2})",
        kept.len(),
        fixtures::PUBLISHED_MEAN_DEPTH
    );
    Ok(text)
}

fn fixture_reduction_lines() -> anyhow::Result<String> {
    let mut text = String::new();
    let models = fixtures::german_models()?;
    let find = |name: &str| models.iter().find(|m| m.model == name);
    if let (Some(old), Some(new)) = (find("model_2"), find("model_4")) {
        for (label, o, n) in [("age", old.age, new.age), ("age_sq", old.age_sq, new.age_sq)] {
            let e = ReductionEntry::new(label, o, n);
            let _ = writeln!(text, "reduction Germany {label}: {}%", e.formatted());
        }
    }
    Ok(text)
}

pub fn report(ctx: &Context, simulations: bool) -> anyhow::Result<Outcome> {
    let sink = ctx.sink()?;
    let mut outcome = Outcome::default();
    let mut text = String::from("bundled published tables\n");
    for (rule, fixture) in [
        (Rule::QuadT15, "table2"),
        (Rule::RangeT1, "table3"),
        (Rule::CurveHeuristic, "table4"),
    ] {
        text.push_str(&run_detect(ctx, &sink, rule, Some(fixture), None)?);
    }
    text.push_str(&fixture_depth_lines()?);
    text.push_str(&fixture_reduction_lines()?);
    if ctx.input.is_some() {
        let (records, countries) = ctx.load()?;
        text.push_str("\ninput data\n");
        for table in [TableSpec::Table2, TableSpec::Table3] {
            let fits = fit_table(ctx, &sink, &records, &countries, table, &mut outcome)?;
            let verdicts: Vec<ShapeVerdict> = fits
                .iter()
                .filter_map(|f| match table {
                    TableSpec::Table2 => QuadEvidence::from_fit(&f.fit).ok().map(|e| detect_quad(&f.country, &e, QUAD_THRESHOLD)),
                    _ => RangeEvidence::from_fit(&f.fit)
                        .ok()
                        .map(|e| detect_ranges(&f.country, &e, RANGE_THRESHOLD)),
                })
                .collect();
            if let Some(v) = verdicts.first() {
                let _ = writeln!(text, "{}", summary_line(&verdicts, v.rule));
            }
        }
        let curves = data_curves(ctx, &records, &countries, AgeScheme::Fine, &mut outcome);
        write_curves(ctx, &sink, AgeScheme::Fine, &curves, false)?;
        let verdicts: Vec<ShapeVerdict> = curves.iter().map(|c| classify_curve(c, &CurveRule::default())).collect();
        let _ = writeln!(text, "{}", summary_line(&verdicts, Rule::CurveHeuristic));
    }
    if simulations {
        text.push_str("\nsimulations\n");
        for exp in expand(ExperimentArg::All) {
            let result = run_experiment(ctx, exp, None, None)?;
            text.push_str(&write_sim(ctx, &sink, &result)?);
            if !result.passed() {
                outcome.fail(format!("simulation {} failed", result.experiment));
            }
        }
    }
    sink.write("report.txt", &text)?;
    print!("{text}");
    Ok(outcome)
}
