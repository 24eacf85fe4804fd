//! Run configuration: plain-text `key = value` lines under `[section]`
//! headers (TOML). Every key is optional; absent keys keep their defaults.
//!
//! ```toml
//! [input]
//! path = "ess_rounds_1_8.csv"
//!
//! [columns]
//! country = "cntry"
//! missing = ["NA", "77", "88", "99"]
//! wave_base = 2000
//! wave_step = 2
//!
//! [codebook.marital]
//! levels = ["1", "2", "3", "4", "5", "6"]
//! reference = "6"
//!
//! [run]
//! countries = ["DE", "FR"]
//! out = "results"
//! formats = ["csv", "text", "svg"]
//! seed = 7
//!
//! [simulate]
//! reps = 200
//! n = 5000
//! noise_sd = 1.0
//! true_age_fn = { kind = "quadratic", b1 = 0.02, b2 = -0.0002 }
//! period_effect = { "3" = 0.1 }
//!
//! [simulate.attrition]
//! knee = 75
//! strength = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{ColumnMapping, Variable};
use crate::design::Codebook;
use crate::error::{Error, Result};
use crate::simulate::{AttritionConfig, DgpConfig, MediatorConfig, TrueAgeFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Text,
    Svg,
}

impl Format {
    pub fn parse(name: &str) -> Option<Format> {
        match name.trim().to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "text" | "txt" | "table" => Some(Format::Text),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnsSection {
    pub country: Option<String>,
    pub round: Option<String>,
    pub period_year: Option<String>,
    pub age: Option<String>,
    pub happiness: Option<String>,
    pub weight: Option<String>,
    pub sex: Option<String>,
    pub education: Option<String>,
    pub marital: Option<String>,
    pub labor_status: Option<String>,
    pub missing: Option<Vec<String>>,
    pub wave_base: Option<i32>,
    pub wave_step: Option<i32>,
    /// `[from, into]`, or an empty list to disable.
    pub labor_merge: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsSection {
    pub levels: Vec<String>,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub countries: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AgeFnSection {
    Flat,
    Quadratic { b1: f64, b2: f64 },
    Cubic { b1: f64, b2: f64, b3: f64 },
}

impl From<AgeFnSection> for TrueAgeFn {
    fn from(s: AgeFnSection) -> Self {
        match s {
            AgeFnSection::Flat => TrueAgeFn::Flat,
            AgeFnSection::Quadratic { b1, b2 } => TrueAgeFn::Quadratic { b1, b2 },
            AgeFnSection::Cubic { b1, b2, b3 } => TrueAgeFn::Cubic { b1, b2, b3 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediatorSection {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub direct: f64,
    #[serde(default = "default_mediator_sd")]
    pub noise_sd: f64,
}

fn default_mediator_sd() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttritionSection {
    pub knee: u32,
    pub strength: f64,
}

/// Overrides applied on top of an experiment's default generator.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub age_min: Option<u32>,
    pub age_max: Option<u32>,
    pub rounds: Option<u32>,
    pub intercept: Option<f64>,
    pub noise_sd: Option<f64>,
    pub clamp: Option<bool>,
    pub cohort_width: Option<u32>,
    pub true_age_fn: Option<AgeFnSection>,
    pub period_effect: Option<BTreeMap<String, f64>>,
    pub cohort_effect: Option<BTreeMap<String, f64>>,
    pub mediator: Option<MediatorSection>,
    pub attrition: Option<AttritionSection>,
}

impl SimulateSection {
    /// Applies every present key to `config`.
    pub fn apply(&self, config: &mut DgpConfig) -> Result<()> {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    config.$field = v;
                }
            )*};
        }
        set!(n, seed, age_min, age_max, rounds, intercept, noise_sd, clamp, cohort_width);
        if let Some(f) = self.true_age_fn {
            config.true_age_fn = f.into();
        }
        if let Some(p) = &self.period_effect {
            config.period_effect = parse_keys(p, "period_effect")?;
        }
        if let Some(c) = &self.cohort_effect {
            config.cohort_effect = parse_keys(c, "cohort_effect")?;
        }
        if let Some(m) = self.mediator {
            config.mediator = Some(MediatorConfig {
                a: m.a,
                b: m.b,
                direct: m.direct,
                noise_sd: m.noise_sd,
            });
        }
        if let Some(a) = self.attrition {
            config.attrition = Some(AttritionConfig {
                knee: a.knee,
                strength: a.strength,
            });
        }
        Ok(())
    }
}

fn parse_keys<K: std::str::FromStr + Ord>(map: &BTreeMap<String, f64>, what: &str) -> Result<BTreeMap<K, f64>> {
    map.iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<K>()
                .map(|k| (k, *v))
                .map_err(|_| Error::Config(format!("{what}: key `{k}` is not an integer")))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub columns: ColumnsSection,
    /// Keyed by variable name: sex, education, marital, labor_status.
    #[serde(default)]
    pub codebook: BTreeMap<String, LevelsSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Default ESS mapping with this file's overrides.
    pub fn column_mapping(&self) -> Result<ColumnMapping> {
        let c = &self.columns;
        let mut m = ColumnMapping::default();
        let set = |slot: &mut String, v: &Option<String>| {
            if let Some(v) = v {
                *slot = v.clone();
            }
        };
        set(&mut m.country, &c.country);
        set(&mut m.age, &c.age);
        set(&mut m.happiness, &c.happiness);
        set(&mut m.weight, &c.weight);
        if c.period_year.is_some() {
            m.period_year = c.period_year.clone();
            if c.round.is_none() {
                m.round = None;
            }
        }
        if c.round.is_some() {
            m.round = c.round.clone();
        }
        for (slot, v) in [
            (&mut m.sex, &c.sex),
            (&mut m.education, &c.education),
            (&mut m.marital, &c.marital),
            (&mut m.labor_status, &c.labor_status),
        ] {
            if let Some(v) = v {
                *slot = (!v.is_empty()).then(|| v.clone());
            }
        }
        if let Some(missing) = &c.missing {
            m.missing = missing.clone();
        }
        if let Some(b) = c.wave_base {
            m.waves.base = b;
        }
        if let Some(s) = c.wave_step {
            m.waves.step = s;
        }
        match c.labor_merge.as_deref() {
            None => {}
            Some([]) => m.labor_merge = None,
            Some([from, into]) => m.labor_merge = Some((from.clone(), into.clone())),
            Some(_) => return Err(Error::Config("labor_merge takes [from, into] or []".into())),
        }
        Ok(m)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        let mut book = Codebook::default();
        for (name, section) in &self.codebook {
            let variable = Variable::parse(name)
                .filter(|v| *v != Variable::Mediator)
                .ok_or_else(|| Error::Config(format!("unknown codebook variable `{name}`")))?;
            book.levels.insert(variable, section.levels.clone());
            if let Some(r) = &section.reference {
                book.references.insert(variable, r.clone());
            }
        }
        Ok(book)
    }

    /// Formats requested, defaulting to CSV and text; never empty.
    pub fn formats(&self) -> Result<Vec<Format>> {
        match &self.run.formats {
            None => Ok(vec![Format::Csv, Format::Text]),
            Some(f) if f.is_empty() => Err(Error::Config("at least one output format is required".into())),
            Some(f) => Ok(f.clone()),
        }
    }
}
