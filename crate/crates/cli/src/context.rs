use std::fs;
use std::path::PathBuf;

use agecurve::config::{Format, RunConfig};
use agecurve::dataset::{self, ColumnMapping, SurveyRecord};
use agecurve::design::Codebook;
use anyhow::{bail, Context as _};

use crate::Global;

/// Global flags merged over the config file.
pub struct Context {
    pub config: RunConfig,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub countries: Vec<String>,
    pub formats: Vec<Format>,
    pub seed: Option<u64>,
    pub mapping: ColumnMapping,
    pub codebook: Codebook,
}

impl Context {
    pub fn resolve(global: &Global) -> anyhow::Result<Self> {
        let config = match &global.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let formats = if global.format.is_empty() {
            config.formats()?
        } else {
            let mut formats = Vec::new();
            for name in &global.format {
                let f = Format::parse(name).with_context(|| format!("unknown format `{name}` (expected csv, text or svg)"))?;
                if !formats.contains(&f) {
                    formats.push(f);
                }
            }
            formats
        };
        let countries = if global.countries.is_empty() {
            config.run.countries.clone().unwrap_or_default()
        } else {
            global.countries.clone()
        };
        Ok(Context {
            input: global.input.clone().or_else(|| config.input.path.clone()),
            out: global
                .out
                .clone()
                .or_else(|| config.run.out.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            countries: countries.into_iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect(),
            formats,
            seed: global.seed.or(config.run.seed),
            mapping: config.column_mapping()?,
            codebook: config.codebook()?,
            config,
        })
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    /// Loads the input and resolves the country list; fatal when nothing matches.
    pub fn load(&self) -> anyhow::Result<(Vec<SurveyRecord>, Vec<String>)> {
        let Some(path) = &self.input else {
            bail!("no input file: pass --input or set [input] path in the config");
        };
        let (records, report) = dataset::load_csv(path, &self.mapping)?;
        eprintln!("{}: {} rows kept; {report}", path.display(), report.rows_kept);
        let present = dataset::countries(&records);
        let countries = if self.countries.is_empty() {
            present
        } else {
            let (found, missing): (Vec<_>, Vec<_>) = self.countries.iter().cloned().partition(|c| present.contains(c));
            for m in &missing {
                log::warn!("country {m} not present in input");
            }
            found
        };
        if countries.is_empty() {
            bail!("no valid countries: none of [{}] occur in the input", self.countries.join(", "));
        }
        Ok((records, countries))
    }

    pub fn sink(&self) -> anyhow::Result<Sink> {
        fs::create_dir_all(&self.out).with_context(|| format!("cannot create output directory {}", self.out.display()))?;
        Ok(Sink { dir: self.out.clone() })
    }
}

/// Writes output files under one directory.
pub struct Sink {
    dir: PathBuf,
}

impl Sink {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> agecurve::Result<()>) -> anyhow::Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, buf)
    }
}

/// File-name-safe form of a country code or label.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
