//! `simulate`: one event file per requested setting plus `manifest.json`.

use std::fmt::Write as _;
use std::path::Path;

use biexciton_core::cascade::DetectionConfig;
use biexciton_core::eventio::write_events;
use biexciton_core::events::{simulate_events, xx_autocorrelation_sim};
use biexciton_core::tomography::measurement_set;
use biexciton_core::MeasurementSetting;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, read_json, sha256_hex, write_bytes, write_json, Format};

pub const MANIFEST: &str = "manifest.json";
pub const AUTOCORRELATION: &str = "autocorrelation";

/// What a single event file records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Setting(MeasurementSetting),
    /// X-arm-only stream for the exciton autocorrelation.
    Autocorrelation,
}

impl Target {
    pub fn name(&self) -> String {
        match self {
            Target::Setting(s) => s.name(),
            Target::Autocorrelation => AUTOCORRELATION.to_string(),
        }
    }

    pub fn parse(name: &str) -> Result<Self, CliError> {
        if name == AUTOCORRELATION {
            return Ok(Target::Autocorrelation);
        }
        MeasurementSetting::parse_name(name)
            .map(Target::Setting)
            .map_err(|e| CliError::usage(format!("invalid setting {name:?}: {e}")))
    }

    /// `all12`, `all` (the twelve plus the autocorrelation) or one name.
    pub fn parse_request(request: &str) -> Result<Vec<Self>, CliError> {
        let twelve = || measurement_set().into_iter().map(Target::Setting);
        match request {
            "all12" => Ok(twelve().collect()),
            "all" => Ok(twelve().chain([Target::Autocorrelation]).collect()),
            name => Ok(vec![Target::parse(name)?]),
        }
    }
}

pub fn event_file_name(name: &str, cfg: &RunConfig) -> String {
    format!("events_{name}.{}", cfg.event_format.extension())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub file: String,
    pub setting: String,
    pub seed: u64,
    pub records: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    /// Canonical resolved configuration the hash covers.
    pub config: String,
    pub cycles: u64,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn entry(&self, file: &str) -> Option<&ManifestFile> {
        self.files.iter().find(|f| f.file == file)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => crate::output::to_json(self),
            Format::Csv => {
                let mut out = String::from("file,setting,seed,records\n");
                for f in &self.files {
                    let _ = writeln!(out, "{},{},{},{}", f.file, f.setting, f.seed, f.records);
                }
                out
            }
            Format::Text => {
                let mut out = format!("config hash {}\n", self.config_hash);
                for f in &self.files {
                    let _ = writeln!(
                        out,
                        "{:<28} {:>10} records  seed {}",
                        f.file, f.records, f.seed
                    );
                }
                out
            }
        }
    }
}

/// Writes the requested event files into `out` and updates its manifest.
/// An existing manifest from the same configuration is extended; one from a
/// different configuration is replaced, orphaning its files.
pub fn simulate(cfg: &RunConfig, targets: &[Target], out: &Path) -> Result<Manifest, CliError> {
    cfg.require_seed()?;
    ensure_dir(out)?;
    let hash = cfg.hash();
    let mut manifest = match read_json::<Manifest>(&out.join(MANIFEST)) {
        Ok(m) if m.config_hash == hash => m,
        _ => Manifest {
            config_hash: hash,
            config: cfg.canonical(),
            cycles: cfg.cycles,
            files: Vec::new(),
        },
    };
    for target in targets {
        let name = target.name();
        let seed = cfg.derived_seed(&name)?;
        let setting = match target {
            Target::Setting(s) => *s,
            // The X arm ignores the XX polariser; any setting will do.
            Target::Autocorrelation => measurement_set()[0],
        };
        let det = DetectionConfig {
            setting,
            cycles: cfg.cycles,
            pair_efficiency: cfg.pair_efficiency,
            seed,
        };
        let stream = match target {
            Target::Setting(_) => simulate_events(&cfg.dot, &det)?,
            Target::Autocorrelation => xx_autocorrelation_sim(&cfg.dot, &det)?,
        };
        let mut bytes = Vec::new();
        write_events(&stream, cfg.event_format, &mut bytes)?;
        let file = event_file_name(&name, cfg);
        write_bytes(out, &file, &bytes)?;
        let entry = ManifestFile {
            file: file.clone(),
            setting: name,
            seed,
            records: stream.len() as u64,
            sha256: sha256_hex(&bytes),
        };
        match manifest.files.iter_mut().find(|f| f.file == file) {
            Some(slot) => *slot = entry,
            None => manifest.files.push(entry),
        }
    }
    manifest.files.sort_by(|a, b| a.file.cmp(&b.file));
    write_json(out, MANIFEST, &manifest)?;
    Ok(manifest)
}
