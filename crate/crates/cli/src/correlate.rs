//! `correlate`: zero-delay degree of correlation per setting, delay series
//! and raw histograms from event files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use biexciton_core::coincidence::{normalize, series_to_csv, CrossCorrelation, HistogramBuilder};
use biexciton_core::eventio::{EventFormat, EventReader};
use biexciton_core::events::Channel;
use biexciton_core::{PolLabel, XBasis};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{ensure_dir, read_json, sha256_file, write_bytes, write_json, Format};
use crate::simulate::{Manifest, Target, MANIFEST};

pub const REPORT: &str = "correlations.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub setting: String,
    pub xx: PolLabel,
    pub basis: XBasis,
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
    /// Raw zero-delay coincidences.
    pub n_co: u64,
    pub n_cross: u64,
    pub g_co: f64,
    pub g_cross: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    pub g2_zero: f64,
    pub sigma: f64,
    pub zero_count: u64,
    pub side_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub config_hash: Option<String>,
    pub max_delay: u32,
    pub entries: Vec<CorrelationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autocorrelation: Option<Autocorrelation>,
}

impl CorrelationReport {
    pub fn entry(&self, setting: &str) -> Option<&CorrelationEntry> {
        self.entries.iter().find(|e| e.setting == setting)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => crate::output::to_json(self),
            Format::Csv => {
                let mut out = String::from("setting,C,sigma,n_co,n_cross\n");
                for e in &self.entries {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        e.setting, e.c, e.sigma, e.n_co, e.n_cross
                    );
                }
                out
            }
            Format::Text => {
                let mut out = format!(
                    "{:<8} {:>8} {:>7} {:>9} {:>9}\n",
                    "setting", "C(0)", "sigma", "n_co", "n_cross"
                );
                for e in &self.entries {
                    let _ = writeln!(
                        out,
                        "{:<8} {:>8.4} {:>7.4} {:>9} {:>9}",
                        e.setting, e.c, e.sigma, e.n_co, e.n_cross
                    );
                }
                if let Some(a) = &self.autocorrelation {
                    let _ = writeln!(
                        out,
                        "X-X autocorrelation g2(0) = {:.4} ± {:.4}",
                        a.g2_zero, a.sigma
                    );
                }
                out
            }
        }
    }
}

/// Where an event file came from: its setting and, when a manifest sits
/// next to it, the configuration hash and cycle count.
struct Provenance {
    target: Target,
    config_hash: Option<String>,
    cycles: Option<u64>,
}

fn file_name(path: &Path) -> Result<String, CliError> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::usage(format!("{}: not a file path", path.display())))
}

fn provenance(
    path: &Path,
    manifests: &mut BTreeMap<PathBuf, Option<Manifest>>,
) -> Result<Provenance, CliError> {
    let name = file_name(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if !manifests.contains_key(&dir) {
        let p = dir.join(MANIFEST);
        let m = if p.exists() {
            Some(read_json::<Manifest>(&p)?)
        } else {
            None
        };
        manifests.insert(dir.clone(), m);
    }
    match &manifests[&dir] {
        Some(m) => {
            let entry = m.entry(&name).ok_or_else(|| {
                CliError::data(format!("{}: not listed in {MANIFEST}", path.display()))
            })?;
            if sha256_file(path)? != entry.sha256 {
                return Err(CliError::data(format!(
                    "{}: contents differ from the hash recorded in {MANIFEST}",
                    path.display()
                )));
            }
            Ok(Provenance {
                target: Target::parse(&entry.setting)?,
                config_hash: Some(m.config_hash.clone()),
                cycles: Some(m.cycles),
            })
        }
        None => {
            let stem = name.split('.').next().unwrap_or("");
            let setting = stem.strip_prefix("events_").ok_or_else(|| {
                CliError::usage(format!(
                    "{}: no {MANIFEST} alongside and name is not events_<setting>.<ext>",
                    path.display()
                ))
            })?;
            Ok(Provenance {
                target: Target::parse(setting)?,
                config_hash: None,
                cycles: None,
            })
        }
    }
}

fn open_events(path: &Path) -> Result<EventReader<File>, CliError> {
    let mut prefix = [0u8; 5];
    let n = {
        use std::io::Read;
        let mut f = File::open(path)
            .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
        f.read(&mut prefix)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
    };
    let format = EventFormat::sniff(&prefix[..n]);
    let file = File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    Ok(EventReader::new(file, format))
}

fn histogram_csv(cc: &CrossCorrelation) -> String {
    let mut out = String::from("delay,co,cross\n");
    for d in cc.co.delays() {
        let _ = writeln!(out, "{d},{},{}", cc.co.count(d), cc.cross.count(d));
    }
    out
}

/// Reads every file, checks they share one configuration, and writes
/// `correlations.json` plus per-setting CSVs into `out`.
pub fn correlate(
    files: &[PathBuf],
    max_delay: u32,
    out: &Path,
) -> Result<CorrelationReport, CliError> {
    if files.is_empty() {
        return Err(CliError::usage("no event files given"));
    }
    ensure_dir(out)?;
    let mut manifests = BTreeMap::new();
    let mut hash: Option<Option<String>> = None;
    let mut entries = Vec::new();
    let mut autocorrelation = None;
    let mut seen = BTreeMap::new();
    for path in files {
        let prov = provenance(path, &mut manifests)?;
        match &hash {
            None => hash = Some(prov.config_hash.clone()),
            Some(h) if *h != prov.config_hash => {
                return Err(CliError::data(format!(
                    "{}: written by configuration {} but earlier files come from {}; refusing to mix",
                    path.display(),
                    prov.config_hash.as_deref().unwrap_or("<none>"),
                    h.as_deref().unwrap_or("<none>")
                )));
            }
            Some(_) => {}
        }
        let name = prov.target.name();
        if let Some(prev) = seen.insert(name.clone(), path.clone()) {
            return Err(CliError::data(format!(
                "{} and {} both hold setting {name}",
                prev.display(),
                path.display()
            )));
        }
        let mut count = 0u64;
        let records = open_events(path)?.inspect(|r| count += r.is_ok() as u64);
        let ctx = |e: biexciton_core::Error| CliError::from(e).context(path.display());
        let empty = || CliError::data(format!("{}: contains no events", path.display()));
        match prov.target {
            Target::Setting(setting) => {
                let cc =
                    CrossCorrelation::from_records(records, max_delay, prov.cycles).map_err(ctx)?;
                if count == 0 {
                    return Err(empty());
                }
                let zero = cc.point(0).map_err(ctx)?;
                let g_co = normalize(&cc.co).map_err(ctx)?.g_zero;
                let g_cross = normalize(&cc.cross).map_err(ctx)?.g_zero;
                let series = cc.series().map_err(ctx)?;
                write_bytes(
                    out,
                    &format!("correlation_{name}.csv"),
                    series_to_csv(&series).as_bytes(),
                )?;
                write_bytes(
                    out,
                    &format!("histogram_{name}.csv"),
                    histogram_csv(&cc).as_bytes(),
                )?;
                entries.push(CorrelationEntry {
                    setting: name,
                    xx: setting.xx,
                    basis: setting.basis,
                    c: zero.c,
                    sigma: zero.sigma,
                    n_co: cc.co.zero(),
                    n_cross: cc.cross.zero(),
                    g_co,
                    g_cross,
                });
            }
            Target::Autocorrelation => {
                let mut b = HistogramBuilder::new((Channel::XCo, Channel::XCross), max_delay)?;
                let mut last = None;
                for r in records {
                    let r = r.map_err(ctx)?;
                    b.push(r).map_err(ctx)?;
                    last = Some(r.cycle);
                }
                if last.is_none() {
                    return Err(empty());
                }
                let h = b.finish(prov.cycles.unwrap_or(last.map_or(0, |c| c + 1)));
                let n = normalize(&h).map_err(ctx)?;
                write_bytes(out, &format!("histogram_{name}.csv"), h.to_csv().as_bytes())?;
                autocorrelation = Some(Autocorrelation {
                    g2_zero: n.g_zero,
                    sigma: n.poisson_sigma,
                    zero_count: h.zero(),
                    side_mean: n.side_mean,
                });
            }
        }
    }
    entries.sort_by_key(|e| {
        biexciton_core::tomography::measurement_set()
            .iter()
            .position(|s| s.name() == e.setting)
            .unwrap_or(usize::MAX)
    });
    let report = CorrelationReport {
        config_hash: hash.flatten(),
        max_delay,
        entries,
        autocorrelation,
    };
    write_json(out, REPORT, &report)?;
    Ok(report)
}
