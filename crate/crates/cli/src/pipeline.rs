//! `pipeline`: every stage in order, then `summary.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use biexciton_core::metrics::{EntanglementTest, TestTable};
use serde::{Deserialize, Serialize};

use crate::analyze::{metrics, tomo, TomoSource};
use crate::config::RunConfig;
use crate::correlate::correlate;
use crate::error::CliError;
use crate::output::{to_json, write_json, Format};
use crate::simulate::{simulate, Target};

pub const SUMMARY: &str = "summary.json";

/// Settings whose zero-delay C represents each basis: the XX polariser
/// matches the X arm's co-polarised output.
pub const BASIS_SETTINGS: [(&str, &str); 3] =
    [("rect", "H_rect"), ("diag", "D_diag"), ("circ", "L_circ")];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueSigma {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisCorrelation {
    pub basis: String,
    pub setting: String,
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub cycles: u64,
    pub zero_delay: Vec<BasisCorrelation>,
    pub autocorrelation_g2_zero: ValueSigma,
    pub fidelity: ValueSigma,
    pub tests: TestTable,
    pub all_tests_pass: bool,
    pub consistency_residual: f64,
    pub largest_eigenvector_phase: Option<f64>,
    pub hwp_modulation: f64,
}

impl Summary {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json(self),
            Format::Csv => self.tests.to_csv(),
            Format::Text => {
                let mut out = format!("config hash {}\n", self.config_hash);
                for b in &self.zero_delay {
                    let _ = writeln!(out, "C(0) {:<4} {:>8.4} ± {:.4}", b.basis, b.c, b.sigma);
                }
                let g = self.autocorrelation_g2_zero;
                let _ = writeln!(out, "X-X g2(0)  {:.4} ± {:.4}", g.value, g.sigma);
                let _ = writeln!(out, "consistency residual {:.4}", self.consistency_residual);
                out.push('\n');
                out.push_str(&self.tests.to_text());
                out
            }
        }
    }
}

/// Runs simulate → correlate → tomo → metrics in `out`. The first failing
/// stage aborts the run with its error, prefixed by the stage name.
pub fn pipeline(cfg: &RunConfig, out: &Path) -> Result<Summary, CliError> {
    let seed = cfg.require_seed()?;
    let targets = Target::parse_request("all")?;
    let manifest = simulate(cfg, &targets, out).map_err(|e| e.context("simulate"))?;
    let files: Vec<PathBuf> = targets
        .iter()
        .map(|t| out.join(crate::simulate::event_file_name(&t.name(), cfg)))
        .collect();
    let report = correlate(&files, cfg.max_delay, out).map_err(|e| e.context("correlate"))?;
    let source = TomoSource {
        config_hash: report.config_hash.clone(),
        entries: report
            .entries
            .iter()
            .map(|e| biexciton_core::tomography::TomographyEntry {
                xx: e.xx,
                basis: e.basis,
                c: e.c,
                n_co: Some(e.n_co),
                n_cross: Some(e.n_cross),
            })
            .collect(),
    };
    let tomo_out = tomo(&source, cfg, out).map_err(|e| e.context("tomo"))?;
    let m = metrics(&tomo_out, cfg.hwp_points, out).map_err(|e| e.context("metrics"))?;

    let zero_delay = BASIS_SETTINGS
        .iter()
        .map(|(basis, setting)| {
            let e = report
                .entry(setting)
                .expect("all twelve settings correlated");
            BasisCorrelation {
                basis: basis.to_string(),
                setting: setting.to_string(),
                c: e.c,
                sigma: e.sigma,
            }
        })
        .collect();
    let auto = report
        .autocorrelation
        .as_ref()
        .expect("autocorrelation stream requested");
    let fidelity = m.tests.row(EntanglementTest::Fidelity);
    let summary = Summary {
        config_hash: manifest.config_hash,
        seed,
        cycles: cfg.cycles,
        zero_delay,
        autocorrelation_g2_zero: ValueSigma {
            value: auto.g2_zero,
            sigma: auto.sigma,
        },
        fidelity: ValueSigma {
            value: fidelity.value,
            sigma: fidelity.sigma,
        },
        all_tests_pass: m.tests.all_pass(),
        tests: m.tests.clone(),
        consistency_residual: tomo_out.result.consistency_residual,
        largest_eigenvector_phase: m.largest_eigen.phase,
        hwp_modulation: m.hwp_modulation,
    };
    write_json(out, SUMMARY, &summary)?;
    Ok(summary)
}
