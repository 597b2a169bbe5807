//! `tomo` and `metrics`: density matrix from the twelve correlations, then
//! the six entanglement tests and the half-wave-plate scan.

use std::fmt::Write as _;
use std::path::Path;

use biexciton_core::density::BASIS_LABELS;
use biexciton_core::metrics::{
    bootstrap_metric_sigmas, hwp_angles, hwp_scan, hwp_scan_sigmas, largest_eigen, LargestEigen,
    MetricValues, TestTable,
};
use biexciton_core::tomography::{
    bootstrap_states, matrix_bars_csv, tomography, BootstrapSettings, TomographyEntry,
    TomographyInput, TomographyResult,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, to_json, write_bytes, write_json, Format};

pub const TOMOGRAPHY: &str = "tomography.json";
pub const METRICS: &str = "metrics.json";

/// Anything with twelve `{xx, basis, C, n_co?, n_cross?}` entries, such as
/// the `correlate` report or a hand-written file.
#[derive(Debug, Clone, Deserialize)]
pub struct TomoSource {
    #[serde(default)]
    pub config_hash: Option<String>,
    pub entries: Vec<TomographyEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoOutput {
    pub config_hash: Option<String>,
    #[serde(flatten)]
    pub result: TomographyResult,
}

impl TomoOutput {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json(self),
            Format::Csv => matrix_bars_csv(&self.result, false),
            Format::Text => {
                let r = &self.result;
                let mut out = String::new();
                for (title, part) in [("Re", 0), ("Im", 1)] {
                    let _ = writeln!(
                        out,
                        "{title} rho {:>8} {:>8} {:>8} {:>8}",
                        "HH", "HV", "VH", "VV"
                    );
                    for (i, label) in BASIS_LABELS.iter().enumerate() {
                        let _ = write!(out, "{label:>6} ");
                        for j in 0..4 {
                            let z = r.rho_linear.entry(i, j);
                            let _ = write!(out, " {:>8.4}", if part == 0 { z.re } else { z.im });
                        }
                        out.push('\n');
                    }
                }
                let _ = writeln!(out, "consistency residual {:.4}", r.consistency_residual);
                let _ = writeln!(
                    out,
                    "min eigenvalue (linear) {:.4}",
                    r.rho_linear.min_eigenvalue()
                );
                out
            }
        }
    }
}

/// Reconstructs the state. With counts and `bootstrap_resamples > 0`, the
/// counts are rescaled to `bootstrap_depth` (if set) and bootstrapped.
pub fn tomo(source: &TomoSource, cfg: &RunConfig, out: &Path) -> Result<TomoOutput, CliError> {
    let mut input = TomographyInput {
        entries: source.entries.clone(),
    };
    input.validate()?;
    let bootstrap = if cfg.bootstrap_resamples > 0 && input.has_counts() {
        if let Some(depth) = cfg.bootstrap_depth {
            input = input.with_depth(depth);
        }
        Some(BootstrapSettings {
            resamples: cfg.bootstrap_resamples,
            seed: cfg.derived_seed("bootstrap")?,
        })
    } else {
        None
    };
    let result = tomography(&input, bootstrap)?;
    ensure_dir(out)?;
    let output = TomoOutput {
        config_hash: source.config_hash.clone(),
        result,
    };
    write_json(out, TOMOGRAPHY, &output)?;
    write_bytes(
        out,
        "matrix_bars.csv",
        matrix_bars_csv(&output.result, false).as_bytes(),
    )?;
    write_bytes(
        out,
        "matrix_bars_physical.csv",
        matrix_bars_csv(&output.result, true).as_bytes(),
    )?;
    Ok(output)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwpPoint {
    pub theta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: Option<String>,
    pub tests: TestTable,
    pub largest_eigen: LargestEigen,
    pub hwp_scan: Vec<HwpPoint>,
    /// max − min of the scan.
    pub hwp_modulation: f64,
}

impl MetricsReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json(self),
            Format::Csv => self.tests.to_csv(),
            Format::Text => {
                let mut out = self.tests.to_text();
                let e = &self.largest_eigen;
                match e.phase {
                    Some(p) => {
                        let _ = writeln!(
                            out,
                            "largest eigenvector phase {:.4} rad ({:.3}π)",
                            p,
                            p / std::f64::consts::PI
                        );
                    }
                    None => out.push_str("largest eigenvector phase undefined (degenerate)\n"),
                }
                let _ = writeln!(out, "HWP scan max-min {:.4}", self.hwp_modulation);
                out
            }
        }
    }
}

fn hwp_csv(points: &[HwpPoint]) -> String {
    let mut out = String::from("theta_rad,theta_deg,C,sigma\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.theta,
            p.theta.to_degrees(),
            p.c,
            p.sigma
        );
    }
    out
}

/// Evaluates the six tests on a reconstruction, with bootstrap sigmas when
/// the result carries counts and bootstrap settings.
pub fn metrics(
    tomo: &TomoOutput,
    hwp_points: usize,
    out: &Path,
) -> Result<MetricsReport, CliError> {
    let r = &tomo.result;
    let states = match (&r.bootstrap, &r.input) {
        (Some(b), Some(input)) if input.has_counts() => {
            bootstrap_states(input, b.resamples, b.seed)?
        }
        _ => Vec::new(),
    };
    let values = MetricValues::evaluate(&r.rho_linear, &r.rho_physical)?;
    let sigmas = if states.is_empty() {
        MetricValues::zero()
    } else {
        bootstrap_metric_sigmas(&states)?
    };
    let tests = TestTable::new(&values, &sigmas);
    let thetas = hwp_angles(hwp_points);
    let scan_sigmas = if states.is_empty() {
        vec![0.0; thetas.len()]
    } else {
        hwp_scan_sigmas(&states, &thetas)
    };
    let hwp: Vec<HwpPoint> = hwp_scan(&r.rho_linear, &thetas)
        .into_iter()
        .zip(scan_sigmas)
        .map(|((theta, c), sigma)| HwpPoint { theta, c, sigma })
        .collect();
    let (lo, hi) = hwp
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.c), hi.max(p.c))
        });
    let report = MetricsReport {
        config_hash: tomo.config_hash.clone(),
        tests,
        largest_eigen: largest_eigen(&r.rho_linear),
        hwp_scan: hwp,
        hwp_modulation: if hi >= lo { hi - lo } else { 0.0 },
    };
    ensure_dir(out)?;
    write_bytes(out, "test_table.txt", report.tests.to_text().as_bytes())?;
    write_bytes(out, "test_table.csv", report.tests.to_csv().as_bytes())?;
    write_json(out, "test_table.json", &report.tests)?;
    write_bytes(out, "hwp_scan.csv", hwp_csv(&report.hwp_scan).as_bytes())?;
    write_json(out, METRICS, &report)?;
    Ok(report)
}
