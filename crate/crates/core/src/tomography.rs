//! Density-matrix reconstruction from twelve degree-of-correlation values.
//!
//! The XX arm is analysed with one of the polarisers H, V, D, L and the X
//! arm in the rectilinear, diagonal or circular basis. When both single
//! photon marginals are unpolarised, a setting measures
//!
//! ```text
//! C(a, β) = aᵀ · T · b_β
//! ```
//!
//! with a the Bloch vector of the XX polariser, b_β the axis of the X
//! basis' co-polarised vector, and T_ij = ⟨σ_i ⊗ σ_j⟩. The D and L rows give
//! T's x and y rows directly; the H and V rows both measure the z row, so
//! it is taken as (C_H − C_V)/2 and |C_H + C_V| is kept as a consistency
//! residual. The state follows as ρ = ¼(I⊗I + Σ T_ij σ_i⊗σ_j).

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::Error;
use crate::polarization::{pauli, tensor, MeasurementSetting, Operator4, PolLabel, XBasis};

pub const XX_PROJECTORS: [PolLabel; 4] = [PolLabel::H, PolLabel::V, PolLabel::D, PolLabel::L];

pub const MIN_RESAMPLES: usize = 100;

/// The twelve settings, XX polariser major: H, V, D, L × rect, diag, circ.
pub fn measurement_set() -> Vec<MeasurementSetting> {
    XX_PROJECTORS
        .iter()
        .flat_map(|&xx| {
            XBasis::ALL
                .iter()
                .map(move |&b| MeasurementSetting::new(xx, b))
        })
        .collect()
}

/// Index of a Stokes axis (x, y, z) for an X basis.
fn basis_axis(b: XBasis) -> usize {
    match b {
        XBasis::Diagonal => 0,
        XBasis::Circular => 1,
        XBasis::Rectilinear => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyEntry {
    pub xx: PolLabel,
    pub basis: XBasis,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_co: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cross: Option<u64>,
}

impl TomographyEntry {
    pub fn setting(&self) -> MeasurementSetting {
        MeasurementSetting::new(self.xx, self.basis)
    }

    /// Ratio r such that C = (n_co − r·n_cross)/(n_co + r·n_cross), i.e. the
    /// side-peak normalisation folded into the raw counts.
    fn normalisation_ratio(&self) -> f64 {
        match (self.n_co, self.n_cross) {
            (Some(co), Some(cross)) if co > 0 && cross > 0 && self.c > -1.0 => {
                co as f64 * (1.0 - self.c) / (cross as f64 * (1.0 + self.c))
            }
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyInput {
    pub entries: Vec<TomographyEntry>,
}

impl TomographyInput {
    /// Checks for exactly the twelve settings, each once, with C in [−1, 1].
    pub fn validate(&self) -> Result<(), Error> {
        let mut seen = BTreeMap::new();
        for e in &self.entries {
            if !(-1.0..=1.0).contains(&e.c) {
                return Err(Error::Tomography(format!(
                    "{}: C = {} outside [-1, 1]",
                    e.setting(),
                    e.c
                )));
            }
            if !XX_PROJECTORS.contains(&e.xx) {
                return Err(Error::Tomography(format!(
                    "{}: XX polariser must be one of H, V, D, L",
                    e.setting()
                )));
            }
            if seen.insert(e.setting(), ()).is_some() {
                return Err(Error::Tomography(format!(
                    "duplicate entry {}",
                    e.setting()
                )));
            }
        }
        let missing: Vec<String> = measurement_set()
            .into_iter()
            .filter(|s| !seen.contains_key(s))
            .map(|s| s.name())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Tomography(format!(
                "missing entries: {}",
                missing.join(", ")
            )));
        }
        Ok(())
    }

    pub fn from_values(values: impl Fn(&MeasurementSetting) -> f64) -> Self {
        TomographyInput {
            entries: measurement_set()
                .iter()
                .map(|s| TomographyEntry {
                    xx: s.xx,
                    basis: s.basis,
                    c: values(s),
                    n_co: None,
                    n_cross: None,
                })
                .collect(),
        }
    }

    /// Exact Born-rule correlations of a state for all twelve settings.
    pub fn exact(rho: &DensityMatrix) -> Self {
        TomographyInput::from_values(|s| rho.setting_correlation(s))
    }

    /// Expected counts for `coincidences` zero-delay pairs per setting.
    pub fn with_expected_counts(rho: &DensityMatrix, coincidences: u64) -> Self {
        let mut input = TomographyInput::exact(rho);
        for e in &mut input.entries {
            let co = ((1.0 + e.c) / 2.0 * coincidences as f64).round() as u64;
            e.n_co = Some(co);
            e.n_cross = Some(coincidences - co);
            e.c = (co as f64 - (coincidences - co) as f64) / coincidences as f64;
        }
        input
    }

    pub fn get(&self, xx: PolLabel, basis: XBasis) -> Option<&TomographyEntry> {
        self.entries.iter().find(|e| e.xx == xx && e.basis == basis)
    }

    fn value(&self, xx: PolLabel, basis: XBasis) -> f64 {
        self.get(xx, basis).map(|e| e.c).expect("validated input")
    }

    pub fn has_counts(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.n_co.is_some() && e.n_cross.is_some())
    }

    /// Multiplies every count by `factor`, keeping C.
    pub fn scale_counts(&self, factor: u64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.n_co = e.n_co.map(|n| n * factor);
            e.n_cross = e.n_cross.map(|n| n * factor);
        }
        out
    }

    /// Rescales each entry's counts so n_co + n_cross = `depth`, keeping the
    /// co/cross split. C is unchanged; entries without counts stay bare.
    pub fn with_depth(&self, depth: u64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            if let (Some(co), Some(cross)) = (e.n_co, e.n_cross) {
                let total = co + cross;
                if total > 0 {
                    let co = (depth as f64 * co as f64 / total as f64).round() as u64;
                    e.n_co = Some(co);
                    e.n_cross = Some(depth - co);
                }
            }
        }
        out
    }
}

/// Two-photon Stokes correlations, rows = XX axis, columns = X axis, both
/// ordered (x, y, z) ↔ (diagonal, circular, rectilinear).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrixT(pub Matrix3<f64>);

impl CorrelationMatrixT {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.0[(i, j)]))
    }
}

/// Builds T from the twelve values; also returns max over bases of |C_H + C_V|.
pub fn assemble_t(input: &TomographyInput) -> Result<(CorrelationMatrixT, f64), Error> {
    input.validate()?;
    let mut t = Matrix3::zeros();
    let mut residual = 0.0f64;
    for basis in XBasis::ALL {
        let j = basis_axis(basis);
        t[(0, j)] = input.value(PolLabel::D, basis);
        t[(1, j)] = input.value(PolLabel::L, basis);
        let (h, v) = (
            input.value(PolLabel::H, basis),
            input.value(PolLabel::V, basis),
        );
        t[(2, j)] = (h - v) / 2.0;
        residual = residual.max((h + v).abs());
    }
    Ok((CorrelationMatrixT(t), residual))
}

/// ρ = ¼(I⊗I + Σ T_ij σ_i⊗σ_j). Unit trace and unpolarised marginals by
/// construction; positivity is not guaranteed.
pub fn reconstruct_linear(t: &CorrelationMatrixT) -> DensityMatrix {
    let s = pauli();
    let mut m = Operator4::identity();
    for i in 0..3 {
        for j in 0..3 {
            m += tensor(&s[i], &s[j]) * Complex64::from(t.0[(i, j)]);
        }
    }
    DensityMatrix::from_trusted(m * Complex64::from(0.25))
}

/// Euclidean projection of `values` onto the probability simplex.
pub fn project_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut shift = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        let candidate = (acc - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Closest positive-semidefinite, unit-trace matrix in Frobenius norm.
/// Physical inputs come back unchanged.
pub fn project_physical(rho: &DensityMatrix) -> DensityMatrix {
    let eig = rho.eigen();
    if eig.min() >= 0.0 {
        return rho.clone();
    }
    let clipped = project_simplex(&eig.values);
    let mut m = Operator4::zeros();
    for (w, v) in clipped.iter().zip(&eig.vectors) {
        m += v * v.adjoint() * Complex64::from(*w);
    }
    let m = (m + m.adjoint()) * Complex64::from(0.5);
    DensityMatrix::from_trusted(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub rho_linear: DensityMatrix,
    pub rho_physical: DensityMatrix,
    /// Bootstrap standard deviation of |ρ_ij|; zero when no counts were given.
    pub element_sigmas: [[f64; 4]; 4],
    pub consistency_residual: f64,
    pub correlation_tensor: [[f64; 3]; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSettings>,
    /// Kept so metric uncertainties can be recomputed from the same counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<TomographyInput>,
}

/// Linear reconstruction plus physical projection.
pub fn reconstruct(
    input: &TomographyInput,
) -> Result<(DensityMatrix, DensityMatrix, CorrelationMatrixT, f64), Error> {
    let (t, residual) = assemble_t(input)?;
    let linear = reconstruct_linear(&t);
    let physical = project_physical(&linear);
    Ok((linear, physical, t, residual))
}

/// Full reconstruction; bootstraps element errors when counts are present.
pub fn tomography(
    input: &TomographyInput,
    bootstrap: Option<BootstrapSettings>,
) -> Result<TomographyResult, Error> {
    let (rho_linear, rho_physical, t, residual) = reconstruct(input)?;
    let element_sigmas = match bootstrap {
        Some(b) => bootstrap_errors(input, b.resamples, b.seed)?,
        None => [[0.0; 4]; 4],
    };
    Ok(TomographyResult {
        rho_linear,
        rho_physical,
        element_sigmas,
        consistency_residual: residual,
        correlation_tensor: t.rows(),
        bootstrap,
        input: Some(input.clone()),
    })
}

/// Poisson-resampled copies of the input. Resample k draws from ChaCha8
/// stream k of `seed`.
pub fn bootstrap_inputs(
    input: &TomographyInput,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<TomographyInput>, Error> {
    input.validate()?;
    if !input.has_counts() {
        return Err(Error::Tomography(
            "bootstrap needs n_co and n_cross for every entry".into(),
        ));
    }
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::invalid(
            "n_resamples",
            format!("{n_resamples} < {MIN_RESAMPLES}"),
        ));
    }
    let ratios: Vec<f64> = input
        .entries
        .iter()
        .map(TomographyEntry::normalisation_ratio)
        .collect();
    let out = (0..n_resamples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut draw = |mean: u64| -> f64 {
                if mean == 0 {
                    0.0
                } else {
                    Poisson::new(mean as f64)
                        .expect("positive mean")
                        .sample(&mut rng)
                }
            };
            let entries = input
                .entries
                .iter()
                .zip(&ratios)
                .map(|(e, r)| {
                    let co = draw(e.n_co.expect("checked"));
                    let cross = draw(e.n_cross.expect("checked")) * r;
                    let c = if co + cross > 0.0 {
                        (co - cross) / (co + cross)
                    } else {
                        0.0
                    };
                    TomographyEntry { c, ..*e }
                })
                .collect();
            TomographyInput { entries }
        })
        .collect();
    Ok(out)
}

/// Reconstructions (linear, physical) of every bootstrap resample.
pub fn bootstrap_states(
    input: &TomographyInput,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<(DensityMatrix, DensityMatrix)>, Error> {
    bootstrap_inputs(input, n_resamples, seed)?
        .par_iter()
        .map(|inp| reconstruct(inp).map(|(lin, phys, _, _)| (lin, phys)))
        .collect()
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Per-element standard deviation of |ρ_ij| (linear reconstruction) over
/// Poisson resamples of the counts.
pub fn bootstrap_errors(
    input: &TomographyInput,
    n_resamples: usize,
    seed: u64,
) -> Result<[[f64; 4]; 4], Error> {
    let states = bootstrap_states(input, n_resamples, seed)?;
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| std_dev(states.iter().map(|(lin, _)| lin.entry(i, j).norm())))
    }))
}

/// Bootstrap standard deviation of each of the twelve C values, in
/// [`measurement_set`] order.
pub fn bootstrap_c_sigmas(
    input: &TomographyInput,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<f64>, Error> {
    let resampled = bootstrap_inputs(input, n_resamples, seed)?;
    Ok(measurement_set()
        .iter()
        .map(|s| std_dev(resampled.iter().map(|inp| inp.value(s.xx, s.basis))))
        .collect())
}

/// `row,col,re,im,sigma` for the sixteen matrix bars.
pub fn matrix_bars_csv(result: &TomographyResult, physical: bool) -> String {
    let rho = if physical {
        &result.rho_physical
    } else {
        &result.rho_linear
    };
    let labels = crate::density::BASIS_LABELS;
    let mut out = String::from("row,col,re,im,sigma\n");
    for i in 0..4 {
        for j in 0..4 {
            let z = rho.entry(i, j);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                labels[i], labels[j], z.re, z.im, result.element_sigmas[i][j]
            ));
        }
    }
    out
}
