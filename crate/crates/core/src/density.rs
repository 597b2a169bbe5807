//! Two-photon density matrices.

use nalgebra::{Matrix3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{eigh4, Eigen4};
use crate::error::Error;
use crate::polarization::{
    c, hermiticity_defect, ket_product, partial_transpose, pauli, projector, tensor,
    MeasurementSetting, Operator2, Operator4, PolVector, Subsystem,
};

/// Hermiticity and trace tolerance for constructed matrices.
pub const EXACT_TOL: f64 = 1e-10;
/// Minimum eigenvalue still counted as physical.
pub const PSD_TOL: f64 = 1e-8;

pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

/// Hermitian, unit-trace 4×4 operator in the (HH, HV, VH, VV) basis.
///
/// Positivity is not enforced at construction: linear reconstructions from
/// noisy data may carry small negative eigenvalues. Use [`is_physical`]
/// where it matters.
///
/// [`is_physical`]: DensityMatrix::is_physical
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixJson", into = "DensityMatrixJson")]
pub struct DensityMatrix(Operator4);

impl DensityMatrix {
    pub fn new(m: Operator4) -> Result<Self, Error> {
        let defect = hermiticity_defect(&m);
        if !(defect <= EXACT_TOL) {
            return Err(Error::NotHermitian(defect));
        }
        let tr = m.trace();
        if !((tr - c(1.0, 0.0)).norm() <= EXACT_TOL) {
            return Err(Error::BadTrace(tr.re));
        }
        Ok(DensityMatrix(m))
    }

    pub(crate) fn from_trusted(m: Operator4) -> Self {
        debug_assert!(hermiticity_defect(&m) < 1e-9);
        DensityMatrix(m)
    }

    pub fn pure(psi: &Vector4<Complex64>) -> Result<Self, Error> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::invalid("state vector", "zero norm"));
        }
        let psi = psi / Complex64::from(n);
        Ok(DensityMatrix(psi * psi.adjoint()))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Operator4::identity() * c(0.25, 0.0))
    }

    /// ρA ⊗ ρB.
    pub fn product(a: &Operator2, b: &Operator2) -> Result<Self, Error> {
        DensityMatrix::new(tensor(a, b))
    }

    /// Convex mixture Σ w_k ρ_k; weights must be non-negative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self, Error> {
        let mut out = Operator4::zeros();
        let mut total = 0.0;
        for (w, rho) in parts {
            if !(*w >= 0.0) {
                return Err(Error::invalid("mixture weight", format!("{w} < 0")));
            }
            total += w;
            out += rho.0 * Complex64::from(*w);
        }
        if (total - 1.0).abs() > EXACT_TOL {
            return Err(Error::invalid("mixture weights", format!("sum to {total}")));
        }
        Ok(DensityMatrix(out))
    }

    pub fn matrix(&self) -> &Operator4 {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn eigen(&self) -> Eigen4 {
        eigh4(&self.0).expect("density matrix is Hermitian by construction")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min()
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Tr[ρ O]
    pub fn expectation(&self, op: &Operator4) -> Complex64 {
        (self.0 * op).trace()
    }

    pub fn partial_transpose(&self, subsystem: Subsystem) -> Operator4 {
        partial_transpose(&self.0, subsystem)
    }

    /// Reduced state of the XX (first) or X (second) photon.
    pub fn reduced(&self, keep: Subsystem) -> Operator2 {
        let mut out = Operator2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[(i, j)] += match keep {
                        Subsystem::Xx => self.0[(2 * i + k, 2 * j + k)],
                        Subsystem::X => self.0[(2 * k + i, 2 * k + j)],
                    };
                }
            }
        }
        out
    }

    /// Two-photon Stokes correlations T_ij = ⟨σ_i ⊗ σ_j⟩ with axes (x, y, z).
    pub fn correlation_tensor(&self) -> Matrix3<f64> {
        let s = pauli();
        Matrix3::from_fn(|i, j| self.expectation(&tensor(&s[i], &s[j])).re)
    }

    /// Joint detection probability Tr[ρ (|a⟩⟨a| ⊗ |b⟩⟨b|)].
    pub fn joint_probability(&self, xx: &PolVector, x: &PolVector) -> f64 {
        let ket = ket_product(xx, x);
        (ket.adjoint() * self.0 * ket)[(0, 0)].re.max(0.0)
    }

    /// Degree of polarisation correlation for an XX analyser `xx` against the
    /// X pair (`co`, `cross`), each coincidence rate normalised by the product
    /// of its singles as side peaks would do.
    pub fn degree_of_correlation(&self, xx: &PolVector, co: &PolVector, cross: &PolVector) -> f64 {
        let px = self.reduced(Subsystem::Xx);
        let pxx_single = (projector(xx) * px).trace().re;
        let rx = self.reduced(Subsystem::X);
        let g = |x: &PolVector| {
            let single = (projector(x) * rx).trace().re;
            self.joint_probability(xx, x) / (pxx_single * single)
        };
        let (g_co, g_cross) = (g(co), g(cross));
        (g_co - g_cross) / (g_co + g_cross)
    }

    pub fn setting_correlation(&self, setting: &MeasurementSetting) -> f64 {
        let (co, cross) = setting.basis.vectors();
        self.degree_of_correlation(&setting.xx_vector(), &co, &cross)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (self.0 - other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Pure state (|HH⟩ + e^{iφ}|VV⟩)/√2.
///
/// The VV amplitude carries the phase, so ρ[HH][VV] = e^{−iφ}/2.
pub fn bell_phi(phase: f64) -> DensityMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let psi = Vector4::new(
        c(r, 0.0),
        c(0.0, 0.0),
        c(0.0, 0.0),
        Complex64::from_polar(r, phase),
    );
    DensityMatrix(psi * psi.adjoint())
}

/// Werner state p·Φ+ + (1−p)·I/4.
pub fn werner(p: f64) -> Result<DensityMatrix, Error> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(
            "Werner weight",
            format!("{p} outside [0, 1]"),
        ));
    }
    DensityMatrix::mixture(&[
        (p, &bell_phi(0.0)),
        (1.0 - p, &DensityMatrix::maximally_mixed()),
    ])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub basis: Vec<String>,
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

impl From<DensityMatrix> for DensityMatrixJson {
    fn from(rho: DensityMatrix) -> Self {
        let m = rho.0;
        DensityMatrixJson {
            basis: BASIS_LABELS.iter().map(|s| s.to_string()).collect(),
            re: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)].re)),
            im: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)].im)),
        }
    }
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(doc: DensityMatrixJson) -> Result<Self, Self::Error> {
        if doc.basis.iter().map(String::as_str).ne(BASIS_LABELS) {
            return Err(Error::invalid(
                "density matrix basis",
                format!("expected {BASIS_LABELS:?}, got {:?}", doc.basis),
            ));
        }
        DensityMatrix::new(Operator4::from_fn(|i, j| c(doc.re[i][j], doc.im[i][j])))
    }
}
