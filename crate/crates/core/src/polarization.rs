//! One- and two-photon polarisation algebra.
//!
//! Jones vectors are written in the H/V basis. Two-photon operators act on
//! the ordered product space (HH, HV, VH, VV) where the first slot is the
//! biexciton (XX) photon and the second the exciton (X) photon.
//!
//! Circular handedness is fixed by [`CIRCULAR_SIGN`]: R = (H − iV)/√2 and
//! L = (H + iV)/√2. With this choice the Bloch y-component of L is +1 and
//! Φ+ has ⟨σy⊗σy⟩ = −1 (anti-correlated in the co-circular basis).

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub type Operator2 = Matrix2<Complex64>;
pub type Operator4 = Matrix4<Complex64>;

/// Sign of the V amplitude's imaginary part for R; L carries the opposite sign.
pub const CIRCULAR_SIGN: f64 = -1.0;

const NORM_TOL: f64 = 1e-12;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolLabel {
    pub const ALL: [PolLabel; 6] = [
        PolLabel::H,
        PolLabel::V,
        PolLabel::D,
        PolLabel::A,
        PolLabel::R,
        PolLabel::L,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolLabel::H => "H",
            PolLabel::V => "V",
            PolLabel::D => "D",
            PolLabel::A => "A",
            PolLabel::R => "R",
            PolLabel::L => "L",
        }
    }

    /// Bloch vector (x, y, z) = (⟨σx⟩, ⟨σy⟩, ⟨σz⟩).
    pub fn bloch(self) -> [f64; 3] {
        make_pol(self).bloch()
    }
}

impl fmt::Display for PolLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "H" | "h" => Ok(PolLabel::H),
            "V" | "v" => Ok(PolLabel::V),
            "D" | "d" => Ok(PolLabel::D),
            "A" | "a" => Ok(PolLabel::A),
            "R" | "r" => Ok(PolLabel::R),
            "L" | "l" => Ok(PolLabel::L),
            other => Err(Error::invalid(
                "polarisation label",
                format!("{other:?} is not one of H, V, D, A, R, L"),
            )),
        }
    }
}

/// A normalised Jones vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolVector(Vector2<Complex64>);

impl PolVector {
    /// Normalises the given amplitudes. Fails on a zero vector.
    pub fn new(h: Complex64, v: Complex64) -> Result<Self, Error> {
        let raw = Vector2::new(h, v);
        let norm = raw.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("Jones vector", "zero or non-finite norm"));
        }
        Ok(PolVector(raw / Complex64::from(norm)))
    }

    pub fn amplitudes(&self) -> &Vector2<Complex64> {
        &self.0
    }

    pub fn h(&self) -> Complex64 {
        self.0[0]
    }

    pub fn v(&self) -> Complex64 {
        self.0[1]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn inner(&self, other: &PolVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn bloch(&self) -> [f64; 3] {
        let p = projector(self);
        let [sx, sy, sz] = pauli();
        [
            (p * sx).trace().re,
            (p * sy).trace().re,
            (p * sz).trace().re,
        ]
    }

    /// Linear polarisation at angle `alpha` from H.
    pub fn linear(alpha: f64) -> Self {
        PolVector(Vector2::new(c(alpha.cos(), 0.0), c(alpha.sin(), 0.0)))
    }

    fn from_unit(v: Vector2<Complex64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < NORM_TOL * 10.0);
        PolVector(v)
    }
}

pub fn make_pol(label: PolLabel) -> PolVector {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (h, v) = match label {
        PolLabel::H => (c(1.0, 0.0), c(0.0, 0.0)),
        PolLabel::V => (c(0.0, 0.0), c(1.0, 0.0)),
        PolLabel::D => (c(r, 0.0), c(r, 0.0)),
        PolLabel::A => (c(r, 0.0), c(-r, 0.0)),
        PolLabel::R => (c(r, 0.0), c(0.0, CIRCULAR_SIGN * r)),
        PolLabel::L => (c(r, 0.0), c(0.0, -CIRCULAR_SIGN * r)),
    };
    PolVector::from_unit(Vector2::new(h, v))
}

/// |v⟩⟨v|
pub fn projector(v: &PolVector) -> Operator2 {
    v.0 * v.0.adjoint()
}

/// Kronecker product with `a` on the XX slot and `b` on the X slot.
pub fn tensor(a: &Operator2, b: &Operator2) -> Operator4 {
    let mut out = Operator4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn ket_product(a: &PolVector, b: &PolVector) -> Vector4<Complex64> {
    let (a, b) = (a.amplitudes(), b.amplitudes());
    Vector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
}

/// Pauli matrices (σx, σy, σz).
pub fn pauli() -> [Operator2; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        Operator2::new(z, one, one, z),
        Operator2::new(z, -i, i, z),
        Operator2::new(one, z, z, -one),
    ]
}

pub fn identity2() -> Operator2 {
    Operator2::identity()
}

/// Half-wave plate at physical angle `theta`: rotates the linear polarisation
/// frame by 2θ (H goes to linear at 2θ, V to 2θ + π/2).
pub fn hwp_rotate(v: &PolVector, theta: f64) -> PolVector {
    let (s, co) = (2.0 * theta).sin_cos();
    let m = Operator2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0));
    PolVector::from_unit(m * v.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    Xx,
    X,
}

/// Transposes one tensor factor of a two-photon operator.
pub fn partial_transpose(m: &Operator4, subsystem: Subsystem) -> Operator4 {
    let mut out = Operator4::zeros();
    for i in 0..2 {
        for k in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    let (src_r, src_c) = match subsystem {
                        Subsystem::X => (2 * i + l, 2 * j + k),
                        Subsystem::Xx => (2 * j + k, 2 * i + l),
                    };
                    out[(2 * i + k, 2 * j + l)] = m[(src_r, src_c)];
                }
            }
        }
    }
    out
}

/// Largest |m − m†| entry.
pub fn hermiticity_defect(m: &Operator4) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Detection basis on the exciton arm, as an ordered (co, cross) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum XBasis {
    #[serde(rename = "rect")]
    Rectilinear,
    #[serde(rename = "diag")]
    Diagonal,
    #[serde(rename = "circ")]
    Circular,
}

impl XBasis {
    pub const ALL: [XBasis; 3] = [XBasis::Rectilinear, XBasis::Diagonal, XBasis::Circular];

    /// (co, cross). The co vector's Bloch axis is the analysis axis.
    pub fn pair(self) -> (PolLabel, PolLabel) {
        match self {
            XBasis::Rectilinear => (PolLabel::H, PolLabel::V),
            XBasis::Diagonal => (PolLabel::D, PolLabel::A),
            XBasis::Circular => (PolLabel::L, PolLabel::R),
        }
    }

    pub fn vectors(self) -> (PolVector, PolVector) {
        let (a, b) = self.pair();
        (make_pol(a), make_pol(b))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            XBasis::Rectilinear => "rect",
            XBasis::Diagonal => "diag",
            XBasis::Circular => "circ",
        }
    }
}

impl fmt::Display for XBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for XBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rect" | "rectilinear" => Ok(XBasis::Rectilinear),
            "diag" | "diagonal" => Ok(XBasis::Diagonal),
            "circ" | "circular" => Ok(XBasis::Circular),
            other => Err(Error::invalid(
                "detection basis",
                format!("{other:?} is not one of rect, diag, circ"),
            )),
        }
    }
}

/// Polariser on the XX arm plus a basis on the X arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub xx: PolLabel,
    pub basis: XBasis,
}

impl MeasurementSetting {
    pub fn new(xx: PolLabel, basis: XBasis) -> Self {
        MeasurementSetting { xx, basis }
    }

    pub fn xx_vector(&self) -> PolVector {
        make_pol(self.xx)
    }

    /// Stable short name, e.g. `H_rect`.
    pub fn name(&self) -> String {
        format!("{}_{}", self.xx, self.basis)
    }

    pub fn parse_name(name: &str) -> Result<Self, Error> {
        let (xx, basis) = name
            .split_once('_')
            .ok_or_else(|| Error::invalid("setting", format!("{name:?} is not <XX>_<basis>")))?;
        Ok(MeasurementSetting::new(xx.parse()?, basis.parse()?))
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}
