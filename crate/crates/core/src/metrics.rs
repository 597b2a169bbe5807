//! Entanglement tests on a reconstructed two-photon state.
//!
//! Concurrence and tangle need a positive semidefinite matrix, so they take
//! the projected state; the other four tests read the linear reconstruction
//! directly. Uncertainties come from re-evaluating every test on bootstrap
//! resamples of the tomography counts.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{bell_phi, DensityMatrix, PSD_TOL};
use crate::eigen::eigh4;
use crate::error::Error;
use crate::polarization::{hwp_rotate, make_pol, pauli, tensor, Operator4, PolLabel, Subsystem};
use crate::tomography::{bootstrap_states, std_dev, TomographyResult};

/// Top eigenvalues closer than this are reported as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-9;

pub const QUADRATURE_ANGLES: usize = 360;

/// ⟨Φ+|ρ|Φ+⟩.
pub fn fidelity_phi_plus(rho: &DensityMatrix) -> f64 {
    rho.expectation(bell_phi(0.0).matrix()).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargestEigen {
    pub lambda: f64,
    pub state: [Complex64; 4],
    /// arg(VV / HH) of the eigenvector; `None` when degenerate or HH = 0.
    pub phase: Option<f64>,
    pub degenerate: bool,
}

pub fn largest_eigen(rho: &DensityMatrix) -> LargestEigen {
    let eig = rho.eigen();
    let v = eig.vectors[0];
    let degenerate = eig.values[0] - eig.values[1] < DEGENERACY_GAP;
    let phase = if degenerate || v[0].norm() < 1e-12 {
        None
    } else {
        Some((v[3] / v[0]).arg())
    };
    LargestEigen {
        lambda: eig.values[0],
        state: std::array::from_fn(|i| v[i]),
        phase,
        degenerate,
    }
}

fn sigma_yy() -> Operator4 {
    let y = pauli()[1];
    tensor(&y, &y)
}

/// Wootters concurrence. The λ_k, square roots of the eigenvalues of
/// √ρ ρ̃ √ρ with ρ̃ = (σy⊗σy) ρ* (σy⊗σy), are the singular values of
/// √ρ (σy⊗σy) √ρ*; taking them directly avoids square roots of tiny
/// eigenvalues on low-rank states.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64, Error> {
    let eig = rho.eigen();
    if eig.min() < -PSD_TOL {
        return Err(Error::NotPositive(eig.min()));
    }
    let sqrt_rho = eig.map_values(|l| l.max(0.0).sqrt());
    let a = sqrt_rho * sigma_yy() * sqrt_rho.conjugate();
    let mut l: Vec<f64> = a.singular_values().iter().copied().collect();
    l.sort_by(|x, y| y.total_cmp(x));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

pub fn tangle(rho: &DensityMatrix) -> Result<f64, Error> {
    concurrence(rho).map(|c| c * c)
}

/// ⟨(a·σ)⊗(a·σ)⟩ for the linear polarisation axis at angle `phi`, whose
/// Bloch vector is (sin 2φ, 0, cos 2φ).
pub fn linear_correlation(rho: &DensityMatrix, phi: f64) -> f64 {
    let t = rho.correlation_tensor();
    let a = [(2.0 * phi).sin(), 0.0, (2.0 * phi).cos()];
    let mut sum = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            sum += a[i] * t[(i, j)] * a[j];
        }
    }
    sum
}

/// Mean of [`linear_correlation`] over φ ∈ [0, π). The sin² and cos² terms
/// each average to ½ and the cross term to zero, leaving (T_zz + T_xx)/2.
pub fn average_linear_correlation(rho: &DensityMatrix) -> f64 {
    let t = rho.correlation_tensor();
    (t[(2, 2)] + t[(0, 0)]) / 2.0
}

/// Midpoint-rule mean of [`linear_correlation`] over `n` angles in [0, π).
pub fn average_linear_correlation_quadrature(rho: &DensityMatrix, n: usize) -> f64 {
    (0..n)
        .map(|k| linear_correlation(rho, PI * (k as f64 + 0.5) / n as f64))
        .sum::<f64>()
        / n as f64
}

/// Most negative eigenvalue of the partial transpose.
pub fn peres_min_eig(rho: &DensityMatrix) -> f64 {
    eigh4(&rho.partial_transpose(Subsystem::X))
        .expect("partial transpose of a Hermitian matrix is Hermitian")
        .min()
}

/// Degree of correlation with both photons behind the same half-wave plate
/// at angle θ, analysed in the rotated H/V basis.
pub fn hwp_correlation(rho: &DensityMatrix, theta: f64) -> f64 {
    let h = hwp_rotate(&make_pol(PolLabel::H), theta);
    let v = hwp_rotate(&make_pol(PolLabel::V), theta);
    rho.degree_of_correlation(&h, &h, &v)
}

pub fn hwp_scan(rho: &DensityMatrix, thetas: &[f64]) -> Vec<(f64, f64)> {
    thetas
        .iter()
        .map(|&t| (t, hwp_correlation(rho, t)))
        .collect()
}

/// `n` evenly spaced plate angles covering [0, π/2].
pub fn hwp_angles(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| PI / 2.0 * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementTest {
    Fidelity,
    LargestEigenvalue,
    Concurrence,
    Tangle,
    AverageLinearCorrelation,
    Peres,
}

impl EntanglementTest {
    pub const ALL: [EntanglementTest; 6] = [
        EntanglementTest::Fidelity,
        EntanglementTest::LargestEigenvalue,
        EntanglementTest::Concurrence,
        EntanglementTest::Tangle,
        EntanglementTest::AverageLinearCorrelation,
        EntanglementTest::Peres,
    ];

    pub fn description(self) -> &'static str {
        match self {
            EntanglementTest::Fidelity => "(|HH> + |VV>)/sqrt2 projection",
            EntanglementTest::LargestEigenvalue => "Largest eigenvalue",
            EntanglementTest::Concurrence => "Concurrence",
            EntanglementTest::Tangle => "Tangle",
            EntanglementTest::AverageLinearCorrelation => "Average linear correlation",
            EntanglementTest::Peres => "Peres",
        }
    }

    pub fn limit(self) -> f64 {
        match self {
            EntanglementTest::Fidelity
            | EntanglementTest::LargestEigenvalue
            | EntanglementTest::AverageLinearCorrelation => 0.5,
            _ => 0.0,
        }
    }

    pub fn limit_label(self) -> &'static str {
        match self {
            EntanglementTest::Fidelity | EntanglementTest::AverageLinearCorrelation => ">0.5",
            EntanglementTest::LargestEigenvalue => ">0.5*",
            EntanglementTest::Concurrence | EntanglementTest::Tangle => ">0",
            EntanglementTest::Peres => "<0",
        }
    }

    /// True when `value` lies on the entangled side of the limit.
    pub fn passes(self, value: f64) -> bool {
        match self {
            EntanglementTest::Peres => value < self.limit(),
            _ => value > self.limit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub fidelity: f64,
    pub largest_eigenvalue: f64,
    pub concurrence: f64,
    pub tangle: f64,
    pub average_linear_correlation: f64,
    pub peres_min_eig: f64,
}

impl MetricValues {
    /// Concurrence and tangle from `physical`, the rest from `linear`.
    pub fn evaluate(linear: &DensityMatrix, physical: &DensityMatrix) -> Result<Self, Error> {
        let c = concurrence(physical)?;
        Ok(MetricValues {
            fidelity: fidelity_phi_plus(linear),
            largest_eigenvalue: largest_eigen(linear).lambda,
            concurrence: c,
            tangle: c * c,
            average_linear_correlation: average_linear_correlation(linear),
            peres_min_eig: peres_min_eig(linear),
        })
    }

    pub fn get(&self, test: EntanglementTest) -> f64 {
        match test {
            EntanglementTest::Fidelity => self.fidelity,
            EntanglementTest::LargestEigenvalue => self.largest_eigenvalue,
            EntanglementTest::Concurrence => self.concurrence,
            EntanglementTest::Tangle => self.tangle,
            EntanglementTest::AverageLinearCorrelation => self.average_linear_correlation,
            EntanglementTest::Peres => self.peres_min_eig,
        }
    }

    fn from_fn(f: impl Fn(EntanglementTest) -> f64) -> Self {
        MetricValues {
            fidelity: f(EntanglementTest::Fidelity),
            largest_eigenvalue: f(EntanglementTest::LargestEigenvalue),
            concurrence: f(EntanglementTest::Concurrence),
            tangle: f(EntanglementTest::Tangle),
            average_linear_correlation: f(EntanglementTest::AverageLinearCorrelation),
            peres_min_eig: f(EntanglementTest::Peres),
        }
    }

    pub fn zero() -> Self {
        MetricValues::from_fn(|_| 0.0)
    }
}

/// Standard deviation of every test over bootstrap resamples.
pub fn bootstrap_metric_sigmas(
    states: &[(DensityMatrix, DensityMatrix)],
) -> Result<MetricValues, Error> {
    let values = states
        .par_iter()
        .map(|(lin, phys)| MetricValues::evaluate(lin, phys))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricValues::from_fn(|t| {
        std_dev(values.iter().map(|v| v.get(t)))
    }))
}

/// Standard deviation of the HWP scan at each angle over bootstrap resamples.
pub fn hwp_scan_sigmas(states: &[(DensityMatrix, DensityMatrix)], thetas: &[f64]) -> Vec<f64> {
    let scans: Vec<Vec<f64>> = states
        .par_iter()
        .map(|(lin, _)| thetas.iter().map(|&t| hwp_correlation(lin, t)).collect())
        .collect();
    (0..thetas.len())
        .map(|k| std_dev(scans.iter().map(|s| s[k])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub test: EntanglementTest,
    pub description: String,
    pub limit: String,
    pub value: f64,
    pub sigma: f64,
    pub passes: bool,
    /// |value − limit| / sigma; `None` when sigma is zero.
    pub sigmas_clear: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestTable {
    pub rows: Vec<TestRow>,
    /// Arithmetic mean of the defined `sigmas_clear` values.
    pub mean_sigmas_clear: Option<f64>,
}

impl TestTable {
    pub fn new(values: &MetricValues, sigmas: &MetricValues) -> Self {
        let rows: Vec<TestRow> = EntanglementTest::ALL
            .iter()
            .map(|&t| {
                let (value, sigma) = (values.get(t), sigmas.get(t).max(0.0));
                TestRow {
                    test: t,
                    description: t.description().to_string(),
                    limit: t.limit_label().to_string(),
                    value,
                    sigma,
                    passes: t.passes(value),
                    sigmas_clear: (sigma > 0.0).then(|| (value - t.limit()).abs() / sigma),
                }
            })
            .collect();
        let clear: Vec<f64> = rows.iter().filter_map(|r| r.sigmas_clear).collect();
        let mean_sigmas_clear =
            (!clear.is_empty()).then(|| clear.iter().sum::<f64>() / clear.len() as f64);
        TestTable {
            rows,
            mean_sigmas_clear,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.passes)
    }

    pub fn row(&self, test: EntanglementTest) -> &TestRow {
        self.rows
            .iter()
            .find(|r| r.test == test)
            .expect("all six rows present")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<32} {:<6} {:>16}  {:<4} {:>8}",
            "Test", "Limit", "Result", "Pass", "Sigmas"
        );
        for r in &self.rows {
            let result = format!("{:.3} ± {:.3}", r.value, r.sigma);
            let clear = r
                .sigmas_clear
                .map_or_else(|| "-".to_string(), |s| format!("{s:.1}"));
            let pass = if r.passes { "yes" } else { "no" };
            let _ = writeln!(
                out,
                "{:<32} {:<6} {:>16}  {:<4} {:>8}",
                r.description, r.limit, result, pass, clear
            );
        }
        match self.mean_sigmas_clear {
            Some(m) => {
                let _ = writeln!(out, "Average certainty: {m:.1} standard deviations");
            }
            None => out.push_str("Average certainty: undefined (no uncertainties)\n"),
        }
        out.push_str("* for an unpolarised source\n");
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("test,limit,value,sigma,passes,sigmas_clear\n");
        for r in &self.rows {
            let clear = r.sigmas_clear.map_or_else(String::new, |s| s.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.description, r.limit, r.value, r.sigma, r.passes, clear
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("test table serialises")
    }
}

/// Table for a tomography result. Sigmas come from the stored bootstrap
/// settings when the result carries counts, and are zero otherwise.
pub fn run_all_tests(result: &TomographyResult) -> Result<TestTable, Error> {
    let values = MetricValues::evaluate(&result.rho_linear, &result.rho_physical)?;
    let sigmas = match (&result.bootstrap, &result.input) {
        (Some(b), Some(input)) if input.has_counts() => {
            bootstrap_metric_sigmas(&bootstrap_states(input, b.resamples, b.seed)?)?
        }
        _ => MetricValues::zero(),
    };
    Ok(TestTable::new(&values, &sigmas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{emitted_state, DotParams};
    use crate::density::werner;
    use crate::polarization::{c, identity2, projector, Operator2, PolVector};
    use crate::tomography::{tomography, BootstrapSettings, TomographyInput};
    use nalgebra::{SMatrix, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const WERNER_PS: [f64; 6] = [0.0, 0.25, 1.0 / 3.0, 0.5, 0.6, 1.0];

    fn random_state(rng: &mut ChaCha8Rng, rank: usize) -> DensityMatrix {
        let mut m = Operator4::zeros();
        for _ in 0..rank {
            let v = Vector4::from_fn(|_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            m += v * v.adjoint();
        }
        DensityMatrix::new(m / m.trace()).unwrap()
    }

    fn random_unitary(rng: &mut ChaCha8Rng) -> Operator2 {
        let n: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let s = pauli();
        let gen = (s[0] * c(n[0], 0.0) + s[1] * c(n[1], 0.0) + s[2] * c(n[2], 0.0)) / c(len, 0.0);
        let global = Complex64::from_polar(1.0, rng.random_range(0.0..6.3));
        (identity2() * c(len.cos(), 0.0) - gen * c(0.0, len.sin())) * global
    }

    fn rotate(rho: &DensityMatrix, u: &Operator4) -> DensityMatrix {
        DensityMatrix::new(u * rho.matrix() * u.adjoint()).unwrap()
    }

    /// Square roots of the spectrum of the non-Hermitian ρρ̃, found by real
    /// Schur decomposition of its 8×8 real embedding (each value appears twice).
    fn concurrence_oracle(rho: &DensityMatrix) -> f64 {
        let m = rho.matrix() * sigma_yy() * rho.matrix().conjugate() * sigma_yy();
        let big = SMatrix::<f64, 8, 8>::from_fn(|i, j| {
            let z = m[(i % 4, j % 4)];
            match (i < 4, j < 4) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let mut ev: Vec<f64> = big
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re.max(0.0).sqrt())
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let l: Vec<f64> = ev.chunks(2).map(|p| (p[0] + p[1]) / 2.0).collect();
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    /// Pure state oracle: C = 2|αδ − βγ|.
    fn pure_concurrence(v: &Vector4<Complex64>) -> f64 {
        let v = v / c(v.norm(), 0.0);
        2.0 * (v[0] * v[3] - v[1] * v[2]).norm()
    }

    #[test]
    fn trivial_values() {
        let mixed = DensityMatrix::maximally_mixed();
        assert!((fidelity_phi_plus(&bell_phi(0.0)) - 1.0).abs() < 1e-15);
        assert!((fidelity_phi_plus(&mixed) - 0.25).abs() < 1e-15);
        assert!((concurrence(&bell_phi(1.3)).unwrap() - 1.0).abs() < 1e-10);
        assert!(concurrence(&mixed).unwrap().abs() < 1e-10);
        assert!((peres_min_eig(&bell_phi(0.0)) + 0.5).abs() < 1e-12);
        assert!((average_linear_correlation(&bell_phi(0.0)) - 1.0).abs() < 1e-15);
        let top = largest_eigen(&mixed);
        assert!((top.lambda - 0.25).abs() < 1e-12);
        assert!(top.degenerate && top.phase.is_none());
    }

    #[test]
    fn eigenvector_phase() {
        let top = largest_eigen(&bell_phi(0.1 * PI));
        assert!((top.lambda - 1.0).abs() < 1e-12);
        assert!(!top.degenerate);
        assert!((top.phase.unwrap().abs() - 0.1 * PI).abs() < 1e-10);
    }

    #[test]
    fn werner_closed_forms() {
        for p in WERNER_PS {
            let rho = werner(p).unwrap();
            let m = MetricValues::evaluate(&rho, &rho).unwrap();
            assert!(
                (m.concurrence - ((3.0 * p - 1.0) / 2.0).max(0.0)).abs() < 1e-10,
                "p={p}"
            );
            assert!(
                (m.peres_min_eig - (1.0 - 3.0 * p) / 4.0).abs() < 1e-10,
                "p={p}"
            );
            assert!(
                (m.largest_eigenvalue - (1.0 + 3.0 * p) / 4.0).abs() < 1e-10,
                "p={p}"
            );
            assert!((m.fidelity - (1.0 + 3.0 * p) / 4.0).abs() < 1e-10, "p={p}");
            assert!((m.average_linear_correlation - p).abs() < 1e-12);
        }
    }

    #[test]
    fn werner_tests_monotone_in_p() {
        let grid: Vec<MetricValues> = (0..=50)
            .map(|k| {
                let rho = werner(k as f64 / 50.0).unwrap();
                MetricValues::evaluate(&rho, &rho).unwrap()
            })
            .collect();
        for w in grid.windows(2) {
            for t in EntanglementTest::ALL {
                let (a, b) = (w[0].get(t), w[1].get(t));
                match t {
                    EntanglementTest::Peres => assert!(b <= a + 1e-12),
                    _ => assert!(b >= a - 1e-12),
                }
            }
        }
    }

    #[test]
    fn concurrence_matches_schur_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..300 {
            let rho = random_state(&mut rng, 1 + k % 4);
            let got = concurrence(&rho).unwrap();
            assert!((got - concurrence_oracle(&rho)).abs() < 1e-6, "{got}");
        }
    }

    #[test]
    fn concurrence_of_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let v = Vector4::from_fn(|_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let rho = DensityMatrix::pure(&v).unwrap();
            assert!((concurrence(&rho).unwrap() - pure_concurrence(&v)).abs() < 1e-6);
        }
    }

    #[test]
    fn concurrence_rejects_indefinite_input() {
        let m = Operator4::from_diagonal(&Vector4::new(
            c(0.6, 0.0),
            c(0.6, 0.0),
            c(0.0, 0.0),
            c(-0.2, 0.0),
        ));
        let rho = DensityMatrix::new(m).unwrap();
        assert!(matches!(concurrence(&rho), Err(Error::NotPositive(_))));
        assert!(tangle(&rho).is_err());
    }

    #[test]
    fn product_states_are_unentangled() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let a = projector(
                &PolVector::new(c(rng.random(), rng.random()), c(rng.random(), rng.random()))
                    .unwrap(),
            );
            let b = projector(
                &PolVector::new(c(rng.random(), 0.0), c(rng.random(), rng.random())).unwrap(),
            );
            let rho = DensityMatrix::product(&a, &b).unwrap();
            assert!(concurrence(&rho).unwrap() < 1e-6);
            assert!(tangle(&rho).unwrap() < 1e-10);
            assert!(peres_min_eig(&rho) > -1e-10);
        }
    }

    #[test]
    fn tangle_is_concurrence_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for k in 0..200 {
            let rho = random_state(&mut rng, 1 + k % 4);
            let cc = concurrence(&rho).unwrap();
            assert_eq!(tangle(&rho).unwrap(), cc * cc);
        }
    }

    #[test]
    fn peres_and_concurrence_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut entangled = 0;
        for k in 0..1000 {
            let w = rng.random_range(0.0..1.0);
            let rho = DensityMatrix::mixture(&[
                (w, &random_state(&mut rng, 1 + k % 4)),
                (1.0 - w, &DensityMatrix::maximally_mixed()),
            ])
            .unwrap();
            let ent_pt = peres_min_eig(&rho) < -1e-10;
            let ent_c = concurrence(&rho).unwrap() > 1e-10;
            assert_eq!(ent_pt, ent_c, "{:?}", rho.matrix());
            entangled += ent_pt as usize;
        }
        assert!(entangled > 100 && entangled < 900, "{entangled}");
    }

    #[test]
    fn invariant_under_local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for k in 0..200 {
            let rho = random_state(&mut rng, 1 + k % 4);
            let (ua, ub) = (random_unitary(&mut rng), random_unitary(&mut rng));
            let u = tensor(&ua, &ub);
            let rotated = rotate(&rho, &u);
            assert!((concurrence(&rotated).unwrap() - concurrence(&rho).unwrap()).abs() < 1e-10);
            assert!((peres_min_eig(&rotated) - peres_min_eig(&rho)).abs() < 1e-10);
            // Fidelity against the target rotated along with the state.
            let target = rotate(&bell_phi(0.0), &u);
            assert!(
                (rotated.expectation(target.matrix()).re - fidelity_phi_plus(&rho)).abs() < 1e-12
            );
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k in 0..100 {
            let rho = random_state(&mut rng, 1 + k % 4);
            let closed = average_linear_correlation(&rho);
            assert!(
                (average_linear_correlation_quadrature(&rho, QUADRATURE_ANGLES) - closed).abs()
                    < 1e-9
            );
        }
    }

    fn classical_mixture() -> DensityMatrix {
        let hh = DensityMatrix::product(
            &projector(&make_pol(PolLabel::H)),
            &projector(&make_pol(PolLabel::H)),
        )
        .unwrap();
        let vv = DensityMatrix::product(
            &projector(&make_pol(PolLabel::V)),
            &projector(&make_pol(PolLabel::V)),
        )
        .unwrap();
        DensityMatrix::mixture(&[(0.5, &hh), (0.5, &vv)]).unwrap()
    }

    #[test]
    fn hwp_scans() {
        let thetas = hwp_angles(91);
        for (_, cc) in hwp_scan(&bell_phi(0.0), &thetas) {
            assert!((cc - 1.0).abs() < 1e-12);
        }
        for (_, cc) in hwp_scan(&DensityMatrix::maximally_mixed(), &thetas) {
            assert!(cc.abs() < 1e-12);
        }
        let classical = classical_mixture();
        for (t, cc) in hwp_scan(&classical, &thetas) {
            assert!((cc - (4.0 * t).cos().powi(2)).abs() < 1e-12, "θ={t}");
        }
        assert!((average_linear_correlation(&classical) - 0.5).abs() < 1e-15);
    }

    /// Bell-diagonal state from its three correlation coefficients.
    fn bell_diagonal(t: [f64; 3]) -> DensityMatrix {
        let s = pauli();
        let mut m = Operator4::identity();
        for i in 0..3 {
            m += tensor(&s[i], &s[i]) * c(t[i], 0.0);
        }
        DensityMatrix::new(m * c(0.25, 0.0)).unwrap()
    }

    #[test]
    fn bell_diagonal_scan_period_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..50 {
            // Sample inside the tetrahedron of valid Bell-diagonal states.
            let rho = loop {
                let r = bell_diagonal(std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
                if r.is_physical(0.0) {
                    break r;
                }
            };
            let n = 400;
            let thetas: Vec<f64> = (0..n)
                .map(|k| PI / 4.0 * (k as f64 + 0.5) / n as f64)
                .collect();
            let scan = hwp_scan(&rho, &thetas);
            for (t, cc) in &scan {
                assert!((hwp_correlation(&rho, t + PI / 4.0) - cc).abs() < 1e-12);
            }
            let mean = scan.iter().map(|(_, cc)| cc).sum::<f64>() / n as f64;
            assert!((mean - average_linear_correlation(&rho)).abs() < 1e-9);
        }
    }

    #[test]
    fn table_rows_and_limits() {
        let ideal = TestTable::new(
            &MetricValues::evaluate(&bell_phi(0.0), &bell_phi(0.0)).unwrap(),
            &MetricValues::zero(),
        );
        assert!(ideal.all_pass());
        assert!(ideal.rows.iter().all(|r| r.sigmas_clear.is_none()));
        assert_eq!(ideal.mean_sigmas_clear, None);
        let labels: Vec<&str> = ideal.rows.iter().map(|r| r.limit.as_str()).collect();
        assert_eq!(labels, [">0.5", ">0.5*", ">0", ">0", ">0.5", "<0"]);
        let mixed = DensityMatrix::maximally_mixed();
        let none = TestTable::new(
            &MetricValues::evaluate(&mixed, &mixed).unwrap(),
            &MetricValues::zero(),
        );
        assert!(none.rows.iter().all(|r| !r.passes));
        let text = ideal.to_text();
        assert!(text.contains("Peres") && text.contains("<0"));
        assert_eq!(ideal.to_csv().lines().count(), 7);
        let back: TestTable = serde_json::from_str(&ideal.to_json()).unwrap();
        assert_eq!(back, ideal);
    }

    #[test]
    fn sigmas_clear_and_mean() {
        let values = MetricValues {
            fidelity: 0.7,
            largest_eigenvalue: 0.72,
            concurrence: 0.44,
            tangle: 0.194,
            average_linear_correlation: 0.624,
            peres_min_eig: -0.219,
        };
        let sigmas = MetricValues {
            fidelity: 0.02,
            largest_eigenvalue: 0.0,
            ..MetricValues::from_fn(|_| 0.01)
        };
        let table = TestTable::new(&values, &sigmas);
        assert!((table.row(EntanglementTest::Fidelity).sigmas_clear.unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(
            table.row(EntanglementTest::LargestEigenvalue).sigmas_clear,
            None
        );
        let want = (10.0 + 44.0 + 19.4 + 12.4 + 21.9) / 5.0;
        assert!((table.mean_sigmas_clear.unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn measured_dot_state_passes_all_tests() {
        let rho = emitted_state(&DotParams::measured_dot()).unwrap();
        let input = TomographyInput::with_expected_counts(&rho, 500);
        let result = tomography(
            &input,
            Some(BootstrapSettings {
                resamples: 200,
                seed: 4,
            }),
        )
        .unwrap();
        let table = run_all_tests(&result).unwrap();
        assert!(table.all_pass(), "{}", table.to_text());
        let f = table.row(EntanglementTest::Fidelity);
        assert!(
            (f.value - 0.70).abs() < 0.03 && f.sigma > 0.011 && f.sigma < 0.044,
            "{f:?}"
        );
    }
}
