//! Hermitian eigendecomposition at dimension 4 by cyclic complex Jacobi sweeps.

use nalgebra::Vector4;
use num_complex::Complex64;

use crate::error::Error;
use crate::polarization::{hermiticity_defect, Operator4};

pub const HERMITIAN_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;

#[derive(Debug, Clone)]
pub struct Eigen4 {
    /// Descending.
    pub values: [f64; 4],
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: [Vector4<Complex64>; 4],
}

impl Eigen4 {
    /// Σ λ_k |v_k⟩⟨v_k|
    pub fn reconstruct(&self) -> Operator4 {
        self.map_values(|x| x)
    }

    /// Σ f(λ_k) |v_k⟩⟨v_k|
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Operator4 {
        let mut out = Operator4::zeros();
        for (value, v) in self.values.iter().zip(&self.vectors) {
            out += v * v.adjoint() * Complex64::from(f(*value));
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.values[3]
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a Hermitian 4×4.
pub fn eigh4(m: &Operator4) -> Result<Eigen4, Error> {
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL || !defect.is_finite() {
        return Err(Error::NotHermitian(defect));
    }
    // Symmetrise so rounding in the input does not leak into the rotations.
    let mut a = (m + m.adjoint()) * Complex64::from(0.5);
    let mut w = Operator4::identity();

    let scale = a
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..4)
            .flat_map(|p| (0..4).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let z = a[(p, q)];
                let mag = z.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = z / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // U = diag(1, conj(phase)) on (p, q), followed by a real rotation.
                let mut u = Operator4::identity();
                u[(p, p)] = Complex64::from(cs);
                u[(p, q)] = Complex64::from(sn);
                u[(q, p)] = -phase.conj() * sn;
                u[(q, q)] = phase.conj() * cs;
                a = u.adjoint() * a * u;
                a[(p, q)] = Complex64::from(0.0);
                a[(q, p)] = Complex64::from(0.0);
                w *= u;
            }
        }
    }

    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = std::array::from_fn(|i| a[(order[i], order[i])].re);
    let vectors = std::array::from_fn(|i| w.column(order[i]).into());
    Ok(Eigen4 { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::c;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: a Hermitian n×n matrix A = X + iY has the same
    /// spectrum as the real symmetric [[X, −Y], [Y, X]], each value doubled.
    fn oracle_eigenvalues(m: &Operator4) -> Vec<f64> {
        let mut big = DMatrix::<f64>::zeros(8, 8);
        for i in 0..4 {
            for j in 0..4 {
                let z = m[(i, j)];
                big[(i, j)] = z.re;
                big[(i + 4, j + 4)] = z.re;
                big[(i, j + 4)] = -z.im;
                big[(i + 4, j)] = z.im;
            }
        }
        let mut vals: Vec<f64> = SymmetricEigen::new(big)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        vals.chunks(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng) -> Operator4 {
        let a =
            Operator4::from_fn(|_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        a + a.adjoint()
    }

    fn check_decomposition(m: &Operator4, e: &Eigen4) {
        for k in 0..4 {
            let residual = m * e.vectors[k] - e.vectors[k] * Complex64::from(e.values[k]);
            assert!(residual.norm() <= 1e-9, "residual {}", residual.norm());
            for l in 0..4 {
                let ip = e.vectors[k].dotc(&e.vectors[l]);
                let expect = if k == l { 1.0 } else { 0.0 };
                assert!((ip - c(expect, 0.0)).norm() <= 1e-9);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let back = e.reconstruct();
        assert!((back - m).iter().all(|z| z.norm() <= 1e-9));
    }

    #[test]
    fn diagonal_input() {
        let m = Operator4::from_diagonal(&Vector4::new(
            c(1.0, 0.0),
            c(3.0, 0.0),
            c(4.0, 0.0),
            c(2.0, 0.0),
        ));
        let e = eigh4(&m).unwrap();
        assert_eq!(e.values, [4.0, 3.0, 2.0, 1.0]);
        check_decomposition(&m, &e);
    }

    #[test]
    fn bell_state_is_rank_one() {
        let mut psi = Vector4::zeros();
        psi[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi[3] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let rho = psi * psi.adjoint();
        let e = eigh4(&rho).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!(e.values[1..].iter().all(|v| v.abs() < 1e-12));
        assert!((e.vectors[0].dotc(&psi).norm() - 1.0).abs() < 1e-12);
        check_decomposition(&rho, &e);
    }

    #[test]
    fn matches_real_embedding_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let m = random_hermitian(&mut rng);
            let e = eigh4(&m).unwrap();
            let oracle = oracle_eigenvalues(&m);
            for (got, want) in e.values.iter().zip(&oracle) {
                assert!((got - want).abs() < 1e-8, "{got} vs {want}");
            }
            check_decomposition(&m, &e);
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let m = Operator4::identity() * c(0.25, 0.0);
        let e = eigh4(&m).unwrap();
        assert!(e.values.iter().all(|v| (v - 0.25).abs() < 1e-15));
        check_decomposition(&m, &e);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = Operator4::identity();
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(eigh4(&m), Err(Error::NotHermitian(_))));
    }
}
