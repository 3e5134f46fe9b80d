//! Seeded random matrix ensembles. Every function takes the generator
//! explicitly; nothing here touches global state.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrixlab::{CMatrix, HermitianMatrix, C64};

/// Complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix: i.i.d. complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(complex_normal(rng));
    }
    CMatrix::from_row_major(rows, cols, data).expect("gaussian samples are finite")
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    HermitianMatrix::symmetrize(ginibre(n, n, rng))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(n, n, rng).into_dmatrix();
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        } else {
            C64::new(0.0, 0.0)
        }
    });
    CMatrix::from_dmatrix(q * phases).expect("finite")
}

/// Full-rank density matrix `G G^dagger / tr(G G^dagger)`.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = ginibre(n, n, rng);
    let p = &g * &g.adjoint();
    let t = p.trace().re;
    HermitianMatrix::symmetrize(p.scale_real(1.0 / t))
}

/// Random POVM with `outcomes` full-rank elements on `C^n`:
/// `E_a = S^{-1/2} G_a S^{-1/2}` with `S = sum_a G_a`, `G_a` Wishart.
pub fn random_povm<R: Rng + ?Sized>(n: usize, outcomes: usize, rng: &mut R) -> Vec<HermitianMatrix> {
    let raw: Vec<CMatrix> = (0..outcomes)
        .map(|_| {
            let g = ginibre(n, n, rng);
            &g * &g.adjoint()
        })
        .collect();
    let mut sum = CMatrix::zeros(n, n);
    for g in &raw {
        sum = &sum + g;
    }
    let eig = crate::matrixlab::hermitian_eig(&HermitianMatrix::symmetrize(sum))
        .expect("Wishart sums are well conditioned");
    let inv_sqrt = eig.map_spectrum(|l| 1.0 / l.sqrt());
    raw.iter()
        .map(|g| HermitianMatrix::symmetrize(&(inv_sqrt.as_matrix() * g) * inv_sqrt.as_matrix()))
        .collect()
}

/// Random probability vector (normalized exponentials).
pub fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = random_unitary(7, &mut rng);
        let uu = &u.adjoint() * &u;
        assert!((&uu - &CMatrix::identity(7)).norm_max() < 1e-13);
    }

    #[test]
    fn povm_is_complete_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let povm = random_povm(4, 3, &mut rng);
        let mut s = CMatrix::zeros(4, 4);
        for e in &povm {
            assert!(e.min_eigenvalue().unwrap() > 0.0);
            s = &s + e.as_matrix();
        }
        assert!((&s - &CMatrix::identity(4)).norm_max() < 1e-13);
    }

    #[test]
    fn density_has_unit_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_density(5, &mut rng);
        assert!((r.trace_real() - 1.0).abs() < 1e-14);
        assert!(r.min_eigenvalue().unwrap() > 0.0);
    }
}
