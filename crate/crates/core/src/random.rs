//! Seeded random operators for tests, scans and experiments.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hermitian::{CMatrix, HermitianOperator, C64};

fn normal_c64(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| normal_c64(rng))
}

/// Haar-distributed unitary via QR with phase correction.
pub fn haar_unitary(rng: &mut impl Rng, d: usize) -> CMatrix {
    let qr = ginibre(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Uniformly random pure state.
pub fn random_pure_state(rng: &mut impl Rng, d: usize) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| normal_c64(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Density operator `W W† / tr` with `W` a `d × rank` Ginibre matrix.
pub fn random_density(rng: &mut impl Rng, d: usize, rank: usize) -> HermitianOperator {
    let w = ginibre(rng, d, rank.max(1));
    let m = &w * w.adjoint();
    let t = m.trace().re;
    HermitianOperator::from_matrix_unchecked(m / C64::new(t, 0.0))
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> HermitianOperator {
    let g = ginibre(rng, d, d);
    HermitianOperator::from_matrix_unchecked((&g + g.adjoint()) * C64::new(0.5, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..5 {
            let u = haar_unitary(&mut rng, d);
            assert!((&u * u.adjoint() - CMatrix::identity(d, d)).norm() < 1e-12);
        }
    }

    #[test]
    fn random_density_is_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density(&mut rng, 3, 2);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-12);
    }
}
