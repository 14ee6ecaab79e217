//! Random test objects: symmetric matrices, sp elements, Siegel points, tangents.

use rand::Rng;

use crate::symplectic::{mat_exp, siegel_to_j_unchecked, symmetrize, CompatibleJ, Mat, SiegelPoint, SpAlgebra, SympMatrix};

/// Symmetric matrix with entries uniform in [-scale, scale].
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Mat {
    let m = Mat::from_fn(dim, dim, |_, _| rng.random_range(-scale..=scale));
    symmetrize(&m)
}

pub fn random_sp_algebra<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> SpAlgebra {
    SpAlgebra::from_symmetric(&random_symmetric(rng, 2 * n, scale))
}

pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> SympMatrix {
    let x = random_sp_algebra(rng, n, scale);
    SympMatrix::from_unchecked(mat_exp(&x.m).expect("small generator"))
}

/// Siegel point with X entries in [-spread, spread] and Y = exp(S), |S| <= spread.
pub fn random_siegel<R: Rng + ?Sized>(rng: &mut R, n: usize, spread: f64) -> SiegelPoint {
    let x = random_symmetric(rng, n, spread);
    let s = random_symmetric(rng, n, spread);
    let y = symmetrize(&mat_exp(&s).expect("small exponent"));
    SiegelPoint { x, y }
}

pub fn random_compatible_j<R: Rng + ?Sized>(rng: &mut R, n: usize, spread: f64) -> CompatibleJ {
    siegel_to_j_unchecked(&random_siegel(rng, n, spread))
}

/// Tangent vector [W, J] at J for a random W in sp(2n).
pub fn random_tangent<R: Rng + ?Sized>(rng: &mut R, j: &CompatibleJ, scale: f64) -> Mat {
    let w = random_sp_algebra(rng, j.n(), scale).m;
    &w * &j.m - &j.m * &w
}
