//! Dense linear algebra for Sp(2n,R), sp(2n,R), U(n) and compatible complex structures.
//!
//! Convention: coordinates are stacked as (p, q) and J0 = [[0, -I], [I, 0]].

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{QmError, Result};

pub type Mat = DMatrix<f64>;
pub type C64 = Complex<f64>;

/// Default tolerances for membership checks.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub sp: f64,
    pub pd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { sp: 1e-9, pd: 1e-12 }
    }
}

/// The standard complex structure J0 on R^{2n}.
pub fn j0(n: usize) -> Mat {
    let mut m = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    m
}

fn half_dim(m: &Mat) -> Result<usize> {
    if !m.is_square() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
        return Err(QmError::Invalid(format!(
            "expected a 2n x 2n matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows() / 2)
}

fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Relative residual of M^T J0 M = J0.
pub fn symplectic_residual(m: &Mat) -> f64 {
    let n = m.nrows() / 2;
    let j = j0(n);
    (m.transpose() * &j * m - &j).norm() / (1.0 + m.norm_squared())
}

/// Relative residual of X^T J0 + J0 X = 0.
pub fn algebra_residual(x: &Mat) -> f64 {
    let n = x.nrows() / 2;
    let j = j0(n);
    (x.transpose() * &j + &j * x).norm() / (1.0 + x.norm())
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Applies f to the eigenvalues of a symmetric matrix.
pub fn sym_apply(s: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(s));
    let d = eig.eigenvalues.map(f);
    let v = &eig.eigenvectors;
    v * Mat::from_diagonal(&d) * v.transpose()
}

/// S^a for symmetric positive-definite S.
pub fn sym_pow(s: &Mat, a: f64) -> Mat {
    sym_apply(s, |l| l.powf(a))
}

pub fn min_eigenvalue(s: &Mat) -> f64 {
    SymmetricEigen::new(symmetrize(s)).eigenvalues.min()
}

/// An element of Sp(2n,R).
#[derive(Debug, Clone, PartialEq)]
pub struct SympMatrix {
    pub m: Mat,
}

impl SympMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        Self::with_tol(m, Tolerances::default().sp)
    }

    pub fn with_tol(m: Mat, tol: f64) -> Result<Self> {
        half_dim(&m)?;
        let r = symplectic_residual(&m);
        if !all_finite(&m) || !(r <= tol) {
            return Err(QmError::NotSymplectic(r));
        }
        Ok(SympMatrix { m })
    }

    /// Wraps a matrix known to be symplectic (e.g. a product or exponential).
    pub fn from_unchecked(m: Mat) -> Self {
        SympMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        SympMatrix { m: Mat::identity(2 * n, 2 * n) }
    }

    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    /// Exact symplectic inverse -J0 M^T J0.
    pub fn inverse(&self) -> Self {
        let j = j0(self.n());
        SympMatrix { m: -(&j * self.m.transpose() * &j) }
    }

    pub fn mul(&self, other: &SympMatrix) -> Self {
        SympMatrix { m: &self.m * &other.m }
    }

    /// Conjugation action g J g^{-1}.
    pub fn act_j(&self, j: &CompatibleJ) -> CompatibleJ {
        CompatibleJ { m: &self.m * &j.m * self.inverse().m }
    }

    /// Fractional-linear action (AZ + B)(CZ + D)^{-1}.
    pub fn act_siegel(&self, z: &SiegelPoint) -> SiegelPoint {
        let n = self.n();
        let blk = |r: usize, c: usize| self.m.view((r * n, c * n), (n, n)).map(|v| C64::new(v, 0.0));
        let (a, b, c, d) = (blk(0, 0), blk(0, 1), blk(1, 0), blk(1, 1));
        let zc = z.complex();
        let num = &a * &zc + &b;
        let den = &c * &zc + &d;
        let inv = den.try_inverse().expect("CZ + D is invertible for Z in the Siegel space");
        let w = num * inv;
        SiegelPoint {
            x: symmetrize(&w.map(|v| v.re)),
            y: symmetrize(&w.map(|v| v.im)),
        }
    }
}

/// An element of sp(2n,R).
#[derive(Debug, Clone, PartialEq)]
pub struct SpAlgebra {
    pub m: Mat,
}

impl SpAlgebra {
    pub fn new(m: Mat) -> Result<Self> {
        half_dim(&m)?;
        let r = algebra_residual(&m);
        if !all_finite(&m) || !(r <= Tolerances::default().sp) {
            return Err(QmError::NotInAlgebra(r));
        }
        Ok(SpAlgebra { m })
    }

    /// J0 S for symmetric S; every element of sp(2n) has this form.
    pub fn from_symmetric(s: &Mat) -> Self {
        let n = s.nrows() / 2;
        SpAlgebra { m: j0(n) * symmetrize(s) }
    }

    pub fn from_unchecked(m: Mat) -> Self {
        SpAlgebra { m }
    }

    pub fn zero(n: usize) -> Self {
        SpAlgebra { m: Mat::zeros(2 * n, 2 * n) }
    }

    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn scale(&self, c: f64) -> Self {
        SpAlgebra { m: &self.m * c }
    }

    pub fn exp(&self) -> Result<SympMatrix> {
        Ok(SympMatrix::from_unchecked(mat_exp(&self.m)?))
    }

    /// Adjoint action g X g^{-1}.
    pub fn adjoint(&self, g: &SympMatrix) -> Self {
        SpAlgebra { m: &g.m * &self.m * g.inverse().m }
    }
}

/// A complex structure compatible with the standard symplectic form.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleJ {
    pub m: Mat,
}

impl CompatibleJ {
    pub fn new(m: Mat) -> Result<Self> {
        Self::with_tol(m, Tolerances::default())
    }

    pub fn with_tol(m: Mat, tol: Tolerances) -> Result<Self> {
        let n = half_dim(&m)?;
        if !all_finite(&m) {
            return Err(QmError::NotCompatible("non-finite entries".into()));
        }
        let sq = (&m * &m + Mat::identity(2 * n, 2 * n)).norm() / (1.0 + m.norm_squared());
        if sq > tol.sp {
            return Err(QmError::NotCompatible(format!("J^2 + I residual {sq:.3e}")));
        }
        let g = j0(n).transpose() * &m;
        let asym = (&g - g.transpose()).norm() / (1.0 + g.norm());
        if asym > tol.sp {
            return Err(QmError::NotCompatible(format!("metric asymmetry {asym:.3e}")));
        }
        let lmin = min_eigenvalue(&g);
        if lmin <= tol.pd {
            return Err(QmError::NotPositiveDefinite(lmin));
        }
        Ok(CompatibleJ { m })
    }

    pub fn from_unchecked(m: Mat) -> Self {
        CompatibleJ { m }
    }

    pub fn standard(n: usize) -> Self {
        CompatibleJ { m: j0(n) }
    }

    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    /// The metric g(u, v) = omega(u, J v) as the matrix J0^T J.
    pub fn metric(&self) -> Mat {
        j0(self.n()).transpose() * &self.m
    }
}

/// A point Z = X + iY of the Siegel upper half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelPoint {
    pub x: Mat,
    pub y: Mat,
}

impl SiegelPoint {
    pub fn new(x: Mat, y: Mat) -> Result<Self> {
        if !x.is_square() || x.shape() != y.shape() {
            return Err(QmError::Invalid("X and Y must be square of equal size".into()));
        }
        let tol = Tolerances::default();
        let ax = (&x - x.transpose()).norm();
        let ay = (&y - y.transpose()).norm();
        if ax > tol.sp * (1.0 + x.norm()) || ay > tol.sp * (1.0 + y.norm()) {
            return Err(QmError::Invalid("X and Y must be symmetric".into()));
        }
        let lmin = min_eigenvalue(&y);
        if !(lmin > tol.pd) {
            return Err(QmError::NotPositiveDefinite(lmin));
        }
        Ok(SiegelPoint { x, y })
    }

    /// The basepoint iI.
    pub fn i(n: usize) -> Self {
        SiegelPoint { x: Mat::zeros(n, n), y: Mat::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn complex(&self) -> DMatrix<C64> {
        self.x.zip_map(&self.y, C64::new)
    }
}

/// Matrix exponential (Pade scaling and squaring from nalgebra) with overflow guard.
pub fn mat_exp(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(QmError::Invalid("mat_exp needs a square matrix".into()));
    }
    let norm = a.norm();
    if !norm.is_finite() || norm > 600.0 {
        return Err(QmError::Overflow(norm));
    }
    let e = a.clone().exp();
    if !all_finite(&e) {
        return Err(QmError::Overflow(norm));
    }
    Ok(e)
}

/// Principal logarithm for matrices without eigenvalues on the closed negative axis,
/// by inverse scaling and squaring (Denman-Beavers square roots, then a series).
pub fn mat_log(a: &Mat) -> Result<Mat> {
    let dim = a.nrows();
    let id = Mat::identity(dim, dim);
    let mut m = a.clone();
    let mut squarings = 0;
    while (&m - &id).norm() > 0.2 {
        if squarings > 60 {
            return Err(QmError::Invalid("matrix logarithm did not converge".into()));
        }
        let mut y = m.clone();
        let mut z = id.clone();
        for _ in 0..100 {
            let yi = y.clone().try_inverse().ok_or_else(|| QmError::Invalid("singular matrix in log".into()))?;
            let zi = z.clone().try_inverse().ok_or_else(|| QmError::Invalid("singular matrix in log".into()))?;
            let yn = (&y + zi) * 0.5;
            let zn = (&z + yi) * 0.5;
            let done = (&yn - &y).norm() <= 1e-15 * yn.norm();
            y = yn;
            z = zn;
            if done {
                break;
            }
        }
        m = y;
        squarings += 1;
    }
    let x = &m - &id;
    let mut term = x.clone();
    let mut sum = Mat::zeros(dim, dim);
    for k in 1..200 {
        let c = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
        sum += &term * c;
        if term.norm() / (k as f64) < 1e-18 {
            break;
        }
        term = &term * &x;
    }
    Ok(sum * 2f64.powi(squarings))
}

/// Polar decomposition M = P U with P symmetric positive definite and U in U(n).
/// Returns (U, P).
pub fn polar_unitary(m: &SympMatrix) -> Result<(SympMatrix, SympMatrix)> {
    let r = symplectic_residual(&m.m);
    if !(r <= Tolerances::default().sp) {
        return Err(QmError::NotSymplectic(r));
    }
    let mmt = &m.m * m.m.transpose();
    let p = symmetrize(&sym_pow(&mmt, 0.5));
    let pinv = symmetrize(&sym_pow(&mmt, -0.5));
    let u = pinv * &m.m;
    Ok((SympMatrix::from_unchecked(u), SympMatrix::from_unchecked(p)))
}

/// Rotation angle (radians) of the unitary polar factor of a 2x2 matrix with positive determinant.
pub fn polar_angle_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (c - b).atan2(a + d)
}

/// Residual of membership in U(n) = O(2n) intersected with Sp(2n).
pub fn unitary_residual(u: &Mat) -> f64 {
    let n = u.nrows() / 2;
    let id = Mat::identity(2 * n, 2 * n);
    let j = j0(n);
    (u.transpose() * u - id).norm() + (u * &j - &j * u).norm()
}

/// det(A + iB) for U = [[A, -B], [B, A]] in U(n).
pub fn det_complex(u: &SympMatrix) -> Result<C64> {
    let res = unitary_residual(&u.m);
    if !(res <= Tolerances::default().sp * 10.0) {
        return Err(QmError::NotUnitary(res));
    }
    Ok(det_complex_unchecked(&u.m))
}

pub fn det_complex_unchecked(u: &Mat) -> C64 {
    let n = u.nrows() / 2;
    let c = DMatrix::<C64>::from_fn(n, n, |i, k| C64::new(u[(i, k)], u[(n + i, k)]));
    c.determinant()
}

/// Complex-linear embedding of an n x n complex matrix as [[A, -B], [B, A]].
pub fn realify(c: &DMatrix<C64>) -> Mat {
    let n = c.nrows();
    let mut m = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for k in 0..n {
            let z = c[(i, k)];
            m[(i, k)] = z.re;
            m[(n + i, n + k)] = z.re;
            m[(n + i, k)] = z.im;
            m[(i, n + k)] = -z.im;
        }
    }
    m
}

/// An ordered track of unit complex numbers; its variation is measured in turns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AngleTrack {
    pub samples: Vec<C64>,
}

impl AngleTrack {
    pub fn new(samples: Vec<C64>) -> Self {
        AngleTrack { samples }
    }

    pub fn from_angles(theta: impl IntoIterator<Item = f64>) -> Self {
        AngleTrack { samples: theta.into_iter().map(|t| C64::from_polar(1.0, t)).collect() }
    }

    /// Joins two tracks; the last sample of `self` and the first of `other` form one step.
    pub fn concat(&self, other: &AngleTrack) -> AngleTrack {
        let mut s = self.samples.clone();
        s.extend_from_slice(&other.samples);
        AngleTrack { samples: s }
    }

    pub fn turns(&self) -> Result<f64> {
        varangle(self)
    }
}

/// Signed argument increment from a to b in turns, in (-1/2, 1/2].
pub fn angle_step(a: C64, b: C64) -> f64 {
    (b * a.conj()).arg() / std::f64::consts::TAU
}

/// Total continuous variation of argument along the track, in turns.
pub fn varangle(track: &AngleTrack) -> Result<f64> {
    let mut total = 0.0;
    for (i, w) in track.samples.windows(2).enumerate() {
        let d = angle_step(w[0], w[1]);
        if d.abs() >= 0.5 - 1e-12 {
            return Err(QmError::Undersampled { index: i, jump: d });
        }
        total += d;
    }
    Ok(total)
}

/// Siegel coordinates of a compatible complex structure.
/// With J = [[A, B], [C, D]]: Y = C^{-1}, X = -C^{-1} D.
pub fn j_to_siegel(j: &CompatibleJ) -> Result<SiegelPoint> {
    let n = j.n();
    let c = j.m.view((n, 0), (n, n)).into_owned();
    let d = j.m.view((n, n), (n, n)).into_owned();
    let ci = c.try_inverse().ok_or(QmError::NotPositiveDefinite(0.0))?;
    let y = symmetrize(&ci);
    let x = symmetrize(&-(&ci * d));
    SiegelPoint::new(x, y)
}

/// The compatible complex structure [[X W, -(Y + X W X)], [W, -W X]] with W = Y^{-1}.
pub fn siegel_to_j(z: &SiegelPoint) -> Result<CompatibleJ> {
    let lmin = min_eigenvalue(&z.y);
    if !(lmin > Tolerances::default().pd) {
        return Err(QmError::NotPositiveDefinite(lmin));
    }
    Ok(siegel_to_j_unchecked(z))
}

pub fn siegel_to_j_unchecked(z: &SiegelPoint) -> CompatibleJ {
    let n = z.n();
    let w = symmetrize(&z.y.clone().try_inverse().expect("Y is invertible"));
    let xw = &z.x * &w;
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&xw);
    m.view_mut((0, n), (n, n)).copy_from(&-(&z.y + &xw * &z.x));
    m.view_mut((n, 0), (n, n)).copy_from(&w);
    m.view_mut((n, n), (n, n)).copy_from(&-(&w * &z.x));
    CompatibleJ { m }
}

/// Differential of siegel_to_j at Z applied to (dX, dY).
pub fn d_siegel_to_j(z: &SiegelPoint, dx: &Mat, dy: &Mat) -> Mat {
    let n = z.n();
    let w = z.y.clone().try_inverse().expect("Y is invertible");
    let dw = -(&w * dy * &w);
    let x = &z.x;
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(dx * &w + x * &dw));
    m.view_mut((0, n), (n, n)).copy_from(&-(dy + dx * &w * x + x * &dw * x + x * &w * dx));
    m.view_mut((n, 0), (n, n)).copy_from(&dw);
    m.view_mut((n, n), (n, n)).copy_from(&-(&dw * x + &w * dx));
    m
}

/// Differential of j_to_siegel at J applied to dJ; returns (dX, dY).
pub fn d_j_to_siegel(j: &CompatibleJ, dj: &Mat) -> (Mat, Mat) {
    let n = j.n();
    let c = j.m.view((n, 0), (n, n)).into_owned();
    let d = j.m.view((n, n), (n, n)).into_owned();
    let dc = dj.view((n, 0), (n, n)).into_owned();
    let dd = dj.view((n, n), (n, n)).into_owned();
    let ci = c.try_inverse().expect("lower-left block is invertible");
    let dci = -(&ci * dc * &ci);
    let dy = symmetrize(&dci);
    let dx = symmetrize(&-(&dci * d + &ci * dd));
    (dx, dy)
}

/// The symmetric positive-definite symplectic P with P J0 P^{-1} = J, i.e. (J0^T J)^{-1/2}.
pub fn transvection(j: &CompatibleJ) -> SympMatrix {
    SympMatrix::from_unchecked(symmetrize(&sym_pow(&j.metric(), -0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rot(theta: f64) -> Mat {
        let (s, c) = theta.sin_cos();
        Mat::from_row_slice(2, 2, &[c, -s, s, c])
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&Mat::zeros(4, 4)).unwrap();
        assert!((e - Mat::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn exp_of_pi_j0_is_minus_identity() {
        let e = mat_exp(&(j0(1) * PI)).unwrap();
        // closed form cos(theta) I + sin(theta) J0
        let oracle = Mat::identity(2, 2) * PI.cos() + j0(1) * PI.sin();
        assert!((&e - &oracle).norm() < 1e-14);
        assert!((e + Mat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat_exp(&Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]))).unwrap();
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-1f64).exp()).abs() < 1e-14);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn exp_rotation_oracle_for_norms_up_to_ten() {
        for k in 0..=20 {
            let theta = k as f64 * 0.5;
            let e = mat_exp(&(j0(1) * theta)).unwrap();
            assert!((e - rot(theta)).norm() < 1e-12 * (1.0 + theta));
        }
    }

    #[test]
    fn exp_overflow_is_error() {
        assert!(matches!(mat_exp(&(Mat::identity(2, 2) * 1e4)), Err(QmError::Overflow(_))));
    }

    #[test]
    fn log_inverts_exp() {
        let s = Mat::from_row_slice(4, 4, &[
            0.3, 0.1, -0.2, 0.05, 0.1, -0.4, 0.0, 0.2, -0.2, 0.0, 0.5, 0.1, 0.05, 0.2, 0.1, 0.2,
        ]);
        let x = SpAlgebra::from_symmetric(&s).m;
        let l = mat_log(&mat_exp(&x).unwrap()).unwrap();
        assert!((l - x).norm() < 1e-11);
    }

    #[test]
    fn polar_of_identity_and_examples() {
        let (u, p) = polar_unitary(&SympMatrix::identity(2)).unwrap();
        assert!((u.m - Mat::identity(4, 4)).norm() < 1e-14);
        assert!((p.m - Mat::identity(4, 4)).norm() < 1e-14);

        let r = SympMatrix::new(rot(0.7)).unwrap();
        let (u, p) = polar_unitary(&r).unwrap();
        assert!((u.m - rot(0.7)).norm() < 1e-13);
        assert!((p.m - Mat::identity(2, 2)).norm() < 1e-13);

        let d = SympMatrix::new(Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])).unwrap();
        let (u, p) = polar_unitary(&d).unwrap();
        assert!((u.m - Mat::identity(2, 2)).norm() < 1e-13);
        assert!((p.m - d.m).norm() < 1e-13);
    }

    #[test]
    fn polar_rejects_non_symplectic() {
        let m = SympMatrix::from_unchecked(Mat::identity(2, 2) * 2.0);
        assert!(polar_unitary(&m).is_err());
    }

    #[test]
    fn polar_angle_formula_matches_decomposition() {
        let m = mat_exp(&SpAlgebra::from_symmetric(&Mat::from_row_slice(2, 2, &[0.4, 1.1, 1.1, -0.7])).m).unwrap();
        let (u, _) = polar_unitary(&SympMatrix::new(m.clone()).unwrap()).unwrap();
        let theta = polar_angle_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        assert!((u.m - rot(theta)).norm() < 1e-12);
    }

    #[test]
    fn det_complex_examples() {
        assert!((det_complex(&SympMatrix::identity(2)).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let theta = 0.9;
        let d = det_complex(&SympMatrix::new(rot(theta)).unwrap()).unwrap();
        // 1x1 block A + iB = cos + i sin
        assert!((d - C64::new(theta.cos(), theta.sin())).norm() < 1e-14);
        let (t1, t2) = (0.4, -1.3);
        let c = DMatrix::<C64>::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::from_polar(1.0, t1),
            C64::from_polar(1.0, t2),
        ]));
        let u = SympMatrix::new(realify(&c)).unwrap();
        let d = det_complex(&u).unwrap();
        assert!((d - C64::from_polar(1.0, t1 + t2)).norm() < 1e-14);
    }

    #[test]
    fn det_complex_rejects_non_unitary() {
        let m = SympMatrix::new(Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])).unwrap();
        assert!(det_complex(&m).is_err());
    }

    #[test]
    fn varangle_examples() {
        let c = AngleTrack::from_angles(vec![0.3; 10]);
        assert_eq!(c.turns().unwrap(), 0.0);
        let one = AngleTrack::from_angles((0..64).map(|k| 2.0 * PI * k as f64 / 63.0));
        assert!((one.turns().unwrap() - 1.0).abs() < 1e-12);
        let two = AngleTrack::from_angles((0..200).map(|k| -4.0 * PI * k as f64 / 199.0));
        assert!((two.turns().unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn varangle_detects_undersampling() {
        let t = AngleTrack::from_angles(vec![0.0, 1.0, 1.0 + PI]);
        assert!(matches!(t.turns(), Err(QmError::Undersampled { index: 1, .. })));
    }

    #[test]
    fn siegel_basepoint_maps_to_j0() {
        for n in 1..=3 {
            let j = siegel_to_j(&SiegelPoint::i(n)).unwrap();
            assert!((j.m - j0(n)).norm() < 1e-15);
            let z = j_to_siegel(&CompatibleJ::standard(n)).unwrap();
            assert!(z.x.norm() < 1e-15 && (z.y - Mat::identity(n, n)).norm() < 1e-15);
        }
    }

    #[test]
    fn siegel_j_derivatives_are_inverse() {
        let z = SiegelPoint::new(
            Mat::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 0.5]),
            Mat::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.8]),
        )
        .unwrap();
        let dx = Mat::from_row_slice(2, 2, &[0.1, 0.4, 0.4, -0.3]);
        let dy = Mat::from_row_slice(2, 2, &[-0.2, 0.1, 0.1, 0.6]);
        let j = siegel_to_j(&z).unwrap();
        let dj = d_siegel_to_j(&z, &dx, &dy);
        let (ex, ey) = d_j_to_siegel(&j, &dj);
        assert!((ex - &dx).norm() < 1e-13 && (ey - &dy).norm() < 1e-13);
        // finite-difference check of the differential
        let h = 1e-6;
        let zp = SiegelPoint { x: &z.x + &dx * h, y: &z.y + &dy * h };
        let zm = SiegelPoint { x: &z.x - &dx * h, y: &z.y - &dy * h };
        let fd = (siegel_to_j(&zp).unwrap().m - siegel_to_j(&zm).unwrap().m) / (2.0 * h);
        assert!((fd - dj).norm() < 1e-8);
    }

    #[test]
    fn transvection_moves_j0_to_j() {
        let z = SiegelPoint::new(Mat::from_row_slice(1, 1, &[0.7]), Mat::from_row_slice(1, 1, &[2.5])).unwrap();
        let j = siegel_to_j(&z).unwrap();
        let p = transvection(&j);
        assert!(symplectic_residual(&p.m) < 1e-13);
        let moved = p.act_j(&CompatibleJ::standard(1));
        assert!((moved.m - j.m).norm() < 1e-12);
    }
}
