//! The Siegel upper half-space as a Domic-Toledo space for Sp(2n,R).

use nalgebra::SymmetricEigen;

use crate::engine::{self, DomicToledo, Quad};
use crate::error::{QmError, Result};
use crate::symplectic::{
    d_siegel_to_j, j0, j_to_siegel, siegel_to_j, symmetrize, transvection, CompatibleJ, Mat, SiegelPoint, SpAlgebra, C64,
};

/// Normalization of the invariant Kahler form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    /// 1/4 tr(J A B).
    Trace,
    /// Twice the trace form.
    Siegel,
    /// (n + 1) times the trace form.
    Bergman,
}

impl FormKind {
    /// Factor relative to the trace form.
    pub fn scale(&self, n: usize) -> f64 {
        match self {
            FormKind::Trace => 1.0,
            FormKind::Siegel => 2.0,
            FormKind::Bergman => (n + 1) as f64,
        }
    }

    pub fn all() -> [FormKind; 3] {
        [FormKind::Trace, FormKind::Siegel, FormKind::Bergman]
    }

    pub fn name(&self) -> &'static str {
        match self {
            FormKind::Trace => "trace",
            FormKind::Siegel => "siegel",
            FormKind::Bergman => "bergman",
        }
    }
}

impl std::str::FromStr for FormKind {
    type Err = QmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(FormKind::Trace),
            "siegel" => Ok(FormKind::Siegel),
            "bergman" => Ok(FormKind::Bergman),
            _ => Err(QmError::Invalid(format!("unknown form kind '{s}'"))),
        }
    }
}

/// Relative residual of the tangency conditions A J + J A = 0 and g(J) A symmetric.
pub fn tangent_residual(j: &CompatibleJ, a: &Mat) -> f64 {
    let ac = a * &j.m + &j.m * a;
    let ga = j.metric() * a;
    (ac.norm() + (&ga - ga.transpose()).norm()) / (1.0 + a.norm() * (1.0 + j.m.norm()))
}

/// A tangent vector to the space of compatible complex structures.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentAtJ {
    pub base: CompatibleJ,
    pub vec: Mat,
}

impl TangentAtJ {
    pub fn new(base: CompatibleJ, vec: Mat) -> Result<Self> {
        let r = tangent_residual(&base, &vec);
        if !(r <= 1e-9) {
            return Err(QmError::NotTangent(r));
        }
        Ok(TangentAtJ { base, vec })
    }
}

/// kind-scaled 1/4 tr(J A B).
pub fn form_eval(kind: FormKind, j: &CompatibleJ, a: &Mat, b: &Mat) -> Result<f64> {
    for v in [a, b] {
        let r = tangent_residual(j, v);
        if !(r <= 1e-8) {
            return Err(QmError::NotTangent(r));
        }
    }
    Ok(form_unchecked(kind, j, a, b))
}

pub fn form_unchecked(kind: FormKind, j: &CompatibleJ, a: &Mat, b: &Mat) -> f64 {
    kind.scale(j.n()) * 0.25 * (&j.m * a * b).trace()
}

/// mu(J)(X) = -1/2 tr(X J), the moment map of the trace form.
pub fn moment_map_sp(j: &CompatibleJ, x: &SpAlgebra) -> f64 {
    -0.5 * (&x.m * &j.m).trace()
}

/// The generating vector field X J - J X of the conjugation action.
pub fn infinitesimal_action(x: &SpAlgebra, j: &CompatibleJ) -> Mat {
    &x.m * &j.m - &j.m * &x.m
}

/// Symmetric-space geodesic: move x to J0 by its transvection, follow t -> G^{-t/2} J0 G^{t/2}
/// with G the metric of the transported endpoint, and move back.
pub fn geodesic(x: &CompatibleJ, y: &CompatibleJ, t: f64) -> CompatibleJ {
    if x.m == y.m {
        return x.clone();
    }
    let n = x.n();
    let h = transvection(x);
    let hinv = h.inverse();
    let yp = &hinv.m * &y.m * &h.m;
    let g = symmetrize(&(j0(n).transpose() * yp));
    let eig = SymmetricEigen::new(g);
    let v = &eig.eigenvectors;
    let pm = v * Mat::from_diagonal(&eig.eigenvalues.map(|l| l.powf(-0.5 * t))) * v.transpose();
    let pp = v * Mat::from_diagonal(&eig.eigenvalues.map(|l| l.powf(0.5 * t))) * v.transpose();
    let c = pm * j0(n) * pp;
    CompatibleJ::from_unchecked(&h.m * c * &hinv.m)
}

/// Geodesic in the hyperbolic plane (n = 1 Siegel coordinates), matching `geodesic`.
pub fn hyp_geodesic(z0: (f64, f64), z1: (f64, f64), t: f64) -> (f64, f64) {
    let (x0, y0) = z0;
    let u = (z1.0 - x0) / y0;
    let v = z1.1 / y0;
    let one_minus_v = (y0 - z1.1) / y0;
    // metric of w = u + iv minus cosh(rho) I is [[a, b], [b, -a]]
    let a = (one_minus_v * (1.0 + v) - u * u) / (2.0 * v);
    let b = -u / v;
    let sh = a.hypot(b);
    if sh == 0.0 {
        return z0;
    }
    let rho = sh.asinh();
    let (n11, n12) = (-a / sh, -b / sh);
    let c = (0.5 * t * rho).cosh();
    let s = (0.5 * t * rho).sinh();
    let (m11, m12, m21, m22) = (c + s * n11, s * n12, s * n12, c - s * n11);
    let den = m21 * m21 + m22 * m22;
    let re = (m12 * m22 + m11 * m21) / den;
    let im = (m11 * m22 - m12 * m21) / den;
    (x0 + y0 * re, y0 * im)
}

/// Trace form at Siegel point (x, y) on Siegel-coordinate tangents (dx, dy).
pub fn hyp_form_trace(y: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    -0.5 * (a.0 * b.1 - a.1 * b.0) / (y * y)
}

/// Hyperbolic distance between two points of the upper half-plane.
pub fn hyp_distance(z0: (f64, f64), z1: (f64, f64)) -> f64 {
    let dx = z1.0 - z0.0;
    let dy = z1.1 - z0.1;
    (1.0 + (dx * dx + dy * dy) / (2.0 * z0.1 * z1.1)).acosh()
}

/// Closed-form join density of the upper half-plane for the trace form: with w = (z0 - z1)/(z0 - conj z1),
/// the unit tangent at z1 of the geodesic from z0 is -i y1 w/|w| and tanh(d/2) = |w|, so the density is
/// the trace form of (-i y1 w, v) at z1.
pub fn hyp_join_density(z0: (f64, f64), z1: (f64, f64), v: (f64, f64)) -> f64 {
    let num = C64::new(z0.0 - z1.0, z0.1 - z1.1);
    let den = C64::new(z0.0 - z1.0, z0.1 + z1.1);
    let w = num / den;
    hyp_form_trace(z1.1, (z1.1 * w.im, -z1.1 * w.re), v)
}

/// The Domic-Toledo instance (S_n, sigma_kind) with Siegel coordinates as ambient embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiegelSpace {
    pub n: usize,
    pub kind: FormKind,
}

impl SiegelSpace {
    pub fn new(n: usize, kind: FormKind) -> Self {
        SiegelSpace { n, kind }
    }

    fn split(&self, c: &[f64]) -> (Mat, Mat) {
        let n = self.n;
        let x = Mat::from_column_slice(n, n, &c[..n * n]);
        let y = Mat::from_column_slice(n, n, &c[n * n..2 * n * n]);
        (x, y)
    }

    /// Converts an ambient tangent at p to a tangent matrix at J.
    pub fn tangent_to_j(&self, z: &SiegelPoint, a: &[f64]) -> Mat {
        let (dx, dy) = self.split(a);
        d_siegel_to_j(z, &symmetrize(&dx), &symmetrize(&dy))
    }

    pub fn siegel_tangent(&self, j: &CompatibleJ, dj: &Mat) -> Vec<f64> {
        let (dx, dy) = crate::symplectic::d_j_to_siegel(j, dj);
        dx.iter().chain(dy.iter()).copied().collect()
    }
}

impl DomicToledo for SiegelSpace {
    type Point = CompatibleJ;

    fn embed(&self, p: &CompatibleJ) -> Vec<f64> {
        let z = j_to_siegel(p).expect("valid compatible structure");
        z.x.iter().chain(z.y.iter()).copied().collect()
    }

    fn retract(&self, c: &[f64]) -> Result<CompatibleJ> {
        let (x, y) = self.split(c);
        siegel_to_j(&SiegelPoint { x: symmetrize(&x), y: symmetrize(&y) })
    }

    fn geodesic(&self, x: &CompatibleJ, y: &CompatibleJ, t: f64) -> CompatibleJ {
        geodesic(x, y, t)
    }

    fn form(&self, p: &CompatibleJ, a: &[f64], b: &[f64]) -> f64 {
        let z = j_to_siegel(p).expect("valid compatible structure");
        let ja = self.tangent_to_j(&z, a);
        let jb = self.tangent_to_j(&z, b);
        form_unchecked(self.kind, p, &ja, &jb)
    }

    fn describe(&self, p: &CompatibleJ) -> String {
        match j_to_siegel(p) {
            Ok(z) => {
                let f = |m: &Mat| m.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ");
                format!("X=[{}] Y=[{}]", f(&z.x), f(&z.y))
            }
            Err(_) => "invalid".into(),
        }
    }
}

/// Area of the geodesic triangle (x, y, z) for the chosen form, with an error estimate.
pub fn triangle_area(kind: FormKind, x: &CompatibleJ, y: &CompatibleJ, z: &CompatibleJ, q: Quad) -> Result<(f64, f64)> {
    engine::triangle_area(&SiegelSpace::new(x.n(), kind), x, y, z, q)
}
