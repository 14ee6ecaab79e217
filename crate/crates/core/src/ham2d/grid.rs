//! Surface grids, fiberwise complex structure fields, stencils and Lagrange interpolation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QmError, Result};

/// The surface carrying the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Domain {
    /// The flat torus [0,1)^2, vertex-centered nodes.
    Torus,
    /// The disk of the given radius around the origin of the plane, on the cell-centered grid of [-R, R]^2.
    Disk { radius: f64 },
}

/// An N x N grid with area form dx dy. Node k sits at column k % N, row k / N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub domain: Domain,
    pub n: usize,
}

impl SurfaceGrid {
    pub const MIN_N: usize = 16;

    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        if n < Self::MIN_N {
            return Err(QmError::Invalid(format!("grid resolution {n} is below {}", Self::MIN_N)));
        }
        if let Domain::Disk { radius } = domain {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(QmError::Invalid(format!("disk radius {radius} must be positive")));
            }
        }
        Ok(SurfaceGrid { domain, n })
    }

    pub fn torus(n: usize) -> Result<Self> {
        Self::new(Domain::Torus, n)
    }

    pub fn disk(n: usize, radius: f64) -> Result<Self> {
        Self::new(Domain::Disk { radius }, n)
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.domain, Domain::Torus)
    }

    pub fn spacing(&self) -> f64 {
        match self.domain {
            Domain::Torus => 1.0 / self.n as f64,
            Domain::Disk { radius } => 2.0 * radius / self.n as f64,
        }
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Area of the surface.
    pub fn total_area(&self) -> f64 {
        match self.domain {
            Domain::Torus => 1.0,
            Domain::Disk { radius } => std::f64::consts::PI * radius * radius,
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn node(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.n, k / self.n);
        let h = self.spacing();
        match self.domain {
            Domain::Torus => (i as f64 * h, j as f64 * h),
            Domain::Disk { radius } => (-radius + (i as f64 + 0.5) * h, -radius + (j as f64 + 0.5) * h),
        }
    }

    /// Whether the node lies in the open surface (always on the torus, inside the disk otherwise).
    pub fn active(&self, k: usize) -> bool {
        match self.domain {
            Domain::Torus => true,
            Domain::Disk { radius } => {
                let (x, y) = self.node(k);
                x.hypot(y) < radius
            }
        }
    }

    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.active(k)).collect()
    }

    /// Fractional grid coordinates (node i has coordinate i).
    pub fn grid_coords(&self, x: f64, y: f64) -> (f64, f64) {
        let h = self.spacing();
        match self.domain {
            Domain::Torus => (x / h, y / h),
            Domain::Disk { radius } => ((x + radius) / h - 0.5, (y + radius) / h - 0.5),
        }
    }

    /// Node at integer grid position, wrapped on the torus; `None` off the disk grid.
    pub fn wrap(&self, i: i64, j: i64) -> Option<usize> {
        let n = self.n as i64;
        match self.domain {
            Domain::Torus => Some(self.index(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)),
            Domain::Disk { .. } => {
                if (0..n).contains(&i) && (0..n).contains(&j) {
                    Some(self.index(i as usize, j as usize))
                } else {
                    None
                }
            }
        }
    }

    /// Whether a point may be used for interpolation.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self.domain {
            Domain::Torus => x.is_finite() && y.is_finite(),
            Domain::Disk { radius } => x.abs() <= radius && y.abs() <= radius,
        }
    }

    /// Displacement between two points, reduced to the fundamental domain on the torus.
    pub fn displacement(&self, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let (mut dx, mut dy) = (b.0 - a.0, b.1 - a.1);
        if self.is_periodic() {
            dx -= dx.round();
            dy -= dy.round();
        }
        (dx, dy)
    }
}

/// Grid field value with ghost value off the disk grid.
fn at(grid: &SurfaceGrid, f: &[f64], ghost: f64, i: i64, j: i64) -> f64 {
    grid.wrap(i, j).map_or(ghost, |k| f[k])
}

/// First and second partial derivatives at a node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Derivs {
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

/// Fourth-order central differences, periodic on the torus and with a constant ghost value off the disk grid.
pub fn derivs(grid: &SurfaceGrid, f: &[f64], ghost: f64, k: usize) -> Derivs {
    let h = grid.spacing();
    let (i, j) = ((k % grid.n) as i64, (k / grid.n) as i64);
    let v = |a: i64, b: i64| at(grid, f, ghost, i + a, j + b);
    // differences are formed first so that constant data gives exactly zero
    let d1 = |m2: f64, m1: f64, p1: f64, p2: f64| (8.0 * (p1 - m1) - (p2 - m2)) / 12.0;
    let c = v(0, 0);
    let d2 = |m2: f64, m1: f64, p1: f64, p2: f64| (16.0 * ((p1 - c) + (m1 - c)) - ((p2 - c) + (m2 - c))) / 12.0;
    let row = |b: i64| d1(v(-2, b), v(-1, b), v(1, b), v(2, b));
    Derivs {
        fx: row(0) / h,
        fy: d1(v(0, -2), v(0, -1), v(0, 1), v(0, 2)) / h,
        fxx: d2(v(-2, 0), v(-1, 0), v(1, 0), v(2, 0)) / (h * h),
        fyy: d2(v(0, -2), v(0, -1), v(0, 1), v(0, 2)) / (h * h),
        fxy: d1(row(-2), row(-1), row(1), row(2)) / (h * h),
    }
}

/// Interpolation schemes for fields sampled on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Bilinear,
    Cubic,
    /// Six-point tensor Lagrange.
    #[default]
    Quintic,
}

impl Interp {
    pub fn points(&self) -> usize {
        match self {
            Interp::Bilinear => 2,
            Interp::Cubic => 4,
            Interp::Quintic => 6,
        }
    }
}

impl std::str::FromStr for Interp {
    type Err = QmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(Interp::Bilinear),
            "cubic" => Ok(Interp::Cubic),
            "quintic" => Ok(Interp::Quintic),
            _ => Err(QmError::Invalid(format!("unknown interpolation '{s}'"))),
        }
    }
}

/// Lagrange basis weights on the m nodes -(m/2 - 1), ..., m/2 at s in [0, 1):
/// values and, if requested, first and second derivatives.
pub(crate) fn lagrange(m: usize, s: f64, derivatives: bool) -> ([f64; 6], [f64; 6], [f64; 6]) {
    let z = |k: usize| k as f64 - (m / 2 - 1) as f64;
    let (mut w0, mut w1, mut w2) = ([0.0; 6], [0.0; 6], [0.0; 6]);
    for k in 0..m {
        let mut den = 1.0;
        let mut num = 1.0;
        for j in (0..m).filter(|&j| j != k) {
            den *= z(k) - z(j);
            num *= s - z(j);
        }
        w0[k] = num / den;
        if derivatives {
            let (mut n1, mut n2) = (0.0, 0.0);
            for a in (0..m).filter(|&a| a != k) {
                let mut p = 1.0;
                for j in (0..m).filter(|&j| j != k && j != a) {
                    p *= s - z(j);
                }
                n1 += p;
                for b in (0..m).filter(|&b| b != k && b != a) {
                    let mut p = 1.0;
                    for j in (0..m).filter(|&j| j != k && j != a && j != b) {
                        p *= s - z(j);
                    }
                    n2 += p;
                }
            }
            w1[k] = n1 / den;
            w2[k] = n2 / den;
        }
    }
    (w0, w1, w2)
}

/// Interpolates several grid fields at a point with a shared stencil; `ghosts[f]` is used off the disk grid.
pub(crate) fn interpolate_many<const F: usize>(
    grid: &SurfaceGrid,
    fields: [&[f64]; F],
    ghosts: [f64; F],
    interp: Interp,
    x: f64,
    y: f64,
) -> Result<[f64; F]> {
    if !grid.contains(x, y) {
        return Err(QmError::Interpolation(x, y));
    }
    let m = interp.points();
    let (u, v) = grid.grid_coords(x, y);
    let (iu, iv) = (u.floor(), v.floor());
    let (wx, _, _) = lagrange(m, u - iu, false);
    let (wy, _, _) = lagrange(m, v - iv, false);
    let off = (m / 2 - 1) as i64;
    let mut out = [0.0; F];
    for (b, wb) in wy.iter().enumerate().take(m) {
        let j = iv as i64 + b as i64 - off;
        for (a, wa) in wx.iter().enumerate().take(m) {
            let i = iu as i64 + a as i64 - off;
            let w = wa * wb;
            let node = grid.wrap(i, j);
            for f in 0..F {
                out[f] += w * node.map_or(ghosts[f], |k| fields[f][k]);
            }
        }
    }
    Ok(out)
}

/// Value, gradient and Hessian of the six-point Lagrange interpolant of a grid field (zero ghost).
pub(crate) fn interpolate_jet(grid: &SurfaceGrid, f: &[f64], x: f64, y: f64) -> crate::expr::Jet {
    let h = grid.spacing();
    let (u, v) = grid.grid_coords(x, y);
    let (iu, iv) = (u.floor(), v.floor());
    let (wx, dx, ddx) = lagrange(6, u - iu, true);
    let (wy, dy, ddy) = lagrange(6, v - iv, true);
    let mut j = crate::expr::Jet::default();
    for b in 0..6 {
        for a in 0..6 {
            let val = at(grid, f, 0.0, iu as i64 + a as i64 - 2, iv as i64 + b as i64 - 2);
            j.v += wx[a] * wy[b] * val;
            j.gx += dx[a] * wy[b] * val;
            j.gy += wx[a] * dy[b] * val;
            j.hxx += ddx[a] * wy[b] * val;
            j.hxy += dx[a] * dy[b] * val;
            j.hyy += wx[a] * ddy[b] * val;
        }
    }
    j.gx /= h;
    j.gy /= h;
    j.hxx /= h * h;
    j.hxy /= h * h;
    j.hyy /= h * h;
    j
}

/// A compatible complex structure per node, in Siegel coordinates x + i y of the hyperbolic fiber.
/// On the disk it equals the standard structure (0, 1) at inactive nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct JField {
    pub grid: SurfaceGrid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// The 2x2 structure [[x/y, -(y + x^2/y)], [1/y, -x/y]] as row-major entries.
pub fn siegel_matrix(x: f64, y: f64) -> [f64; 4] {
    [x / y, -(y + x * x / y), 1.0 / y, -x / y]
}

/// Siegel coordinates of a 2x2 compatible structure.
pub fn matrix_siegel(m: [f64; 4]) -> (f64, f64) {
    (-m[3] / m[2], 1.0 / m[2])
}

impl JField {
    pub fn new(grid: SurfaceGrid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(QmError::Invalid(format!("field has {} values, grid has {} nodes", x.len(), grid.len())));
        }
        for k in 0..grid.len() {
            if !(x[k].is_finite() && y[k].is_finite() && y[k] > 0.0) {
                return Err(QmError::NotPositiveDefinite(y[k]));
            }
            if !grid.active(k) && (x[k].abs() > 1e-12 || (y[k] - 1.0).abs() > 1e-12) {
                return Err(QmError::Support { node: k, value: x[k].abs().max((y[k] - 1.0).abs()) });
            }
        }
        Ok(JField { grid, x, y })
    }

    pub fn standard(grid: SurfaceGrid) -> Self {
        JField { grid, x: vec![0.0; grid.len()], y: vec![1.0; grid.len()] }
    }

    /// Field from a function of the node position; inactive disk nodes get the standard structure.
    pub fn from_fn(grid: SurfaceGrid, f: impl Fn(f64, f64) -> (f64, f64)) -> Result<Self> {
        let (mut x, mut y) = (vec![0.0; grid.len()], vec![1.0; grid.len()]);
        for k in 0..grid.len() {
            if grid.active(k) {
                let (px, py) = grid.node(k);
                (x[k], y[k]) = f(px, py);
            }
        }
        Self::new(grid, x, y)
    }

    /// Whether every node carries the same structure.
    pub fn uniform_value(&self) -> Option<(f64, f64)> {
        let (x0, y0) = (self.x[0], self.y[0]);
        self.x.iter().zip(&self.y).all(|(&x, &y)| x == x0 && y == y0).then_some((x0, y0))
    }

    pub fn is_standard(&self) -> bool {
        self.uniform_value() == Some((0.0, 1.0))
    }

    pub fn matrix(&self, k: usize) -> [f64; 4] {
        siegel_matrix(self.x[k], self.y[k])
    }

    /// Metric coefficients (E, F, G) of g = omega(., J .) per node.
    pub fn metric(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let e = self.y.iter().map(|y| 1.0 / y).collect();
        let f = self.x.iter().zip(&self.y).map(|(x, y)| -x / y).collect();
        let g = self.x.iter().zip(&self.y).map(|(x, y)| (x * x + y * y) / y).collect();
        (e, f, g)
    }

    /// Ambient coordinates [x..., y...].
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v
    }

    pub fn from_flat(grid: SurfaceGrid, c: &[f64]) -> Result<Self> {
        let n = grid.len();
        if c.len() != 2 * n {
            return Err(QmError::Invalid("ambient vector has the wrong length".into()));
        }
        let (x, y) = c.split_at(n);
        for k in 0..n {
            if !(y[k].is_finite() && y[k] > 0.0 && x[k].is_finite()) {
                return Err(QmError::NotPositiveDefinite(y[k]));
            }
        }
        Ok(JField { grid, x: x.to_vec(), y: y.to_vec() })
    }

    /// Interpolation source for this field: x and log y.
    pub fn interpolant(&self, interp: Interp) -> FieldInterpolant<'_> {
        FieldInterpolant { field: self, log_y: self.y.iter().map(|y| y.ln()).collect(), interp }
    }
}

/// Precomputed interpolation data for a [`JField`]; interpolates x and log y so that y stays positive.
pub struct FieldInterpolant<'a> {
    field: &'a JField,
    log_y: Vec<f64>,
    interp: Interp,
}

impl FieldInterpolant<'_> {
    pub fn at(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        if let Some(v) = self.field.uniform_value() {
            return Ok(v);
        }
        let [a, b] = interpolate_many(&self.field.grid, [&self.field.x, &self.log_y], [0.0, 0.0], self.interp, x, y)?;
        Ok((a, b.exp()))
    }
}

/// Random smooth zero-mean Fourier sum on the torus, returned as parameters (amplitude, kx, ky, phase).
pub fn random_modes<R: Rng + ?Sized>(rng: &mut R, count: usize, max_freq: i64, amplitude: f64) -> Vec<(f64, i64, i64, f64)> {
    (0..count)
        .map(|_| {
            let (kx, ky) = loop {
                let kx = rng.random_range(-max_freq..=max_freq);
                let ky = rng.random_range(-max_freq..=max_freq);
                if kx != 0 || ky != 0 {
                    break (kx, ky);
                }
            };
            let a = amplitude * rng.random_range(-1.0..1.0) / count as f64;
            (a, kx, ky, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect()
}

pub(crate) fn eval_modes(modes: &[(f64, i64, i64, f64)], x: f64, y: f64) -> f64 {
    modes
        .iter()
        .map(|&(a, kx, ky, ph)| a * (std::f64::consts::TAU * (kx as f64 * x + ky as f64 * y) + ph).sin())
        .sum()
}

/// Expression string of a Fourier sum, optionally modulated in time by (1 + c cos(2 pi t)).
pub fn modes_expr(modes: &[(f64, i64, i64, f64)], time_modulation: Option<f64>) -> String {
    let body = modes
        .iter()
        .map(|&(a, kx, ky, ph)| format!("({a:e})*sin(2*pi*(({kx})*x+({ky})*y)+({ph:e}))"))
        .collect::<Vec<_>>()
        .join(" + ");
    let body = if body.is_empty() { "0".to_string() } else { body };
    match time_modulation {
        Some(c) => format!("(1 + ({c:e})*cos(2*pi*t))*({body})"),
        None => body,
    }
}

/// Random smooth structure field: x and log y are Fourier sums; on the disk they are damped by a
/// bump vanishing outside 0.8 R.
pub fn random_jfield<R: Rng + ?Sized>(rng: &mut R, grid: SurfaceGrid, modes: usize, max_freq: i64, amplitude: f64) -> JField {
    let mx = random_modes(rng, modes, max_freq, amplitude);
    let my = random_modes(rng, modes, max_freq, amplitude);
    let (scale, damp): (f64, Box<dyn Fn(f64, f64) -> f64>) = match grid.domain {
        Domain::Torus => (1.0, Box::new(|_, _| 1.0)),
        Domain::Disk { radius } => {
            let r0 = 0.8 * radius;
            (1.0 / (2.0 * radius), Box::new(move |x: f64, y: f64| (1.0 - (x * x + y * y) / (r0 * r0)).max(0.0).powi(4)))
        }
    };
    JField::from_fn(grid, |x, y| {
        let d = damp(x, y);
        (d * eval_modes(&mx, x * scale, y * scale), (d * eval_modes(&my, x * scale, y * scale)).exp())
    })
    .expect("smooth random field is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_reproduces_polynomials() {
        for m in [2, 4, 6] {
            for s in [0.0, 0.3, 0.77] {
                let (w0, w1, w2) = lagrange(m, s, true);
                let z = |k: usize| k as f64 - (m / 2 - 1) as f64;
                let p = |x: f64| 1.0 + 2.0 * x - 0.5 * x * x * if m > 2 { 1.0 } else { 0.0 };
                let dp = |x: f64| 2.0 - x * if m > 2 { 1.0 } else { 0.0 };
                let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    v += w0[k] * p(z(k));
                    d += w1[k] * p(z(k));
                    dd += w2[k] * p(z(k));
                }
                assert!((v - p(s)).abs() < 1e-13);
                assert!((d - dp(s)).abs() < 1e-12);
                if m > 2 {
                    assert!((dd + 1.0).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn stencils_differentiate_trig_to_fourth_order() {
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| {
                let g = SurfaceGrid::torus(n).unwrap();
                let f: Vec<f64> = (0..g.len())
                    .map(|k| {
                        let (x, y) = g.node(k);
                        (std::f64::consts::TAU * (x + 2.0 * y)).sin()
                    })
                    .collect();
                let k = g.index(3, 5);
                let (x, y) = g.node(k);
                let arg = std::f64::consts::TAU * (x + 2.0 * y);
                let w = std::f64::consts::TAU;
                let d = derivs(&g, &f, 0.0, k);
                (d.fx - w * arg.cos()).abs() + (d.fxy + 2.0 * w * w * arg.sin()).abs() + (d.fyy + 4.0 * w * w * arg.sin()).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] > 14.0, "{errs:?}");
    }

    #[test]
    fn constant_fields_have_exactly_zero_derivatives() {
        let g = SurfaceGrid::disk(16, 1.0).unwrap();
        let f = vec![1.0; g.len()];
        for k in [0, 17, 100] {
            assert_eq!(derivs(&g, &f, 1.0, k), Derivs::default());
        }
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_accurate_between() {
        let g = SurfaceGrid::torus(32).unwrap();
        let f = |x: f64, y: f64| (std::f64::consts::TAU * x).sin() * (std::f64::consts::TAU * y).cos();
        let jf = JField::from_fn(g, |x, y| (f(x, y), 1.0)).unwrap();
        let it = jf.interpolant(Interp::Quintic);
        let (x, _) = it.at(g.node(40).0, g.node(40).1).unwrap();
        assert!((x - jf.x[40]).abs() < 1e-14);
        let (x, y) = it.at(0.3137, 0.871).unwrap();
        assert!((x - f(0.3137, 0.871)).abs() < 1e-7);
        assert_eq!(y, 1.0);
        let (x, _) = it.at(1.3137, -0.129).unwrap();
        assert!((x - f(0.3137, 0.871)).abs() < 1e-7);
    }

    #[test]
    fn disk_grid_geometry() {
        let g = SurfaceGrid::disk(16, 2.0).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.node(0), (-1.875, -1.875));
        assert!(!g.active(0));
        assert!(g.active(g.index(8, 8)));
        assert!(SurfaceGrid::disk(8, 1.0).is_err());
        assert!(SurfaceGrid::disk(16, -1.0).is_err());
        assert!(JField::standard(g).is_standard());
    }

    #[test]
    fn metric_has_unit_determinant() {
        let g = SurfaceGrid::torus(16).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let j = random_jfield(&mut rng, g, 4, 2, 0.5);
        let (e, f, gg) = j.metric();
        for k in 0..g.len() {
            assert!((e[k] * gg[k] - f[k] * f[k] - 1.0).abs() < 1e-12);
        }
    }
}
