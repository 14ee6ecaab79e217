//! Generic quasimorphism construction on a Domic-Toledo space with a Hamiltonian action.
//!
//! nu_x(g) = integral of the form over the geodesic join from x to the orbit loop,
//! minus the time integral of the moment map along the orbit.

use rayon::prelude::*;

use crate::error::{QmError, Result};
use crate::quadrature::gauss_legendre;
use crate::symplectic::{mat_exp, Mat, SpAlgebra, SympMatrix};

/// Finite-difference step for surface tangents.
pub const FD_STEP: f64 = 1e-5;

/// A symplectic space with a geodesic path system and a linear ambient embedding.
pub trait DomicToledo: Sync {
    type Point: Clone + Send + Sync;

    /// Ambient coordinates of a point.
    fn embed(&self, p: &Self::Point) -> Vec<f64>;
    /// Inverse of `embed` on a neighborhood of the image.
    fn retract(&self, c: &[f64]) -> Result<Self::Point>;
    /// Geodesic from x (t = 0) to y (t = 1).
    fn geodesic(&self, x: &Self::Point, y: &Self::Point, t: f64) -> Self::Point;
    /// The symplectic form at p on ambient tangent vectors.
    fn form(&self, p: &Self::Point, a: &[f64], b: &[f64]) -> f64;
    /// Short text describing a point, for reports.
    fn describe(&self, _p: &Self::Point) -> String {
        String::new()
    }

    /// Integral over s in [0,1] of Omega(d_s gamma, d_v gamma) where gamma(s) = geodesic(x, y, s)
    /// and v is a tangent at y. This is the rate at which the geodesic join from x sweeps area
    /// as its far endpoint moves along v.
    fn join_density(&self, x: &Self::Point, y: &Self::Point, v: &[f64], s_order: usize) -> Result<f64> {
        let vmax = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if vmax == 0.0 {
            return Ok(0.0);
        }
        let ye = self.embed(y);
        let ymax = ye.iter().fold(1.0f64, |m, a| m.max(a.abs()));
        let eps = FD_STEP * ymax / vmax;
        let yp = self.retract(&axpy(&ye, eps, v))?;
        let ym = self.retract(&axpy(&ye, -eps, v))?;
        let (nodes, weights) = gauss_legendre(s_order);
        let mut total = 0.0;
        for (s, w) in nodes.iter().zip(&weights) {
            let g = self.geodesic(x, y, *s);
            let ds = diff(
                &self.embed(&self.geodesic(x, y, s + FD_STEP)),
                &self.embed(&self.geodesic(x, y, s - FD_STEP)),
                2.0 * FD_STEP,
            );
            let dv = diff(
                &self.embed(&self.geodesic(x, &yp, *s)),
                &self.embed(&self.geodesic(x, &ym, *s)),
                2.0 * eps,
            );
            total += w * self.form(&g, &ds, &dv);
        }
        Ok(total)
    }
}

pub(crate) fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

pub(crate) fn diff(a: &[f64], b: &[f64], h: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| (a - b) / h).collect()
}

/// One time node of the orbit t -> g_t x.
#[derive(Debug, Clone)]
pub struct OrbitSample<P> {
    pub weight: f64,
    pub point: P,
    /// Ambient velocity of the orbit.
    pub velocity: Vec<f64>,
    /// mu(X_t)(g_t x).
    pub moment: f64,
}

/// A group acting on a Domic-Toledo space with an equivariant moment map,
/// together with the path algebra of its universal cover.
pub trait HamiltonianAction<S: DomicToledo>: Sync {
    type Path: Clone + Send + Sync;
    type Element: Clone + Send + Sync;

    /// Streams the composite time quadrature nodes of the orbit of x along the path.
    fn orbit_samples(
        &self,
        path: &Self::Path,
        x: &S::Point,
        t_order: usize,
        sink: &mut dyn FnMut(OrbitSample<S::Point>) -> Result<()>,
    ) -> Result<()>;
    /// Endpoint action g_1 x.
    fn act_endpoint(&self, path: &Self::Path, x: &S::Point) -> Result<S::Point>;
    /// Distance of the endpoint from the identity.
    fn loop_residual(&self, path: &Self::Path) -> f64;
    /// Path representing the product p1 p2 in the universal cover.
    fn concat(&self, p1: &Self::Path, p2: &Self::Path) -> Self::Path;
    fn power(&self, p: &Self::Path, k: usize) -> Self::Path;
    /// Path representing the inverse in the universal cover.
    fn inverse(&self, p: &Self::Path) -> Self::Path;
    fn act(&self, h: &Self::Element, x: &S::Point) -> S::Point;
    fn inverse_element(&self, h: &Self::Element) -> Self::Element;
    /// The path t -> h g_t h^{-1}.
    fn conjugate(&self, p: &Self::Path, h: &Self::Element) -> Self::Path;
}

/// Quadrature parameters for engine evaluations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quad {
    /// Gauss-Legendre order per time cell.
    pub t_order: usize,
    /// Gauss-Legendre order along the join geodesics.
    pub s_order: usize,
    /// If set, evaluations whose error estimate exceeds this fail.
    pub tol: Option<f64>,
}

impl Default for Quad {
    fn default() -> Self {
        Quad { t_order: 16, s_order: 16, tol: None }
    }
}

impl Quad {
    pub fn new(t_order: usize, s_order: usize) -> Self {
        Quad { t_order, s_order, tol: None }
    }

    fn halved(&self) -> Quad {
        Quad { t_order: (self.t_order / 2).max(2), s_order: (self.s_order / 2).max(2), tol: None }
    }

    fn doubled(&self) -> Quad {
        Quad { t_order: self.t_order * 2, s_order: self.s_order * 2, tol: self.tol }
    }
}

/// One quasimorphism evaluation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QmReport {
    pub value: f64,
    pub disk_term: f64,
    pub moment_term: f64,
    pub t_order: usize,
    pub s_order: usize,
    /// |value - value at half the quadrature orders|.
    pub error_estimate: f64,
    pub basepoint: String,
}

const BATCH: usize = 64;

fn disk_and_moment<S, A>(inst: &S, act: &A, path: &A::Path, x: &S::Point, q: Quad) -> Result<(f64, f64)>
where
    S: DomicToledo,
    A: HamiltonianAction<S>,
{
    let mut disk = 0.0;
    let mut moment = 0.0;
    let mut batch: Vec<OrbitSample<S::Point>> = Vec::with_capacity(BATCH);
    let flush = |batch: &mut Vec<OrbitSample<S::Point>>, disk: &mut f64| -> Result<()> {
        let parts: Vec<Result<f64>> = batch
            .par_iter()
            .map(|smp| inst.join_density(x, &smp.point, &smp.velocity, q.s_order).map(|l| smp.weight * l))
            .collect();
        for p in parts {
            *disk += p?;
        }
        batch.clear();
        Ok(())
    };
    act.orbit_samples(path, x, q.t_order, &mut |smp| {
        moment += smp.weight * smp.moment;
        batch.push(smp);
        if batch.len() == BATCH {
            flush(&mut batch, &mut disk)?;
        }
        Ok(())
    })?;
    flush(&mut batch, &mut disk)?;
    Ok((disk, moment))
}

/// nu_x of the path with disk = geodesic join from x, closed by the radial leg [g x, x].
pub fn nu_x<S, A>(inst: &S, act: &A, path: &A::Path, x: &S::Point, q: Quad) -> Result<QmReport>
where
    S: DomicToledo,
    A: HamiltonianAction<S>,
{
    let (disk, moment) = disk_and_moment(inst, act, path, x, q)?;
    let (dc, mc) = disk_and_moment(inst, act, path, x, q.halved())?;
    let value = disk - moment;
    let err = ((dc - mc) - value).abs();
    if let Some(tol) = q.tol {
        if err > tol {
            return Err(QmError::Quadrature { best: value, error: err });
        }
    }
    Ok(QmReport {
        value,
        disk_term: disk,
        moment_term: moment,
        t_order: q.t_order,
        s_order: q.s_order,
        error_estimate: err,
        basepoint: inst.describe(x),
    })
}

/// Action homomorphism on a loop based at the identity.
pub fn action_homomorphism<S, A>(inst: &S, act: &A, lp: &A::Path, x: &S::Point, q: Quad) -> Result<QmReport>
where
    S: DomicToledo,
    A: HamiltonianAction<S>,
{
    let r = act.loop_residual(lp);
    if r > 1e-8 {
        return Err(QmError::NotALoop(r));
    }
    nu_x(inst, act, lp, x, q)
}

fn triangle_at<S: DomicToledo>(inst: &S, x: &S::Point, y: &S::Point, z: &S::Point, q: Quad) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(q.t_order);
    let parts: Vec<Result<f64>> = nodes
        .par_iter()
        .zip(weights.par_iter())
        .map(|(t, w)| {
            let c = inst.geodesic(y, z, *t);
            let dc = diff(
                &inst.embed(&inst.geodesic(y, z, t + FD_STEP)),
                &inst.embed(&inst.geodesic(y, z, t - FD_STEP)),
                2.0 * FD_STEP,
            );
            inst.join_density(x, &c, &dc, q.s_order).map(|l| w * l)
        })
        .collect();
    let mut s = 0.0;
    for p in parts {
        s += p?;
    }
    Ok(s)
}

/// Area of the geodesic join {geodesic(x, geodesic(y, z, t), s)} with Richardson doubling.
/// Returns (value, error estimate). With `q.tol` set, doubles up to order 128 before failing.
pub fn triangle_area<S: DomicToledo>(inst: &S, x: &S::Point, y: &S::Point, z: &S::Point, q: Quad) -> Result<(f64, f64)> {
    let mut cur = q;
    let mut v0 = triangle_at(inst, x, y, z, cur)?;
    loop {
        let next = cur.doubled();
        let v1 = triangle_at(inst, x, y, z, next)?;
        let err = (v1 - v0).abs();
        match q.tol {
            None => return Ok((v1, err)),
            Some(tol) if err <= tol => return Ok((v1, err)),
            Some(_) if next.t_order >= 128 => return Err(QmError::Quadrature { best: v1, error: err }),
            Some(_) => {
                v0 = v1;
                cur = next;
            }
        }
    }
}

/// Result of a defect evaluation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DefectReport {
    pub defect: f64,
    pub triangle: f64,
    /// Combined quadrature error estimate of both sides.
    pub tolerance: f64,
}

/// nu_x(p1 p2) - nu_x(p1) - nu_x(p2) against the area of the triangle (x, g x, g h x).
pub fn defect<S, A>(inst: &S, act: &A, p1: &A::Path, p2: &A::Path, x: &S::Point, q: Quad) -> Result<DefectReport>
where
    S: DomicToledo,
    A: HamiltonianAction<S>,
{
    let prod = act.concat(p1, p2);
    let a = nu_x(inst, act, &prod, x, q)?;
    let b = nu_x(inst, act, p1, x, q)?;
    let c = nu_x(inst, act, p2, x, q)?;
    let gx = act.act_endpoint(p1, x)?;
    let ghx = act.act_endpoint(&prod, x)?;
    let (tri, terr) = triangle_area(inst, x, &gx, &ghx, Quad { tol: None, ..q })?;
    Ok(DefectReport {
        defect: a.value - b.value - c.value,
        triangle: tri,
        tolerance: a.error_estimate + b.error_estimate + c.error_estimate + terr,
    })
}

/// Homogenization over the schedule k = 1, 2, 4, ..., k_max.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Homogenized {
    pub estimate: f64,
    pub half_width: f64,
    /// Largest observed defect: doubling defects along the schedule and, from `homogenize`,
    /// the triangle areas (x, g^a x, g^{a+b} x) for a + b <= k_max.
    pub max_defect: f64,
    /// (k, nu_x(g^k), error estimate) along the schedule.
    pub schedule: Vec<(usize, f64, f64)>,
}

pub fn schedule(k_max: usize) -> Vec<usize> {
    let mut ks = vec![];
    let mut k = 1;
    while k < k_max {
        ks.push(k);
        k *= 2;
    }
    ks.push(k_max);
    ks
}

/// Builds the homogenized estimate from values on a doubling schedule.
pub fn homogenize_values(values: Vec<(usize, f64, f64)>) -> Homogenized {
    let mut d = 0.0f64;
    for w in values.windows(2) {
        let (k0, v0, _) = w[0];
        let (k1, v1, _) = w[1];
        // exact doubling gives a defect; a non-doubling last step is rescaled to the same form
        let r = v1 - v0 * (k1 as f64 / k0 as f64);
        d = d.max(r.abs());
    }
    let &(k, v, e) = values.last().expect("non-empty schedule");
    Homogenized {
        estimate: v / k as f64,
        half_width: (d + e) / k as f64,
        max_defect: d,
        schedule: values,
    }
}

pub fn homogenize<S, A>(inst: &S, act: &A, path: &A::Path, x: &S::Point, k_max: usize, q: Quad) -> Result<Homogenized>
where
    S: DomicToledo,
    A: HamiltonianAction<S>,
{
    if k_max < 2 {
        return Err(QmError::Invalid("k_max must be at least 2".into()));
    }
    let mut vals = vec![];
    for k in schedule(k_max) {
        let pk = act.power(path, k);
        let r = nu_x(inst, act, &pk, x, q)?;
        vals.push((k, r.value, r.error_estimate));
    }
    let mut h = homogenize_values(vals);
    let d = orbit_defect(inst, act, path, x, k_max, q)?;
    if d > h.max_defect {
        let &(k, _, e) = h.schedule.last().expect("non-empty schedule");
        h.max_defect = d;
        h.half_width = (d + e) / k as f64;
    }
    Ok(h)
}

/// Largest |nu_x(g^{a+b}) - nu_x(g^a) - nu_x(g^b)| over a, b >= 1 with a + b <= k_max, read off
/// as the areas of the triangles (x, g^a x, g^{a+b} x) plus their quadrature error.
/// Doubling defects alone can miss the largest defect when the orbit is nearly periodic.
pub fn orbit_defect<S, A>(inst: &S, act: &A, path: &A::Path, x: &S::Point, k_max: usize, q: Quad) -> Result<f64>
where
    S: DomicToledo,
    A: HamiltonianAction<S>,
{
    let mut orbit = vec![x.clone()];
    for j in 1..=k_max {
        orbit.push(act.act_endpoint(path, &orbit[j - 1])?);
    }
    let pairs: Vec<(usize, usize)> = (1..k_max).flat_map(|a| (1..=k_max - a).map(move |b| (a, b))).collect();
    let tq = Quad::new((q.t_order / 2).max(4), (q.s_order / 2).max(4));
    let areas: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| triangle_area(inst, x, &orbit[a], &orbit[a + b], tq).map(|(v, e)| v.abs() + e))
        .collect();
    let mut d = 0.0f64;
    for v in areas {
        d = d.max(v?);
    }
    Ok(d)
}

/// (nu_x(h g h^{-1}), nu_{h^{-1} x}(g)).
pub fn conjugation_transport<S, A>(
    inst: &S,
    act: &A,
    path: &A::Path,
    h: &A::Element,
    x: &S::Point,
    q: Quad,
) -> Result<(QmReport, QmReport)>
where
    S: DomicToledo,
    A: HamiltonianAction<S>,
{
    let conj = act.conjugate(path, h);
    let lhs = nu_x(inst, act, &conj, x, q)?;
    let hx = act.act(&act.inverse_element(h), x);
    let rhs = nu_x(inst, act, path, &hx, q)?;
    Ok((lhs, rhs))
}

/// A piecewise-exponential path in Sp(2n,R): g(t) = exp((t - t_i) X_i) g_i on [t_i, t_{i+1}].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPath {
    pub times: Vec<f64>,
    pub elements: Vec<SympMatrix>,
    /// Right-trivialized generators X_i = (dg/dt) g^{-1}, constant on each cell.
    pub generators: Vec<SpAlgebra>,
}

impl GroupPath {
    pub fn constant(n: usize) -> Self {
        GroupPath {
            times: vec![0.0, 1.0],
            elements: vec![SympMatrix::identity(n), SympMatrix::identity(n)],
            generators: vec![SpAlgebra::zero(n)],
        }
    }

    /// Path from cell generators on the grid `times` (0 = t_0 < ... < t_m = 1), starting at Id.
    pub fn from_generators(times: Vec<f64>, generators: Vec<SpAlgebra>) -> Result<Self> {
        if times.len() != generators.len() + 1 || generators.is_empty() {
            return Err(QmError::Invalid("need one generator per time cell".into()));
        }
        if times[0] != 0.0 || (times[times.len() - 1] - 1.0).abs() > 1e-15 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QmError::Invalid("time grid must increase from 0 to 1".into()));
        }
        let n = generators[0].n();
        let mut elements = vec![SympMatrix::identity(n)];
        for (i, x) in generators.iter().enumerate() {
            let dt = times[i + 1] - times[i];
            let step = mat_exp(&(&x.m * dt))?;
            elements.push(SympMatrix::from_unchecked(step * &elements[i].m));
        }
        Ok(GroupPath { times, elements, generators })
    }

    /// Uniform grid with the given cell generators.
    pub fn uniform(generators: Vec<SpAlgebra>) -> Result<Self> {
        let m = generators.len();
        let times = (0..=m).map(|i| i as f64 / m as f64).collect();
        Self::from_generators(times, generators)
    }

    /// Path through explicit samples g_i at times t_i (g_0 = Id), with logarithmic generators.
    pub fn from_samples(times: Vec<f64>, samples: Vec<SympMatrix>) -> Result<Self> {
        if times.len() != samples.len() || samples.len() < 2 {
            return Err(QmError::Invalid("need matching times and at least two samples".into()));
        }
        let n = samples[0].n();
        if (&samples[0].m - Mat::identity(2 * n, 2 * n)).norm() > 1e-9 {
            return Err(QmError::Invalid("first sample must be the identity".into()));
        }
        let mut gens = vec![];
        for i in 0..samples.len() - 1 {
            let step = &samples[i + 1].m * samples[i].inverse().m;
            let l = crate::symplectic::mat_log(&step)? / (times[i + 1] - times[i]);
            gens.push(SpAlgebra::from_unchecked(l));
        }
        let p = Self::from_generators(times, gens)?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.elements[0].n()
    }

    pub fn cells(&self) -> usize {
        self.generators.len()
    }

    pub fn end(&self) -> &SympMatrix {
        self.elements.last().expect("non-empty path")
    }

    /// Element at time t.
    pub fn eval(&self, t: f64) -> SympMatrix {
        let i = self.cell_of(t);
        self.eval_in_cell(i, t)
    }

    pub fn cell_of(&self, t: f64) -> usize {
        let m = self.cells();
        self.times[1..m].partition_point(|&b| b <= t)
    }

    pub fn eval_in_cell(&self, i: usize, t: f64) -> SympMatrix {
        let e = mat_exp(&(&self.generators[i].m * (t - self.times[i]))).expect("bounded generator");
        SympMatrix::from_unchecked(e * &self.elements[i].m)
    }

    /// max_i ||g_{i+1} - exp(dt X_i) g_i|| relative to ||g_{i+1}||.
    pub fn consistency_residual(&self) -> f64 {
        (0..self.cells())
            .map(|i| {
                let g = self.eval_in_cell(i, self.times[i + 1]);
                (&g.m - &self.elements[i + 1].m).norm() / (1.0 + self.elements[i + 1].m.norm())
            })
            .fold(0.0, f64::max)
    }

    /// Concatenation of pieces (path, left translation), each reparametrized to an equal share of [0,1].
    fn chain(pieces: &[(&GroupPath, SympMatrix)]) -> GroupPath {
        let k = pieces.len() as f64;
        let n = pieces[0].0.n();
        let mut times = vec![0.0];
        let mut elements = vec![SympMatrix::identity(n)];
        let mut generators = vec![];
        for (j, (p, left)) in pieces.iter().enumerate() {
            let linv = left.inverse();
            for i in 0..p.cells() {
                times.push((j as f64 + p.times[i + 1]) / k);
                elements.push(left.mul(&p.elements[i + 1]));
                generators.push(SpAlgebra::from_unchecked(&left.m * &p.generators[i].m * &linv.m * k));
            }
        }
        *times.last_mut().expect("non-empty") = 1.0;
        GroupPath { times, elements, generators }
    }

    /// {g_t} # {g_1 h_t}, representing the product in the universal cover.
    pub fn concat(&self, other: &GroupPath) -> GroupPath {
        Self::chain(&[(self, SympMatrix::identity(self.n())), (other, self.end().clone())])
    }

    /// {g_t} # {g_1 g_t} # ... (k copies).
    pub fn power(&self, k: usize) -> GroupPath {
        if k == 0 {
            return GroupPath::constant(self.n());
        }
        let mut left = SympMatrix::identity(self.n());
        let mut pieces = vec![];
        for _ in 0..k {
            pieces.push((self, left.clone()));
            left = left.mul(self.end());
        }
        Self::chain(&pieces)
    }

    /// t -> g_{1-t} g_1^{-1}.
    pub fn inverse(&self) -> GroupPath {
        let ginv = self.end().inverse();
        let m = self.cells();
        let times = self.times.iter().rev().map(|t| 1.0 - t).collect::<Vec<_>>();
        let elements = self.elements.iter().rev().map(|g| g.mul(&ginv)).collect();
        let generators = (0..m).rev().map(|i| self.generators[i].scale(-1.0)).collect();
        let mut times = times;
        times[0] = 0.0;
        GroupPath { times, elements, generators }
    }

    /// t -> h g_t h^{-1}.
    pub fn conjugate(&self, h: &SympMatrix) -> GroupPath {
        let hinv = h.inverse();
        GroupPath {
            times: self.times.clone(),
            elements: self.elements.iter().map(|g| h.mul(g).mul(&hinv)).collect(),
            generators: self.generators.iter().map(|x| x.adjoint(h)).collect(),
        }
    }
}
