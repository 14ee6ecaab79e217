//! Hamiltonian flows on the grid: flow specifications, RK4 integration of node trajectories
//! together with their linearizations, and pushforward of structure fields.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{interpolate_jet, matrix_siegel, siegel_matrix, Interp, JField, SurfaceGrid};
use crate::error::{QmError, Result};
use crate::expr::{Expr, Jet};

/// A Hamiltonian sampled on the grid at a sequence of times, interpolated by six-point Lagrange
/// in space and linearly in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledHamiltonian {
    pub grid: SurfaceGrid,
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
}

impl SampledHamiltonian {
    pub fn new(grid: SurfaceGrid, times: Vec<f64>, frames: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(QmError::Invalid("sampled Hamiltonian needs one frame per time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QmError::Invalid("frame times must increase".into()));
        }
        if frames.iter().any(|f| f.len() != grid.len() || f.iter().any(|v| !v.is_finite())) {
            return Err(QmError::Invalid("frame size does not match the grid".into()));
        }
        Ok(SampledHamiltonian { grid, times, frames })
    }

    pub fn jet(&self, t: f64, x: f64, y: f64) -> Jet {
        let m = self.times.len();
        if m == 1 || t <= self.times[0] {
            return interpolate_jet(&self.grid, &self.frames[0], x, y);
        }
        if t >= self.times[m - 1] {
            return interpolate_jet(&self.grid, &self.frames[m - 1], x, y);
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let a = interpolate_jet(&self.grid, &self.frames[i], x, y);
        let b = interpolate_jet(&self.grid, &self.frames[i + 1], x, y);
        scale_jet(a, 1.0 - w) + scale_jet(b, w)
    }
}

fn scale_jet(j: Jet, c: f64) -> Jet {
    Jet { v: c * j.v, gx: c * j.gx, gy: c * j.gy, hxx: c * j.hxx, hxy: c * j.hxy, hyy: c * j.hyy }
}

/// Where a Hamiltonian comes from.
#[derive(Debug, Clone)]
pub enum HamSource {
    Expr(Arc<Expr>),
    Sampled(Arc<SampledHamiltonian>),
}

impl HamSource {
    pub fn expr(src: &str) -> Result<Self> {
        Ok(HamSource::Expr(Arc::new(Expr::parse(src)?)))
    }

    pub fn jet(&self, t: f64, x: f64, y: f64) -> Jet {
        match self {
            HamSource::Expr(e) => e.jet(t, x, y),
            HamSource::Sampled(s) => s.jet(t, x, y),
        }
    }

    fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        match self {
            HamSource::Expr(e) => e.eval(t, x, y),
            HamSource::Sampled(s) => s.jet(t, x, y).v,
        }
    }

    pub fn uses_t(&self) -> bool {
        match self {
            HamSource::Expr(e) => e.uses_t(),
            HamSource::Sampled(s) => s.times.len() > 1,
        }
    }

    fn same(&self, other: &HamSource) -> bool {
        match (self, other) {
            (HamSource::Expr(a), HamSource::Expr(b)) => Arc::ptr_eq(a, b) || a.source() == b.source(),
            (HamSource::Sampled(a), HamSource::Sampled(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            HamSource::Expr(e) => e.source().to_string(),
            HamSource::Sampled(s) => format!("sampled[{} frames]", s.frames.len()),
        }
    }
}

/// One piece of a flow: H_seg(tau, x, y) = h_sign * source(t0 + t_sign * tau, x - sx, y - sy)
/// for local time tau in [0, duration].
#[derive(Debug, Clone)]
pub struct Segment {
    pub source: HamSource,
    pub duration: f64,
    /// Number of quadrature cells.
    pub cells: usize,
    pub t0: f64,
    pub t_sign: f64,
    pub h_sign: f64,
    pub shift: (f64, f64),
}

impl Segment {
    pub fn new(source: HamSource, duration: f64, cells: usize) -> Self {
        Segment { source, duration, cells: cells.max(1), t0: 0.0, t_sign: 1.0, h_sign: 1.0, shift: (0.0, 0.0) }
    }

    pub fn jet(&self, tau: f64, x: f64, y: f64) -> Jet {
        scale_jet(self.source.jet(self.t0 + self.t_sign * tau, x - self.shift.0, y - self.shift.1), self.h_sign)
    }

    pub fn value(&self, tau: f64, x: f64, y: f64) -> f64 {
        self.h_sign * self.source.value(self.t0 + self.t_sign * tau, x - self.shift.0, y - self.shift.1)
    }

    pub fn autonomous(&self) -> bool {
        !self.source.uses_t()
    }

    fn mergeable(&self, o: &Segment) -> bool {
        self.autonomous() && o.autonomous() && self.source.same(&o.source) && self.h_sign == o.h_sign && self.shift == o.shift
    }

    fn reversed(&self) -> Segment {
        Segment {
            t0: self.t0 + self.t_sign * self.duration,
            t_sign: -self.t_sign,
            h_sign: -self.h_sign,
            ..self.clone()
        }
    }
}

/// Flow integration tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowTol {
    /// Largest allowed |det A - 1| of the linearizations.
    pub drift: f64,
    /// Largest allowed dt * |DX_H|.
    pub step_bound: f64,
}

impl Default for FlowTol {
    fn default() -> Self {
        FlowTol { drift: 1e-6, step_bound: 0.5 }
    }
}

/// A path in the group of Hamiltonian diffeomorphisms, as the time-concatenation of segments.
#[derive(Debug, Clone)]
pub struct HamFlowSpec {
    pub segments: Vec<Segment>,
    /// RK4 step.
    pub dt: f64,
}

impl HamFlowSpec {
    pub fn new(segments: Vec<Segment>, dt: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(QmError::Invalid("a flow needs at least one segment".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(QmError::Invalid(format!("time step {dt} must be positive")));
        }
        for s in &segments {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(QmError::Invalid(format!("segment duration {} must be positive", s.duration)));
            }
        }
        Ok(HamFlowSpec { segments, dt }.merged())
    }

    /// Single segment generated by an expression in (t, x, y).
    pub fn from_expr(src: &str, duration: f64, cells: usize, dt: f64) -> Result<Self> {
        Self::new(vec![Segment::new(HamSource::expr(src)?, duration, cells)], dt)
    }

    pub fn identity(dt: f64) -> Self {
        Self::from_expr("0", 1.0, 1, dt).expect("valid identity flow")
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start time of each segment.
    pub fn starts(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let a = t;
                t += s.duration;
                a
            })
            .collect()
    }

    fn merged(mut self) -> Self {
        let mut out: Vec<Segment> = Vec::with_capacity(self.segments.len());
        for s in self.segments.drain(..) {
            match out.last_mut() {
                Some(last) if last.mergeable(&s) => {
                    last.duration += s.duration;
                    last.cells += s.cells;
                }
                _ => out.push(s),
            }
        }
        HamFlowSpec { segments: out, dt: self.dt }
    }

    /// Runs `self` and then `other`.
    pub fn then(&self, other: &HamFlowSpec) -> HamFlowSpec {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        HamFlowSpec { segments: segs, dt: self.dt.min(other.dt) }.merged()
    }

    pub fn power(&self, k: usize) -> HamFlowSpec {
        let mut segs = vec![];
        for _ in 0..k.max(1) {
            segs.extend(self.segments.iter().cloned());
        }
        HamFlowSpec { segments: segs, dt: self.dt }.merged()
    }

    /// The reversed flow generated by -H_{T - t}.
    pub fn inverse(&self) -> HamFlowSpec {
        HamFlowSpec { segments: self.segments.iter().rev().map(Segment::reversed).collect(), dt: self.dt }.merged()
    }

    /// Conjugate by the translation p -> p + a: generated by H(p - a).
    pub fn shifted(&self, a: (f64, f64)) -> HamFlowSpec {
        let segs = self
            .segments
            .iter()
            .map(|s| Segment { shift: (s.shift.0 + a.0, s.shift.1 + a.1), ..s.clone() })
            .collect();
        HamFlowSpec { segments: segs, dt: self.dt }
    }

    /// Adds c(t) (an expression in t) to every Hamiltonian; the flow is unchanged.
    pub fn with_added_constant(&self, c: &str) -> Result<HamFlowSpec> {
        let mut segs = vec![];
        for s in &self.segments {
            let src = match &s.source {
                HamSource::Expr(e) => format!("({}) + ({})", e.source(), c),
                HamSource::Sampled(_) => return Err(QmError::Invalid("constant shift needs an expression source".into())),
            };
            segs.push(Segment { source: HamSource::expr(&src)?, ..s.clone() });
        }
        Ok(HamFlowSpec { segments: segs, dt: self.dt })
    }

    /// Segment index and local time of a global time.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let mut a = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if t <= a + s.duration || i + 1 == self.segments.len() {
                return (i, (t - a).clamp(0.0, s.duration));
            }
            a += s.duration;
        }
        unreachable!("non-empty segments")
    }

    /// Grid values of H at global time t, normalized per domain (zero mean on the torus).
    pub fn values(&self, grid: &SurfaceGrid, t: f64) -> Vec<f64> {
        let (i, tau) = self.locate(t);
        self.segment_values(grid, i, tau)
    }

    pub(crate) fn segment_values(&self, grid: &SurfaceGrid, seg: usize, tau: f64) -> Vec<f64> {
        let s = &self.segments[seg];
        let mut h: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.node(k);
                s.value(tau, x, y)
            })
            .collect();
        normalize(grid, &mut h);
        h
    }

    /// Checks compact support on the disk and the step bound on the torus and the disk.
    pub fn validate(&self, grid: &SurfaceGrid, tol: FlowTol) -> Result<()> {
        let active = grid.active_nodes();
        for s in &self.segments {
            for tau in [0.0, 0.5 * s.duration, s.duration] {
                if !grid.is_periodic() {
                    for k in (0..grid.len()).filter(|&k| !grid.active(k)) {
                        let (x, y) = grid.node(k);
                        let v = s.value(tau, x, y);
                        if !(v.abs() <= 1e-10) {
                            return Err(QmError::Support { node: k, value: v });
                        }
                    }
                }
                let lip = active
                    .iter()
                    .map(|&k| {
                        let (x, y) = grid.node(k);
                        let j = s.jet(tau, x, y);
                        (j.hxx * j.hxx + 2.0 * j.hxy * j.hxy + j.hyy * j.hyy).sqrt()
                    })
                    .fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
                if self.dt * lip > tol.step_bound {
                    return Err(QmError::StepBound(self.dt * lip));
                }
            }
        }
        Ok(())
    }
}

/// Recenters to zero mean on the torus; disk Hamiltonians are left as they are.
pub fn normalize(grid: &SurfaceGrid, h: &mut [f64]) {
    if grid.is_periodic() {
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        h.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Node state: position and row-major linearization.
pub type NodeState = [f64; 6];

pub(crate) fn initial_state(grid: &SurfaceGrid, k: usize) -> NodeState {
    let (x, y) = grid.node(k);
    [x, y, 1.0, 0.0, 0.0, 1.0]
}

fn rhs(seg: &Segment, tau: f64, s: &NodeState) -> NodeState {
    let j = seg.jet(tau, s[0], s[1]);
    // X_H = (-H_y, H_x), DX_H = [[-H_xy, -H_yy], [H_xx, H_xy]]
    let m = [-j.hxy, -j.hyy, j.hxx, j.hxy];
    [
        -j.gy,
        j.gx,
        m[0] * s[2] + m[1] * s[4],
        m[0] * s[3] + m[1] * s[5],
        m[2] * s[2] + m[3] * s[4],
        m[2] * s[3] + m[3] * s[5],
    ]
}

fn rk4(seg: &Segment, tau: f64, h: f64, s: &NodeState) -> NodeState {
    let add = |a: &NodeState, k: &NodeState, c: f64| -> NodeState { std::array::from_fn(|i| a[i] + c * k[i]) };
    let k1 = rhs(seg, tau, s);
    let k2 = rhs(seg, tau + 0.5 * h, &add(s, &k1, 0.5 * h));
    let k3 = rhs(seg, tau + 0.5 * h, &add(s, &k2, 0.5 * h));
    let k4 = rhs(seg, tau + h, &add(s, &k3, h));
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Integrates one node from local time ta to tb (either direction) with steps aligned to multiples of dt,
/// calling `each` after every step.
pub(crate) fn integrate_segment(seg: &Segment, dt: f64, ta: f64, tb: f64, s: &mut NodeState, each: &mut impl FnMut(&NodeState)) {
    let mut t = ta;
    while t != tb {
        let mut next = if tb > ta { ((t / dt).floor() + 1.0) * dt } else { ((t / dt).ceil() - 1.0) * dt };
        if (tb > ta && next <= t) || (tb < ta && next >= t) {
            next += if tb > ta { dt } else { -dt };
        }
        let target = if tb > ta { next.min(tb) } else { next.max(tb) };
        *s = rk4(seg, t, target - t, s);
        t = target;
        each(s);
    }
}

impl HamFlowSpec {
    /// Forward integration of one node state from global time a to b >= a.
    pub(crate) fn forward_node(&self, s: &mut NodeState, a: f64, b: f64, each: &mut impl FnMut(&NodeState)) {
        let starts = self.starts();
        for (i, seg) in self.segments.iter().enumerate() {
            let (lo, hi) = (starts[i], starts[i] + seg.duration);
            let (ta, tb) = (a.max(lo), b.min(hi));
            if ta < tb {
                integrate_segment(seg, self.dt, ta - lo, tb - lo, s, each);
            }
        }
    }

    /// Backward characteristic: integrates from (segment, local time) down to global time 0.
    pub(crate) fn backward_node(&self, s: &mut NodeState, seg: usize, tau: f64) {
        integrate_segment(&self.segments[seg], self.dt, tau, 0.0, s, &mut |_| {});
        for i in (0..seg).rev() {
            let d = self.segments[i].duration;
            integrate_segment(&self.segments[i], self.dt, d, 0.0, s, &mut |_| {});
        }
    }
}

/// Largest |det A - 1| over the states, with its node.
pub(crate) fn check_drift(states: &[NodeState], tol: f64) -> Result<()> {
    let (node, drift) = states
        .iter()
        .enumerate()
        .map(|(k, s)| (k, (s[2] * s[5] - s[3] * s[4] - 1.0).abs()))
        .fold((0, 0.0), |m, v| if v.1 > m.1 || v.1.is_nan() { v } else { m });
    if !(drift <= tol) {
        return Err(QmError::FlowDrift { node, drift });
    }
    Ok(())
}

/// Forward and inverse flow data at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub grid: SurfaceGrid,
    pub time: f64,
    /// phi_t(p) and A(p, t) = D phi_t(p) per node.
    pub forward: Vec<NodeState>,
    /// phi_t^{-1}(p) and D phi_t^{-1}(p) per node.
    pub inverse: Vec<NodeState>,
}

impl FlowState {
    pub fn position(&self, k: usize) -> (f64, f64) {
        (self.forward[k][0], self.forward[k][1])
    }

    pub fn jacobian(&self, k: usize) -> [f64; 4] {
        let s = &self.forward[k];
        [s[2], s[3], s[4], s[5]]
    }
}

/// Flow of `spec` up to global time t (the whole path if `None`).
pub fn integrate_flow_to(grid: &SurfaceGrid, spec: &HamFlowSpec, t: Option<f64>, tol: FlowTol) -> Result<FlowState> {
    spec.validate(grid, tol)?;
    let t = t.unwrap_or_else(|| spec.total_time()).clamp(0.0, spec.total_time());
    let (seg, tau) = spec.locate(t);
    let nodes: Vec<usize> = (0..grid.len()).collect();
    let forward: Vec<NodeState> = nodes
        .par_iter()
        .map(|&k| {
            let mut s = initial_state(grid, k);
            if grid.active(k) {
                spec.forward_node(&mut s, 0.0, t, &mut |_| {});
            }
            s
        })
        .collect();
    let inverse: Vec<NodeState> = nodes
        .par_iter()
        .map(|&k| {
            let mut s = initial_state(grid, k);
            if grid.active(k) {
                spec.backward_node(&mut s, seg, tau);
            }
            s
        })
        .collect();
    check_drift(&forward, tol.drift)?;
    check_drift(&inverse, tol.drift)?;
    Ok(FlowState { grid: *grid, time: t, forward, inverse })
}

pub fn integrate_flow(grid: &SurfaceGrid, spec: &HamFlowSpec, tol: FlowTol) -> Result<FlowState> {
    integrate_flow_to(grid, spec, None, tol)
}

/// B^{-1} J B for B with unit determinant up to drift.
pub(crate) fn conj_by_inverse(b: [f64; 4], j: [f64; 4]) -> [f64; 4] {
    let det = b[0] * b[3] - b[1] * b[2];
    let bi = [b[3] / det, -b[1] / det, -b[2] / det, b[0] / det];
    let m = |p: [f64; 4], q: [f64; 4]| [p[0] * q[0] + p[1] * q[2], p[0] * q[1] + p[1] * q[3], p[2] * q[0] + p[3] * q[2], p[2] * q[1] + p[3] * q[3]];
    m(m(bi, j), b)
}

/// Pushforward (phi . J)(p) = A(q) J(q) A(q)^{-1} at node p with q = phi^{-1}(p) and A(q)^{-1} = D phi^{-1}(p),
/// given the inverse-flow state of p.
pub(crate) fn pushforward_node(inv: &NodeState, j: (f64, f64)) -> (f64, f64) {
    let b = [inv[2], inv[3], inv[4], inv[5]];
    matrix_siegel(conj_by_inverse(b, siegel_matrix(j.0, j.1)))
}

/// The structure field phi_t . J, with J interpolated at the inverse-flow foot points.
pub fn pushforward_j(state: &FlowState, j: &JField, interp: Interp) -> Result<JField> {
    if state.grid != j.grid {
        return Err(QmError::Invalid("flow and field live on different grids".into()));
    }
    let it = j.interpolant(interp);
    let vals: Vec<Result<(f64, f64)>> = (0..state.grid.len())
        .into_par_iter()
        .map(|k| {
            if !state.grid.active(k) {
                return Ok((j.x[k], j.y[k]));
            }
            let inv = &state.inverse[k];
            Ok(pushforward_node(inv, it.at(inv[0], inv[1])?))
        })
        .collect();
    let (mut x, mut y) = (Vec::with_capacity(vals.len()), Vec::with_capacity(vals.len()));
    for v in vals {
        let (a, b) = v?;
        x.push(a);
        y.push(b);
    }
    JField::new(state.grid, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_hamiltonian_gives_identity_flow() {
        let g = SurfaceGrid::torus(16).unwrap();
        let st = integrate_flow(&g, &HamFlowSpec::identity(0.1), FlowTol::default()).unwrap();
        for k in 0..g.len() {
            assert_eq!(st.position(k), g.node(k));
            assert_eq!(st.jacobian(k), [1.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn linear_hamiltonian_translates() {
        let g = SurfaceGrid::torus(16).unwrap();
        let st = integrate_flow(&g, &HamFlowSpec::from_expr("y", 0.3, 1, 0.01).unwrap(), FlowTol::default()).unwrap();
        for k in [0, 37, 255] {
            let (x, y) = g.node(k);
            let (px, py) = st.position(k);
            assert!((px - (x - 0.3)).abs() < 1e-13 && (py - y).abs() < 1e-15);
            assert_eq!(st.jacobian(k), [1.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn oscillator_linearization_is_rotation() {
        let g = SurfaceGrid::disk(64, 2.0).unwrap();
        // harmonic near the center, cut off smoothly before the boundary
        let h = "0.5*(x^2+y^2)*max(0, 1 - (x^2+y^2)/4)^4";
        let spec = HamFlowSpec::from_expr(h, 1.3, 1, 1e-3).unwrap();
        let st = integrate_flow(&g, &spec, FlowTol::default()).unwrap();
        let k = g.index(32, 32);
        let (x, y) = g.node(k);
        assert!(x.hypot(y) < 0.05);
        // A(0, t) for the exact oscillator is exp(t J0); the node sits close to the center
        let s0 = HamFlowSpec::from_expr("0.5*(x^2+y^2)", 1.3, 1, 1e-3).unwrap();
        let mut s = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        s0.forward_node(&mut s, 0.0, 1.3, &mut |_| {});
        let (c, sn) = (1.3f64.cos(), 1.3f64.sin());
        assert!((s[2] - c).abs() < 1e-12 && (s[3] + sn).abs() < 1e-12 && (s[4] - sn).abs() < 1e-12);
        let a = st.jacobian(k);
        assert!((a[0] - c).abs() < 0.1 && (a[2] - sn).abs() < 0.1, "{a:?} {c} {sn}");
    }

    #[test]
    fn forward_and_inverse_are_inverse() {
        let g = SurfaceGrid::torus(16).unwrap();
        let spec = HamFlowSpec::from_expr("0.05*sin(2*pi*x)*cos(2*pi*y)*(1+t)", 1.0, 1, 0.01).unwrap();
        let st = integrate_flow(&g, &spec, FlowTol::default()).unwrap();
        let k = 77;
        let (px, py) = st.position(k);
        // flow the image backward from time 1 and compare with the node
        let mut s = [px, py, 1.0, 0.0, 0.0, 1.0];
        spec.backward_node(&mut s, 0, 1.0);
        let n = g.node(k);
        assert!((s[0] - n.0).abs() < 1e-9 && (s[1] - n.1).abs() < 1e-9);
    }

    #[test]
    fn disk_support_is_enforced() {
        let g = SurfaceGrid::disk(16, 1.0).unwrap();
        let spec = HamFlowSpec::from_expr("x^2", 1.0, 1, 0.01).unwrap();
        assert!(matches!(integrate_flow(&g, &spec, FlowTol::default()), Err(QmError::Support { .. })));
    }

    #[test]
    fn step_bound_is_enforced() {
        let g = SurfaceGrid::torus(16).unwrap();
        let spec = HamFlowSpec::from_expr("10*sin(2*pi*x)", 1.0, 1, 0.1).unwrap();
        assert!(matches!(integrate_flow(&g, &spec, FlowTol::default()), Err(QmError::StepBound(_))));
    }

    #[test]
    fn path_algebra_merges_autonomous_segments() {
        let p = HamFlowSpec::from_expr("sin(2*pi*x)", 0.5, 2, 0.01).unwrap();
        let p4 = p.power(4);
        assert_eq!(p4.segments.len(), 1);
        assert_eq!(p4.segments[0].duration, 2.0);
        assert_eq!(p4.segments[0].cells, 8);
        let inv = p.inverse();
        assert_eq!(inv.segments[0].h_sign, -1.0);
        assert_eq!(p.then(&inv).segments.len(), 2);
        let q = HamFlowSpec::from_expr("t*sin(2*pi*x)", 0.5, 2, 0.01).unwrap();
        assert_eq!(q.power(3).segments.len(), 3);
        let qi = q.inverse();
        // -H_{T - tau}
        assert!((qi.segments[0].value(0.1, 0.25, 0.0) + 0.4).abs() < 1e-15);
    }

    #[test]
    fn pushforward_of_identity_flow_is_unchanged() {
        let g = SurfaceGrid::torus(16).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let j = super::super::grid::random_jfield(&mut rng, g, 3, 2, 0.4);
        let st = integrate_flow(&g, &HamFlowSpec::identity(0.5), FlowTol::default()).unwrap();
        let p = pushforward_j(&st, &j, Interp::Quintic).unwrap();
        for k in 0..g.len() {
            assert!((p.x[k] - j.x[k]).abs() < 1e-13 && (p.y[k] - j.y[k]).abs() < 1e-13);
        }
    }
}
