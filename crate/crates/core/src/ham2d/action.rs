//! The product of hyperbolic fibers over the grid as a Domic-Toledo space, and the action of
//! Hamiltonian flows on it with the scalar-curvature moment map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curvature::{hermitian_scalar_curvature, moment_map_ham};
use super::flow::{check_drift, initial_state, integrate_segment, pushforward_node, FlowTol, HamFlowSpec, NodeState};
use super::grid::{Domain, Interp, JField, SurfaceGrid};
use crate::engine::{DomicToledo, HamiltonianAction, OrbitSample};
use crate::error::{QmError, Result};
use crate::quadrature::composite;
use crate::siegel::{hyp_form_trace, hyp_geodesic, hyp_join_density, FormKind};

/// Fiberwise product of upper half-planes, one per node, with the dA-weighted sum of fiber forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpace {
    pub grid: SurfaceGrid,
    pub kind: FormKind,
}

impl FiberSpace {
    pub fn new(grid: SurfaceGrid, kind: FormKind) -> Self {
        FiberSpace { grid, kind }
    }

    fn weight(&self) -> f64 {
        self.kind.scale(1) * self.grid.cell_area()
    }
}

impl DomicToledo for FiberSpace {
    type Point = JField;

    fn embed(&self, p: &JField) -> Vec<f64> {
        p.flat()
    }

    fn retract(&self, c: &[f64]) -> Result<JField> {
        JField::from_flat(self.grid, c)
    }

    fn geodesic(&self, a: &JField, b: &JField, t: f64) -> JField {
        let (x, y) = (0..self.grid.len()).map(|k| hyp_geodesic((a.x[k], a.y[k]), (b.x[k], b.y[k]), t)).unzip();
        JField { grid: self.grid, x, y }
    }

    fn form(&self, p: &JField, a: &[f64], b: &[f64]) -> f64 {
        let n = self.grid.len();
        self.weight() * (0..n).map(|k| hyp_form_trace(p.y[k], (a[k], a[n + k]), (b[k], b[n + k]))).sum::<f64>()
    }

    fn describe(&self, p: &JField) -> String {
        match p.uniform_value() {
            Some((x, y)) => format!("uniform x={x:.6} y={y:.6}"),
            None => {
                let n = p.x.len() as f64;
                format!("field mean x={:.6} mean log y={:.6}", p.x.iter().sum::<f64>() / n, p.y.iter().map(|v| v.ln()).sum::<f64>() / n)
            }
        }
    }

    /// Exact per-fiber densities summed over nodes.
    fn join_density(&self, x: &JField, y: &JField, v: &[f64], _s_order: usize) -> Result<f64> {
        let n = self.grid.len();
        let mut s = 0.0;
        for k in 0..n {
            let (vx, vy) = (v[k], v[n + k]);
            if vx != 0.0 || vy != 0.0 {
                s += hyp_join_density((x.x[k], x.y[k]), (y.x[k], y.y[k]), (vx, vy));
            }
        }
        Ok(self.weight() * s)
    }
}

/// How the moment map is evaluated along an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMode {
    /// S(phi . J) = S(J) o phi^{-1}: curvature of the base field composed with the forward flow.
    #[default]
    Lagrangian,
    /// Curvature of the interpolated pushforward field on the grid.
    Eulerian,
}

impl std::str::FromStr for MomentMode {
    type Err = QmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lagrangian" => Ok(MomentMode::Lagrangian),
            "eulerian" => Ok(MomentMode::Eulerian),
            _ => Err(QmError::Invalid(format!("unknown moment mode '{s}'"))),
        }
    }
}

/// A torus translation by (di, dj) grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridShift {
    pub di: i64,
    pub dj: i64,
}

/// Hamiltonian flows acting on structure fields by pushforward, with moment map
/// mu(H)(J) = -1/2 sum S(J) H dA for the trace form (times the form scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamAction {
    pub grid: SurfaceGrid,
    pub kind: FormKind,
    pub mode: MomentMode,
    pub interp: Interp,
    pub tol: FlowTol,
}

impl HamAction {
    pub fn new(grid: SurfaceGrid, kind: FormKind) -> Self {
        HamAction { grid, kind, mode: MomentMode::default(), interp: Interp::default(), tol: FlowTol::default() }
    }

    pub fn space(&self) -> FiberSpace {
        FiberSpace::new(self.grid, self.kind)
    }

    fn moment_scale(&self) -> f64 {
        -0.5 * self.kind.scale(1)
    }

    fn check_field(&self, x: &JField) -> Result<()> {
        if x.grid != self.grid {
            return Err(QmError::Invalid("structure field lives on a different grid".into()));
        }
        Ok(())
    }

    /// Structure field at the nodes from inverse-flow states of the active nodes.
    fn field_from(&self, x: &JField, active: &[usize], states: &[NodeState]) -> Result<JField> {
        let it = x.interpolant(self.interp);
        let vals: Vec<Result<(f64, f64)>> = states.par_iter().map(|s| Ok(pushforward_node(s, it.at(s[0], s[1])?))).collect();
        let mut out = JField::standard(self.grid);
        if let Domain::Torus = self.grid.domain {
            out.x.clone_from(&x.x);
            out.y.clone_from(&x.y);
        }
        for (&k, v) in active.iter().zip(vals) {
            (out.x[k], out.y[k]) = v?;
        }
        Ok(out)
    }

    fn backward_states(&self, path: &HamFlowSpec, active: &[usize], seg: usize, tau: f64) -> Vec<NodeState> {
        active
            .par_iter()
            .map(|&k| {
                let mut s = initial_state(&self.grid, k);
                path.backward_node(&mut s, seg, tau);
                s
            })
            .collect()
    }

    /// Lagrangian moment values at the plan times, by one forward sweep.
    fn lagrangian_moments(&self, path: &HamFlowSpec, x: &JField, plan: &[PlanNode]) -> Result<Vec<f64>> {
        let s = hermitian_scalar_curvature(&self.grid, x)?;
        if s.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; plan.len()]);
        }
        let nodes: Vec<usize> = (0..self.grid.len()).filter(|&k| s[k] != 0.0).collect();
        let mut states: Vec<NodeState> = nodes.iter().map(|&k| initial_state(&self.grid, k)).collect();
        let mut t_prev = 0.0;
        let mut out = Vec::with_capacity(plan.len());
        for p in plan {
            states.par_iter_mut().for_each(|st| path.forward_node(st, t_prev, p.t, &mut |_| {}));
            t_prev = p.t;
            let seg = &path.segments[p.seg];
            let mean = if self.grid.is_periodic() {
                (0..self.grid.len())
                    .map(|k| {
                        let (a, b) = self.grid.node(k);
                        seg.value(p.tau, a, b)
                    })
                    .sum::<f64>()
                    / self.grid.len() as f64
            } else {
                0.0
            };
            let sum: f64 = nodes.iter().zip(&states).map(|(&k, st)| s[k] * (seg.value(p.tau, st[0], st[1]) - mean)).sum();
            out.push(self.moment_scale() * sum * self.grid.cell_area());
        }
        check_drift(&states, self.tol.drift)?;
        Ok(out)
    }
}

/// One time node of the orbit quadrature.
#[derive(Debug, Clone, Copy)]
struct PlanNode {
    seg: usize,
    tau: f64,
    t: f64,
    weight: f64,
    delta: f64,
}

fn plan(path: &HamFlowSpec, t_order: usize) -> Vec<PlanNode> {
    let starts = path.starts();
    let mut out = vec![];
    for (i, s) in path.segments.iter().enumerate() {
        let edges: Vec<f64> = (0..=s.cells).map(|c| s.duration * c as f64 / s.cells as f64).collect();
        let delta = 1e-5 * s.duration / s.cells as f64;
        for (tau, weight) in composite(&edges, t_order) {
            out.push(PlanNode { seg: i, tau, t: starts[i] + tau, weight, delta });
        }
    }
    out
}

impl HamiltonianAction<FiberSpace> for HamAction {
    type Path = HamFlowSpec;
    type Element = GridShift;

    fn orbit_samples(
        &self,
        path: &HamFlowSpec,
        x: &JField,
        t_order: usize,
        sink: &mut dyn FnMut(OrbitSample<JField>) -> Result<()>,
    ) -> Result<()> {
        self.check_field(x)?;
        path.validate(&self.grid, self.tol)?;
        let plan = plan(path, t_order);
        let lagrangian = match self.mode {
            MomentMode::Lagrangian => Some(self.lagrangian_moments(path, x, &plan)?),
            MomentMode::Eulerian => None,
        };
        let active = self.grid.active_nodes();
        let n = self.grid.len();
        let sweep = path.segments.len() == 1 && path.segments[0].autonomous();
        let mut states: Vec<NodeState> = active.iter().map(|&k| initial_state(&self.grid, k)).collect();
        let mut elapsed = 0.0;
        for (i, p) in plan.iter().enumerate() {
            let mut fields = Vec::with_capacity(3);
            for d in [-p.delta, 0.0, p.delta] {
                let st = if sweep {
                    // the backward characteristic of an autonomous flow is the flow of -X_H
                    let target = p.tau + d;
                    let seg = &path.segments[0];
                    let (a, b) = (-elapsed, -target);
                    states.par_iter_mut().for_each(|s| integrate_segment(seg, path.dt, a, b, s, &mut |_| {}));
                    elapsed = target;
                    states.clone()
                } else {
                    self.backward_states(path, &active, p.seg, p.tau + d)
                };
                check_drift(&st, self.tol.drift)?;
                fields.push(self.field_from(x, &active, &st)?);
            }
            let mut velocity = vec![0.0; 2 * n];
            for &k in &active {
                velocity[k] = (fields[2].x[k] - fields[0].x[k]) / (2.0 * p.delta);
                velocity[n + k] = (fields[2].y[k] - fields[0].y[k]) / (2.0 * p.delta);
            }
            let point = fields.swap_remove(1);
            let moment = match &lagrangian {
                Some(m) => m[i],
                None => {
                    let h = path.segment_values(&self.grid, p.seg, p.tau);
                    self.moment_scale() * moment_map_ham(&self.grid, &h, &point)?
                }
            };
            sink(OrbitSample { weight: p.weight, point, velocity, moment })?;
        }
        Ok(())
    }

    fn act_endpoint(&self, path: &HamFlowSpec, x: &JField) -> Result<JField> {
        self.check_field(x)?;
        path.validate(&self.grid, self.tol)?;
        let active = self.grid.active_nodes();
        let last = path.segments.len() - 1;
        let st = self.backward_states(path, &active, last, path.segments[last].duration);
        check_drift(&st, self.tol.drift)?;
        self.field_from(x, &active, &st)
    }

    fn loop_residual(&self, path: &HamFlowSpec) -> f64 {
        let active = self.grid.active_nodes();
        let total = path.total_time();
        active
            .par_iter()
            .map(|&k| {
                let mut s = initial_state(&self.grid, k);
                path.forward_node(&mut s, 0.0, total, &mut |_| {});
                let (dx, dy) = self.grid.displacement(self.grid.node(k), (s[0], s[1]));
                dx.hypot(dy) + ((s[2] - 1.0).powi(2) + s[3].powi(2) + s[4].powi(2) + (s[5] - 1.0).powi(2)).sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// The product p1 p2 in the universal cover is represented by running p2 first.
    fn concat(&self, p1: &HamFlowSpec, p2: &HamFlowSpec) -> HamFlowSpec {
        p2.then(p1)
    }

    fn power(&self, p: &HamFlowSpec, k: usize) -> HamFlowSpec {
        p.power(k)
    }

    fn inverse(&self, p: &HamFlowSpec) -> HamFlowSpec {
        p.inverse()
    }

    /// (tau . J)(p) = J(p - a) for the translation tau by a.
    fn act(&self, h: &GridShift, x: &JField) -> JField {
        let mut out = JField::standard(self.grid);
        let n = self.grid.n as i64;
        for j in 0..n {
            for i in 0..n {
                let k = self.grid.index(i as usize, j as usize);
                if let Some(src) = self.grid.wrap(i - h.di, j - h.dj) {
                    out.x[k] = x.x[src];
                    out.y[k] = x.y[src];
                }
            }
        }
        out
    }

    fn inverse_element(&self, h: &GridShift) -> GridShift {
        GridShift { di: -h.di, dj: -h.dj }
    }

    fn conjugate(&self, p: &HamFlowSpec, h: &GridShift) -> HamFlowSpec {
        let s = self.grid.spacing();
        p.shifted((h.di as f64 * s, h.dj as f64 * s))
    }
}
