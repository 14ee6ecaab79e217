//! Hamiltonian flows of the flat torus or unit-area disk acting on fields of compatible
//! complex structures, discretized on a uniform grid.

pub mod action;
pub mod curvature;
pub mod flow;
pub mod grid;
pub mod io;
pub mod measures;

pub use action::{FiberSpace, GridShift, HamAction, MomentMode};
pub use curvature::{gaussian_curvature, hermitian_scalar_curvature, moment_map_ham};
pub use flow::{integrate_flow, integrate_flow_to, pushforward_j, FlowState, FlowTol, HamFlowSpec, HamSource, SampledHamiltonian, Segment};
pub use grid::{random_jfield, Domain, Interp, JField, SurfaceGrid};
pub use io::{load_jfield, read_jfield, save_jfield, write_jfield};
pub use measures::{barge_ghys_tau, calabi, frak_s, local_type_report, sobolev_norm_22, LocalTypeReport};
