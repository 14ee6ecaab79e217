use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum QmError {
    #[error("matrix is not symplectic (residual {0:.3e})")]
    NotSymplectic(f64),
    #[error("matrix is not in sp(2n) (residual {0:.3e})")]
    NotInAlgebra(f64),
    #[error("matrix is not in U(n) (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("not a compatible complex structure: {0}")]
    NotCompatible(String),
    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("tangent vector violates tangency at J (residual {0:.3e})")]
    NotTangent(f64),
    #[error("angle track undersampled at step {index}: jump of {jump:.4} turns")]
    Undersampled { index: usize, jump: f64 },
    #[error("matrix exponential overflow (norm {0:.3e})")]
    Overflow(f64),
    #[error("quadrature did not converge: best estimate {best:.12e}, error {error:.3e}")]
    Quadrature { best: f64, error: f64 },
    #[error("path is not a loop (endpoint distance {0:.3e})")]
    NotALoop(f64),
    #[error("flow drift {drift:.3e} exceeds tolerance at node {node}; reduce the time step")]
    FlowDrift { node: usize, drift: f64 },
    #[error("step bound violated: |DX| dt = {0:.3e}; reduce the time step")]
    StepBound(f64),
    #[error("interpolation outside valid region at ({0:.4}, {1:.4})")]
    Interpolation(f64, f64),
    #[error("curvature stencil blowup at node {0}")]
    Stencil(usize),
    #[error("Hamiltonian support violation: |H| = {value:.3e} at node {node}")]
    Support { node: usize, value: f64 },
    #[error("calibration ratio not constant: {0}")]
    NonConstantRatio(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, QmError>;
