//! Error types shared across the solver.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("quadrature target {target} lies outside interval [{a}, {b}]")]
    TargetOutsideInterval { target: f64, a: f64, b: f64 },

    #[error("adaptive quadrature did not converge: estimate {estimate:?}, error {error:.3e}, tol {tol:.3e}")]
    QuadratureNonConvergence {
        estimate: Box<[num_complex::Complex64]>,
        error: f64,
        tol: f64,
    },

    #[error("coincident source and target require the singular-rule pathway (separation {sep:.3e})")]
    CoincidentPoints { sep: f64 },

    #[error("matrix is singular at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("wavenumber {0} rejected: the field representation requires Re(k) > 0")]
    InvalidWavenumber(String),

    #[error("operator K at k = 0 is undefined; use the stable decomposition path")]
    StaticKOperator,

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("mode budget {budget} exceeded; unresolved relative RHS norms: {norms:?}")]
    ModeBudgetExceeded { budget: i32, norms: Vec<f64> },

    #[error("evaluation point ({r:.4}, {z:.4}) is too close to a surface (distance {dist:.3e} < {min:.3e})")]
    NearSurfaceEvaluation { r: f64, z: f64, dist: f64, min: f64 },

    #[error("polynomial fit residual {residual:.3e} exceeds tolerance {tol:.3e}; use more or smaller sample wavenumbers")]
    FitResidual { residual: f64, tol: f64 },

    #[error("accuracy contract failed: {0}")]
    AccuracyContract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
