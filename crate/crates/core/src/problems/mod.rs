//! Smooth test objectives and the oracle wrapper handed to solvers.
//!
//! An [`Objective`] is a pure function with a closed-form gradient. A
//! [`Problem`] wraps one and adds the accounting a benchmark needs: a counter
//! of zeroth-order evaluations, a counter of one-dimensional directional
//! derivatives, and a capability flag that hides the full gradient from solver
//! code while a run is in progress.
//!
//! ```
//! use nalgebra::{dvector, DMatrix};
//! use subspace_ucb::problems::{registry, Problem};
//!
//! let mut p = Problem::new(registry::lookup("sphere", Some(3)).unwrap());
//! let x = dvector![2.0, -1.0, 4.0];
//! let s = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
//! assert_eq!(p.sketched_gradient(&x, &s).unwrap()[0], 2.0);
//! assert_eq!(p.dirderiv_count(), 1);
//! ```

mod embed;
mod least_squares;
pub mod registry;
mod suite;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub use embed::EmbeddedProblem;
pub use least_squares::{LeastSquares, LsKind};
pub use suite::{
    BroydenTridiagonal, DiscreteBoundaryValue, ExtendedPowell, ExtendedRosenbrock,
    IllConditionedQuadratic, Penalty1, Quadratic, Sphere, Trigonometric,
};

/// A smooth objective `f: R^d -> R` with an exact gradient.
pub trait Objective: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn initial_point(&self) -> DVector<f64>;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Global Lipschitz constant of the gradient, when known.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }
    /// Bound on the gradient norm over the initial level set, when known.
    fn gradient_bound(&self) -> Option<f64> {
        None
    }
    /// Known minimum value, when available.
    fn optimal_value(&self) -> Option<f64> {
        None
    }
}

/// Who may read the full gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleCapability {
    /// Tests and regret diagnostics: the hidden gradient is readable.
    Diagnostic,
    /// Inside a solver run: only sketched gradients and values.
    SolverOnly,
}

/// Objective plus evaluation counters and an oracle capability flag.
#[derive(Clone)]
pub struct Problem {
    objective: Arc<dyn Objective>,
    eval_count: u64,
    dirderiv_count: u64,
    capability: OracleCapability,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.objective.name())
            .field("dim", &self.objective.dim())
            .field("eval_count", &self.eval_count)
            .field("dirderiv_count", &self.dirderiv_count)
            .field("capability", &self.capability)
            .finish()
    }
}

impl Problem {
    /// Wrap an objective. Counters start at zero with diagnostic capability.
    pub fn new(objective: Arc<dyn Objective>) -> Self {
        assert!(objective.dim() >= 1, "objective dimension must be positive");
        Problem {
            objective,
            eval_count: 0,
            dirderiv_count: 0,
            capability: OracleCapability::Diagnostic,
        }
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn name(&self) -> String {
        self.objective.name()
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn initial_point(&self) -> DVector<f64> {
        self.objective.initial_point()
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.objective.lipschitz_bound()
    }

    pub fn gradient_bound(&self) -> Option<f64> {
        self.objective.gradient_bound()
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }

    pub fn dirderiv_count(&self) -> u64 {
        self.dirderiv_count
    }

    pub fn capability(&self) -> OracleCapability {
        self.capability
    }

    pub fn set_capability(&mut self, capability: OracleCapability) {
        self.capability = capability;
    }

    /// Zero both counters.
    pub fn reset_counters(&mut self) {
        self.eval_count = 0;
        self.dirderiv_count = 0;
    }

    /// `f(x)`; charges one evaluation.
    pub fn evaluate(&mut self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        self.eval_count += 1;
        Ok(self.objective.value(x))
    }

    /// Exact gradient. Not charged, and refused in solver-only mode.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.capability != OracleCapability::Diagnostic {
            return Err(Error::OracleDenied);
        }
        check_dim(self.dim(), x.len())?;
        Ok(self.objective.gradient(x))
    }

    /// `S^T grad f(x)`; charges one directional derivative per column of `s`.
    pub fn sketched_gradient(
        &mut self,
        x: &DVector<f64>,
        s: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), s.nrows())?;
        self.dirderiv_count += s.ncols() as u64;
        let g = self.objective.gradient(x);
        Ok(s.tr_mul(&g))
    }
}

/// Tolerance for comparing an exact gradient with [`finite_difference_gradient`]:
/// relative `rel` plus the roundoff floor `eps |f| / h` of each difference.
pub fn finite_difference_tolerance(
    obj: &dyn Objective,
    x: &DVector<f64>,
    g: &DVector<f64>,
    h: f64,
    rel: f64,
) -> f64 {
    let roundoff = 4.0 * f64::EPSILON * obj.value(x).abs().max(1.0) / h * (x.len() as f64).sqrt();
    rel * g.norm().max(1.0) + roundoff
}

/// Central finite-difference gradient, used as a test oracle.
pub fn finite_difference_gradient(obj: &dyn Objective, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = obj.value(&xp);
        xp[i] = xi - h;
        let fm = obj.value(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}
