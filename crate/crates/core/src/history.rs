//! Per-iteration run records shared by the first-order and derivative-free
//! solvers.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::sketching::SketchKind;

/// Quantities only a diagnostic harness may see, recorded when asked for.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    /// Exact `grad f(x_k)`.
    pub gradient: DVector<f64>,
    /// Every column used in the step, as fed to the UCB state.
    pub sketch: DMatrix<f64>,
    /// UCB direction of this iteration, if any.
    pub ucb_direction: Option<DVector<f64>>,
    /// Estimate `g_k` in force when the direction was chosen.
    pub estimate: Option<DVector<f64>>,
    /// `U_k` used in the choice.
    pub gradient_bound: Option<f64>,
    /// `C_k^{-1}` in force when the direction was chosen.
    pub c_inverse: Option<DMatrix<f64>>,
    /// Memory `M` and regularizer of the UCB state.
    pub memory: Option<usize>,
    pub lambda: Option<f64>,
    /// Responses were exact directional derivatives.
    pub exact_responses: bool,
}

/// One solver iteration.
#[derive(Clone, Debug)]
pub struct IterRecord {
    /// 1-based iteration index.
    pub k: usize,
    pub x: DVector<f64>,
    pub f: f64,
    pub sketch_kind: SketchKind,
    pub sketch_cols: usize,
    /// `P_k grad f(x_k)` for first-order runs, the model step `S z` for
    /// trust-region runs.
    pub step_direction: DVector<f64>,
    /// Accepted step size, or the trust-region radius.
    pub alpha: f64,
    /// Incumbent value after the iteration.
    pub f_next: f64,
    /// Cumulative counters after the iteration.
    pub evals: u64,
    pub dirderivs: u64,
    pub diagnostics: Option<Diagnostics>,
}

/// The trace of one run.
#[derive(Clone, Debug)]
pub struct RunHistory {
    pub solver: String,
    pub problem: String,
    pub dim: usize,
    pub x0: DVector<f64>,
    pub f0: f64,
    pub records: Vec<IterRecord>,
    /// Incumbent after the last iteration.
    pub x_final: DVector<f64>,
    /// `(evaluations so far, best value so far)` after every evaluation.
    pub eval_trace: Vec<(u64, f64)>,
    /// Rejected sketch draws.
    pub redraws: usize,
    /// Dense refactorizations of the UCB inverse.
    pub rebuilds: usize,
    /// Trust-region iterations that produced no model decrease.
    pub null_steps: usize,
    /// Model builds that failed even after an emergency geometry point.
    pub model_failures: usize,
}

impl RunHistory {
    pub fn new(
        solver: impl Into<String>,
        problem: impl Into<String>,
        x0: DVector<f64>,
        f0: f64,
    ) -> Self {
        RunHistory {
            solver: solver.into(),
            problem: problem.into(),
            dim: x0.len(),
            x_final: x0.clone(),
            x0,
            f0,
            records: Vec::new(),
            eval_trace: Vec::new(),
            redraws: 0,
            rebuilds: 0,
            null_steps: 0,
            model_failures: 0,
        }
    }

    /// Incumbent value at the end of the run.
    pub fn final_f(&self) -> f64 {
        self.records.last().map(|r| r.f_next).unwrap_or(self.f0)
    }

    /// Lowest value evaluated during the run.
    pub fn best_f(&self) -> f64 {
        self.eval_trace
            .last()
            .map(|&(_, f)| f)
            .unwrap_or(self.f0)
            .min(self.final_f())
    }

    pub fn evals(&self) -> u64 {
        self.records
            .last()
            .map(|r| r.evals)
            .unwrap_or(0)
            .max(self.eval_trace.last().map(|&(e, _)| e).unwrap_or(0))
    }

    pub fn dirderivs(&self) -> u64 {
        self.records.last().map(|r| r.dirderivs).unwrap_or(0)
    }

    /// Record an evaluation in the best-so-far trace.
    pub fn note_eval(&mut self, evals: u64, f: f64) {
        let best = self.eval_trace.last().map(|&(_, b)| b.min(f)).unwrap_or(f);
        self.eval_trace.push((evals, best));
    }

    /// Best value after at most `evals` evaluations.
    pub fn best_within(&self, evals: u64) -> f64 {
        let i = self.eval_trace.partition_point(|&(e, _)| e <= evals);
        if i == 0 {
            self.f0
        } else {
            self.eval_trace[i - 1].1.min(self.f0)
        }
    }

    /// The JSON-lines rows: a `k = 0` header for the start, then one per
    /// iteration.
    pub fn lines(&self) -> Vec<HistoryLine> {
        let mut out = vec![HistoryLine {
            k: 0,
            f: self.f0,
            alpha: 0.0,
            dirderivs: 0,
            evals: 1,
        }];
        out.extend(self.records.iter().map(|r| HistoryLine {
            k: r.k,
            f: r.f_next,
            alpha: r.alpha,
            dirderivs: r.dirderivs,
            evals: r.evals,
        }));
        out
    }
}

/// One line of a serialized history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryLine {
    pub k: usize,
    pub f: f64,
    pub alpha: f64,
    pub dirderivs: u64,
    pub evals: u64,
}

/// A run that stopped on an error, with everything recorded before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Box<RunHistory>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations",
            self.error,
            self.partial.records.len()
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub type RunResult = std::result::Result<RunHistory, RunFailure>;
