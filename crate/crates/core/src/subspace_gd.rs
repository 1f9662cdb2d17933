//! Subspace gradient descent with a backtracking line search, optionally
//! steering one sketch column per iteration with the sliding-window UCB rule.
//!
//! Each iteration sees only `S^T grad f(x_k)` for its sketch `S` and steps
//! along `-P grad f(x_k)`, where `P` is the orthogonal projector onto the
//! columns of `S`. The projection is formed from the sketched values alone.
//!
//! With `use_ucb`, the last column of each random draw is dropped and replaced
//! by the UCB direction, so both variants charge `p` directional derivatives
//! per iteration and see the same random columns for a fixed seed.
//!
//! ```
//! use subspace_ucb::problems::{registry, Problem};
//! use subspace_ucb::sketching::SketchSpec;
//! use subspace_ucb::subspace_gd::{run_subspace_gd, GdConfig};
//!
//! let mut p = Problem::new(registry::lookup("sphere", Some(10)).unwrap());
//! let cfg = GdConfig { horizon: 5, sketch: SketchSpec::Identity, ..GdConfig::default() };
//! let h = run_subspace_gd(&mut p, &cfg).unwrap();
//! assert_eq!(h.records.len(), 5);
//! assert!(h.final_f() < 1e-20);
//! ```

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bandit::{UcbConfig, UcbState};
use crate::error::{invalid, Error, Result};
use crate::history::{Diagnostics, IterRecord, RunFailure, RunHistory, RunResult};
use crate::problems::{OracleCapability, Problem};
use crate::sketching::{project_from_sketch, SketchKind, SketchSpec};

/// Line-search acceptance test for `f(x - a d) ? f(x) - sigma a |d|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Acceptance {
    /// Strict `<`, as the solver uses it.
    Strict,
    /// `<= rhs + tol`; only for probing the `sigma = 1` decrease test.
    NonStrict { tol: f64 },
}

impl Acceptance {
    fn accepts(self, f_trial: f64, rhs: f64) -> bool {
        match self {
            Acceptance::Strict => f_trial < rhs,
            Acceptance::NonStrict { tol } => f_trial <= rhs + tol,
        }
    }
}

/// Solver settings. `lambda` and `memory` default to `1/d` and `d/p`.
#[derive(Clone, Debug, PartialEq)]
pub struct GdConfig {
    pub beta: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub sketch: SketchSpec,
    pub use_ucb: bool,
    pub max_backtracks: usize,
    pub lambda: Option<f64>,
    pub memory: Option<usize>,
    pub mu: f64,
    pub acceptance: Acceptance,
    /// Feed the UCB state unit directions with responses scaled to match.
    pub unit_columns: bool,
    /// Record exact gradients and UCB internals per iteration.
    pub diagnostics: bool,
    /// Seed of the sketch stream; the UCB subproblem stream derives from it.
    pub seed: u64,
    /// Overrides for the subproblem solver; `lambda`, `memory`, `mu` and
    /// `seed` are always taken from the fields above.
    pub ucb: Option<UcbConfig>,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            beta: 0.5,
            sigma: 1e-8,
            horizon: 1000,
            sketch: SketchSpec::Gaussian { p: 1 },
            use_ucb: false,
            max_backtracks: 60,
            lambda: None,
            memory: None,
            mu: 0.8,
            acceptance: Acceptance::Strict,
            unit_columns: false,
            diagnostics: false,
            seed: 0,
            ucb: None,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if self.max_backtracks == 0 {
            return Err(invalid("max_backtracks must be at least 1"));
        }
        Ok(())
    }

    /// The UCB settings this run would use in dimension `d`.
    pub fn ucb_config(&self, d: usize) -> UcbConfig {
        let p = self.sketch.size(d);
        let base = UcbConfig::defaults(d, p);
        let mut c = self.ucb.clone().unwrap_or_else(|| base.clone());
        c.lambda = self.lambda.unwrap_or(base.lambda);
        c.memory = self.memory.unwrap_or(base.memory);
        c.mu = self.mu;
        c.seed = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        c
    }

    /// Short label used in file names and reports.
    pub fn label(&self) -> &'static str {
        if self.use_ucb {
            "ucb"
        } else {
            "random"
        }
    }
}

/// Outcome of one line search.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub alpha: f64,
    pub evals: usize,
}

/// Backtracking from `x` along `-direction`: the first `alpha = beta^j`,
/// `j = 0..=cap`, passing the acceptance test. Each trial costs one
/// evaluation; `on_eval` sees every trial value.
#[allow(clippy::too_many_arguments)]
pub fn backtracking_step(
    problem: &mut Problem,
    x: &DVector<f64>,
    fx: f64,
    direction: &DVector<f64>,
    sigma: f64,
    beta: f64,
    cap: usize,
    acceptance: Acceptance,
    mut on_eval: impl FnMut(u64, f64),
) -> Result<StepOutcome> {
    let dd = direction.norm_squared();
    if !(dd > 0.0) {
        return Err(Error::ZeroVector("search direction"));
    }
    let mut alpha = 1.0;
    for j in 0..=cap {
        let trial = x - direction * alpha;
        let ft = problem.evaluate(&trial)?;
        on_eval(problem.eval_count(), ft);
        if acceptance.accepts(ft, fx - sigma * alpha * dd) {
            return Ok(StepOutcome {
                x: trial,
                f: ft,
                alpha,
                evals: j + 1,
            });
        }
        alpha *= beta;
    }
    Err(Error::StepFailure { trials: cap + 1 })
}

/// Run `horizon` iterations from the problem's initial point.
///
/// The problem is switched to solver-only capability for the run and
/// restored afterwards; exact gradients are read only for diagnostics.
pub fn run_subspace_gd(problem: &mut Problem, cfg: &GdConfig) -> RunResult {
    let before = problem.capability();
    let out = run_inner(problem, cfg);
    problem.set_capability(before);
    out
}

fn fail(error: Error, history: RunHistory) -> RunFailure {
    RunFailure {
        error,
        partial: Box::new(history),
    }
}

fn run_inner(problem: &mut Problem, cfg: &GdConfig) -> RunResult {
    let d = problem.dim();
    let x0 = problem.initial_point();
    let solver = format!("gd-{}", cfg.label());
    if let Err(e) = cfg.validate() {
        return Err(fail(
            e,
            RunHistory::new(solver, problem.name(), x0, f64::NAN),
        ));
    }
    let mut f = match problem.evaluate(&x0) {
        Ok(f) => f,
        Err(e) => {
            return Err(fail(
                e,
                RunHistory::new(solver, problem.name(), x0, f64::NAN),
            ))
        }
    };
    let mut hist = RunHistory::new(solver, problem.name(), x0.clone(), f);
    hist.note_eval(problem.eval_count(), f);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ucb = if cfg.use_ucb {
        match UcbState::new(d, cfg.ucb_config(d)) {
            Ok(u) => Some(u),
            Err(e) => return Err(fail(e, hist)),
        }
    } else {
        None
    };
    let diag_mode = cfg.diagnostics;
    problem.set_capability(OracleCapability::SolverOnly);
    let mut x = x0;

    for k in 1..=cfg.horizon {
        let mut redraws = 0;
        let draw = cfg.sketch.draw(d, &mut rng, &mut redraws);
        hist.redraws += redraws;
        let draw = match draw {
            Ok(s) => s,
            Err(e) => return Err(fail(e, hist)),
        };
        let kind = draw.kind();
        let full = draw.into_entries();

        let step = match ucb.as_mut() {
            None => plain_step(problem, &x, full, kind),
            Some(state) => ucb_step(problem, &x, full, state, cfg, diag_mode),
        };
        let (sketch, responses, kind, ucb_diag) = match step {
            Ok(v) => v,
            Err(e) => return Err(fail(e, hist)),
        };
        let direction = match project_from_sketch(&sketch, &responses) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, hist)),
        };

        let diagnostics = if diag_mode {
            problem.set_capability(OracleCapability::Diagnostic);
            let gradient = problem.gradient(&x);
            problem.set_capability(OracleCapability::SolverOnly);
            let gradient = match gradient {
                Ok(g) => g,
                Err(e) => return Err(fail(e, hist)),
            };
            let mut dg = ucb_diag.unwrap_or(Diagnostics {
                gradient: DVector::zeros(0),
                sketch: DMatrix::zeros(0, 0),
                ucb_direction: None,
                estimate: None,
                gradient_bound: None,
                c_inverse: None,
                memory: None,
                lambda: None,
                exact_responses: true,
            });
            dg.gradient = gradient;
            if dg.sketch.ncols() == 0 {
                dg.sketch = sketch.clone();
            }
            Some(dg)
        } else {
            None
        };

        let (x_next, f_next, alpha) = if direction.norm_squared() > 0.0 {
            let trace = &mut hist;
            let out = backtracking_step(
                problem,
                &x,
                f,
                &direction,
                cfg.sigma,
                cfg.beta,
                cfg.max_backtracks,
                cfg.acceptance,
                |e, v| trace.note_eval(e, v),
            );
            match out {
                Ok(s) => (s.x, s.f, s.alpha),
                Err(e) => return Err(fail(e, hist)),
            }
        } else {
            // stationary within the subspace: nothing to search along
            (x.clone(), f, 0.0)
        };

        hist.records.push(IterRecord {
            k,
            x: x.clone(),
            f,
            sketch_kind: kind,
            sketch_cols: sketch.ncols(),
            step_direction: direction,
            alpha,
            f_next,
            evals: problem.eval_count(),
            dirderivs: problem.dirderiv_count(),
            diagnostics,
        });
        x = x_next;
        f = f_next;
        hist.x_final = x.clone();
        if let Some(state) = ucb.as_ref() {
            hist.rebuilds = state.rebuild_count();
        }
    }
    Ok(hist)
}

type StepData = (DMatrix<f64>, DVector<f64>, SketchKind, Option<Diagnostics>);

fn plain_step(
    problem: &mut Problem,
    x: &DVector<f64>,
    s: DMatrix<f64>,
    kind: SketchKind,
) -> Result<StepData> {
    let r = problem.sketched_gradient(x, &s)?;
    Ok((s, r, kind, None))
}

/// Scale columns to unit norm, responses alike.
fn normalize_columns(s: &DMatrix<f64>, r: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut s = s.clone();
    let mut r = r.clone();
    for (j, mut c) in s.column_iter_mut().enumerate() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
            r[j] /= n;
        }
    }
    (s, r)
}

fn ucb_step(
    problem: &mut Problem,
    x: &DVector<f64>,
    full: DMatrix<f64>,
    state: &mut UcbState,
    cfg: &GdConfig,
    diag_mode: bool,
) -> Result<StepData> {
    let d = problem.dim();
    let q = full.ncols().saturating_sub(1);
    let rand_cols = full.columns(0, q).into_owned();
    let r_rand = if q > 0 {
        problem.sketched_gradient(x, &rand_cols)?
    } else {
        DVector::zeros(0)
    };
    if q > 0 {
        state.update_gradient_bound(r_rand.norm(), d, q)?;
    }
    let u = state.gradient_bound();
    let estimate = diag_mode.then(|| state.estimate().clone());
    let c_inverse = diag_mode.then(|| state.c_inverse().clone());
    let (fed_rand, fed_r) = if cfg.unit_columns {
        normalize_columns(&rand_cols, &r_rand)
    } else {
        (rand_cols.clone(), r_rand.clone())
    };
    let s = state.select_with_upcoming(u, &fed_rand);
    let r_s = problem.sketched_gradient(x, &DMatrix::from_column_slice(d, 1, s.as_slice()))?[0];
    if q == 0 {
        // no random part: the new response is the only norm information
        state.update_gradient_bound(r_s.abs(), d, 1)?;
    }
    let mut sketch = rand_cols.insert_column(q, 0.0);
    sketch.set_column(q, &s);
    let mut responses = r_rand.insert_row(q, 0.0);
    responses[q] = r_s;
    let mut fed = fed_rand.insert_column(q, 0.0);
    fed.set_column(q, &s);
    let mut fed_resp = fed_r.insert_row(q, 0.0);
    fed_resp[q] = r_s;
    state.update(&fed, &fed_resp)?;
    let diag = diag_mode.then(|| Diagnostics {
        gradient: DVector::zeros(0),
        sketch: fed.clone(),
        ucb_direction: Some(s.clone()),
        estimate,
        gradient_bound: Some(u),
        c_inverse,
        memory: Some(state.memory()),
        lambda: Some(state.lambda()),
        exact_responses: true,
    });
    let kind = if q == 0 {
        SketchKind::Ucb
    } else {
        SketchKind::Augmented
    };
    Ok((sketch, responses, kind, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{registry, Objective, Quadratic};
    use nalgebra::dvector;
    use std::sync::Arc;

    fn sphere(d: usize) -> Problem {
        Problem::new(registry::lookup("sphere", Some(d)).unwrap())
    }

    #[test]
    fn unit_step_on_sphere() {
        let mut p = sphere(2);
        let x = dvector![1.0, 0.0];
        let out = backtracking_step(
            &mut p,
            &x,
            0.5,
            &dvector![1.0, 0.0],
            1e-8,
            0.5,
            60,
            Acceptance::Strict,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.x, dvector![0.0, 0.0]);
        assert_eq!(out.evals, 1);
        assert_eq!(p.eval_count(), 1);
    }

    #[test]
    fn rescaled_direction_keeps_the_accepted_point() {
        // scaling d by t and sigma by 1/t leaves alpha t and the test unchanged
        let obj = Arc::new(Quadratic::new(
            "q",
            DMatrix::from_diagonal(&dvector![1.0, 10.0]),
            DVector::zeros(2),
            dvector![1.0, 1.0],
        ));
        let x = dvector![1.0, 1.0];
        let fx = obj.value(&x);
        let d = obj.gradient(&x);
        let mut p1 = Problem::new(obj.clone());
        let mut p2 = Problem::new(obj);
        let a = backtracking_step(
            &mut p1,
            &x,
            fx,
            &d,
            1e-4,
            0.5,
            60,
            Acceptance::Strict,
            |_, _| {},
        )
        .unwrap();
        let b = backtracking_step(
            &mut p2,
            &x,
            fx,
            &(&d * 2.0),
            0.5e-4,
            0.5,
            60,
            Acceptance::Strict,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(b.evals, a.evals + 1);
        assert!((a.x - b.x).amax() < 1e-15);
    }

    #[test]
    fn unit_decrease_coefficient_never_accepts_on_a_quadratic() {
        let obj = Arc::new(Quadratic::new(
            "q",
            DMatrix::from_diagonal(&dvector![1.0, 100.0]),
            DVector::zeros(2),
            dvector![1.0, 1.0],
        ));
        let mut p = Problem::new(obj.clone());
        let x = dvector![1.0, 1.0];
        let g = obj.gradient(&x);
        let e = backtracking_step(
            &mut p,
            &x,
            obj.value(&x),
            &g,
            1.0,
            0.75,
            60,
            Acceptance::Strict,
            |_, _| {},
        );
        assert!(matches!(e, Err(Error::StepFailure { trials: 61 })));
    }

    #[test]
    fn non_strict_unit_test_only_accepts_tiny_steps() {
        // f(x - a g) - f(x) + a|g|^2 = a^2 g^T H g / 2, so acceptance needs
        // a <= sqrt(2 tol / g^T H g)
        let obj = Arc::new(Quadratic::new(
            "q",
            DMatrix::from_diagonal(&dvector![1.0, 4.0]),
            DVector::zeros(2),
            dvector![1.0, 1.0],
        ));
        let mut p = Problem::new(obj.clone());
        let x = dvector![1.0, 1.0];
        let g = obj.gradient(&x);
        let tol = 1e-12;
        let out = backtracking_step(
            &mut p,
            &x,
            obj.value(&x),
            &g,
            1.0,
            0.75,
            200,
            Acceptance::NonStrict { tol },
            |_, _| {},
        )
        .unwrap();
        let ghg = g.dot(&(obj.hessian() * &g));
        assert!(out.alpha <= (2.0 * tol / ghg).sqrt());
        assert!(out.alpha > 0.75 * (2.0 * tol / ghg).sqrt() * 0.999);
    }

    #[test]
    fn horizon_contract() {
        let mut p = sphere(3);
        assert!(run_subspace_gd(
            &mut p,
            &GdConfig {
                horizon: 0,
                ..GdConfig::default()
            }
        )
        .is_err());
        let h = run_subspace_gd(
            &mut p,
            &GdConfig {
                horizon: 1,
                ..GdConfig::default()
            },
        )
        .unwrap();
        assert_eq!(h.records.len(), 1);
        assert_eq!(p.capability(), OracleCapability::Diagnostic);
    }

    #[test]
    fn identity_sketch_solves_sphere() {
        let mut p = sphere(10);
        let cfg = GdConfig {
            horizon: 30,
            sketch: SketchSpec::Identity,
            ..GdConfig::default()
        };
        let h = run_subspace_gd(&mut p, &cfg).unwrap();
        let g = p.gradient(&h.x_final).unwrap();
        assert!(g.norm() <= 1e-6);
    }

    #[test]
    fn oracle_parity_and_shared_stream() {
        let cfg = GdConfig {
            horizon: 20,
            sketch: SketchSpec::Gaussian { p: 3 },
            seed: 4,
            diagnostics: true,
            ..GdConfig::default()
        };
        let mut a = Problem::new(registry::lookup("ext_rosenbrock", Some(8)).unwrap());
        let mut b = a.clone();
        let ha = run_subspace_gd(&mut a, &cfg).unwrap();
        let hb = run_subspace_gd(
            &mut b,
            &GdConfig {
                use_ucb: true,
                ..cfg.clone()
            },
        )
        .unwrap();
        for (ra, rb) in ha.records.iter().zip(&hb.records) {
            assert_eq!(ra.dirderivs, rb.dirderivs);
            let sa = &ra.diagnostics.as_ref().unwrap().sketch;
            let sb = &rb.diagnostics.as_ref().unwrap().sketch;
            assert_eq!(sa.columns(0, 2), sb.columns(0, 2));
        }
        assert_eq!(a.dirderiv_count(), 60);
        assert_eq!(b.dirderiv_count(), 60);
    }

    #[test]
    fn values_decrease_monotonically() {
        let mut p = Problem::new(registry::lookup("trigonometric", Some(20)).unwrap());
        let cfg = GdConfig {
            horizon: 50,
            sketch: SketchSpec::Gaussian { p: 1 },
            use_ucb: true,
            seed: 2,
            ..GdConfig::default()
        };
        let h = run_subspace_gd(&mut p, &cfg).unwrap();
        for r in &h.records {
            assert!(r.f_next < r.f || r.alpha == 0.0);
        }
    }

    #[test]
    fn step_failure_keeps_partial_history() {
        let obj = Arc::new(Quadratic::new(
            "q",
            DMatrix::from_diagonal(&dvector![1.0, 100.0]),
            DVector::zeros(2),
            dvector![1.0, 1.0],
        ));
        let mut p = Problem::new(obj);
        let cfg = GdConfig {
            sigma: 1.0,
            beta: 0.75,
            horizon: 5,
            sketch: SketchSpec::Identity,
            max_backtracks: 10,
            ..GdConfig::default()
        };
        let e = run_subspace_gd(&mut p, &cfg).unwrap_err();
        assert!(matches!(e.error, Error::StepFailure { .. }));
        assert_eq!(e.partial.records.len(), 0);
    }

    // The gradient estimate aligns; the chosen direction does not, since
    // `U = (d/p)|r|` keeps the exploration bonus above the exploitation gain.
    #[test]
    fn estimate_locks_onto_a_constant_gradient_direction() {
        let d = 10;
        let c = DVector::from_fn(d, |i, _| 1.0 + i as f64 * 0.1);
        let obj = Arc::new(Quadratic::new(
            "lin",
            DMatrix::identity(d, d) * 2e-4,
            c,
            DVector::zeros(d),
        ));
        let mut p = Problem::new(obj);
        let cfg = GdConfig {
            horizon: 200,
            use_ucb: true,
            diagnostics: true,
            seed: 7,
            ..GdConfig::default()
        };
        let h = run_subspace_gd(&mut p, &cfg).unwrap();
        let tail = &h.records[3 * d..];
        let good = tail
            .iter()
            .filter(|r| {
                let dg = r.diagnostics.as_ref().unwrap();
                let g = dg.estimate.as_ref().unwrap();
                let g = DMatrix::from_column_slice(d, 1, g.as_slice());
                crate::sketching::alignment_ratio(&g, &dg.gradient).unwrap() >= 0.9
            })
            .count();
        assert!(
            good as f64 >= 0.8 * tail.len() as f64,
            "{good} of {}",
            tail.len()
        );
    }
}
