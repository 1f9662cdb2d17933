//! Derivative-free subspace trust-region solver.
//!
//! Each iteration finds directions already supported by nearby evaluated
//! points, adds geometry directions (chosen by the UCB score, at random, or
//! all of the complement for the full-space baseline), fits a quadratic
//! model on the resulting affine subspace and takes a trust-region step.
//!
//! ```
//! use subspace_ucb::dfo::{run_ss_pounders, TrConfig, Variant};
//! use subspace_ucb::problems::{registry, Problem};
//!
//! let mut p = Problem::new(registry::lookup("sphere", Some(4)).unwrap());
//! let cfg = TrConfig { budget: 60, ..TrConfig::new(Variant::Full) };
//! let h = run_ss_pounders(&mut p, &cfg).unwrap();
//! assert!(h.evals() <= 60);
//! assert!(h.best_f() < 1e-6);
//! ```

mod bank;
mod model;
mod subspace;
mod trsp;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bank::PointBank;
pub use model::{build_subspace_model, point_cap, SubspaceModel};
pub use subspace::{identify_initial_subspace, InitialSubspace};
pub use trsp::{cauchy_point, model_change, solve_trust_region_subproblem};

use crate::bandit::{UcbConfig, UcbState};
use crate::error::{invalid, Error, Result};
use crate::history::{Diagnostics, IterRecord, RunFailure, RunHistory, RunResult};
use crate::problems::{OracleCapability, Problem};
use crate::sketching::{orthogonal_augment, SketchKind};

/// How geometry directions are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// One complement column by UCB score; deterministic.
    Ucb,
    /// One random direction orthogonal to the identified subspace.
    Random,
    /// The UCB column, then one random direction.
    UcbRandom,
    /// Every complement column; the model lives in the full space.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Ucb,
        Variant::Random,
        Variant::UcbRandom,
        Variant::Full,
    ];

    pub fn uses_ucb(self) -> bool {
        matches!(self, Variant::Ucb | Variant::UcbRandom)
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Variant::Random | Variant::UcbRandom)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ucb => "ucb",
            Variant::Random => "random",
            Variant::UcbRandom => "ucb+random",
            Variant::Full => "full",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ucb" => Ok(Variant::Ucb),
            "random" => Ok(Variant::Random),
            "ucb+random" => Ok(Variant::UcbRandom),
            "full" => Ok(Variant::Full),
            other => Err(Error::Parse(format!(
                "unknown variant `{other}` (expected ucb, random, ucb+random or full)"
            ))),
        }
    }
}

/// Trust-region settings. `None` radii are derived from the start point:
/// `delta0 = 0.1 max(1, |x0|_inf)`, `delta_max = 1e3 delta0`,
/// `delta_min = 1e-12 max(1, |x0|_inf)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrConfig {
    pub variant: Variant,
    pub budget: u64,
    pub eta1: f64,
    pub eta2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub delta0: Option<f64>,
    pub delta_max: Option<f64>,
    /// The run stops once the radius falls below this.
    pub delta_min: Option<f64>,
    pub c: f64,
    pub theta1: f64,
    /// Random directions per iteration for the randomized variants.
    pub p_extra: usize,
    pub lambda: Option<f64>,
    pub memory: Option<usize>,
    pub mu: f64,
    pub seed: u64,
    pub diagnostics: bool,
}

impl TrConfig {
    pub fn new(variant: Variant) -> Self {
        TrConfig {
            variant,
            budget: 1000,
            eta1: 0.1,
            eta2: 0.01,
            nu1: 0.5,
            nu2: 2.0,
            delta0: None,
            delta_max: None,
            delta_min: None,
            c: 10.0,
            theta1: 1e-3,
            p_extra: 1,
            lambda: None,
            memory: None,
            mu: 0.8,
            seed: 0,
            diagnostics: false,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.nu1 > 0.0 && self.nu1 < 1.0 && self.nu2 > 1.0) {
            return Err(invalid("radius factors need 0 < nu1 < 1 < nu2"));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(invalid("eta1 and eta2 must be positive"));
        }
        if !(self.c >= 1.0 && self.theta1 > 0.0 && self.theta1 <= 1.0 / self.c) {
            return Err(invalid("need c >= 1 and 0 < theta1 <= 1/c"));
        }
        if let (Some(a), Some(b)) = (self.delta0, self.delta_max) {
            if !(a > 0.0 && a <= b) {
                return Err(invalid("need 0 < delta0 <= delta_max"));
            }
        }
        let need = if self.variant == Variant::Full {
            d as u64 + 2
        } else {
            3
        };
        if self.budget < need {
            return Err(invalid(format!(
                "budget {} below the minimum {need} for {}",
                self.budget, self.variant
            )));
        }
        Ok(())
    }

    fn radii(&self, x0: &DVector<f64>) -> (f64, f64, f64) {
        let scale = x0.amax().max(1.0);
        let d0 = self.delta0.unwrap_or(0.1 * scale);
        let dmax = self.delta_max.unwrap_or(1e3 * d0).max(d0);
        let dmin = self.delta_min.unwrap_or(1e-12 * scale);
        (d0, dmax, dmin)
    }
}

/// The UCB pick among the columns of `s_perp`; `None` when it is empty.
pub fn select_geometry_direction(
    state: &UcbState,
    u: f64,
    s_perp: &DMatrix<f64>,
) -> Result<Option<DVector<f64>>> {
    if s_perp.ncols() == 0 {
        return Ok(None);
    }
    Ok(Some(state.select_from_columns(u, s_perp)?.1))
}

struct Runner<'a> {
    problem: &'a mut Problem,
    bank: PointBank,
    hist: RunHistory,
    budget: u64,
}

impl Runner<'_> {
    /// `f(y)` from the bank or a fresh evaluation; `None` once the budget is
    /// spent.
    fn value(&mut self, y: &DVector<f64>) -> Result<Option<(usize, f64)>> {
        if let Some(i) = self.bank.find(y) {
            return Ok(Some((i, self.bank.value(i))));
        }
        if self.problem.eval_count() >= self.budget {
            return Ok(None);
        }
        let f = self.problem.evaluate(y)?;
        self.hist.note_eval(self.problem.eval_count(), f);
        Ok(Some((self.bank.insert(y.clone(), f), f)))
    }
}

/// Run the trust-region loop until the evaluation budget is spent or the
/// radius collapses. The budget counts every evaluation, the start point
/// included, and is never exceeded.
pub fn run_ss_pounders(problem: &mut Problem, cfg: &TrConfig) -> RunResult {
    let before = problem.capability();
    problem.set_capability(OracleCapability::SolverOnly);
    let out = run_inner(problem, cfg);
    problem.set_capability(before);
    out
}

fn run_inner(problem: &mut Problem, cfg: &TrConfig) -> RunResult {
    let d = problem.dim();
    let x0 = problem.initial_point();
    let solver = format!("ss-pounders-{}", cfg.variant);
    let name = problem.name();
    let fail = |e: Error, h: RunHistory| RunFailure {
        error: e,
        partial: Box::new(h),
    };
    if let Err(e) = cfg.validate(d) {
        return Err(fail(e, RunHistory::new(solver, name, x0, f64::NAN)));
    }
    let budget = problem.eval_count() + cfg.budget;
    let mut run = Runner {
        problem,
        bank: PointBank::new(),
        hist: RunHistory::new(solver.clone(), name.clone(), x0.clone(), f64::NAN),
        budget,
    };
    let f0 = match run.value(&x0) {
        Ok(Some((_, f))) => f,
        Ok(None) => unreachable!("budget validated above"),
        Err(e) => return Err(fail(e, run.hist)),
    };
    run.hist.f0 = f0;
    match iterate(&mut run, cfg, x0, f0) {
        Ok(()) => Ok(run.hist),
        Err(e) => Err(fail(e, run.hist)),
    }
}

fn iterate(run: &mut Runner<'_>, cfg: &TrConfig, x0: DVector<f64>, f0: f64) -> Result<()> {
    let d = x0.len();
    let (mut delta, delta_max, delta_min) = cfg.radii(&x0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ucb = if cfg.variant.uses_ucb() {
        let base = UcbConfig::defaults(d, 1);
        let mut c = UcbConfig::new(cfg.lambda.unwrap_or(base.lambda), cfg.memory.unwrap_or(d));
        c.mu = cfg.mu;
        c.seed = cfg.seed ^ 0x5851_f42d_4c95_7f2d;
        Some(UcbState::new(d, c)?)
    } else {
        None
    };
    let mut u = 0.0;
    let (mut x, mut fx) = (x0, f0);
    let mut k = 0;

    while delta >= delta_min && run.problem.eval_count() < run.budget {
        k += 1;
        let init = identify_initial_subspace(&x, &run.bank, delta, cfg.c, cfg.theta1);
        let mut required = init.contributors.clone();
        let mut cols: Vec<DVector<f64>> = init.s.column_iter().map(|c| c.into_owned()).collect();
        let mut geometry: Vec<DVector<f64>> = Vec::new();
        let mut ucb_dir = None;
        let estimate = ucb
            .as_ref()
            .filter(|_| cfg.diagnostics)
            .map(|s| s.estimate().clone());
        let c_inverse = ucb
            .as_ref()
            .filter(|_| cfg.diagnostics)
            .map(|s| s.c_inverse_owned());

        match cfg.variant {
            Variant::Full => geometry.extend(init.s_perp.column_iter().map(|c| c.into_owned())),
            _ => {
                if let Some(state) = ucb.as_ref() {
                    if let Some(s) = select_geometry_direction(state, u, &init.s_perp)? {
                        ucb_dir = Some(s.clone());
                        geometry.push(s);
                    }
                }
                if cfg.variant.is_randomized() {
                    let taken: Vec<DVector<f64>> =
                        cols.iter().chain(geometry.iter()).cloned().collect();
                    let basis = if taken.is_empty() {
                        DMatrix::zeros(d, 0)
                    } else {
                        DMatrix::from_columns(&taken)
                    };
                    let p = cfg.p_extra.min(d - taken.len());
                    let q = orthogonal_augment(&basis, p, &mut rng)?;
                    geometry.extend(q.column_iter().map(|c| c.into_owned()));
                }
            }
        }

        let mut out_of_budget = false;
        for q in &geometry {
            match run.value(&(&x + q * delta))? {
                Some((i, _)) => required.push(i),
                None => {
                    out_of_budget = true;
                    break;
                }
            }
        }
        if out_of_budget {
            break;
        }
        cols.extend(geometry.iter().cloned());
        if cols.is_empty() {
            // nothing to model in: the subspace search has no direction
            delta *= cfg.nu1;
            run.hist.null_steps += 1;
            continue;
        }
        let basis = DMatrix::from_columns(&cols);
        let radius = 2.0 * cfg.c * delta;
        let model = match build_subspace_model(&run.bank, &x, &basis, delta, radius, &required) {
            Ok(m) => m,
            Err(Error::ModelBuild(_)) => {
                // one emergency geometry point along the weakest column, then retry
                let j = weakest_column(&run.bank, &x, &basis, &required);
                let Some((i, _)) = run.value(&(&x - basis.column(j) * delta))? else {
                    break;
                };
                required.push(i);
                match build_subspace_model(&run.bank, &x, &basis, delta, radius, &required) {
                    Ok(m) => m,
                    Err(Error::ModelBuild(_)) => {
                        run.hist.model_failures += 1;
                        delta *= cfg.nu1;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };

        let z = solve_trust_region_subproblem(&model.gradient, &model.hessian, delta);
        let pred = model.decrease(&z);
        let gnorm = model.gradient.norm();
        let delta_k = delta;
        let (mut x_next, mut f_next) = (x.clone(), fx);
        if pred > 0.0 {
            let trial = model.embed(&z);
            let Some((_, ft)) = run.value(&trial)? else {
                break;
            };
            let rho = (fx - ft) / pred;
            if rho >= cfg.eta1 {
                x_next = trial;
                f_next = ft;
                delta = if gnorm >= cfg.eta2 * delta {
                    (cfg.nu2 * delta).min(delta_max)
                } else {
                    cfg.nu1 * delta
                };
            } else {
                delta *= cfg.nu1;
            }
        } else {
            run.hist.null_steps += 1;
            delta *= cfg.nu1;
        }

        if let Some(state) = ucb.as_mut() {
            state.update(&basis, &model.gradient)?;
            u = state.update_gradient_bound(gnorm, d, basis.ncols())?;
        }
        let kind = match (ucb_dir.is_some(), cfg.variant) {
            (_, Variant::Full) => SketchKind::Explicit,
            (true, _) => SketchKind::Augmented,
            (false, _) => SketchKind::Gaussian,
        };
        let diagnostics = cfg.diagnostics.then(|| Diagnostics {
            gradient: DVector::zeros(0),
            sketch: basis.clone(),
            ucb_direction: ucb_dir.clone(),
            estimate: estimate.clone(),
            gradient_bound: ucb.as_ref().map(|_| u),
            c_inverse: c_inverse.clone(),
            memory: ucb.as_ref().map(|s| s.memory()),
            lambda: ucb.as_ref().map(|s| s.lambda()),
            exact_responses: false,
        });
        run.hist.records.push(IterRecord {
            k,
            x: x.clone(),
            f: fx,
            sketch_kind: kind,
            sketch_cols: basis.ncols(),
            step_direction: &basis * &z,
            alpha: delta_k,
            f_next,
            evals: run.problem.eval_count(),
            dirderivs: run.problem.dirderiv_count(),
            diagnostics,
        });
        x = x_next;
        fx = f_next;
        run.hist.x_final = x.clone();
        if let Some(state) = ucb.as_ref() {
            run.hist.rebuilds = state.rebuild_count();
        }
    }
    Ok(())
}

/// Column of `basis` along which the required points reach least far.
fn weakest_column(
    bank: &PointBank,
    x: &DVector<f64>,
    basis: &DMatrix<f64>,
    required: &[usize],
) -> usize {
    let mut reach = vec![0.0f64; basis.ncols()];
    for &i in required {
        let z = basis.tr_mul(&(bank.point(i) - x));
        for (r, v) in reach.iter_mut().zip(z.iter()) {
            *r = r.max(v.abs());
        }
    }
    (0..reach.len())
        .min_by(|&a, &b| reach[a].total_cmp(&reach[b]))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::problems::{registry, EmbeddedProblem, Quadratic};
    use std::sync::Arc;

    fn problem(name: &str, d: usize) -> Problem {
        Problem::new(registry::lookup(name, Some(d)).unwrap())
    }

    #[test]
    fn variant_strings_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("both".parse::<Variant>().is_err());
    }

    #[test]
    fn full_space_solves_the_sphere() {
        let mut p = problem("sphere", 5);
        let cfg = TrConfig {
            budget: 50 * 7,
            ..TrConfig::new(Variant::Full)
        };
        let h = run_ss_pounders(&mut p, &cfg).unwrap();
        assert!(h.best_f() <= 1e-8, "{}", h.best_f());
        assert!(h.evals() <= 350);
    }

    #[test]
    fn first_full_iteration_costs_d_plus_two() {
        let mut p = problem("rosenbrock", 2);
        let cfg = TrConfig {
            budget: 4,
            ..TrConfig::new(Variant::Full)
        };
        let h = run_ss_pounders(&mut p, &cfg).unwrap();
        assert_eq!(h.records.len(), 1);
        assert_eq!(h.records[0].evals, 4);
    }

    #[test]
    fn budget_is_exact_and_incumbent_monotone() {
        for v in Variant::ALL {
            let mut p = problem("ext_rosenbrock", 6);
            let cfg = TrConfig {
                budget: 97,
                seed: 3,
                ..TrConfig::new(v)
            };
            let h = run_ss_pounders(&mut p, &cfg).unwrap();
            assert!(p.eval_count() <= 97, "{v}");
            for r in &h.records {
                assert!(r.f_next <= r.f);
                if r.f_next < r.f {
                    assert!(r.step_direction.norm() > 0.0);
                }
            }
            assert_eq!(p.dirderiv_count(), 0);
            assert_eq!(p.capability(), OracleCapability::Diagnostic);
        }
    }

    #[test]
    fn exact_quadratic_model_gives_unit_ratio() {
        // quadratic in 2-D with enough nearby points: the model is exact
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = Quadratic::new(
            "q",
            h,
            DVector::from_vec(vec![1.0, -1.0]),
            DVector::from_vec(vec![0.3, 0.2]),
        );
        let mut bank = PointBank::new();
        let x = DVector::from_vec(vec![0.3, 0.2]);
        use crate::problems::Objective;
        for p in [
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [-0.1, 0.05],
            [0.07, -0.08],
            [0.02, 0.09],
        ] {
            let y = &x + DVector::from_vec(p.to_vec());
            bank.insert(y.clone(), q.value(&y));
        }
        let m = build_subspace_model(&bank, &x, &DMatrix::identity(2, 2), 0.1, 2.0, &[]).unwrap();
        let z = solve_trust_region_subproblem(&m.gradient, &m.hessian, 0.1);
        let rho = (q.value(&x) - q.value(&m.embed(&z))) / m.decrease(&z);
        assert!((rho - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejected_steps_shrink_the_radius() {
        let mut p = problem("sphere", 3);
        let cfg = TrConfig {
            budget: 40,
            delta0: Some(10.0),
            ..TrConfig::new(Variant::Ucb)
        };
        let h = run_ss_pounders(&mut p, &cfg).unwrap();
        for w in h.records.windows(2) {
            if w[0].f_next == w[0].f {
                assert!((w[1].alpha - 0.5 * w[0].alpha).abs() <= 1e-15 * w[0].alpha);
            }
        }
    }

    #[test]
    fn ucb_geometry_pick_matches_exhaustive_scoring() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut st = UcbState::new(5, UcbConfig::new(0.2, 3)).unwrap();
        for _ in 0..4 {
            let s = crate::linalg::gaussian_matrix(5, 2, 1.0, &mut rng);
            let r = crate::linalg::gaussian_matrix(2, 1, 1.0, &mut rng)
                .column(0)
                .into_owned();
            st.update(&s, &r).unwrap();
        }
        let perp = crate::linalg::haar_orthogonal(5, &mut rng);
        let got = select_geometry_direction(&st, 1.3, &perp).unwrap().unwrap();
        let cinv = st.covariance().try_inverse().unwrap();
        let g = &cinv * st.b();
        let score = |s: DVector<f64>| g.dot(&s) + 0.2f64.sqrt() * 1.3 * s.dot(&(&cinv * &s)).sqrt();
        let best = (0..5)
            .max_by(|&a, &b| {
                score(perp.column(a).into_owned()).total_cmp(&score(perp.column(b).into_owned()))
            })
            .unwrap();
        assert!((got - perp.column(best)).amax() < 1e-15);
        assert!(select_geometry_direction(&st, 1.0, &DMatrix::zeros(5, 0))
            .unwrap()
            .is_none());
        let fresh = UcbState::new(2, UcbConfig::new(0.5, 1)).unwrap();
        let pick = select_geometry_direction(&fresh, 0.0, &DMatrix::identity(2, 2))
            .unwrap()
            .unwrap();
        assert_eq!(pick, DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn subspace_basis_stays_orthogonal_during_runs() {
        let mut p = problem("trigonometric", 8);
        let cfg = TrConfig {
            budget: 120,
            diagnostics: true,
            ..TrConfig::new(Variant::UcbRandom)
        };
        let h = run_ss_pounders(&mut p, &cfg).unwrap();
        for r in &h.records {
            let s = &r.diagnostics.as_ref().unwrap().sketch;
            let m = s.ncols();
            assert!(max_abs(&(s.tr_mul(s) - DMatrix::identity(m, m))) <= 1e-10);
            // the step stays in the subspace
            let resid = &r.step_direction - s * s.tr_mul(&r.step_direction);
            assert!(resid.amax() <= 1e-10 * r.step_direction.amax().max(1.0));
        }
    }

    #[test]
    fn subspace_variant_beats_full_space_on_an_embedded_problem() {
        let emb = Arc::new(
            EmbeddedProblem::new(registry::lookup("rosenbrock", None).unwrap(), 40, 1).unwrap(),
        );
        let budget = 5 * 42;
        let run = |v: Variant| {
            let mut p = Problem::new(emb.clone());
            run_ss_pounders(
                &mut p,
                &TrConfig {
                    budget,
                    ..TrConfig::new(v)
                },
            )
            .unwrap()
            .best_f()
        };
        assert!(run(Variant::Ucb) < run(Variant::Full));
    }

    #[test]
    fn too_small_budget_is_rejected() {
        let mut p = problem("sphere", 5);
        assert!(run_ss_pounders(
            &mut p,
            &TrConfig {
                budget: 6,
                ..TrConfig::new(Variant::Full)
            }
        )
        .is_err());
        assert!(run_ss_pounders(
            &mut p,
            &TrConfig {
                budget: 3,
                ..TrConfig::new(Variant::Ucb)
            }
        )
        .is_ok());
    }
}
