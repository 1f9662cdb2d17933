//! Regret diagnostics for sketched first-order runs.
//!
//! Everything here reads the hidden exact gradient, so traces come from runs
//! with `diagnostics` switched on. Solvers never call into this module.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{UcbConfig, UcbState};
use crate::error::{invalid, Error, Result};
use crate::history::RunHistory;
use crate::linalg::random_unit;
use crate::sketching::projected_norm_sq;

/// Bound checks tolerate this much excess.
pub const BOUND_TOL: f64 = 1e-8;
/// Potential-lemma checks tolerate this much negative slack.
pub const POTENTIAL_TOL: f64 = 1e-9;

/// `|g| - sqrt(g^T P g)`: the reward the best direction would have earned
/// minus what the sketch's span earns. Zero for `g = 0`.
pub fn instantaneous_regret(grad: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
    let gn = grad.norm();
    if gn == 0.0 {
        return Ok(0.0);
    }
    let pg = projected_norm_sq(s, grad)?.min(gn * gn);
    Ok((gn - pg.sqrt()).max(0.0))
}

/// `sum_k |grad_{k+1} - grad_k|`.
pub fn total_variation(grads: &[DVector<f64>]) -> f64 {
    grads.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// The dynamic-regret bound
/// `2M sqrt(d(M+1)/lambda) V + sqrt((8 lambda d sum U^2 / M) log(1 + M/(lambda d))) sqrt(K)`.
pub fn regret_bound(
    d: usize,
    lambda: f64,
    memory: usize,
    variation: f64,
    u: &[f64],
    k: usize,
) -> Result<f64> {
    if memory == 0 {
        return Err(invalid("memory must be at least 1"));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    let (d, m) = (d as f64, memory as f64);
    let drift = 2.0 * m * (d * (m + 1.0) / lambda).sqrt() * variation;
    let usq: f64 = u.iter().map(|v| v * v).sum();
    let explore =
        (8.0 * lambda * d * usq / m * (m / (lambda * d)).ln_1p()).sqrt() * (k as f64).sqrt();
    Ok(drift + explore)
}

/// One iteration of a diagnostic trace.
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub gradient: DVector<f64>,
    /// Columns as fed to the UCB state (random part plus UCB column).
    pub sketch: DMatrix<f64>,
    pub ucb_direction: Option<DVector<f64>>,
    pub estimate: Option<DVector<f64>>,
    pub gradient_bound: Option<f64>,
    pub c_inverse: Option<DMatrix<f64>>,
}

/// Per-iteration regret data pulled from a diagnostic run.
#[derive(Clone, Debug)]
pub struct RegretTrace {
    pub dim: usize,
    pub steps: Vec<TraceStep>,
    pub lambda: Option<f64>,
    pub memory: Option<usize>,
    pub exact_responses: bool,
}

impl RegretTrace {
    /// Fails unless every record carries diagnostics.
    pub fn from_history(h: &RunHistory) -> Result<Self> {
        if h.records.is_empty() {
            return Err(Error::Empty("history"));
        }
        let mut steps = Vec::with_capacity(h.records.len());
        let (mut lambda, mut memory, mut exact) = (None, None, true);
        for r in &h.records {
            let dg = r.diagnostics.as_ref().ok_or_else(|| {
                Error::Hypotheses(format!("iteration {} has no diagnostics", r.k))
            })?;
            lambda = lambda.or(dg.lambda);
            memory = memory.or(dg.memory);
            exact &= dg.exact_responses;
            steps.push(TraceStep {
                gradient: dg.gradient.clone(),
                sketch: dg.sketch.clone(),
                ucb_direction: dg.ucb_direction.clone(),
                estimate: dg.estimate.clone(),
                gradient_bound: dg.gradient_bound,
                c_inverse: dg.c_inverse.clone(),
            });
        }
        Ok(RegretTrace {
            dim: h.dim,
            steps,
            lambda,
            memory,
            exact_responses: exact,
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `R_k` for every iteration, using the full per-iteration sketch.
    pub fn regrets(&self) -> Result<Vec<f64>> {
        self.steps
            .iter()
            .map(|s| instantaneous_regret(&s.gradient, &s.sketch))
            .collect()
    }

    /// Running sums `D_k`.
    pub fn cumulative_regret(&self) -> Result<Vec<f64>> {
        let mut acc = 0.0;
        Ok(self
            .regrets()?
            .into_iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect())
    }

    /// Running gradient variation `V_k`, zero at the first iteration.
    pub fn cumulative_variation(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0; self.steps.len()];
        for k in 1..self.steps.len() {
            acc += (&self.steps[k].gradient - &self.steps[k - 1].gradient).norm();
            out[k] = acc;
        }
        out
    }

    pub fn variation(&self) -> f64 {
        self.cumulative_variation().last().copied().unwrap_or(0.0)
    }

    /// `U_k` values; zero where the run had no UCB state.
    pub fn gradient_bounds(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.gradient_bound.unwrap_or(0.0))
            .collect()
    }

    /// `(s*_k - s_k)^T grad f(x_k) = |grad| - s_k^T grad` for the UCB column.
    /// Recorded alongside `R_k`; the two are not ordered in general.
    pub fn inner_product_gaps(&self) -> Vec<Option<f64>> {
        self.steps
            .iter()
            .map(|s| {
                s.ucb_direction
                    .as_ref()
                    .map(|u| s.gradient.norm() - u.dot(&s.gradient))
            })
            .collect()
    }

    /// `D_K` against the bound with measured `V_k` and `U_k` at each
    /// checkpoint `K`.
    pub fn regret_bound_report(&self, checkpoints: &[usize]) -> Result<BoundReport> {
        let (lambda, memory) = self.ucb_params()?;
        let d_k = self.cumulative_regret()?;
        let v_k = self.cumulative_variation();
        let u = self.gradient_bounds();
        let mut rows = Vec::new();
        for &k in checkpoints {
            if k == 0 || k > self.len() {
                return Err(invalid(format!(
                    "checkpoint {k} outside 1..={}",
                    self.len()
                )));
            }
            let rhs = regret_bound(self.dim, lambda, memory, v_k[k - 1], &u[..k], k)?;
            rows.push(BoundRow::new(k, d_k[k - 1], rhs));
        }
        Ok(BoundReport {
            check: "regret_bound".into(),
            rows,
        })
    }

    fn ucb_params(&self) -> Result<(f64, usize)> {
        match (self.lambda, self.memory) {
            (Some(l), Some(m)) => Ok((l, m)),
            _ => Err(Error::Hypotheses("trace has no UCB state".into())),
        }
    }
}

/// `D_K = sum_k R_k`.
pub fn dynamic_regret(trace: &RegretTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Empty("regret trace"));
    }
    Ok(trace.regrets()?.iter().sum())
}

/// One checked inequality `lhs <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl BoundRow {
    pub fn new(k: usize, lhs: f64, rhs: f64) -> Self {
        BoundRow {
            k,
            lhs,
            rhs,
            slack: rhs - lhs,
        }
    }
}

/// Serializable report of one family of checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub check: String,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    /// Rows with `slack < -tol`.
    pub fn violations(&self, tol: f64) -> usize {
        self.rows.iter().filter(|r| r.slack < -tol).count()
    }

    pub fn min_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Check the estimate error bound
/// `|s^T(grad_k - g_k)| <= sqrt(d N / lambda) sum_{i=l(k)}^{k-1} |grad_{i+1} - grad_i|
///  + sqrt(lambda) |grad_k| |s|_{C_k^{-1}}`
/// for the probes `s_k`, `g_k/|g_k|` and one random unit vector per
/// iteration. `N` counts the unit vectors in the window, `l(k)` is the
/// oldest iteration in it. With one vector per iteration `N = M + 1`.
pub fn check_gradient_error_bound(trace: &RegretTrace, seed: u64) -> Result<BoundReport> {
    if !trace.exact_responses {
        return Err(Error::Hypotheses(
            "responses are model gradients, not directional derivatives".into(),
        ));
    }
    let (lambda, memory) = trace.ucb_params()?;
    let d = trace.dim;
    for (k, st) in trace.steps.iter().enumerate() {
        for c in st.sketch.column_iter() {
            if (c.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::Hypotheses(format!(
                    "iteration {} fed a non-unit direction",
                    k + 1
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (k, st) in trace.steps.iter().enumerate() {
        let (g_k, c_inv) = match (&st.estimate, &st.c_inverse) {
            (Some(g), Some(c)) => (g, c),
            _ => {
                return Err(Error::Hypotheses(format!(
                    "iteration {} has no estimator snapshot",
                    k + 1
                )))
            }
        };
        // window at selection time holds iterations oldest..k-1 (0-based)
        let oldest = k.saturating_sub(memory + 1);
        let n: usize = trace.steps[oldest..k]
            .iter()
            .map(|s| s.sketch.ncols())
            .sum();
        let drift: f64 = (oldest..k)
            .map(|i| (&trace.steps[i + 1].gradient - &trace.steps[i].gradient).norm())
            .sum();
        let err = &st.gradient - g_k;
        let mut probes: Vec<DVector<f64>> = Vec::with_capacity(3);
        if let Some(s) = &st.ucb_direction {
            probes.push(s.clone());
        }
        let gn = g_k.norm();
        if gn > 0.0 {
            probes.push(g_k / gn);
        }
        probes.push(random_unit(d, &mut rng));
        for s in probes {
            let lhs = s.dot(&err).abs();
            let ellipse = s.dot(&(c_inv * &s)).max(0.0).sqrt();
            let rhs = (d as f64 * n as f64 / lambda).sqrt() * drift
                + lambda.sqrt() * st.gradient.norm() * ellipse;
            rows.push(BoundRow::new(k + 1, lhs, rhs));
        }
    }
    Ok(BoundReport {
        check: "gradient_error_bound".into(),
        rows,
    })
}

/// Result of the elliptical potential check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl PotentialCheck {
    pub fn holds(&self) -> bool {
        self.slack >= -POTENTIAL_TOL
    }
}

/// `sum_j |s_j|^2_{C_{j-1}^{-1}}` under the sliding window against
/// `(2kd/M) log(1 + M/(lambda d))`. `C_j` holds `s_{j-M}, ..., s_j`, so the
/// oldest vector leaves only once `j - M - 1 >= 1`.
pub fn check_potential_lemma(
    directions: &[DVector<f64>],
    lambda: f64,
    memory: usize,
    d: usize,
) -> Result<PotentialCheck> {
    if memory == 0 {
        return Err(invalid("memory must be at least 1"));
    }
    if directions.is_empty() {
        return Err(Error::Empty("direction sequence"));
    }
    for s in directions {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.len(),
            });
        }
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Hypotheses(
                "potential lemma needs unit vectors".into(),
            ));
        }
    }
    let mut state = UcbState::new(d, UcbConfig::new(lambda, memory))?;
    let mut lhs = 0.0;
    let zero = DVector::zeros(1);
    for s in directions {
        let e = state.ellipse_norm(s);
        lhs += e * e;
        state.update(&DMatrix::from_column_slice(d, 1, s.as_slice()), &zero)?;
    }
    let k = directions.len() as f64;
    let (df, m) = (d as f64, memory as f64);
    let rhs = 2.0 * k * df / m * (m / (lambda * df)).ln_1p();
    Ok(PotentialCheck {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Problem, Quadratic};
    use crate::subspace_gd::{run_subspace_gd, GdConfig};
    use nalgebra::dvector;
    use std::sync::Arc;

    fn inv_sqrt_gram_oracle(s: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
        let e = (s.transpose() * s).symmetric_eigen();
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()));
        let w = &e.eigenvectors * d * e.eigenvectors.transpose();
        g.norm() - (w * s.transpose() * g).norm()
    }

    #[test]
    fn regret_extremes() {
        let s = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        assert!(instantaneous_regret(&dvector![2.0, 2.0, 0.0], &s).unwrap() < 1e-15);
        assert!((instantaneous_regret(&dvector![0.0, 0.0, 3.0], &s).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(instantaneous_regret(&DVector::zeros(3), &s).unwrap(), 0.0);
    }

    #[test]
    fn regret_matches_inverse_square_root_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = crate::linalg::gaussian_matrix(6, 2, 1.0, &mut rng);
        let g = random_unit(6, &mut rng) * 2.5;
        let r = instantaneous_regret(&g, &s).unwrap();
        assert!((r - inv_sqrt_gram_oracle(&s, &g)).abs() < 1e-9);
    }

    #[test]
    fn bound_formula_by_hand() {
        // d=4, lambda=1/4, M=2, K=16, V=1, U=1:
        // 4 sqrt(48) + sqrt(8 * 16 / 2 * ln 3) * 4
        let want = 4.0 * 48f64.sqrt() + (64.0 * 3f64.ln()).sqrt() * 4.0;
        let got = regret_bound(4, 0.25, 2, 1.0, &[1.0; 16], 16).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert_eq!(regret_bound(4, 0.25, 2, 0.0, &[0.0; 3], 3).unwrap(), 0.0);
        assert!(regret_bound(4, 0.25, 0, 0.0, &[], 1).is_err());
        assert!(
            regret_bound(4, 0.25, 2, 2.0, &[1.0], 1).unwrap()
                > regret_bound(4, 0.25, 2, 1.0, &[1.0], 1).unwrap()
        );
    }

    #[test]
    fn potential_single_step_by_hand() {
        let c = check_potential_lemma(&[dvector![1.0]], 1.0, 1, 1).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-15);
        assert!((c.rhs - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(c.holds());
        assert!(check_potential_lemma(&[dvector![2.0]], 1.0, 1, 1).is_err());
    }

    fn dense_potential(dirs: &[DVector<f64>], lambda: f64, m: usize) -> f64 {
        let d = dirs[0].len();
        let mut lhs = 0.0;
        for j in 0..dirs.len() {
            // C_{j-1} (1-based) holds s_{max(1, j-1-M)} .. s_{j-1}
            let lo = j.saturating_sub(m + 1);
            let mut c = DMatrix::identity(d, d) * lambda;
            for s in &dirs[lo..j] {
                c += s * s.transpose();
            }
            let ci = c.try_inverse().unwrap();
            lhs += dirs[j].dot(&(ci * &dirs[j]));
        }
        lhs
    }

    #[test]
    fn potential_matches_dense_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(d, m) in &[(2, 1), (5, 3), (4, 6)] {
            let dirs: Vec<_> = (0..30).map(|_| random_unit(d, &mut rng)).collect();
            let c = check_potential_lemma(&dirs, 0.5, m, d).unwrap();
            assert!((c.lhs - dense_potential(&dirs, 0.5, m)).abs() < 1e-9 * c.lhs.max(1.0));
        }
    }

    #[test]
    fn constant_direction_potential_grows_sublinearly() {
        let dirs = vec![dvector![1.0, 0.0, 0.0]; 10_000];
        let c = check_potential_lemma(&dirs, 1.0 / 3.0, 5, 3).unwrap();
        assert!(c.holds());
    }

    fn diagnostic_run(
        obj: Arc<Quadratic>,
        seed: u64,
        p: usize,
        horizon: usize,
        memory: Option<usize>,
    ) -> RunHistory {
        let mut prob = Problem::new(obj);
        let cfg = GdConfig {
            horizon,
            use_ucb: true,
            diagnostics: true,
            unit_columns: true,
            seed,
            memory,
            sketch: crate::sketching::SketchSpec::Gaussian { p },
            ..GdConfig::default()
        };
        run_subspace_gd(&mut prob, &cfg).unwrap()
    }

    #[test]
    fn error_bound_on_linear_objective() {
        let d = 6;
        let obj = Arc::new(Quadratic::new(
            "lin",
            DMatrix::zeros(d, d),
            DVector::from_fn(d, |i, _| i as f64 - 2.5),
            DVector::zeros(d),
        ));
        let trace = RegretTrace::from_history(&diagnostic_run(obj, 1, 2, 40, None)).unwrap();
        assert_eq!(trace.variation(), 0.0);
        let rep = check_gradient_error_bound(&trace, 0).unwrap();
        assert_eq!(rep.violations(BOUND_TOL), 0);
        // first iteration: g_1 = 0, C_1 = lambda I, bound is |grad| |s|
        let first = rep.rows.iter().find(|r| r.k == 1).unwrap();
        assert!(first.lhs <= first.rhs + 1e-12);
    }

    #[test]
    fn error_bound_on_quadratic() {
        let d = 5;
        let h = DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| 1.0 + i as f64));
        let obj = Arc::new(Quadratic::new(
            "q",
            h,
            DVector::from_element(d, 1.0),
            DVector::from_element(d, 2.0),
        ));
        let trace = RegretTrace::from_history(&diagnostic_run(obj, 2, 1, 50, Some(3))).unwrap();
        let rep = check_gradient_error_bound(&trace, 1).unwrap();
        assert_eq!(rep.violations(BOUND_TOL), 0);
        for r in trace.regrets().unwrap() {
            assert!(r >= 0.0);
        }
    }

    #[test]
    fn traces_without_unit_columns_are_refused() {
        let d = 4;
        let obj = Arc::new(Quadratic::new(
            "lin",
            DMatrix::zeros(d, d),
            DVector::from_element(d, 1.0),
            DVector::zeros(d),
        ));
        let mut prob = Problem::new(obj);
        let cfg = GdConfig {
            horizon: 3,
            use_ucb: true,
            diagnostics: true,
            sketch: crate::sketching::SketchSpec::Gaussian { p: 3 },
            ..GdConfig::default()
        };
        let trace = RegretTrace::from_history(&run_subspace_gd(&mut prob, &cfg).unwrap()).unwrap();
        assert!(matches!(
            check_gradient_error_bound(&trace, 0),
            Err(Error::Hypotheses(_))
        ));
        let mut approx = trace.clone();
        approx.exact_responses = false;
        assert!(matches!(
            check_gradient_error_bound(&approx, 0),
            Err(Error::Hypotheses(_))
        ));
    }

    #[test]
    fn dynamic_regret_sums_steps() {
        let d = 4;
        let obj = Arc::new(Quadratic::new(
            "q",
            DMatrix::identity(d, d),
            DVector::zeros(d),
            DVector::from_element(d, 1.0),
        ));
        let trace = RegretTrace::from_history(&diagnostic_run(obj, 5, 2, 10, None)).unwrap();
        let by_hand: f64 = trace
            .steps
            .iter()
            .map(|s| inv_sqrt_gram_oracle(&s.sketch, &s.gradient).max(0.0))
            .sum();
        assert!((dynamic_regret(&trace).unwrap() - by_hand).abs() < 1e-9);
        let one = RegretTrace {
            steps: trace.steps[..1].to_vec(),
            ..trace.clone()
        };
        assert_eq!(
            dynamic_regret(&one).unwrap(),
            instantaneous_regret(&one.steps[0].gradient, &one.steps[0].sketch).unwrap()
        );
    }

    #[test]
    fn variation_splits_at_the_junction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g: Vec<_> = (0..12).map(|_| random_unit(3, &mut rng)).collect();
        let junction = (&g[6] - &g[5]).norm();
        assert!(
            (total_variation(&g) - total_variation(&g[..6]) - total_variation(&g[6..]) - junction)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn report_round_trips_as_json() {
        let rep = BoundReport {
            check: "x".into(),
            rows: vec![BoundRow::new(1, 0.5, 1.0)],
        };
        let back: BoundReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
        assert_eq!(rep.violations(0.0), 0);
    }
}
