//! Data profiles over a budget axis in units of `d + 2` evaluations.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};

/// Best value found by one solver on one instance, as a step function of the
/// evaluation count.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTrace {
    pub solver: String,
    pub instance: String,
    pub dim: usize,
    pub f0: f64,
    /// `(evaluations, best value so far)`, evaluations nondecreasing.
    pub points: Vec<(u64, f64)>,
}

impl ProfileTrace {
    pub fn best(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(self.f0, f64::min)
    }
}

/// Solved fraction per solver, evaluated at `budgets` (in units).
#[derive(Clone, Debug, PartialEq)]
pub struct DataProfile {
    pub tau: f64,
    pub budgets: Vec<f64>,
    pub curves: BTreeMap<String, Vec<f64>>,
    /// Budget units at which each `(solver, instance)` pair was solved.
    pub solved_at: BTreeMap<(String, String), Option<f64>>,
}

impl DataProfile {
    /// Fraction of instances `solver` solved within `units`.
    pub fn fraction_at(&self, solver: &str, units: f64) -> f64 {
        let mine: Vec<_> = self
            .solved_at
            .iter()
            .filter(|((s, _), _)| s == solver)
            .collect();
        if mine.is_empty() {
            return 0.0;
        }
        mine.iter()
            .filter(|(_, t)| t.is_some_and(|t| t <= units))
            .count() as f64
            / mine.len() as f64
    }

    /// Rows `solver,budget_units,fraction` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("solver,budget_units,fraction\n");
        for (solver, curve) in &self.curves {
            for (b, v) in self.budgets.iter().zip(curve) {
                out.push_str(&format!("{solver},{b},{v}\n"));
            }
        }
        out
    }
}

/// The Moré-Wild test: instance solved by evaluation `N` when
/// `f0 - f_N >= (1 - tau)(f0 - f_L)`, `f_L` the best value any solver found
/// on the instance. Instances nobody improved count as solved at the first
/// evaluation. Budgets are integer units `0..=max_units`.
pub fn data_profile(traces: &[ProfileTrace], tau: f64, max_units: usize) -> Result<DataProfile> {
    if traces.is_empty() {
        return Err(Error::Empty("profile traces"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    let mut f_low: BTreeMap<&str, f64> = BTreeMap::new();
    let mut f_start: BTreeMap<&str, f64> = BTreeMap::new();
    for t in traces {
        let e = f_low.entry(&t.instance).or_insert(f64::INFINITY);
        *e = e.min(t.best());
        if let Some(&f0) = f_start.get(t.instance.as_str()) {
            if f0 != t.f0 {
                return Err(invalid(format!(
                    "instance {} has two start values",
                    t.instance
                )));
            }
        }
        f_start.insert(&t.instance, t.f0);
    }
    let mut solved_at = BTreeMap::new();
    for t in traces {
        let fl = f_low[t.instance.as_str()];
        let target = t.f0 - (1.0 - tau) * (t.f0 - fl);
        let unit = (t.dim + 2) as f64;
        let hit = if t.f0 <= fl {
            Some(1.0 / unit)
        } else {
            t.points
                .iter()
                .find(|p| p.1 <= target)
                .map(|p| p.0 as f64 / unit)
        };
        solved_at.insert((t.solver.clone(), t.instance.clone()), hit);
    }
    let budgets: Vec<f64> = (0..=max_units).map(|b| b as f64).collect();
    let mut profile = DataProfile {
        tau,
        budgets,
        curves: BTreeMap::new(),
        solved_at,
    };
    let solvers: std::collections::BTreeSet<String> =
        traces.iter().map(|t| t.solver.clone()).collect();
    for s in solvers {
        let curve = profile
            .budgets
            .iter()
            .map(|&b| profile.fraction_at(&s, b))
            .collect();
        profile.curves.insert(s, curve);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(solver: &str, inst: &str, dim: usize, f0: f64, pts: &[(u64, f64)]) -> ProfileTrace {
        ProfileTrace {
            solver: solver.into(),
            instance: inst.into(),
            dim,
            f0,
            points: pts.to_vec(),
        }
    }

    #[test]
    fn single_instance_solved_after_one_unit() {
        let d = 3;
        let p = data_profile(&[trace("a", "i", d, 1.0, &[(1, 1.0), (5, 0.0)])], 0.1, 3).unwrap();
        assert_eq!(p.curves["a"], vec![0.0, 1.0, 1.0, 1.0]);
        assert_eq!(p.fraction_at("a", 0.99), 0.0);
    }

    #[test]
    fn hand_built_crossing_curves() {
        // instance i: f0 = 10, f_L = 0, target 1 at tau = 0.1
        // instance j: f0 = 4, f_L = 2, target 2.2
        // d = 2, unit = 4 evaluations
        let ts = vec![
            trace("a", "i", 2, 10.0, &[(4, 5.0), (8, 0.5), (20, 0.0)]),
            trace("b", "i", 2, 10.0, &[(4, 0.9), (40, 0.8)]),
            trace("a", "j", 2, 4.0, &[(12, 2.0)]),
            trace("b", "j", 2, 4.0, &[(16, 3.0)]),
            trace("c", "i", 2, 10.0, &[(30, 2.0)]),
            trace("c", "j", 2, 4.0, &[(6, 2.1)]),
        ];
        let p = data_profile(&ts, 0.1, 4).unwrap();
        assert_eq!(p.curves["a"], vec![0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(p.curves["b"], vec![0.0, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(p.curves["c"], vec![0.0, 0.0, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn loose_tolerance_credits_any_progress() {
        let ts = vec![
            trace("a", "i", 1, 1.0, &[(3, 0.999)]),
            trace("b", "i", 1, 1.0, &[(3, 0.0)]),
        ];
        let p = data_profile(&ts, 1.0 - 1e-9, 1).unwrap();
        assert_eq!(p.curves["a"][1], 1.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(data_profile(&[], 0.1, 1).is_err());
        let t = trace("a", "i", 1, 1.0, &[]);
        assert!(data_profile(std::slice::from_ref(&t), 1.0, 1).is_err());
        let u = trace("b", "i", 1, 2.0, &[]);
        assert!(data_profile(&[t, u], 0.5, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = data_profile(&[trace("a", "i", 1, 1.0, &[(3, 0.0)])], 0.5, 1).unwrap();
        assert_eq!(p.to_csv(), "solver,budget_units,fraction\na,0,0\na,1,1\n");
    }
}
