//! Property tests for invariants that must hold on every input.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use subspace_ucb::bandit::{UcbConfig, UcbState};
use subspace_ucb::bench::{data_profile, io, performance_ratio, ProfileTrace};
use subspace_ucb::dfo::{cauchy_point, model_change, run_ss_pounders, solve_trust_region_subproblem, TrConfig, Variant};
use subspace_ucb::problems::{registry, Problem, Quadratic};
use subspace_ucb::regret::instantaneous_regret;
use subspace_ucb::sketching::{hashing_sketch, projected_norm_sq, projection_apply, SketchSpec};
use subspace_ucb::subspace_gd::{run_subspace_gd, GdConfig};
use subspace_ucb::Error;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn vector(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    gaussian(d, 1, rng).column(0).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_an_idempotent_contraction(seed in any::<u64>(), d in 1usize..30, frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 1 + ((d - 1) as f64 * frac) as usize;
        let s = gaussian(d, p, &mut rng);
        let v = vector(d, &mut rng);
        let pv = projection_apply(&s, &v).unwrap();
        prop_assert!(pv.norm() <= v.norm() * (1.0 + 1e-12));
        let ppv = projection_apply(&s, &pv).unwrap();
        prop_assert!((&ppv - &pv).norm() <= 1e-10 * v.norm().max(1.0));
        let n2 = projected_norm_sq(&s, &v).unwrap();
        prop_assert!((n2 - pv.norm_squared()).abs() <= 1e-10 * v.norm_squared().max(1.0));
    }

    #[test]
    fn hashing_columns_have_h_equal_entries(seed in any::<u64>(), d in 2usize..40, p_frac in 0.0f64..1.0, h_frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 1 + ((d - 1) as f64 * p_frac) as usize;
        let h = 1 + ((d - 1) as f64 * h_frac) as usize;
        // with few nonzeros and p near d, collisions can exhaust the redraws
        let s = match hashing_sketch(d, p, h, &mut rng) {
            Ok(s) => s,
            Err(Error::RankDeficient { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for c in s.entries().column_iter() {
            let nz: Vec<f64> = c.iter().copied().filter(|v| *v != 0.0).collect();
            prop_assert_eq!(nz.len(), h);
            prop_assert!(nz.iter().all(|v| (v.abs() - 1.0 / (h as f64).sqrt()).abs() < 1e-15));
            prop_assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_sketch_family_has_full_column_rank(seed in any::<u64>(), d in 1usize..25, frac in 0.0f64..1.0, kind in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 1 + ((d - 1) as f64 * frac) as usize;
        let spec = match kind {
            0 => SketchSpec::Gaussian { p },
            1 => SketchSpec::Hashing { p, h: 1.max(d / 2) },
            _ => SketchSpec::Haar { p },
        };
        let s = match spec.draw(d, &mut rng, &mut 0) {
            Ok(s) => s,
            Err(Error::RankDeficient { .. }) if kind == 1 => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(s.entries().shape(), (d, p));
        prop_assert_eq!(s.entries().clone().svd(false, false).rank(1e-10), p);
    }

    #[test]
    fn windowed_inverse_matches_dense_assembly(seed in any::<u64>(), d in 1usize..12, memory in 1usize..6, steps in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = 0.1 + rng.random::<f64>();
        let mut st = UcbState::new(d, UcbConfig::new(lambda, memory)).unwrap();
        let mut seen = Vec::new();
        for _ in 0..steps {
            let cols = rng.random_range(1..3);
            let s = gaussian(d, cols, &mut rng);
            st.update(&s, &vector(cols, &mut rng)).unwrap();
            seen.push(s);
            prop_assert!(st.window().len() <= memory + 1);
        }
        let mut c = DMatrix::identity(d, d) * lambda;
        for s in seen.iter().rev().take(memory + 1) {
            c += s * s.transpose();
        }
        let direct = c.try_inverse().unwrap();
        let scale = direct.amax().max(1.0);
        prop_assert!((st.c_inverse_owned() - direct).amax() <= 1e-9 * scale);
    }

    #[test]
    fn selection_is_unit_and_beats_the_estimate(seed in any::<u64>(), d in 1usize..10, u in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = UcbState::new(d, UcbConfig::new(1.0 / d as f64, d).with_seed(seed)).unwrap();
        for _ in 0..3 {
            st.update(&gaussian(d, 1, &mut rng), &vector(1, &mut rng)).unwrap();
        }
        let g = st.estimate().clone();
        let s = st.select(u);
        prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        if g.norm() > 0.0 {
            prop_assert!(st.score(&s, u) >= st.score(&g.normalize(), u) - 1e-9);
        }
    }

    #[test]
    fn ratio_is_bounded_and_antisymmetric(f0 in -1e3f64..1e3, a in 0.0f64..1e3, b in 0.0f64..1e3) {
        let (fa, fb) = (f0 - a, f0 - b);
        let r = performance_ratio(f0, fa, fb).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(r, -performance_ratio(f0, fb, fa).unwrap());
        prop_assert_eq!(r > 0.0, fb < fa);
    }

    #[test]
    fn profile_curves_are_monotone_fractions(seed in any::<u64>(), solvers in 1usize..4, instances in 1usize..5, tau in 0.001f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut traces = Vec::new();
        for s in 0..solvers {
            for i in 0..instances {
                let f0 = 10.0f64;
                let mut e = 1u64;
                let mut best = f0;
                let points = (0..rng.random_range(1..8)).map(|_| {
                    e += rng.random_range(1..20);
                    best = best.min(rng.random_range(0.0..f0));
                    (e, best)
                }).collect();
                traces.push(ProfileTrace { solver: format!("s{s}"), instance: format!("i{i}"), dim: 3, f0, points });
            }
        }
        let p = data_profile(&traces, tau, 30).unwrap();
        prop_assert_eq!(p.curves.len(), solvers);
        for c in p.curves.values() {
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // some solver reaches f_L on every instance
        let best_final: f64 = (0..instances).map(|i| {
            p.curves.keys().map(|s| p.solved_at[&(s.clone(), format!("i{i}"))].is_some() as u8).max().unwrap()
        }).map(f64::from).sum();
        prop_assert_eq!(best_final, instances as f64);
    }

    #[test]
    fn trust_region_step_is_feasible_and_beats_cauchy(seed in any::<u64>(), n in 1usize..8, delta in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian(n, n, &mut rng);
        let h = (&a + a.transpose()) * 0.5;
        let g = vector(n, &mut rng);
        let z = solve_trust_region_subproblem(&g, &h, delta);
        prop_assert!(z.norm() <= delta * (1.0 + 1e-8));
        let c = cauchy_point(&g, &h, delta);
        prop_assert!(model_change(&g, &h, &z) <= model_change(&g, &h, &c) + 1e-10 * (1.0 + g.norm() * delta));
    }

    #[test]
    fn instantaneous_regret_lies_in_range(seed in any::<u64>(), d in 1usize..20, frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 1 + ((d - 1) as f64 * frac) as usize;
        let g = vector(d, &mut rng);
        let r = instantaneous_regret(&g, &gaussian(d, p, &mut rng)).unwrap();
        prop_assert!(r >= -1e-12 && r <= g.norm() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gradient_descent_is_monotone_and_counts_oracle_calls(seed in any::<u64>(), d in 2usize..16, p in 1usize..3, ucb in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian(d, d, &mut rng);
        let h = &a * a.transpose() + DMatrix::identity(d, d);
        let q = Quadratic::new("q", h, vector(d, &mut rng), vector(d, &mut rng));
        let mut prob = Problem::new(Arc::new(q));
        let cfg = GdConfig { use_ucb: ucb, sketch: SketchSpec::Gaussian { p: p.min(d) }, horizon: 40, seed, ..GdConfig::default() };
        // a failed line search has already paid for its iteration's queries
        let (run, unrecorded) = match run_subspace_gd(&mut prob, &cfg) {
            Ok(h) => (h, 0),
            Err(f) => (*f.partial, 1),
        };
        prop_assert!(run.records.windows(2).all(|w| w[1].f <= w[0].f));
        prop_assert!(run.records.iter().all(|r| r.f_next <= r.f));
        prop_assert_eq!(prob.dirderiv_count(), (run.records.len() as u64 + unrecorded) * p.min(d) as u64);
        let lines = run.lines();
        prop_assert_eq!(lines.len(), run.records.len() + 1);
        prop_assert!(lines.windows(2).all(|w| w[0].evals <= w[1].evals));
    }

    #[test]
    fn dfo_respects_the_budget(seed in any::<u64>(), budget in 10u64..80, v in 0usize..4) {
        let obj = registry::lookup(&format!("box3d@D=6,seed={}", seed % 50), None).unwrap();
        let mut p = Problem::new(obj);
        let cfg = TrConfig { budget, seed, ..TrConfig::new(Variant::ALL[v]) };
        let h = match run_ss_pounders(&mut p, &cfg) {
            Ok(h) => h,
            Err(f) => *f.partial,
        };
        prop_assert!(p.eval_count() <= budget);
        prop_assert!(h.records.iter().all(|r| r.f_next <= r.f));
        prop_assert!(h.records.windows(2).all(|w| w[1].f <= w[0].f));
    }

    #[test]
    fn history_files_round_trip(seed in any::<u64>(), horizon in 1usize..20) {
        let mut prob = Problem::new(registry::lookup("trigonometric", Some(8)).unwrap());
        let cfg = GdConfig { use_ucb: true, horizon, seed, ..GdConfig::default() };
        let run = run_subspace_gd(&mut prob, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.jsonl");
        io::write_history(&path, &run).unwrap();
        prop_assert_eq!(io::read_history(&path).unwrap(), run.lines());
    }
}
