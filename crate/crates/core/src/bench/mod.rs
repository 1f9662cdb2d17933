//! Experiment harness: seeded head-to-head runs, performance ratios, data
//! profiles and the files that carry them.
//!
//! A run is configured by a flat JSON object; unknown keys are rejected.
//!
//! ```
//! use subspace_ucb::bench::ExperimentConfig;
//! let cfg = ExperimentConfig::from_json(r#"{"mode": "gd", "dims": [20], "seeds": [1, 2]}"#).unwrap();
//! assert_eq!(cfg.horizon, 1000);
//! assert!(ExperimentConfig::from_json(r#"{"seed_count": 3}"#).is_err());
//! ```

pub mod io;
pub mod profile;
pub mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use profile::{data_profile, DataProfile, ProfileTrace};

use crate::dfo::{run_ss_pounders, TrConfig, Variant};
use crate::error::{invalid, Error, Result};
use crate::history::RunHistory;
use crate::problems::{registry, Problem};
use crate::regret::RegretTrace;
use crate::sketching::SketchSpec;
use crate::subspace_gd::{run_subspace_gd, GdConfig};

/// `(f_rand - f_ucb) / max(f0 - f_rand, f0 - f_ucb, 1)`; positive when the
/// UCB run ended lower. Both final values must not exceed `f0`.
pub fn performance_ratio(f0: f64, f_rand: f64, f_ucb: f64) -> Result<f64> {
    if !(f_rand <= f0 && f_ucb <= f0) {
        return Err(invalid(format!(
            "final values {f_rand}, {f_ucb} above the start value {f0}"
        )));
    }
    let den = (f0 - f_rand).max(f0 - f_ucb).max(1.0);
    Ok(((f_rand - f_ucb) / den).clamp(-1.0, 1.0))
}

/// Which solver family an experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sketched gradient descent; variants `random` and `ucb`.
    Gd,
    /// Derivative-free trust region; variants `ucb`, `random`, `ucb+random`,
    /// `full`, on embedded problems.
    Dfo,
}

/// Flat experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Base problem names; empty means the mode's default set.
    pub problems: Vec<String>,
    /// Problem dimensions (gd) or ambient embedding dimensions (dfo).
    pub dims: Vec<usize>,
    /// Empty means every variant of the mode.
    pub variants: Vec<String>,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    /// Evaluation budget in units of `d + 2` (dfo).
    pub budget_units: u64,
    /// Sketch family; its size is replaced by `ceil(sketch_fraction d)`.
    pub sketch: String,
    pub sketch_fraction: f64,
    pub taus: Vec<f64>,
    pub output_dir: String,
    pub beta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub lambda: Option<f64>,
    pub memory: Option<usize>,
    /// Regret diagnostics are computed for UCB runs up to this dimension.
    pub regret_max_dim: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Gd,
            problems: Vec::new(),
            dims: vec![100],
            variants: Vec::new(),
            seeds: (0..10).collect(),
            horizon: 1000,
            budget_units: 50,
            sketch: "gaussian:p=1".into(),
            sketch_fraction: 0.01,
            taus: vec![0.1, 0.01, 0.001],
            output_dir: "results".into(),
            beta: 0.5,
            sigma: 1e-8,
            mu: 0.8,
            lambda: None,
            memory: None,
            regret_max_dim: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds must not be empty"));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(invalid("dims must be nonempty and positive"));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(invalid(format!("tau {t} outside (0, 1)")));
        }
        if !(self.sketch_fraction > 0.0 && self.sketch_fraction <= 1.0) {
            return Err(invalid("sketch_fraction must lie in (0, 1]"));
        }
        if self.horizon == 0 || self.budget_units == 0 {
            return Err(invalid("horizon and budget_units must be positive"));
        }
        self.sketch.parse::<SketchSpec>()?;
        self.variant_names()?;
        Ok(())
    }

    pub fn problem_names(&self) -> Vec<String> {
        if !self.problems.is_empty() {
            return self.problems.clone();
        }
        let set: &[&str] = match self.mode {
            Mode::Gd => &registry::SCALABLE_SUITE,
            Mode::Dfo => &registry::SMALL_SET,
        };
        set.iter().map(|s| s.to_string()).collect()
    }

    /// Canonical variant names in run order.
    pub fn variant_names(&self) -> Result<Vec<String>> {
        match self.mode {
            Mode::Gd => {
                let all = ["random", "ucb"];
                if self.variants.is_empty() {
                    return Ok(all.iter().map(|s| s.to_string()).collect());
                }
                for v in &self.variants {
                    if !all.contains(&v.as_str()) {
                        return Err(Error::Parse(format!(
                            "unknown gd variant `{v}` (expected random or ucb)"
                        )));
                    }
                }
                Ok(self.variants.clone())
            }
            Mode::Dfo => {
                if self.variants.is_empty() {
                    return Ok(Variant::ALL.iter().map(|v| v.to_string()).collect());
                }
                self.variants
                    .iter()
                    .map(|v| v.parse::<Variant>().map(|v| v.to_string()))
                    .collect()
            }
        }
    }

    /// Sketch with `p = ceil(sketch_fraction d)`.
    pub fn sketch_for(&self, d: usize) -> Result<SketchSpec> {
        let p = ((self.sketch_fraction * d as f64).ceil() as usize).clamp(1, d);
        Ok(self.sketch.parse::<SketchSpec>()?.with_size(p))
    }

    /// Solver settings for one gd run.
    pub fn gd_config(&self, d: usize, seed: u64, use_ucb: bool) -> Result<GdConfig> {
        Ok(GdConfig {
            beta: self.beta,
            sigma: self.sigma,
            horizon: self.horizon,
            sketch: self.sketch_for(d)?,
            use_ucb,
            lambda: self.lambda,
            memory: self.memory,
            mu: self.mu,
            seed,
            ..GdConfig::default()
        })
    }
}

/// One finished (or failed) run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub instance: String,
    pub solver: String,
    pub seed: u64,
    pub history: RunHistory,
    pub error: Option<String>,
}

/// One ratio value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub problem: String,
    pub seed: u64,
    pub r: f64,
}

/// Regret summary of one UCB gd run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    pub problem: String,
    pub seed: u64,
    pub iterations: usize,
    pub dynamic_regret: f64,
    pub variation: f64,
    pub bound: f64,
}

/// Everything an experiment produced.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub runs: Vec<RunRecord>,
    pub ratios: Vec<RatioRow>,
    pub profiles: Vec<DataProfile>,
    pub regret: Vec<RegretSummary>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutput {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.error.is_some())
    }
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '+' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Ratios as CSV with header `problem,seed,r`.
pub fn ratios_csv(rows: &[RatioRow]) -> String {
    let mut out = String::from("problem,seed,r\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.problem, r.seed, r.r);
    }
    out
}

/// Random-only and UCB runs of one `(problem, dimension, seed)` cell on the
/// same sketch stream, and their ratio.
pub fn head_to_head(
    selector: &str,
    d: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<(RunHistory, RunHistory, f64)> {
    let obj = registry::lookup(selector, Some(d))?;
    let mut pr = Problem::new(obj.clone());
    let rand = run_subspace_gd(&mut pr, &cfg.gd_config(d, seed, false)?).map_err(|f| f.error)?;
    let mut pu = Problem::new(obj);
    let ucb = run_subspace_gd(&mut pu, &cfg.gd_config(d, seed, true)?).map_err(|f| f.error)?;
    let r = performance_ratio(rand.f0, rand.final_f(), ucb.final_f())?;
    Ok((rand, ucb, r))
}

/// Run every cell of the experiment and write its files under
/// `output_dir`: `histories/*.jsonl`, `ratios.csv` (gd),
/// `profile_tau<t>.csv` and `.svg` (dfo), `regret.json` (gd) and
/// `failures.json`. A failing run is recorded and the rest continue.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    let mut out = ExperimentOutput::default();
    let variants = cfg.variant_names()?;
    for Cell {
        instance,
        dim: d,
        seed,
    } in cells(cfg)
    {
        let obj = registry::lookup(&instance, None)?;
        let mut finals = Vec::new();
        for v in &variants {
            let mut problem = Problem::new(obj.clone());
            let result = match cfg.mode {
                Mode::Gd => run_subspace_gd(&mut problem, &cfg.gd_config(d, seed, v == "ucb")?),
                Mode::Dfo => {
                    let tr = TrConfig {
                        budget: cfg.budget_units * (d as u64 + 2),
                        seed,
                        mu: cfg.mu,
                        lambda: cfg.lambda,
                        memory: cfg.memory,
                        ..TrConfig::new(v.parse()?)
                    };
                    run_ss_pounders(&mut problem, &tr)
                }
            };
            let (history, error) = match result {
                Ok(h) => (h, None),
                Err(f) => (*f.partial, Some(f.error.to_string())),
            };
            let path = history_path(&out_dir, &instance, v, seed);
            io::write_history(&path, &history)?;
            out.files.push(path);
            if cfg.mode == Mode::Gd && v == "ucb" && error.is_none() && d <= cfg.regret_max_dim {
                out.regret.push(regret_summary(&instance, d, seed, cfg)?);
            }
            finals.push((v.clone(), history.f0, history.final_f(), error.is_none()));
            out.runs.push(RunRecord {
                instance: instance.clone(),
                solver: v.clone(),
                seed,
                history,
                error,
            });
        }
        if cfg.mode == Mode::Gd {
            let get = |name: &str| finals.iter().find(|f| f.0 == name && f.3);
            if let (Some(r), Some(u)) = (get("random"), get("ucb")) {
                out.ratios.push(RatioRow {
                    problem: instance.clone(),
                    seed,
                    r: performance_ratio(r.1, r.2, u.2)?,
                });
            }
        }
    }

    if cfg.mode == Mode::Gd {
        let path = out_dir.join("ratios.csv");
        io::write_atomic(&path, ratios_csv(&out.ratios).as_bytes())?;
        out.files.push(path);
        let path = out_dir.join("regret.json");
        io::write_atomic(&path, serde_json::to_string_pretty(&out.regret)?.as_bytes())?;
        out.files.push(path);
    } else {
        let traces: Vec<ProfileTrace> = out.runs.iter().map(profile_trace).collect();
        for &tau in &cfg.taus {
            let p = data_profile(&traces, tau, cfg.budget_units as usize)?;
            let stem = format!("profile_tau{tau}");
            let csv = out_dir.join(format!("{stem}.csv"));
            io::write_atomic(&csv, p.to_csv().as_bytes())?;
            let svg = out_dir.join(format!("{stem}.svg"));
            io::write_atomic(&svg, svg::profile_svg(&p).as_bytes())?;
            out.files.extend([csv, svg]);
            out.profiles.push(p);
        }
    }
    let failures: Vec<_> = out
        .failures()
        .map(|r| serde_json::json!({"problem": r.instance, "solver": r.solver, "seed": r.seed, "error": r.error}))
        .collect();
    let path = out_dir.join("failures.json");
    io::write_atomic(&path, serde_json::to_string_pretty(&failures)?.as_bytes())?;
    out.files.push(path);
    Ok(out)
}

/// One `(instance, seed)` cell; `instance` is a registry selector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub instance: String,
    pub dim: usize,
    pub seed: u64,
}

/// Cells in run order. Dfo instances embed with the run seed, so every seed
/// is its own instance.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for name in cfg.problem_names() {
        for &dim in &cfg.dims {
            for &seed in &cfg.seeds {
                let instance = match cfg.mode {
                    Mode::Gd => format!("{name}:{dim}"),
                    Mode::Dfo => format!("{name}@D={dim},seed={seed}"),
                };
                out.push(Cell {
                    instance,
                    dim,
                    seed,
                });
            }
        }
    }
    out
}

/// `<out>/histories/<instance>__<solver>__seed<s>.jsonl`, with selector
/// punctuation mapped to `_`.
pub fn history_path(out_dir: &Path, instance: &str, solver: &str, seed: u64) -> PathBuf {
    out_dir.join("histories").join(format!(
        "{}__{}__seed{seed}.jsonl",
        file_stem(instance),
        file_stem(solver)
    ))
}

/// Rebuild data profiles from the history files of a finished experiment.
pub fn profiles_from_histories(cfg: &ExperimentConfig, taus: &[f64]) -> Result<Vec<DataProfile>> {
    let out_dir = PathBuf::from(&cfg.output_dir);
    let mut traces = Vec::new();
    for cell in cells(cfg) {
        for v in cfg.variant_names()? {
            let lines = io::read_history(&history_path(&out_dir, &cell.instance, &v, cell.seed))?;
            traces.push(ProfileTrace {
                solver: v,
                instance: cell.instance.clone(),
                dim: cell.dim,
                f0: lines[0].f,
                points: best_so_far(lines.iter().map(|l| (l.evals, l.f))),
            });
        }
    }
    taus.iter()
        .map(|&t| data_profile(&traces, t, cfg.budget_units as usize))
        .collect()
}

/// Best-so-far trace at iteration ends, as written to history files.
pub fn profile_trace(r: &RunRecord) -> ProfileTrace {
    ProfileTrace {
        solver: r.solver.clone(),
        instance: r.instance.clone(),
        dim: r.history.dim,
        f0: r.history.f0,
        points: best_so_far(r.history.lines().iter().map(|l| (l.evals, l.f))),
    }
}

/// Running minimum of `(evals, f)` pairs.
pub fn best_so_far(points: impl Iterator<Item = (u64, f64)>) -> Vec<(u64, f64)> {
    let mut best = f64::INFINITY;
    points
        .map(|(e, f)| {
            best = best.min(f);
            (e, best)
        })
        .collect()
}

fn regret_summary(
    instance: &str,
    d: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<RegretSummary> {
    // rerun with diagnostics: the solver path is identical, only the
    // recording differs
    let obj = registry::lookup(instance, None)?;
    let mut p = Problem::new(obj);
    let gd = GdConfig {
        diagnostics: true,
        ..cfg.gd_config(d, seed, true)?
    };
    let h = run_subspace_gd(&mut p, &gd).map_err(|f| f.error)?;
    let trace = RegretTrace::from_history(&h)?;
    let k = trace.len();
    let report = trace.regret_bound_report(&[k])?;
    let row = report.rows[0];
    Ok(RegretSummary {
        problem: instance.into(),
        seed,
        iterations: k,
        dynamic_regret: row.lhs,
        variation: trace.variation(),
        bound: row.rhs,
    })
}
