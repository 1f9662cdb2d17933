//! Problems addressable by name and dimension.
//!
//! A selector is `name`, `name:n` (explicit dimension) or an embedded form
//! `name[:n]@D=<D>,seed=<s>`. Scalable problems take their dimension from
//! the `dim` argument of [`lookup`]; fixed-size problems reject a mismatched
//! one.

use std::sync::Arc;

use super::suite::*;
use super::{EmbeddedProblem, LeastSquares, LsKind, Objective};
use crate::error::{Error, Result};

/// Default dimension of scalable problems when none is given.
pub const DEFAULT_SCALABLE_DIM: usize = 12;

/// Condition number of `ill_quadratic`.
pub const ILL_CONDITION: f64 = 1e4;

/// The eight scalable problems used for head-to-head sketching runs.
pub const SCALABLE_SUITE: [&str; 8] = [
    "sphere",
    "ill_quadratic",
    "ext_rosenbrock",
    "ext_powell",
    "trigonometric",
    "broyden_tridiagonal",
    "discrete_bv",
    "penalty1",
];

/// Small least-squares problems suitable for embedding.
pub const SMALL_SET: [&str; 5] = ["rosenbrock", "helical_valley", "box3d", "wood", "watson"];

/// Catalog row for `list-problems`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub default_dim: usize,
    pub dims: String,
}

/// Every registered base problem.
pub fn catalog() -> Vec<CatalogEntry> {
    let mut out: Vec<CatalogEntry> = SCALABLE_SUITE
        .iter()
        .map(|&name| CatalogEntry {
            name,
            default_dim: DEFAULT_SCALABLE_DIM,
            dims: match name {
                "ext_rosenbrock" => "even d >= 2".into(),
                "ext_powell" => "d divisible by 4".into(),
                _ => "any d >= 1".into(),
            },
        })
        .collect();
    for kind in LsKind::ALL {
        let (lo, hi) = kind.dim_range();
        out.push(CatalogEntry {
            name: kind.name(),
            default_dim: kind.default_dim(),
            dims: if lo == hi {
                format!("d = {lo}")
            } else {
                format!("{lo} <= d <= {hi}")
            },
        });
    }
    out
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
}

fn base_problem(name: &str, dim: Option<usize>) -> Result<Arc<dyn Objective>> {
    let bad_dim =
        |d: usize| Error::InvalidParameter(format!("{name} does not admit dimension {d}"));
    if SCALABLE_SUITE.contains(&name) {
        let d = dim.unwrap_or(DEFAULT_SCALABLE_DIM);
        if d == 0 {
            return Err(bad_dim(d));
        }
        let p: Arc<dyn Objective> = match name {
            "sphere" => Arc::new(Sphere::new(d)),
            "ill_quadratic" => Arc::new(IllConditionedQuadratic::new(d, ILL_CONDITION)),
            "ext_rosenbrock" if d % 2 == 0 => Arc::new(ExtendedRosenbrock::new(d)),
            "ext_powell" if d % 4 == 0 => Arc::new(ExtendedPowell::new(d)),
            "trigonometric" => Arc::new(Trigonometric::new(d)),
            "broyden_tridiagonal" => Arc::new(BroydenTridiagonal::new(d)),
            "discrete_bv" => Arc::new(DiscreteBoundaryValue::new(d)),
            "penalty1" => Arc::new(Penalty1::new(d)),
            _ => return Err(bad_dim(d)),
        };
        return Ok(p);
    }
    let kind = LsKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| Error::UnknownProblem(name.into()))?;
    let d = dim.unwrap_or(kind.default_dim());
    let (lo, hi) = kind.dim_range();
    if d < lo || d > hi {
        return Err(bad_dim(d));
    }
    Ok(Arc::new(LeastSquares::new(kind, d)))
}

/// Resolve a selector to an objective.
///
/// ```
/// use subspace_ucb::problems::registry::lookup;
/// let p = lookup("wood@D=20,seed=3", None).unwrap();
/// assert_eq!(p.dim(), 20);
/// assert_eq!(p.name(), "wood@D=20,seed=3");
/// assert_eq!(lookup("penalty1", Some(100)).unwrap().dim(), 100);
/// ```
pub fn lookup(selector: &str, dim: Option<usize>) -> Result<Arc<dyn Objective>> {
    let selector = selector.trim();
    let (base_part, embed_part) = match selector.split_once('@') {
        Some((b, e)) => (b, Some(e)),
        None => (selector, None),
    };
    let (name, base_dim) = match base_part.split_once(':') {
        Some((n, d)) => (n.trim(), Some(parse_usize(d, "dimension")?)),
        None => (base_part.trim(), None),
    };
    match embed_part {
        None => {
            if let (Some(a), Some(b)) = (base_dim, dim) {
                if a != b {
                    return Err(Error::InvalidParameter(format!(
                        "selector dimension {a} disagrees with {b}"
                    )));
                }
            }
            base_problem(name, base_dim.or(dim))
        }
        Some(spec) => {
            let mut ambient = None;
            let mut seed = None;
            for kv in spec.split(',') {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad embedding field `{kv}`")))?;
                match k.trim() {
                    "D" => ambient = Some(parse_usize(v, "ambient dimension")?),
                    "seed" => seed = Some(parse_usize(v, "seed")? as u64),
                    other => {
                        return Err(Error::Parse(format!("unknown embedding field `{other}`")))
                    }
                }
            }
            let ambient = ambient.ok_or_else(|| Error::Parse("embedding needs D=<D>".into()))?;
            if let Some(d) = dim {
                if d != ambient {
                    return Err(Error::InvalidParameter(format!(
                        "requested dimension {d} but D={ambient}"
                    )));
                }
            }
            let base = base_problem(name, base_dim)?;
            let e = match seed {
                Some(s) => EmbeddedProblem::new(base, ambient, s)?,
                None => EmbeddedProblem::identity(base, ambient)?,
            };
            Ok(Arc::new(e))
        }
    }
}
