//! Random sketch matrices, orthogonal augmentation, and projections onto
//! their column spans.
//!
//! A sketch `S` is a `d x p` matrix of full column rank. Solvers only see
//! `S^T grad f`, and the step uses the orthogonal projector
//! `P = S (S^T S)^{-1} S^T` applied through those coefficients.
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use subspace_ucb::sketching::{haar_sketch, projection_apply};
//!
//! let mut rng = ChaCha8Rng::seed_from_u64(1);
//! let s = haar_sketch(4, 2, &mut rng).unwrap();
//! let gram = s.entries().tr_mul(s.entries());
//! assert!((gram[(0, 0)] - 2.0).abs() < 1e-12 && gram[(0, 1)].abs() < 1e-12);
//! let v = s.entries().column(0).into_owned();
//! assert!((projection_apply(s.entries(), &v).unwrap() - &v).amax() < 1e-12);
//! ```

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{gaussian_matrix, min_singular_value, thin_q_sign_fixed};

/// Columns whose smallest singular value falls at or below this are rejected.
pub const RANK_TOL: f64 = 1e-12;

/// Redraws allowed before a generator gives up on full column rank.
pub const MAX_REDRAWS: usize = 100;

/// Where a sketch came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    Gaussian,
    Hashing,
    Haar,
    Ucb,
    Augmented,
    Explicit,
}

/// A `d x p` matrix of full column rank with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchMatrix {
    entries: DMatrix<f64>,
    kind: SketchKind,
    hash_weight: Option<usize>,
}

impl SketchMatrix {
    /// Wrap a caller-supplied matrix, rejecting rank-deficient input.
    pub fn explicit(entries: DMatrix<f64>) -> Result<Self> {
        let sigma_min = min_singular_value(&entries);
        if entries.ncols() == 0 || sigma_min <= RANK_TOL {
            return Err(Error::RankDeficient { sigma_min });
        }
        Ok(SketchMatrix {
            entries,
            kind: SketchKind::Explicit,
            hash_weight: None,
        })
    }

    pub(crate) fn from_parts(
        entries: DMatrix<f64>,
        kind: SketchKind,
        hash_weight: Option<usize>,
    ) -> Self {
        SketchMatrix {
            entries,
            kind,
            hash_weight,
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn hash_weight(&self) -> Option<usize> {
        self.hash_weight
    }

    /// Number of rows `d`.
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of columns `p`.
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

fn check_size(d: usize, p: usize) -> Result<()> {
    if p < 1 || p > d {
        return Err(invalid(format!(
            "sketch size p={p} must satisfy 1 <= p <= d={d}"
        )));
    }
    Ok(())
}

fn redraw<R, F>(rng: &mut R, redraws: &mut usize, mut draw: F) -> Result<DMatrix<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> DMatrix<f64>,
{
    let mut sigma_min = 0.0;
    for attempt in 0..MAX_REDRAWS {
        let m = draw(rng);
        sigma_min = min_singular_value(&m);
        if sigma_min > RANK_TOL {
            *redraws += attempt;
            return Ok(m);
        }
    }
    Err(Error::RankDeficient { sigma_min })
}

/// Entries i.i.d. `N(0, 1/p)`.
pub fn gaussian_sketch<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> Result<SketchMatrix> {
    SketchSpec::Gaussian { p }.draw(d, rng, &mut 0)
}

/// `h` nonzeros per column at positions drawn without replacement, values
/// `+-1/sqrt(h)` with fair signs.
pub fn hashing_sketch<R: Rng + ?Sized>(
    d: usize,
    p: usize,
    h: usize,
    rng: &mut R,
) -> Result<SketchMatrix> {
    SketchSpec::Hashing { p, h }.draw(d, rng, &mut 0)
}

/// First `p` columns of a Haar orthogonal matrix scaled by `sqrt(d/p)`, so
/// `S^T S = (d/p) I`.
pub fn haar_sketch<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> Result<SketchMatrix> {
    SketchSpec::Haar { p }.draw(d, rng, &mut 0)
}

/// `p` orthonormal columns orthogonal to the orthonormal columns of `s`:
/// Gaussian `A`, then `A - S S^T A`, then thin QR.
pub fn orthogonal_augment<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    p: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (d, m) = s.shape();
    if p > d - m.min(d) {
        return Err(invalid(format!(
            "cannot add {p} directions orthogonal to {m} in dimension {d}"
        )));
    }
    if p == 0 {
        return Ok(DMatrix::zeros(d, 0));
    }
    let mut redraws = 0;
    redraw(rng, &mut redraws, |rng| {
        let mut a = gaussian_matrix(d, p, 1.0, rng);
        if m > 0 {
            // two passes keep the result orthogonal to S at roundoff level
            for _ in 0..2 {
                let c = s.tr_mul(&a);
                a.gemm(-1.0, s, &c, 1.0);
            }
        }
        a
    })
    .map(|a| {
        let mut q = thin_q_sign_fixed(a);
        if m > 0 {
            let c = s.tr_mul(&q);
            q.gemm(-1.0, s, &c, 1.0);
            q = thin_q_sign_fixed(q);
        }
        q
    })
}

/// Thin `S = Q R`. Working through `R` rather than `S^T S` keeps the
/// conditioning of `S` instead of squaring it.
fn thin_qr(s: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (d, p) = s.shape();
    if p == 0 || p > d {
        return Err(Error::RankDeficient { sigma_min: 0.0 });
    }
    let qr = s.clone().qr();
    let r = qr.r();
    let rmin = r.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if !(rmin > RANK_TOL) {
        return Err(Error::RankDeficient { sigma_min: rmin });
    }
    Ok((qr.q(), r))
}

/// `P v` from the sketched values `r = S^T v` only: `Q R^{-T} r`.
pub fn project_from_sketch(s: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(s.ncols(), r.len())?;
    let (q, rr) = thin_qr(s)?;
    let y = rr
        .tr_solve_upper_triangular(r)
        .ok_or(Error::RankDeficient { sigma_min: 0.0 })?;
    Ok(q * y)
}

/// `P v = S (S^T S)^{-1} S^T v`.
pub fn projection_apply(s: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(s.nrows(), v.len())?;
    let sigma_min = min_singular_value(s);
    if s.ncols() == 0 || sigma_min <= RANK_TOL {
        return Err(Error::RankDeficient { sigma_min });
    }
    let (q, _) = thin_qr(s)?;
    Ok(&q * q.tr_mul(v))
}

/// `v^T P v = |Q^T v|^2`.
pub fn projected_norm_sq(s: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    check_dim(s.nrows(), v.len())?;
    let (q, _) = thin_qr(s)?;
    Ok(q.tr_mul(v).norm_squared())
}

/// `g^T P g / |g|^2`, in `[0, 1]`.
pub fn alignment_ratio(s: &DMatrix<f64>, g: &DVector<f64>) -> Result<f64> {
    let gg = g.norm_squared();
    if gg == 0.0 {
        return Err(Error::ZeroVector("alignment ratio"));
    }
    Ok((projected_norm_sq(s, g)? / gg).clamp(0.0, 1.0))
}

/// Sketch family and size, parsed from `gaussian:p=..`, `hashing:p=..,h=..`,
/// `haar:p=..` or `identity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SketchSpec {
    Gaussian {
        p: usize,
    },
    Hashing {
        p: usize,
        h: usize,
    },
    Haar {
        p: usize,
    },
    /// `S = I_d` every iteration.
    Identity,
}

impl SketchSpec {
    /// Number of columns drawn in dimension `d`.
    pub fn size(&self, d: usize) -> usize {
        match *self {
            SketchSpec::Gaussian { p } | SketchSpec::Hashing { p, .. } | SketchSpec::Haar { p } => {
                p
            }
            SketchSpec::Identity => d,
        }
    }

    /// Same family with a different column count.
    pub fn with_size(&self, p: usize) -> SketchSpec {
        match *self {
            SketchSpec::Gaussian { .. } => SketchSpec::Gaussian { p },
            SketchSpec::Hashing { h, .. } => SketchSpec::Hashing { p, h },
            SketchSpec::Haar { .. } => SketchSpec::Haar { p },
            SketchSpec::Identity => SketchSpec::Identity,
        }
    }

    /// Draw one full-rank sketch; `redraws` accumulates rejected draws.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        d: usize,
        rng: &mut R,
        redraws: &mut usize,
    ) -> Result<SketchMatrix> {
        match *self {
            SketchSpec::Gaussian { p } => {
                check_size(d, p)?;
                let std = 1.0 / (p as f64).sqrt();
                let m = redraw(rng, redraws, |rng| gaussian_matrix(d, p, std, rng))?;
                Ok(SketchMatrix::from_parts(m, SketchKind::Gaussian, None))
            }
            SketchSpec::Hashing { p, h } => {
                check_size(d, p)?;
                if h < 1 || h > d {
                    return Err(invalid(format!(
                        "hash weight h={h} must satisfy 1 <= h <= d={d}"
                    )));
                }
                let v = 1.0 / (h as f64).sqrt();
                let m = redraw(rng, redraws, |rng| {
                    let mut m = DMatrix::zeros(d, p);
                    for j in 0..p {
                        for i in sample(rng, d, h).into_iter() {
                            m[(i, j)] = if rng.random::<bool>() { v } else { -v };
                        }
                    }
                    m
                })?;
                Ok(SketchMatrix::from_parts(m, SketchKind::Hashing, Some(h)))
            }
            SketchSpec::Haar { p } => {
                check_size(d, p)?;
                let scale = (d as f64 / p as f64).sqrt();
                // The first p columns of a Haar matrix are the sign-fixed thin
                // QR factor of a d x p Gaussian block.
                let m = redraw(rng, redraws, |rng| gaussian_matrix(d, p, 1.0, rng))?;
                Ok(SketchMatrix::from_parts(
                    thin_q_sign_fixed(m) * scale,
                    SketchKind::Haar,
                    None,
                ))
            }
            SketchSpec::Identity => Ok(SketchMatrix::from_parts(
                DMatrix::identity(d, d),
                SketchKind::Explicit,
                None,
            )),
        }
    }
}

impl fmt::Display for SketchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SketchSpec::Gaussian { p } => write!(f, "gaussian:p={p}"),
            SketchSpec::Hashing { p, h } => write!(f, "hashing:p={p},h={h}"),
            SketchSpec::Haar { p } => write!(f, "haar:p={p}"),
            SketchSpec::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for SketchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(SketchSpec::Identity);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("sketch `{s}` lacks parameters")))?;
        let mut p = None;
        let mut h = None;
        for kv in rest.split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad sketch field `{kv}`")))?;
            let v: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad sketch value `{v}`")))?;
            match k.trim() {
                "p" => p = Some(v),
                "h" => h = Some(v),
                other => return Err(Error::Parse(format!("unknown sketch field `{other}`"))),
            }
        }
        let p = p.ok_or_else(|| Error::Parse("sketch needs p=<p>".into()))?;
        match (kind.trim(), h) {
            ("gaussian", None) => Ok(SketchSpec::Gaussian { p }),
            ("haar", None) => Ok(SketchSpec::Haar { p }),
            ("hashing", Some(h)) => Ok(SketchSpec::Hashing { p, h }),
            ("hashing", None) => Err(Error::Parse("hashing sketch needs h=<h>".into())),
            (k, _) => Err(Error::Parse(format!("unknown sketch `{k}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, random_unit};
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn gaussian_shape_and_determinism() {
        let a = gaussian_sketch(100, 10, &mut rng(1)).unwrap();
        assert_eq!(a.entries().shape(), (100, 10));
        assert_eq!(a.kind(), SketchKind::Gaussian);
        let b = gaussian_sketch(100, 10, &mut rng(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_entry_variance() {
        // 10^6 entries: the sample variance is within 2% of 1/p with overwhelming
        // probability (its relative standard error is sqrt(2/10^6) ~ 0.14%).
        let p = 10;
        let mut r = rng(2);
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut n = 0.0;
        for _ in 0..1000 {
            let s = gaussian_sketch(100, p, &mut r).unwrap();
            for v in s.entries().iter() {
                sum += v;
                sq += v * v;
                n += 1.0;
            }
        }
        let mean = sum / n;
        let var = sq / n - mean * mean;
        assert_eq!(n, 1e6);
        assert!((var * p as f64 - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn hashing_structure() {
        let s = hashing_sketch(8, 3, 2, &mut rng(3)).unwrap();
        let v = 1.0 / 2f64.sqrt();
        for j in 0..3 {
            let col = s.entries().column(j);
            assert_eq!(col.iter().filter(|x| **x != 0.0).count(), 2);
            assert!(col.iter().all(|x| *x == 0.0 || (x.abs() - v).abs() < 1e-15));
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        assert!((s.entries().norm() - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.hash_weight(), Some(2));
    }

    #[test]
    fn hashing_single_entry_is_signed_coordinate() {
        let s = hashing_sketch(5, 1, 1, &mut rng(4)).unwrap();
        let col = s.entries().column(0);
        assert_eq!(col.iter().filter(|x| **x != 0.0).count(), 1);
        assert_eq!(col.amax(), 1.0);
    }

    #[test]
    fn size_errors() {
        assert!(gaussian_sketch(3, 4, &mut rng(0)).is_err());
        assert!(gaussian_sketch(3, 0, &mut rng(0)).is_err());
        assert!(hashing_sketch(3, 2, 4, &mut rng(0)).is_err());
        assert!(haar_sketch(3, 4, &mut rng(0)).is_err());
    }

    #[test]
    fn haar_gram() {
        let s = haar_sketch(4, 2, &mut rng(5)).unwrap();
        let e = s.entries().tr_mul(s.entries()) - DMatrix::identity(2, 2) * 2.0;
        assert!(max_abs(&e) < 1e-12);
        let unscaled = s.entries() / 2f64.sqrt();
        assert!(max_abs(&(unscaled.tr_mul(&unscaled) - DMatrix::identity(2, 2))) < 1e-12);
        let full = haar_sketch(5, 5, &mut rng(6)).unwrap();
        assert!(
            max_abs(&(full.entries().tr_mul(full.entries()) - DMatrix::identity(5, 5))) < 1e-12
        );
    }

    #[test]
    fn augmentation_against_e1() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let q = orthogonal_augment(&e1, 2, &mut rng(7)).unwrap();
        assert!(q.tr_mul(&e1).amax() < 1e-12);
        assert!(max_abs(&(q.tr_mul(&q) - DMatrix::identity(2, 2))) < 1e-12);
        assert!(orthogonal_augment(&e1, 3, &mut rng(7)).is_err());
    }

    #[test]
    fn augmentation_from_empty_is_orthogonal() {
        let q = orthogonal_augment(&DMatrix::zeros(4, 0), 4, &mut rng(8)).unwrap();
        assert!(max_abs(&(q.tr_mul(&q) - DMatrix::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn augmentation_random_basis() {
        let mut r = rng(9);
        let s = orthogonal_augment(&DMatrix::zeros(6, 0), 2, &mut r).unwrap();
        let q = orthogonal_augment(&s, 2, &mut r).unwrap();
        assert!(s.tr_mul(&q).amax() <= 1e-10);
    }

    #[test]
    fn projection_examples() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert_eq!(
            projection_apply(&e1, &dvector![2.0, -1.0, 4.0]).unwrap(),
            dvector![2.0, 0.0, 0.0]
        );
        let s = gaussian_sketch(5, 2, &mut rng(10)).unwrap().into_entries();
        let v = &s * dvector![0.3, -1.1];
        assert!((projection_apply(&s, &v).unwrap() - &v).amax() < 1e-12);
    }

    #[test]
    fn projection_matches_pseudo_inverse() {
        let mut r = rng(11);
        let s = gaussian_sketch(5, 2, &mut r).unwrap().into_entries();
        let v = random_unit(5, &mut r) * 3.0;
        let pinv = s.clone().pseudo_inverse(1e-14).unwrap();
        let dense = &s * (pinv * &v);
        assert!((projection_apply(&s, &v).unwrap() - dense).amax() < 1e-10);
    }

    #[test]
    fn rank_deficient_projection_is_an_error() {
        let s = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            projection_apply(&s, &dvector![1.0, 1.0, 1.0]),
            Err(Error::RankDeficient { .. })
        ));
        assert!(SketchMatrix::explicit(s).is_err());
    }

    #[test]
    fn alignment_examples() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert_eq!(alignment_ratio(&e1, &dvector![2.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(
            alignment_ratio(&e1, &dvector![0.0, 1.0, -3.0]).unwrap(),
            0.0
        );
        assert!(alignment_ratio(&e1, &dvector![0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn alignment_matches_eigen_factorization() {
        let mut r = rng(12);
        let s = haar_sketch(4, 2, &mut r).unwrap().into_entries() / 2f64.sqrt();
        let g = dvector![0.4, -1.0, 2.0, 0.7];
        // (S^T S)^{-1/2} through a symmetric eigendecomposition
        let eig = nalgebra::SymmetricEigen::new(s.tr_mul(&s));
        let inv_sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
            * eig.eigenvectors.transpose();
        let dense = (inv_sqrt * s.tr_mul(&g)).norm_squared() / g.norm_squared();
        assert!((alignment_ratio(&s, &g).unwrap() - dense).abs() < 1e-10);
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["gaussian:p=3", "hashing:p=4,h=2", "haar:p=10", "identity"] {
            let spec: SketchSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("hashing:p=2".parse::<SketchSpec>().is_err());
        assert!("gauss:p=2".parse::<SketchSpec>().is_err());
        assert!("gaussian:q=2".parse::<SketchSpec>().is_err());
    }
}
