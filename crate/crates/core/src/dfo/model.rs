use nalgebra::{DMatrix, DVector};

use super::bank::PointBank;
use crate::error::{Error, Result};

/// Projected points closer than this fraction of the radius are duplicates.
const PROJECTED_DUPLICATE_TOL: f64 = 1e-10;
/// Smallest singular value (in radius units) the selected points must reach.
const AFFINE_TOL: f64 = 1e-10;
/// Relative interpolation residual a fit must meet.
const INTERP_TOL: f64 = 1e-8;

/// `m(z) = f(x) + g^T z + z^T H z / 2` on `x + span(basis)`.
#[derive(Clone, Debug)]
pub struct SubspaceModel {
    /// `d x m`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub center: DVector<f64>,
    pub constant: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// Bank indices interpolated besides the center.
    pub points: Vec<usize>,
}

impl SubspaceModel {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        self.constant + self.gradient.dot(z) + 0.5 * z.dot(&(&self.hessian * z))
    }

    /// `m(0) - m(z)`.
    pub fn decrease(&self, z: &DVector<f64>) -> f64 {
        -(self.gradient.dot(z) + 0.5 * z.dot(&(&self.hessian * z)))
    }

    /// Coordinates `S^T (y - x)` of a point.
    pub fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(&(y - &self.center))
    }

    /// `x + S z`.
    pub fn embed(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.basis * z
    }
}

/// Most points a model in dimension `m` interpolates besides the center.
pub fn point_cap(m: usize) -> usize {
    ((m + 1) * (m + 2) / 2 - 1).min(2 * m + 10)
}

/// Fit a minimum-Frobenius-norm quadratic on `x + span(basis)`.
///
/// `required` points are always used; the rest of the bank within `radius`
/// of `x` fills up to [`point_cap`], nearest projection first and newest
/// first among ties. `x` must be in the bank. Fails when the selected
/// projections are not affinely independent.
pub fn build_subspace_model(
    bank: &PointBank,
    x: &DVector<f64>,
    basis: &DMatrix<f64>,
    delta: f64,
    radius: f64,
    required: &[usize],
) -> Result<SubspaceModel> {
    let m = basis.ncols();
    if m == 0 {
        return Err(Error::ModelBuild("empty subspace".into()));
    }
    let ci = bank
        .find(x)
        .ok_or_else(|| Error::ModelBuild("center is not in the bank".into()))?;
    let fx = bank.value(ci);
    let proj = |i: usize| basis.tr_mul(&(bank.point(i) - x)) / delta;

    let mut chosen: Vec<(usize, DVector<f64>)> = Vec::new();
    let admit = |chosen: &mut Vec<(usize, DVector<f64>)>, i: usize, z: DVector<f64>| {
        if i == ci
            || z.norm() <= PROJECTED_DUPLICATE_TOL
            || chosen
                .iter()
                .any(|(j, w)| *j == i || (w - &z).norm() <= PROJECTED_DUPLICATE_TOL)
        {
            return;
        }
        chosen.push((i, z));
    };
    for &i in required {
        admit(&mut chosen, i, proj(i));
    }
    let n_required = chosen.len();
    let near: Vec<usize> = bank
        .newest_first()
        .filter(|&i| i != ci && !required.contains(&i) && bank.dist_sq(i, x) <= radius * radius)
        .collect();
    // one product for all candidates instead of one per point
    let mut disp = DMatrix::zeros(x.len(), near.len());
    for (j, &i) in near.iter().enumerate() {
        disp.column_mut(j).copy_from(&(bank.point(i) - x));
    }
    let zs = basis.tr_mul(&disp) / delta;
    let mut optional: Vec<(f64, usize, DVector<f64>)> = near
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let z = zs.column(j).into_owned();
            (z.norm(), i, z)
        })
        .collect();
    // stable sort keeps newest first among equal distances
    optional.sort_by(|a, b| a.0.total_cmp(&b.0));
    let cap = point_cap(m).max(n_required);
    for (_, i, z) in optional {
        if chosen.len() >= cap {
            break;
        }
        admit(&mut chosen, i, z);
    }

    let zmat = DMatrix::from_columns(&chosen.iter().map(|(_, z)| z.clone()).collect::<Vec<_>>());
    if chosen.len() < m || crate::linalg::min_singular_value(&zmat.transpose()) < AFFINE_TOL {
        return Err(Error::ModelBuild(format!(
            "{} usable points do not span dimension {m}",
            chosen.len()
        )));
    }

    // retry with fewer optional points if the full fit is ill-conditioned
    let mut n = chosen.len();
    loop {
        if let Some(model) = fit(&chosen[..n], bank, fx, m, delta) {
            return Ok(SubspaceModel {
                basis: basis.clone(),
                center: x.clone(),
                ..model
            });
        }
        if n <= n_required.max(m) {
            return Err(Error::ModelBuild("interpolation system is singular".into()));
        }
        n = (n_required.max(m) + n) / 2;
    }
}

fn fit(
    points: &[(usize, DVector<f64>)],
    bank: &PointBank,
    fx: f64,
    m: usize,
    delta: f64,
) -> Option<SubspaceModel> {
    // The center sits at the origin, so its row of the kernel block vanishes
    // and its constraint fixes the constant to f(x); its multiplier only
    // enters the sum-to-zero condition, which it absorbs. What remains is the
    // KKT system in (w, g) for the other points.
    let n = points.len();
    let size = n + m;
    let mut kkt = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    for (a, (i, za)) in points.iter().enumerate() {
        for (b, (_, zb)) in points.iter().enumerate() {
            kkt[(a, b)] = 0.5 * za.dot(zb).powi(2);
        }
        for j in 0..m {
            kkt[(a, n + j)] = za[j];
            kkt[(n + j, a)] = za[j];
        }
        rhs[a] = bank.value(*i) - fx;
    }
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let g = sol.rows(n, m).into_owned();
    let mut h = DMatrix::zeros(m, m);
    for (a, (_, z)) in points.iter().enumerate() {
        h.ger(sol[a], z, z, 1.0);
    }
    let model = SubspaceModel {
        basis: DMatrix::zeros(0, 0),
        center: DVector::zeros(0),
        constant: fx,
        gradient: g / delta,
        hessian: h / (delta * delta),
        points: points.iter().map(|(i, _)| *i).collect(),
    };
    for (i, z) in points {
        let f = bank.value(*i);
        if (model.value(&(z * delta)) - f).abs() > INTERP_TOL * f.abs().max(1.0) {
            return None;
        }
    }
    Some(model)
}
