use nalgebra::{DMatrix, DVector};

use super::bank::PointBank;
use crate::linalg::deflate_basis;

/// Output of the subspace identification: `q = [s, s_perp]` is orthogonal.
#[derive(Clone, Debug)]
pub struct InitialSubspace {
    /// Orthonormal directions backed by nearby bank points.
    pub s: DMatrix<f64>,
    pub s_perp: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Bank indices of the points that contributed a direction, in order.
    pub contributors: Vec<usize>,
}

/// Greedy scan of the bank, newest point first. A point `y` adds the
/// normalized component of `y - x` outside the current span when
/// `|y - x| <= c delta` and that component of `(y - x)/(c delta)` has norm at
/// least `theta1`. Stops at `d` directions.
pub fn identify_initial_subspace(
    x: &DVector<f64>,
    bank: &PointBank,
    delta: f64,
    c: f64,
    theta1: f64,
) -> InitialSubspace {
    let d = x.len();
    let radius = c * delta;
    let mut perp = DMatrix::identity(d, d);
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    let mut contributors = Vec::new();
    for i in bank.newest_first() {
        if dirs.len() == d {
            break;
        }
        let dist = bank.dist_sq(i, x).sqrt();
        if dist == 0.0 || dist > radius {
            continue;
        }
        let v = bank.point(i) - x;
        // outside component via the accepted directions: cheaper than the
        // complement while few directions are known
        let c: Vec<f64> = dirs.iter().map(|u| u.dot(&v)).collect();
        let out_sq = dist * dist - c.iter().map(|x| x * x).sum::<f64>();
        if out_sq.max(0.0).sqrt() < theta1 * radius {
            continue;
        }
        let mut w = v;
        for _ in 0..2 {
            for u in &dirs {
                let a = u.dot(&w);
                w.axpy(-a, u, 1.0);
            }
        }
        let n = w.norm();
        if n < theta1 * radius {
            continue;
        }
        let u = w / n;
        perp = deflate_basis(&perp, &u);
        dirs.push(u);
        contributors.push(i);
    }
    let s = if dirs.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&dirs)
    };
    let mut q = DMatrix::zeros(d, d);
    q.columns_mut(0, s.ncols()).copy_from(&s);
    q.columns_mut(s.ncols(), perp.ncols()).copy_from(&perp);
    InitialSubspace {
        s,
        s_perp: perp,
        q,
        contributors,
    }
}
