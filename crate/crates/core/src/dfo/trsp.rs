use nalgebra::{DMatrix, DVector};

/// Relative tolerance on the boundary condition `|z| = delta`.
const BOUNDARY_TOL: f64 = 1e-12;

/// `g^T z + z^T H z / 2`.
pub fn model_change(g: &DVector<f64>, h: &DMatrix<f64>, z: &DVector<f64>) -> f64 {
    g.dot(z) + 0.5 * z.dot(&(h * z))
}

/// Minimizer of the model along `-g` inside the ball.
pub fn cauchy_point(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64) -> DVector<f64> {
    let gn = g.norm();
    if gn == 0.0 {
        return DVector::zeros(g.len());
    }
    let curv = g.dot(&(h * g));
    let t_max = delta / gn;
    let t = if curv > 0.0 {
        (gn * gn / curv).min(t_max)
    } else {
        t_max
    };
    g * (-t)
}

/// Global minimizer of `g^T z + z^T H z / 2` over `|z| <= delta` from the
/// eigendecomposition of `H`, hard case included. The Cauchy point is
/// returned instead whenever it does better (only on numerical failure).
pub fn solve_trust_region_subproblem(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    delta: f64,
) -> DVector<f64> {
    let n = g.len();
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lam = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    let gh = v.tr_mul(g);
    let scale = lam.amax().max(g.norm() / delta).max(f64::MIN_POSITIVE);
    let tiny = 1e-14 * scale;
    let lmin = lam.min();
    let step = |sigma: f64| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            let den = lam[i] + sigma;
            if den.abs() <= tiny {
                0.0
            } else {
                -gh[i] / den
            }
        })
    };

    let mut best = if lmin > tiny {
        let y = step(0.0);
        if y.norm() <= delta {
            Some(v * y)
        } else {
            None
        }
    } else {
        None
    };

    if best.is_none() {
        let lo = (-lmin).max(0.0);
        // components on the lowest eigenspace decide between easy and hard case
        let y_lo = step(lo);
        let hard = (0..n)
            .all(|i| (lam[i] - lmin).abs() > tiny || gh[i].abs() <= 1e-12 * g.norm().max(tiny));
        if hard && y_lo.norm() <= delta {
            let i_min = (0..n)
                .min_by(|&a, &b| lam[a].total_cmp(&lam[b]))
                .unwrap_or(0);
            let mut y = y_lo;
            let tau = (delta * delta - y.norm_squared()).max(0.0).sqrt();
            y[i_min] += tau;
            best = Some(v * y);
        } else {
            // |y(sigma)| decreases on (lo, inf); bracket and bisect with
            // Newton steps on 1/|y| - 1/delta
            let mut a = lo;
            let mut b = lo.max(tiny) * 2.0 + g.norm() / delta;
            while step(b).norm() > delta {
                b *= 2.0;
            }
            let mut sigma = b;
            for _ in 0..200 {
                let y = step(sigma);
                let yn = y.norm();
                if (yn - delta).abs() <= BOUNDARY_TOL * delta {
                    break;
                }
                if yn > delta {
                    a = sigma;
                } else {
                    b = sigma;
                }
                // d|y|/dsigma = -sum gh^2/(lam+sigma)^3 / |y|
                let dy: f64 = -(0..n)
                    .map(|i| gh[i] * gh[i] / (lam[i] + sigma).powi(3))
                    .sum::<f64>()
                    / yn;
                let phi = 1.0 / yn - 1.0 / delta;
                let dphi = -dy / (yn * yn);
                let next = sigma - phi / dphi;
                sigma = if next > a && next < b && dphi.is_finite() {
                    next
                } else {
                    0.5 * (a + b)
                };
            }
            let y = step(sigma);
            let y = if y.norm() > delta {
                &y * (delta / y.norm())
            } else {
                y
            };
            best = Some(v * y);
        }
    }

    let z = best.unwrap_or_else(|| DVector::zeros(n));
    let zc = cauchy_point(g, h, delta);
    let z = if z.iter().all(|x| x.is_finite()) && model_change(g, h, &z) <= model_change(g, h, &zc)
    {
        z
    } else {
        zc
    };
    if z.norm() > delta {
        &z * (delta / z.norm())
    } else {
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_model_goes_to_the_boundary() {
        let z = solve_trust_region_subproblem(&dvector![1.0, 0.0], &DMatrix::zeros(2, 2), 2.0);
        assert!((z - dvector![-2.0, 0.0]).amax() < 1e-12);
    }

    #[test]
    fn interior_newton_point() {
        let g = dvector![0.3, -0.4];
        let z = solve_trust_region_subproblem(&g, &DMatrix::identity(2, 2), 1.0);
        assert!((z + g).amax() < 1e-12);
    }

    #[test]
    fn hard_case() {
        // g orthogonal to the negative-curvature direction
        let h = DMatrix::from_diagonal(&dvector![-1.0, 2.0]);
        let z = solve_trust_region_subproblem(&dvector![0.0, 1.0], &h, 1.0);
        assert!((z.norm() - 1.0).abs() < 1e-10);
        // sigma = 1 gives y2 = -1/3, the rest along e1
        assert!((z[1] + 1.0 / 3.0).abs() < 1e-10);
    }

    fn sampled_minimum(
        g: &DVector<f64>,
        h: &DMatrix<f64>,
        delta: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let mut best = f64::INFINITY;
        for _ in 0..1_000_000 {
            let r = delta * rng.random::<f64>().sqrt();
            let t = rng.random::<f64>() * std::f64::consts::TAU;
            best = best.min(model_change(g, h, &dvector![r * t.cos(), r * t.sin()]));
        }
        // the boundary, solved finely
        for i in 0..100_000 {
            let t = i as f64 / 100_000.0 * std::f64::consts::TAU;
            best = best.min(model_change(
                g,
                h,
                &dvector![delta * t.cos(), delta * t.sin()],
            ));
        }
        best
    }

    #[test]
    fn indefinite_instance_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.5]);
        let g = dvector![0.4, -0.2];
        let z = solve_trust_region_subproblem(&g, &h, 0.8);
        assert!(z.norm() <= 0.8 * (1.0 + 1e-10));
        let m = model_change(&g, &h, &z);
        assert!(m <= sampled_minimum(&g, &h, 0.8, &mut rng) + 1e-6);
    }

    #[test]
    fn never_worse_than_cauchy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let a = crate::linalg::gaussian_matrix(n, n, 1.0, &mut rng);
            let h = (&a + a.transpose()) * 0.5;
            let g = crate::linalg::gaussian_matrix(n, 1, 1.0, &mut rng)
                .column(0)
                .into_owned();
            let delta = rng.random_range(0.01..3.0);
            let z = solve_trust_region_subproblem(&g, &h, delta);
            assert!(z.norm() <= delta * (1.0 + 1e-10));
            assert!(
                model_change(&g, &h, &z)
                    <= model_change(&g, &h, &cauchy_point(&g, &h, delta)) + 1e-12
            );
        }
    }
}
