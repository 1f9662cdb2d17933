use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Objective;
use crate::error::{invalid, Result};
use crate::linalg::haar_orthogonal;

/// `f_bar(x) = f([Q x]_{1..d})` for a base objective `f` on `R^d` and an
/// orthogonal `Q` of size `D x D`.
///
/// The objective varies only on the `d`-dimensional subspace spanned by the
/// first `d` rows of `Q`.
#[derive(Clone, Debug)]
pub struct EmbeddedProblem {
    base: Arc<dyn Objective>,
    ambient_dim: usize,
    rotation: DMatrix<f64>,
    /// First `d` rows of the rotation, cached for evaluation.
    top: DMatrix<f64>,
    seed: Option<u64>,
}

impl EmbeddedProblem {
    /// Embed with a Haar-random rotation generated from `seed`.
    pub fn new(base: Arc<dyn Objective>, ambient_dim: usize, seed: u64) -> Result<Self> {
        Self::check(&*base, ambient_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = haar_orthogonal(ambient_dim, &mut rng);
        Ok(Self::assemble(base, ambient_dim, q, Some(seed)))
    }

    /// Embed with `Q = I`.
    pub fn identity(base: Arc<dyn Objective>, ambient_dim: usize) -> Result<Self> {
        Self::check(&*base, ambient_dim)?;
        Ok(Self::assemble(
            base,
            ambient_dim,
            DMatrix::identity(ambient_dim, ambient_dim),
            None,
        ))
    }

    fn check(base: &dyn Objective, ambient_dim: usize) -> Result<()> {
        if ambient_dim < base.dim() {
            return Err(invalid(format!(
                "ambient dimension {ambient_dim} is below base dimension {}",
                base.dim()
            )));
        }
        Ok(())
    }

    fn assemble(
        base: Arc<dyn Objective>,
        ambient_dim: usize,
        rotation: DMatrix<f64>,
        seed: Option<u64>,
    ) -> Self {
        let top = rotation.rows(0, base.dim()).into_owned();
        EmbeddedProblem {
            base,
            ambient_dim,
            rotation,
            top,
            seed,
        }
    }

    pub fn base(&self) -> &Arc<dyn Objective> {
        &self.base
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

impl Objective for EmbeddedProblem {
    fn name(&self) -> String {
        match self.seed {
            Some(s) => format!("{}@D={},seed={}", self.base.name(), self.ambient_dim, s),
            None => format!("{}@D={}", self.base.name(), self.ambient_dim),
        }
    }
    fn dim(&self) -> usize {
        self.ambient_dim
    }
    /// `Q^T [x0; 0]`, so that `f_bar(x0_bar) = f(x0)`.
    fn initial_point(&self) -> DVector<f64> {
        self.top.tr_mul(&self.base.initial_point())
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.base.value(&(&self.top * x))
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.top.tr_mul(&self.base.gradient(&(&self.top * x)))
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        self.base.lipschitz_bound()
    }
    fn gradient_bound(&self) -> Option<f64> {
        self.base.gradient_bound()
    }
    fn optimal_value(&self) -> Option<f64> {
        self.base.optimal_value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::problems::{finite_difference_gradient, LeastSquares, LsKind, Sphere};

    #[test]
    fn rotation_is_orthogonal() {
        let e = EmbeddedProblem::new(Arc::new(Sphere::new(2)), 5, 9).unwrap();
        let q = e.rotation();
        assert!(max_abs(&(q.tr_mul(q) - DMatrix::identity(5, 5))) < 1e-10);
    }

    #[test]
    fn identity_embedding_matches_base() {
        let base: Arc<dyn Objective> = Arc::new(LeastSquares::with_default_dim(LsKind::Rosenbrock));
        let e = EmbeddedProblem::identity(base.clone(), 2).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.7]);
        assert_eq!(e.value(&x), base.value(&x));
    }

    #[test]
    fn null_directions_are_flat() {
        let e = EmbeddedProblem::new(Arc::new(Sphere::new(2)), 5, 4).unwrap();
        let q = e.rotation();
        let x = q.tr_mul(&DVector::from_vec(vec![0.0, 0.0, 1.5, -2.0, 0.25]));
        assert!(e.value(&x).abs() < 1e-12);
        let y = DVector::from_fn(5, |i, _| 0.1 * i as f64 + 0.2);
        let g = e.gradient(&y);
        let qg = q * g;
        for j in 2..5 {
            assert!(qg[j].abs() < 1e-10);
            // the directional derivative along Q^T e_j vanishes
            let dir = q.row(j).transpose();
            assert!(e.gradient(&y).dot(&dir).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let base = Arc::new(LeastSquares::with_default_dim(LsKind::HelicalValley));
        let e = EmbeddedProblem::new(base, 10, 17).unwrap();
        let x = e.initial_point() + DVector::from_fn(10, |i, _| 0.01 * (i as f64 - 4.0));
        let g = e.gradient(&x);
        let fd = finite_difference_gradient(&e, &x, 1e-6);
        assert!((&g - &fd).norm() <= 1e-5 * g.norm().max(1.0));
    }

    #[test]
    fn too_small_ambient_dimension_is_rejected() {
        assert!(EmbeddedProblem::new(Arc::new(Sphere::new(4)), 3, 0).is_err());
    }

    #[test]
    fn start_value_is_preserved() {
        let base: Arc<dyn Objective> = Arc::new(LeastSquares::with_default_dim(LsKind::Wood));
        let e = EmbeddedProblem::new(base.clone(), 30, 2).unwrap();
        let a = e.value(&e.initial_point());
        let b = base.value(&base.initial_point());
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
    }
}
