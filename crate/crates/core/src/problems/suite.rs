//! Scalable analytic objectives with closed-form gradients.

use nalgebra::{DMatrix, DVector};

use super::Objective;
use crate::linalg::sym_eig_range;

/// `f(x) = 0.5 |x|^2`, started from the all-ones vector.
#[derive(Clone, Debug)]
pub struct Sphere {
    d: usize,
}

impl Sphere {
    pub fn new(d: usize) -> Self {
        Sphere { d }
    }
}

impl Objective for Sphere {
    fn name(&self) -> String {
        "sphere".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_element(self.d, 1.0)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(1.0)
    }
    fn gradient_bound(&self) -> Option<f64> {
        Some((self.d as f64).sqrt())
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Diagonal quadratic `0.5 sum a_i x_i^2` with `a_i = cond^((i-1)/(d-1))`.
///
/// The largest eigenvalue `cond` is the Lipschitz constant.
#[derive(Clone, Debug)]
pub struct IllConditionedQuadratic {
    diag: DVector<f64>,
    cond: f64,
}

impl IllConditionedQuadratic {
    pub fn new(d: usize, cond: f64) -> Self {
        let diag = DVector::from_fn(d, |i, _| {
            if d == 1 {
                cond
            } else {
                cond.powf(i as f64 / (d - 1) as f64)
            }
        });
        IllConditionedQuadratic { diag, cond }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.diag
    }
}

impl Objective for IllConditionedQuadratic {
    fn name(&self) -> String {
        "ill_quadratic".into()
    }
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_element(self.diag.len(), 1.0)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x
            .iter()
            .zip(self.diag.iter())
            .map(|(xi, ai)| ai * xi * xi)
            .sum::<f64>()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.diag)
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.cond)
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// General quadratic `0.5 x^T H x + c^T x` with symmetric `H`.
///
/// `H = 0` gives a linear objective; `H = 2 eps I` gives the linear-dominant
/// test function.
#[derive(Clone, Debug)]
pub struct Quadratic {
    name: String,
    h: DMatrix<f64>,
    c: DVector<f64>,
    x0: DVector<f64>,
    lipschitz: f64,
}

impl Quadratic {
    /// Panics if `h` is not square or sizes disagree.
    pub fn new(
        name: impl Into<String>,
        h: DMatrix<f64>,
        c: DVector<f64>,
        x0: DVector<f64>,
    ) -> Self {
        assert!(h.is_square() && h.nrows() == c.len() && c.len() == x0.len());
        let h = (&h + h.transpose()) * 0.5;
        let (lo, hi) = if h.nrows() > 0 {
            sym_eig_range(&h)
        } else {
            (0.0, 0.0)
        };
        Quadratic {
            name: name.into(),
            lipschitz: lo.abs().max(hi.abs()),
            h,
            c,
            x0,
        }
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }
}

impl Objective for Quadratic {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn initial_point(&self) -> DVector<f64> {
        self.x0.clone()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.c.dot(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.c
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// Extended Rosenbrock on consecutive pairs; `d` must be even.
#[derive(Clone, Debug)]
pub struct ExtendedRosenbrock {
    d: usize,
}

impl ExtendedRosenbrock {
    pub fn new(d: usize) -> Self {
        assert!(d >= 2 && d % 2 == 0, "extended Rosenbrock needs even d");
        ExtendedRosenbrock { d }
    }
}

impl Objective for ExtendedRosenbrock {
    fn name(&self) -> String {
        "ext_rosenbrock".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_fn(self.d, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 })
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.d / 2)
            .map(|i| {
                let (a, b) = (x[2 * i], x[2 * i + 1]);
                100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
            })
            .sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.d);
        for i in 0..self.d / 2 {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            let t = b - a * a;
            g[2 * i] = -400.0 * a * t - 2.0 * (1.0 - a);
            g[2 * i + 1] = 200.0 * t;
        }
        g
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Extended Powell singular function on blocks of four; `d % 4 == 0`.
#[derive(Clone, Debug)]
pub struct ExtendedPowell {
    d: usize,
}

impl ExtendedPowell {
    pub fn new(d: usize) -> Self {
        assert!(
            d >= 4 && d % 4 == 0,
            "extended Powell needs d divisible by 4"
        );
        ExtendedPowell { d }
    }
}

impl Objective for ExtendedPowell {
    fn name(&self) -> String {
        "ext_powell".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_fn(self.d, |i, _| [3.0, -1.0, 0.0, 1.0][i % 4])
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.d / 4)
            .map(|i| {
                let (a, b, c, d) = (x[4 * i], x[4 * i + 1], x[4 * i + 2], x[4 * i + 3]);
                (a + 10.0 * b).powi(2)
                    + 5.0 * (c - d).powi(2)
                    + (b - 2.0 * c).powi(4)
                    + 10.0 * (a - d).powi(4)
            })
            .sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.d);
        for i in 0..self.d / 4 {
            let (a, b, c, d) = (x[4 * i], x[4 * i + 1], x[4 * i + 2], x[4 * i + 3]);
            let u = a + 10.0 * b;
            let v = c - d;
            let w = (b - 2.0 * c).powi(3);
            let z = (a - d).powi(3);
            g[4 * i] = 2.0 * u + 40.0 * z;
            g[4 * i + 1] = 20.0 * u + 4.0 * w;
            g[4 * i + 2] = 10.0 * v - 8.0 * w;
            g[4 * i + 3] = -10.0 * v - 40.0 * z;
        }
        g
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Trigonometric sum of squares, `r_i = d - sum cos x_j + i (1 - cos x_i) - sin x_i`.
///
/// The Jacobian is dense but the gradient costs O(d).
#[derive(Clone, Debug)]
pub struct Trigonometric {
    d: usize,
}

impl Trigonometric {
    pub fn new(d: usize) -> Self {
        Trigonometric { d }
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.d as f64;
        let sc: f64 = x.iter().map(|v| v.cos()).sum();
        DVector::from_fn(self.d, |i, _| {
            n - sc + (i as f64 + 1.0) * (1.0 - x[i].cos()) - x[i].sin()
        })
    }
}

impl Objective for Trigonometric {
    fn name(&self) -> String {
        "trigonometric".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_element(self.d, 1.0 / self.d as f64)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(x);
        let rs = r.sum();
        DVector::from_fn(self.d, |j, _| {
            let (s, c) = x[j].sin_cos();
            2.0 * (s * rs + r[j] * ((j as f64 + 1.0) * s - c))
        })
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Broyden tridiagonal sum of squares, `r_i = (3 - 2 x_i) x_i - x_{i-1} - 2 x_{i+1} + 1`.
#[derive(Clone, Debug)]
pub struct BroydenTridiagonal {
    d: usize,
}

impl BroydenTridiagonal {
    pub fn new(d: usize) -> Self {
        BroydenTridiagonal { d }
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.d;
        DVector::from_fn(n, |i, _| {
            let lo = if i > 0 { x[i - 1] } else { 0.0 };
            let hi = if i + 1 < n { x[i + 1] } else { 0.0 };
            (3.0 - 2.0 * x[i]) * x[i] - lo - 2.0 * hi + 1.0
        })
    }
}

impl Objective for BroydenTridiagonal {
    fn name(&self) -> String {
        "broyden_tridiagonal".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_element(self.d, -1.0)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.d;
        let r = self.residuals(x);
        DVector::from_fn(n, |j, _| {
            let mut g = r[j] * (3.0 - 4.0 * x[j]);
            if j + 1 < n {
                g -= r[j + 1];
            }
            if j > 0 {
                g -= 2.0 * r[j - 1];
            }
            2.0 * g
        })
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Discrete boundary value problem as a sum of squares.
#[derive(Clone, Debug)]
pub struct DiscreteBoundaryValue {
    d: usize,
}

impl DiscreteBoundaryValue {
    pub fn new(d: usize) -> Self {
        DiscreteBoundaryValue { d }
    }

    fn h(&self) -> f64 {
        1.0 / (self.d as f64 + 1.0)
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.d;
        let h = self.h();
        DVector::from_fn(n, |i, _| {
            let t = (i as f64 + 1.0) * h;
            let lo = if i > 0 { x[i - 1] } else { 0.0 };
            let hi = if i + 1 < n { x[i + 1] } else { 0.0 };
            2.0 * x[i] - lo - hi + 0.5 * h * h * (x[i] + t + 1.0).powi(3)
        })
    }
}

impl Objective for DiscreteBoundaryValue {
    fn name(&self) -> String {
        "discrete_bv".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn initial_point(&self) -> DVector<f64> {
        let h = self.h();
        DVector::from_fn(self.d, |i, _| {
            let t = (i as f64 + 1.0) * h;
            t * (t - 1.0)
        })
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.d;
        let h = self.h();
        let r = self.residuals(x);
        DVector::from_fn(n, |j, _| {
            let t = (j as f64 + 1.0) * h;
            let mut g = r[j] * (2.0 + 1.5 * h * h * (x[j] + t + 1.0).powi(2));
            if j > 0 {
                g -= r[j - 1];
            }
            if j + 1 < n {
                g -= r[j + 1];
            }
            2.0 * g
        })
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Penalty function I: `1e-5 sum (x_i - 1)^2 + (sum x_i^2 - 1/4)^2`.
#[derive(Clone, Debug)]
pub struct Penalty1 {
    d: usize,
}

impl Penalty1 {
    const A: f64 = 1e-5;

    pub fn new(d: usize) -> Self {
        Penalty1 { d }
    }
}

impl Objective for Penalty1 {
    fn name(&self) -> String {
        "penalty1".into()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_fn(self.d, |i, _| i as f64 + 1.0)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let s: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum();
        let q = x.norm_squared() - 0.25;
        Self::A * s + q * q
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let q = x.norm_squared() - 0.25;
        x.map(|v| 2.0 * Self::A * (v - 1.0) + 4.0 * q * v)
    }
}
