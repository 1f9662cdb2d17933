//! Small nonlinear least-squares benchmark functions, `f = sum r_i(x)^2`.
//!
//! Data tables and starting points follow the classical unconstrained test
//! collection used for derivative-free benchmarking.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::Objective;

/// Which residual family a [`LeastSquares`] instance evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsKind {
    Rosenbrock,
    FreudensteinRoth,
    PowellBadlyScaled,
    BrownBadlyScaled,
    Beale,
    JennrichSampson,
    HelicalValley,
    Bard,
    Gaussian,
    Box3d,
    PowellSingular,
    Wood,
    KowalikOsborne,
    BrownDennis,
    Osborne1,
    BiggsExp6,
    Watson,
    VariablyDimensioned,
    BrownAlmostLinear,
}

const BARD_Y: [f64; 15] = [
    0.14, 0.18, 0.22, 0.25, 0.29, 0.32, 0.35, 0.39, 0.37, 0.58, 0.73, 0.96, 1.34, 2.10, 4.39,
];
const GAUSS_Y: [f64; 15] = [
    0.0009, 0.0044, 0.0175, 0.0540, 0.1295, 0.2420, 0.3521, 0.3989, 0.3521, 0.2420, 0.1295, 0.0540,
    0.0175, 0.0044, 0.0009,
];
const KOWALIK_Y: [f64; 11] = [
    0.1957, 0.1947, 0.1735, 0.1600, 0.0844, 0.0627, 0.0456, 0.0342, 0.0323, 0.0235, 0.0246,
];
const KOWALIK_U: [f64; 11] = [
    4.0, 2.0, 1.0, 0.5, 0.25, 0.167, 0.125, 0.1, 0.0833, 0.0714, 0.0625,
];
const OSBORNE1_Y: [f64; 33] = [
    0.844, 0.908, 0.932, 0.936, 0.925, 0.908, 0.881, 0.850, 0.818, 0.784, 0.751, 0.718, 0.685,
    0.658, 0.628, 0.603, 0.580, 0.558, 0.538, 0.522, 0.506, 0.490, 0.478, 0.467, 0.457, 0.448,
    0.438, 0.431, 0.424, 0.420, 0.414, 0.411, 0.406,
];

impl LsKind {
    /// Registry name of the family.
    pub fn name(self) -> &'static str {
        use LsKind::*;
        match self {
            Rosenbrock => "rosenbrock",
            FreudensteinRoth => "freudenstein_roth",
            PowellBadlyScaled => "powell_badly_scaled",
            BrownBadlyScaled => "brown_badly_scaled",
            Beale => "beale",
            JennrichSampson => "jennrich_sampson",
            HelicalValley => "helical_valley",
            Bard => "bard",
            Gaussian => "gaussian",
            Box3d => "box3d",
            PowellSingular => "powell_singular",
            Wood => "wood",
            KowalikOsborne => "kowalik_osborne",
            BrownDennis => "brown_dennis",
            Osborne1 => "osborne1",
            BiggsExp6 => "biggs_exp6",
            Watson => "watson",
            VariablyDimensioned => "variably_dimensioned",
            BrownAlmostLinear => "brown_almost_linear",
        }
    }

    pub const ALL: [LsKind; 19] = [
        LsKind::Rosenbrock,
        LsKind::FreudensteinRoth,
        LsKind::PowellBadlyScaled,
        LsKind::BrownBadlyScaled,
        LsKind::Beale,
        LsKind::JennrichSampson,
        LsKind::HelicalValley,
        LsKind::Bard,
        LsKind::Gaussian,
        LsKind::Box3d,
        LsKind::PowellSingular,
        LsKind::Wood,
        LsKind::KowalikOsborne,
        LsKind::BrownDennis,
        LsKind::Osborne1,
        LsKind::BiggsExp6,
        LsKind::Watson,
        LsKind::VariablyDimensioned,
        LsKind::BrownAlmostLinear,
    ];

    /// Default dimension.
    pub fn default_dim(self) -> usize {
        use LsKind::*;
        match self {
            Rosenbrock | FreudensteinRoth | PowellBadlyScaled | BrownBadlyScaled | Beale
            | JennrichSampson => 2,
            HelicalValley | Bard | Gaussian | Box3d => 3,
            PowellSingular | Wood | KowalikOsborne | BrownDennis => 4,
            Osborne1 => 5,
            BiggsExp6 | Watson => 6,
            VariablyDimensioned => 8,
            BrownAlmostLinear => 7,
        }
    }

    /// Admissible dimensions, as an inclusive range.
    pub fn dim_range(self) -> (usize, usize) {
        use LsKind::*;
        match self {
            Watson => (2, 31),
            VariablyDimensioned | BrownAlmostLinear => (1, 12),
            k => (k.default_dim(), k.default_dim()),
        }
    }

    fn residual_count(self, n: usize) -> usize {
        use LsKind::*;
        match self {
            Rosenbrock | FreudensteinRoth | PowellBadlyScaled => 2,
            BrownBadlyScaled | Beale | HelicalValley => 3,
            JennrichSampson | Box3d => 10,
            Bard | Gaussian => 15,
            PowellSingular => 4,
            Wood => 6,
            KowalikOsborne => 11,
            BrownDennis => 20,
            Osborne1 => 33,
            BiggsExp6 => 13,
            Watson => 31,
            VariablyDimensioned => n + 2,
            BrownAlmostLinear => n,
        }
    }

    fn start(self, n: usize) -> Vec<f64> {
        use LsKind::*;
        match self {
            Rosenbrock => vec![-1.2, 1.0],
            FreudensteinRoth => vec![0.5, -2.0],
            PowellBadlyScaled => vec![0.0, 1.0],
            BrownBadlyScaled => vec![1.0, 1.0],
            Beale => vec![1.0, 1.0],
            JennrichSampson => vec![0.3, 0.4],
            HelicalValley => vec![-1.0, 0.0, 0.0],
            Bard => vec![1.0, 1.0, 1.0],
            Gaussian => vec![0.4, 1.0, 0.0],
            Box3d => vec![0.0, 10.0, 20.0],
            PowellSingular => vec![3.0, -1.0, 0.0, 1.0],
            Wood => vec![-3.0, -1.0, -3.0, -1.0],
            KowalikOsborne => vec![0.25, 0.39, 0.415, 0.39],
            BrownDennis => vec![25.0, 5.0, -5.0, -1.0],
            Osborne1 => vec![0.5, 1.5, -1.0, 0.01, 0.02],
            BiggsExp6 => vec![1.0, 2.0, 1.0, 1.0, 1.0, 1.0],
            Watson => vec![0.0; n],
            VariablyDimensioned => (1..=n).map(|j| 1.0 - j as f64 / n as f64).collect(),
            BrownAlmostLinear => vec![0.5; n],
        }
    }
}

/// Least-squares objective `sum r_i(x)^2` with gradient `2 J^T r`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    kind: LsKind,
    n: usize,
}

impl LeastSquares {
    /// Panics if `n` is outside the family's admissible range.
    pub fn new(kind: LsKind, n: usize) -> Self {
        let (lo, hi) = kind.dim_range();
        assert!(
            n >= lo && n <= hi,
            "{} admits dimensions {lo}..={hi}",
            kind.name()
        );
        LeastSquares { kind, n }
    }

    pub fn with_default_dim(kind: LsKind) -> Self {
        Self::new(kind, kind.default_dim())
    }

    pub fn kind(&self) -> LsKind {
        self.kind
    }

    /// Residual vector and Jacobian (`m x n`).
    pub fn residuals_and_jacobian(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        use LsKind::*;
        let n = self.n;
        let m = self.kind.residual_count(n);
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, n);
        match self.kind {
            Rosenbrock => {
                r[0] = 10.0 * (x[1] - x[0] * x[0]);
                r[1] = 1.0 - x[0];
                j[(0, 0)] = -20.0 * x[0];
                j[(0, 1)] = 10.0;
                j[(1, 0)] = -1.0;
            }
            FreudensteinRoth => {
                let y = x[1];
                r[0] = -13.0 + x[0] + ((5.0 - y) * y - 2.0) * y;
                r[1] = -29.0 + x[0] + ((y + 1.0) * y - 14.0) * y;
                j[(0, 0)] = 1.0;
                j[(0, 1)] = 10.0 * y - 3.0 * y * y - 2.0;
                j[(1, 0)] = 1.0;
                j[(1, 1)] = 3.0 * y * y + 2.0 * y - 14.0;
            }
            PowellBadlyScaled => {
                r[0] = 1e4 * x[0] * x[1] - 1.0;
                r[1] = (-x[0]).exp() + (-x[1]).exp() - 1.0001;
                j[(0, 0)] = 1e4 * x[1];
                j[(0, 1)] = 1e4 * x[0];
                j[(1, 0)] = -(-x[0]).exp();
                j[(1, 1)] = -(-x[1]).exp();
            }
            BrownBadlyScaled => {
                r[0] = x[0] - 1e6;
                r[1] = x[1] - 2e-6;
                r[2] = x[0] * x[1] - 2.0;
                j[(0, 0)] = 1.0;
                j[(1, 1)] = 1.0;
                j[(2, 0)] = x[1];
                j[(2, 1)] = x[0];
            }
            Beale => {
                let y = [1.5, 2.25, 2.625];
                for i in 0..3 {
                    let p = (i + 1) as i32;
                    r[i] = y[i] - x[0] * (1.0 - x[1].powi(p));
                    j[(i, 0)] = -(1.0 - x[1].powi(p));
                    j[(i, 1)] = p as f64 * x[0] * x[1].powi(p - 1);
                }
            }
            JennrichSampson => {
                for i in 0..10 {
                    let t = (i + 1) as f64;
                    let (e0, e1) = ((t * x[0]).exp(), (t * x[1]).exp());
                    r[i] = 2.0 + 2.0 * t - (e0 + e1);
                    j[(i, 0)] = -t * e0;
                    j[(i, 1)] = -t * e1;
                }
            }
            HelicalValley => {
                let (a, b, c) = (x[0], x[1], x[2]);
                let theta = if a > 0.0 {
                    (b / a).atan() / (2.0 * PI)
                } else if a < 0.0 {
                    (b / a).atan() / (2.0 * PI) + 0.5
                } else {
                    0.25 * b.signum()
                };
                let rho2 = a * a + b * b;
                let rho = rho2.sqrt();
                r[0] = 10.0 * (c - 10.0 * theta);
                r[1] = 10.0 * (rho - 1.0);
                r[2] = c;
                if rho2 > 0.0 {
                    j[(0, 0)] = 100.0 * b / (2.0 * PI * rho2);
                    j[(0, 1)] = -100.0 * a / (2.0 * PI * rho2);
                    j[(1, 0)] = 10.0 * a / rho;
                    j[(1, 1)] = 10.0 * b / rho;
                }
                j[(0, 2)] = 10.0;
                j[(2, 2)] = 1.0;
            }
            Bard => {
                for i in 0..15 {
                    let u = (i + 1) as f64;
                    let v = 16.0 - u;
                    let w = u.min(v);
                    let den = v * x[1] + w * x[2];
                    r[i] = BARD_Y[i] - (x[0] + u / den);
                    j[(i, 0)] = -1.0;
                    j[(i, 1)] = u * v / (den * den);
                    j[(i, 2)] = u * w / (den * den);
                }
            }
            Gaussian => {
                for i in 0..15 {
                    let t = (8.0 - (i + 1) as f64) / 2.0;
                    let dt = t - x[2];
                    let e = (-0.5 * x[1] * dt * dt).exp();
                    r[i] = x[0] * e - GAUSS_Y[i];
                    j[(i, 0)] = e;
                    j[(i, 1)] = -0.5 * x[0] * e * dt * dt;
                    j[(i, 2)] = x[0] * e * x[1] * dt;
                }
            }
            Box3d => {
                for i in 0..10 {
                    let t = 0.1 * (i + 1) as f64;
                    let (e0, e1) = ((-t * x[0]).exp(), (-t * x[1]).exp());
                    let c = (-t).exp() - (-10.0 * t).exp();
                    r[i] = e0 - e1 - x[2] * c;
                    j[(i, 0)] = -t * e0;
                    j[(i, 1)] = t * e1;
                    j[(i, 2)] = -c;
                }
            }
            PowellSingular => {
                let s5 = 5f64.sqrt();
                let s10 = 10f64.sqrt();
                r[0] = x[0] + 10.0 * x[1];
                r[1] = s5 * (x[2] - x[3]);
                r[2] = (x[1] - 2.0 * x[2]).powi(2);
                r[3] = s10 * (x[0] - x[3]).powi(2);
                j[(0, 0)] = 1.0;
                j[(0, 1)] = 10.0;
                j[(1, 2)] = s5;
                j[(1, 3)] = -s5;
                j[(2, 1)] = 2.0 * (x[1] - 2.0 * x[2]);
                j[(2, 2)] = -4.0 * (x[1] - 2.0 * x[2]);
                j[(3, 0)] = 2.0 * s10 * (x[0] - x[3]);
                j[(3, 3)] = -2.0 * s10 * (x[0] - x[3]);
            }
            Wood => {
                let s90 = 90f64.sqrt();
                let s10 = 10f64.sqrt();
                r[0] = 10.0 * (x[1] - x[0] * x[0]);
                r[1] = 1.0 - x[0];
                r[2] = s90 * (x[3] - x[2] * x[2]);
                r[3] = 1.0 - x[2];
                r[4] = s10 * (x[1] + x[3] - 2.0);
                r[5] = (x[1] - x[3]) / s10;
                j[(0, 0)] = -20.0 * x[0];
                j[(0, 1)] = 10.0;
                j[(1, 0)] = -1.0;
                j[(2, 2)] = -2.0 * s90 * x[2];
                j[(2, 3)] = s90;
                j[(3, 2)] = -1.0;
                j[(4, 1)] = s10;
                j[(4, 3)] = s10;
                j[(5, 1)] = 1.0 / s10;
                j[(5, 3)] = -1.0 / s10;
            }
            KowalikOsborne => {
                for i in 0..11 {
                    let u = KOWALIK_U[i];
                    let num = u * u + u * x[1];
                    let den = u * u + u * x[2] + x[3];
                    r[i] = KOWALIK_Y[i] - x[0] * num / den;
                    j[(i, 0)] = -num / den;
                    j[(i, 1)] = -x[0] * u / den;
                    j[(i, 2)] = x[0] * num * u / (den * den);
                    j[(i, 3)] = x[0] * num / (den * den);
                }
            }
            BrownDennis => {
                for i in 0..20 {
                    let t = (i + 1) as f64 / 5.0;
                    let a = x[0] + t * x[1] - t.exp();
                    let b = x[2] + x[3] * t.sin() - t.cos();
                    r[i] = a * a + b * b;
                    j[(i, 0)] = 2.0 * a;
                    j[(i, 1)] = 2.0 * a * t;
                    j[(i, 2)] = 2.0 * b;
                    j[(i, 3)] = 2.0 * b * t.sin();
                }
            }
            Osborne1 => {
                for i in 0..33 {
                    let t = 10.0 * i as f64;
                    let (e4, e5) = ((-t * x[3]).exp(), (-t * x[4]).exp());
                    r[i] = OSBORNE1_Y[i] - (x[0] + x[1] * e4 + x[2] * e5);
                    j[(i, 0)] = -1.0;
                    j[(i, 1)] = -e4;
                    j[(i, 2)] = -e5;
                    j[(i, 3)] = x[1] * t * e4;
                    j[(i, 4)] = x[2] * t * e5;
                }
            }
            BiggsExp6 => {
                for i in 0..13 {
                    let t = 0.1 * (i + 1) as f64;
                    let y = (-t).exp() - 5.0 * (-10.0 * t).exp() + 3.0 * (-4.0 * t).exp();
                    let (e1, e2, e5) = ((-t * x[0]).exp(), (-t * x[1]).exp(), (-t * x[4]).exp());
                    r[i] = x[2] * e1 - x[3] * e2 + x[5] * e5 - y;
                    j[(i, 0)] = -t * x[2] * e1;
                    j[(i, 1)] = t * x[3] * e2;
                    j[(i, 2)] = e1;
                    j[(i, 3)] = -e2;
                    j[(i, 4)] = -t * x[5] * e5;
                    j[(i, 5)] = e5;
                }
            }
            Watson => {
                for i in 0..29 {
                    let t = (i + 1) as f64 / 29.0;
                    let mut s1 = 0.0;
                    let mut s2 = 0.0;
                    for k in 0..n {
                        s2 += x[k] * t.powi(k as i32);
                        if k >= 1 {
                            s1 += k as f64 * x[k] * t.powi(k as i32 - 1);
                        }
                    }
                    r[i] = s1 - s2 * s2 - 1.0;
                    for k in 0..n {
                        let d1 = if k >= 1 {
                            k as f64 * t.powi(k as i32 - 1)
                        } else {
                            0.0
                        };
                        j[(i, k)] = d1 - 2.0 * s2 * t.powi(k as i32);
                    }
                }
                r[29] = x[0];
                j[(29, 0)] = 1.0;
                r[30] = x[1] - x[0] * x[0] - 1.0;
                j[(30, 0)] = -2.0 * x[0];
                j[(30, 1)] = 1.0;
            }
            VariablyDimensioned => {
                let mut s = 0.0;
                for k in 0..n {
                    r[k] = x[k] - 1.0;
                    j[(k, k)] = 1.0;
                    s += (k + 1) as f64 * (x[k] - 1.0);
                }
                r[n] = s;
                r[n + 1] = s * s;
                for k in 0..n {
                    let c = (k + 1) as f64;
                    j[(n, k)] = c;
                    j[(n + 1, k)] = 2.0 * s * c;
                }
            }
            BrownAlmostLinear => {
                let sum: f64 = x.iter().sum();
                for i in 0..n - 1 {
                    r[i] = x[i] + sum - (n as f64 + 1.0);
                    for k in 0..n {
                        j[(i, k)] = if k == i { 2.0 } else { 1.0 };
                    }
                }
                let prod: f64 = x.iter().product();
                r[n - 1] = prod - 1.0;
                for k in 0..n {
                    j[(n - 1, k)] = x
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != k)
                        .map(|(_, v)| *v)
                        .product();
                }
            }
        }
        (r, j)
    }
}

impl Objective for LeastSquares {
    fn name(&self) -> String {
        if self.n == self.kind.default_dim() {
            self.kind.name().into()
        } else {
            format!("{}:{}", self.kind.name(), self.n)
        }
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_vec(self.kind.start(self.n))
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.residuals_and_jacobian(x).0.norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (r, j) = self.residuals_and_jacobian(x);
        j.tr_mul(&r) * 2.0
    }
    fn optimal_value(&self) -> Option<f64> {
        use LsKind::*;
        match self.kind {
            Rosenbrock | PowellBadlyScaled | BrownBadlyScaled | Beale | HelicalValley
            | PowellSingular | Wood | VariablyDimensioned | BiggsExp6 => Some(0.0),
            _ => None,
        }
    }
}
