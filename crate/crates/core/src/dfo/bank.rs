use nalgebra::DVector;

/// Points closer than this (max-norm) count as the same point.
pub const DUPLICATE_TOL: f64 = 1e-14;

/// Every point evaluated so far, in evaluation order.
#[derive(Clone, Debug, Default)]
pub struct PointBank {
    points: Vec<DVector<f64>>,
    values: Vec<f64>,
}

impl PointBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Index of a stored point equal to `x` within [`DUPLICATE_TOL`].
    pub fn find(&self, x: &DVector<f64>) -> Option<usize> {
        self.points
            .iter()
            .position(|y| y.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL))
    }

    /// Store `(x, f)` unless `x` is already present; returns its index.
    pub fn insert(&mut self, x: DVector<f64>, f: f64) -> usize {
        if let Some(i) = self.find(&x) {
            return i;
        }
        self.points.push(x);
        self.values.push(f);
        self.points.len() - 1
    }

    /// Indices newest first.
    /// `|y_i - x|^2` without allocating.
    pub fn dist_sq(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.points[i].iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn newest_first(&self) -> impl Iterator<Item = usize> {
        (0..self.points.len()).rev()
    }
}
