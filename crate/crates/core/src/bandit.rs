//! Sliding-window linear UCB over directions in `R^d`.
//!
//! The state keeps the last `M + 1` iterations of (direction, response) pairs,
//! where a response is the directional derivative `<grad f(x_k), s>`. From them
//! it maintains
//!
//! * `C = lambda I + sum s s^T` over the window, stored only as `C^{-1}`,
//! * `b = sum r s` and the ridge estimate `g = C^{-1} b`,
//! * an exponential moving average `U` of the gradient norm.
//!
//! The chosen direction maximizes `g^T s + sqrt(lambda) U |s|_{C^{-1}}` over the
//! unit sphere.
//!
//! ```
//! use nalgebra::{dvector, DMatrix};
//! use subspace_ucb::bandit::{UcbConfig, UcbState};
//!
//! let mut ucb = UcbState::new(2, UcbConfig::new(0.5, 1)).unwrap();
//! let dirs = DMatrix::identity(2, 2);
//! ucb.update(&dirs, &dvector![3.0, 4.0]).unwrap();
//! // ridge estimate: (3, 4) / (1 + lambda)
//! assert!((ucb.estimate() - dvector![2.0, 8.0 / 3.0]).amax() < 1e-12);
//! let s = ucb.select(0.0);
//! assert!((s - dvector![0.6, 0.8]).amax() < 1e-8);
//! ```

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{cholesky_with_jitter, random_unit};

/// Unit eigenvector of the largest eigenvalue of a symmetric matrix.
fn top_eigenvector(a: &DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let (i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    eig.eigenvectors.column(i).into_owned()
}

/// Rank-one denominators at or below this trigger a rebuild of `C^{-1}`.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Tuning of the UCB state and of its subproblem solver.
#[derive(Clone, Debug, PartialEq)]
pub struct UcbConfig {
    /// Ridge regularizer, `> 0`.
    pub lambda: f64,
    /// Window length `M` in iterations; the window holds `M + 1` of them.
    pub memory: usize,
    /// EMA weight on the previous gradient-norm estimate, in `(0, 1)`.
    pub mu: f64,
    pub pga_step: f64,
    pub pga_max_iter: usize,
    /// Stop projected gradient ascent once the iterate moves less than this.
    pub pga_tol: f64,
    /// Norm of the random starting point.
    pub start_norm: f64,
    /// Random unit probes scored alongside the warm candidates.
    pub probes: usize,
    /// Above this dimension the subproblem is solved on a Krylov subspace.
    pub dense_limit: usize,
    /// Krylov basis size for the large-dimension subproblem.
    pub krylov_dim: usize,
    /// Seed of the stream used for starting points and probes.
    pub seed: u64,
}

impl UcbConfig {
    pub fn new(lambda: f64, memory: usize) -> Self {
        UcbConfig {
            lambda,
            memory,
            mu: 0.8,
            pga_step: 0.1,
            pga_max_iter: 200,
            pga_tol: 1e-8,
            start_norm: 0.01,
            probes: 2,
            dense_limit: 64,
            krylov_dim: 16,
            seed: 0,
        }
    }

    /// `lambda = 1/d`, `M = max(1, d/p)`.
    pub fn defaults(d: usize, p: usize) -> Self {
        UcbConfig::new(1.0 / d as f64, (d / p.max(1)).max(1))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(invalid(format!("mu must lie in (0, 1), got {}", self.mu)));
        }
        if !(self.pga_step > 0.0) || self.pga_max_iter == 0 {
            return Err(invalid(
                "subproblem step and iteration cap must be positive",
            ));
        }
        if self.krylov_dim < 2 {
            return Err(invalid("krylov_dim must be at least 2"));
        }
        Ok(())
    }
}

/// One iteration's worth of window data.
#[derive(Clone, Debug)]
pub struct WindowEntry {
    pub directions: DMatrix<f64>,
    pub responses: DVector<f64>,
}

/// Sliding-window ridge estimate of the gradient with a UCB direction rule.
///
/// Above `dense_limit` the rank-`m` correction of an update is kept pending
/// and folded into `C^{-1}` during the next product pass, and products needed
/// by the update are taken from the preceding selection when available. Both
/// only reorder floating-point work.
#[derive(Clone, Debug)]
pub struct UcbState {
    dim: usize,
    cfg: UcbConfig,
    window: VecDeque<WindowEntry>,
    /// `C^{-1}` up to the pending correction.
    c_inv: DMatrix<f64>,
    /// `(Yc, Y)` with true `C^{-1} = c_inv - Yc Y^T`.
    pending: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// `(w, C^{-1} w)` pairs valid for the current `C`.
    cache: Vec<(DVector<f64>, DVector<f64>)>,
    /// `g` was computed as `C^{-1} b` by a full product for the current `C`.
    g_exact: bool,
    b: DVector<f64>,
    g: DVector<f64>,
    u: f64,
    u_started: bool,
    rebuilds: usize,
    rng: ChaCha8Rng,
}

impl UcbState {
    /// `C = lambda I`, `b = g = 0`, empty window.
    pub fn new(dim: usize, cfg: UcbConfig) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        cfg.validate()?;
        Ok(UcbState {
            dim,
            c_inv: DMatrix::identity(dim, dim) / cfg.lambda,
            pending: None,
            cache: Vec::new(),
            g_exact: true,
            b: DVector::zeros(dim),
            g: DVector::zeros(dim),
            u: 0.0,
            u_started: false,
            rebuilds: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            window: VecDeque::new(),
            cfg,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &UcbConfig {
        &self.cfg
    }

    pub fn lambda(&self) -> f64 {
        self.cfg.lambda
    }

    pub fn memory(&self) -> usize {
        self.cfg.memory
    }

    /// `C^{-1}`, after folding in any pending correction.
    pub fn c_inverse(&mut self) -> &DMatrix<f64> {
        self.flush();
        &self.c_inv
    }

    /// `C^{-1}` without mutating the state.
    pub fn c_inverse_owned(&self) -> DMatrix<f64> {
        match &self.pending {
            None => self.c_inv.clone(),
            Some((yc, y)) => {
                let mut a = self.c_inv.clone();
                a.gemm(-1.0, yc, &y.transpose(), 1.0);
                a
            }
        }
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// The gradient estimate `g = C^{-1} b`.
    pub fn estimate(&self) -> &DVector<f64> {
        &self.g
    }

    /// Current gradient-norm estimate `U` (0 before the first observation).
    pub fn gradient_bound(&self) -> f64 {
        self.u
    }

    /// Number of times `C^{-1}` was refactored from the window.
    pub fn rebuild_count(&self) -> usize {
        self.rebuilds
    }

    pub fn window(&self) -> &VecDeque<WindowEntry> {
        &self.window
    }

    /// `C` assembled densely from the window.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = DMatrix::identity(self.dim, self.dim) * self.cfg.lambda;
        for e in &self.window {
            c.gemm(1.0, &e.directions, &e.directions.transpose(), 1.0);
        }
        c
    }

    /// `C^{-1} x`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.c_inv * x;
        if let Some((yc, y)) = &self.pending {
            out.gemm(-1.0, yc, &y.tr_mul(x), 1.0);
        }
        out
    }

    /// `C^{-1} x` in one pass over the matrix that also folds in the pending
    /// correction, panel by panel.
    fn apply_flush(&mut self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let Some((yc, y)) = self.pending.take() else {
            return &self.c_inv * x;
        };
        const PANEL: usize = 64;
        let n = self.dim;
        let mut out = DMatrix::zeros(n, x.ncols());
        let mut j0 = 0;
        while j0 < n {
            let w = PANEL.min(n - j0);
            let yt = y.rows(j0, w).transpose();
            let mut panel = self.c_inv.columns_mut(j0, w);
            panel.gemm(-1.0, &yc, &yt, 1.0);
            if x.ncols() > 0 {
                out.gemm(1.0, &panel, &x.rows(j0, w), 1.0);
            }
            j0 += w;
        }
        out
    }

    fn flush(&mut self) {
        if self.pending.is_some() {
            self.apply_flush(&DMatrix::zeros(self.dim, 0));
        }
    }

    /// `|s|_{C^{-1}}`.
    pub fn ellipse_norm(&self, s: &DVector<f64>) -> f64 {
        let a = self.apply(&DMatrix::from_column_slice(self.dim, 1, s.as_slice()));
        s.dot(&a.column(0)).max(0.0).sqrt()
    }

    /// UCB score `g^T s + sqrt(lambda) U |s|_{C^{-1}}`.
    pub fn score(&self, s: &DVector<f64>, u: f64) -> f64 {
        self.g.dot(s) + self.cfg.lambda.sqrt() * u * self.ellipse_norm(s)
    }

    /// Scores of every column of `cands`, with one matrix product.
    pub fn score_columns(&self, cands: &DMatrix<f64>, u: f64) -> Vec<f64> {
        let ac = self.apply(cands);
        let bonus = self.cfg.lambda.sqrt() * u;
        (0..cands.ncols())
            .map(|j| {
                let c = cands.column(j);
                self.g.dot(&c) + bonus * c.dot(&ac.column(j)).max(0.0).sqrt()
            })
            .collect()
    }

    /// Best column of `cands` by UCB score; ties go to the lowest index.
    pub fn select_from_columns(
        &self,
        u: f64,
        cands: &DMatrix<f64>,
    ) -> Result<(usize, DVector<f64>)> {
        if cands.ncols() == 0 {
            return Err(Error::Empty("candidate columns"));
        }
        check_dim(self.dim, cands.nrows())?;
        let scores = self.score_columns(cands, u);
        let mut best = 0;
        for (j, &v) in scores.iter().enumerate().skip(1) {
            if v > scores[best] + 1e-12 * scores[best].abs().max(1.0) {
                best = j;
            }
        }
        Ok((best, cands.column(best).into_owned()))
    }

    /// Approximate maximizer of the UCB score over the unit sphere.
    ///
    /// Never scores worse than `g/|g|`, the random probes, or the stored window
    /// directions. Above `dense_limit` only the newest window iteration is
    /// offered, and the ascent runs on a two-pass block Krylov space of
    /// `C^{-1}` seeded with the candidates.
    pub fn select(&mut self, u: f64) -> DVector<f64> {
        self.select_with_upcoming(u, &DMatrix::zeros(self.dim, 0))
    }

    /// [`Self::select`], told which columns the next [`Self::update`] will add
    /// besides the returned direction, so that their products with `C^{-1}`
    /// ride along with the selection pass.
    pub fn select_with_upcoming(&mut self, u: f64, upcoming: &DMatrix<f64>) -> DVector<f64> {
        let d = self.dim;
        let bonus = self.cfg.lambda.sqrt() * u.max(0.0);
        let start = random_unit(d, &mut self.rng) * self.cfg.start_norm;
        let mut cands: Vec<DVector<f64>> = Vec::new();
        let gn = self.g.norm();
        if gn > 0.0 {
            cands.push(&self.g / gn);
        }
        cands.extend((0..self.cfg.probes).map(|_| random_unit(d, &mut self.rng)));
        let dense = d <= self.cfg.dense_limit;
        let from_window: Box<dyn Iterator<Item = &WindowEntry>> = if dense {
            Box::new(self.window.iter())
        } else {
            Box::new(self.window.back().into_iter())
        };
        for e in from_window {
            // newest columns first: the previous UCB choice sits last
            for c in e.directions.column_iter().rev() {
                let n = c.norm();
                if n > 0.0 {
                    cands.push(c / n);
                }
            }
        }

        let mut best: (Option<DVector<f64>>, f64) = (None, f64::NEG_INFINITY);
        if dense {
            self.flush();
            if !cands.is_empty() {
                let m = DMatrix::from_columns(&cands);
                let scores = self.score_columns(&m, u);
                for (c, v) in cands.into_iter().zip(scores) {
                    keep_best(&mut best, c, v);
                }
            }
            let warm = best.0.clone();
            let a = &self.c_inv;
            let apply = |s: &DVector<f64>| a * s;
            // the bonus alone peaks at +-v_max of C^{-1}; the score can keep a
            // local maximum near each sign, so both are ascent starts
            let top = top_eigenvector(a);
            let starts = [Some(start), warm, Some(top.clone()), Some(-top)];
            for s0 in starts.into_iter().flatten() {
                let s = pga(&self.g, &apply, bonus, s0, &self.cfg);
                let v = self.score(&s, u);
                keep_best(&mut best, s, v);
            }
            let s = best.0.expect("subproblem produced no candidate");
            let n = s.norm();
            return s / n;
        }

        // first pass: b, Krylov seeds, columns about to be evicted, upcoming columns
        let kmax = self.cfg.krylov_dim.min(d);
        let mut seeds = Vec::with_capacity(cands.len() + 1);
        seeds.push(start.clone());
        seeds.extend(cands.iter().take(kmax / 2).cloned());
        let mut extra: Vec<DVector<f64>> = upcoming.column_iter().map(|c| c.into_owned()).collect();
        if self.window.len() > self.cfg.memory {
            if let Some(front) = self.window.front() {
                extra.extend(front.directions.column_iter().map(|c| c.into_owned()));
            }
        }
        let mut cols = Vec::with_capacity(1 + seeds.len() + extra.len());
        cols.push(self.b.clone());
        cols.extend(seeds.iter().cloned());
        cols.extend(extra.iter().cloned());
        let prod = self.apply_flush(&DMatrix::from_columns(&cols));
        self.g = prod.column(0).into_owned();
        self.g_exact = true;
        self.cache.clear();
        for (i, w) in extra.into_iter().enumerate() {
            self.cache
                .push((w, prod.column(1 + seeds.len() + i).into_owned()));
        }
        let seed_images: Vec<DVector<f64>> = (0..seeds.len())
            .map(|i| prod.column(1 + i).into_owned())
            .collect();

        let (v, av) = self.krylov_basis(seeds, seed_images, kmax);
        let t = v.tr_mul(&av);
        let t = (&t + t.transpose()) * 0.5;
        let gr = v.tr_mul(&self.g);
        let reduced = |y: &DVector<f64>| gr.dot(y) + bonus * y.dot(&(&t * y)).max(0.0).sqrt();
        let mut best_y: (Option<DVector<f64>>, f64) = (None, f64::NEG_INFINITY);
        for c in &cands {
            let y = v.tr_mul(c);
            // candidates truncated out of the basis are not representable
            if (y.norm() - 1.0).abs() <= 1e-8 {
                let val = reduced(&y);
                keep_best(&mut best_y, y, val);
            }
        }
        let warm = best_y.0.clone();
        let apply = |y: &DVector<f64>| &t * y;
        for y0 in std::iter::once(v.tr_mul(&start)).chain(warm) {
            let y = pga(&gr, &apply, bonus, y0, &self.cfg);
            let val = reduced(&y);
            keep_best(&mut best_y, y, val);
        }
        let y = best_y.0.expect("subproblem produced no candidate");
        let s = &v * &y;
        let n = s.norm();
        let s = s / n;
        self.cache.push((s.clone(), &av * y / n));
        s
    }

    /// Orthonormal basis `V` of a two-block Krylov space of `C^{-1}` and the
    /// product `C^{-1} V`. `images[i] = C^{-1} seeds[i]` on entry; the first
    /// block keeps at most half of `kmax` columns.
    fn krylov_basis(
        &self,
        seeds: Vec<DVector<f64>>,
        images: Vec<DVector<f64>>,
        kmax: usize,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(kmax);
        let mut basis_img: Vec<DVector<f64>> = Vec::with_capacity(kmax);
        orthonormal_extend(
            &mut basis,
            Some(&mut basis_img),
            seeds.into_iter().zip(images),
            (kmax / 2).max(1),
        );
        if basis.len() < kmax {
            let mut next: Vec<DVector<f64>> = Vec::new();
            let fresh: Vec<(DVector<f64>, DVector<f64>)> = basis_img
                .iter()
                .map(|a| (a.clone(), DVector::zeros(0)))
                .collect();
            let before = basis.len();
            orthonormal_extend(&mut basis, None, fresh.into_iter(), kmax);
            next.extend(basis[before..].iter().cloned());
            if !next.is_empty() {
                let img = self.apply(&DMatrix::from_columns(&next));
                basis_img.extend(img.column_iter().map(|c| c.into_owned()));
            }
        }
        (
            DMatrix::from_columns(&basis),
            DMatrix::from_columns(&basis_img),
        )
    }

    /// Append one iteration's directions and exact responses, evict the
    /// oldest iteration past `M + 1`, and refresh `C^{-1}`, `b`, `g`.
    pub fn update(&mut self, directions: &DMatrix<f64>, responses: &DVector<f64>) -> Result<()> {
        check_dim(self.dim, directions.nrows())?;
        check_dim(directions.ncols(), responses.len())?;
        let mut changes: Vec<(DVector<f64>, f64, f64)> = directions
            .column_iter()
            .zip(responses.iter())
            .map(|(c, &r)| (c.into_owned(), 1.0, r))
            .collect();
        self.window.push_back(WindowEntry {
            directions: directions.clone(),
            responses: responses.clone(),
        });
        while self.window.len() > self.cfg.memory + 1 {
            let old = self.window.pop_front().expect("window nonempty");
            changes.extend(
                old.directions
                    .column_iter()
                    .zip(old.responses.iter())
                    .map(|(c, &r)| (c.into_owned(), -1.0, r)),
            );
        }
        let mut rhs = DVector::zeros(self.dim);
        for e in &self.window {
            rhs.gemv(1.0, &e.directions, &e.responses, 1.0);
        }
        // additions precede removals so every intermediate matrix stays >= lambda I
        let g = self.low_rank_update(&changes, &rhs);
        self.cache.clear();
        self.g_exact = false;
        self.g = match g {
            Some(g) => g,
            None => {
                self.rebuild();
                self.g_exact = true;
                &self.c_inv * &rhs
            }
        };
        self.b = rhs;
        if self.dim <= self.cfg.dense_limit {
            self.flush();
        }
        Ok(())
    }

    /// Apply `C <- C + sum sigma_i w_i w_i^T` to `C^{-1}` as a sequence of
    /// Sherman-Morrison steps carried out in the coordinates of `Z = C^{-1} W`,
    /// leaving one rank-`m` correction pending. Returns the updated
    /// `C^{-1} rhs`, or `None` on a vanishing denominator.
    fn low_rank_update(
        &mut self,
        changes: &[(DVector<f64>, f64, f64)],
        rhs: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        self.flush();
        let m = changes.len();
        let n = self.dim;
        let cached = |w: &DVector<f64>| {
            self.cache
                .iter()
                .find(|(c, _)| c == w)
                .map(|(_, a)| a.clone())
        };
        let mut z = DMatrix::<f64>::zeros(n, m);
        let mut missing = Vec::new();
        for (i, (w, _, _)) in changes.iter().enumerate() {
            match cached(w) {
                Some(a) => z.set_column(i, &a),
                None => missing.push(i),
            }
        }
        // C^{-1} rhs either by linearity from cached products or in the same pass
        let incremental = missing.is_empty() && self.g_exact;
        let mut cols: Vec<DVector<f64>> = missing.iter().map(|&i| changes[i].0.clone()).collect();
        if !incremental {
            cols.push(rhs.clone());
        }
        let mut a_rhs = if cols.is_empty() {
            None
        } else {
            let prod = &self.c_inv * DMatrix::from_columns(&cols);
            for (k, &i) in missing.iter().enumerate() {
                z.set_column(i, &prod.column(k));
            }
            (!incremental).then(|| prod.column(missing.len()).into_owned())
        };
        if a_rhs.is_none() {
            let mut g = self.g.clone();
            for (i, (_, sigma, r)) in changes.iter().enumerate() {
                g.axpy(sigma * r, &z.column(i), 1.0);
            }
            a_rhs = Some(g);
        }
        let w = DMatrix::from_columns(
            &changes
                .iter()
                .map(|(v, _, _)| v.clone())
                .collect::<Vec<_>>(),
        );
        let gram = w.tr_mul(&z);
        let mut t = DMatrix::<f64>::zeros(m, m);
        let mut c = DVector::<f64>::zeros(m);
        for i in 0..m {
            let mut ti = DVector::<f64>::zeros(m);
            ti[i] = 1.0;
            let gi = gram.column(i);
            for j in 0..i {
                let tj = t.column(j);
                let coef = c[j] * tj.dot(&gi);
                ti.axpy(-coef, &tj, 1.0);
            }
            let sigma = changes[i].1;
            let denom = 1.0 + sigma * gi.dot(&ti);
            if !(denom > DENOMINATOR_FLOOR) {
                return None;
            }
            c[i] = sigma / denom;
            t.set_column(i, &ti);
        }
        let y = z * t;
        let mut yc = y.clone();
        for (j, mut col) in yc.column_iter_mut().enumerate() {
            col *= c[j];
        }
        let mut g = a_rhs.expect("set above");
        g.gemv(-1.0, &yc, &y.tr_mul(rhs), 1.0);
        if m > 0 {
            self.pending = Some((yc, y));
        }
        Some(g)
    }

    /// Refactor `C^{-1}` from the window; counted in [`Self::rebuild_count`].
    pub fn rebuild(&mut self) {
        self.rebuilds += 1;
        self.pending = None;
        self.cache.clear();
        let c = self.covariance();
        let n = self.dim;
        self.c_inv = match cholesky_with_jitter(&c) {
            Some(ch) => ch.inverse(),
            None => Cholesky::new(c + DMatrix::identity(n, n) * self.cfg.lambda)
                .map(|ch| ch.inverse())
                .unwrap_or_else(|| DMatrix::identity(n, n) / self.cfg.lambda),
        };
    }

    /// Fold a new gradient-norm estimate `(d/p) |S^T grad f|` into `U`. The
    /// first call sets `U` to it; later calls average with weight `mu`.
    pub fn update_gradient_bound(&mut self, sketch_norm: f64, d: usize, p: usize) -> Result<f64> {
        if p == 0 {
            return Err(invalid("sketch size must be positive"));
        }
        if !(sketch_norm >= 0.0) {
            return Err(invalid("sketch norm must be nonnegative"));
        }
        let est = d as f64 / p as f64 * sketch_norm;
        self.u = if self.u_started {
            self.cfg.mu * self.u + (1.0 - self.cfg.mu) * est
        } else {
            est
        };
        self.u_started = true;
        Ok(self.u)
    }
}

fn keep_best(best: &mut (Option<DVector<f64>>, f64), s: DVector<f64>, v: f64) {
    if v > best.1 {
        *best = (Some(s), v);
    }
}

/// Gram-Schmidt (two passes) of `vs` against `basis`, appending survivors up
/// to `cap` columns. When `images` is given, each input carries `A v` and the
/// same combinations are applied to it. Returns how many were appended.
fn orthonormal_extend(
    basis: &mut Vec<DVector<f64>>,
    mut images: Option<&mut Vec<DVector<f64>>>,
    vs: impl Iterator<Item = (DVector<f64>, DVector<f64>)>,
    cap: usize,
) -> usize {
    let mut added = 0;
    for (mut v, mut av) in vs {
        if basis.len() >= cap {
            break;
        }
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for (k, q) in basis.iter().enumerate() {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
                if let Some(img) = images.as_deref() {
                    av.axpy(-c, &img[k], 1.0);
                }
            }
        }
        let n = v.norm();
        if n > 1e-10 * n0 {
            basis.push(v / n);
            if let Some(img) = images.as_deref_mut() {
                img.push(av / n);
            }
            added += 1;
        }
    }
    added
}

/// Projected gradient ascent of `l^T s + bonus sqrt(s^T A s)` on the unit
/// sphere. `s0` may lie inside the ball; the first step normalizes it.
fn pga(
    l: &DVector<f64>,
    apply: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    bonus: f64,
    s0: DVector<f64>,
    cfg: &UcbConfig,
) -> DVector<f64> {
    let mut s = s0;
    for _ in 0..cfg.pga_max_iter {
        let as_ = apply(&s);
        let q = s.dot(&as_).max(0.0).sqrt();
        let mut grad = l.clone();
        if q > 0.0 {
            grad.axpy(bonus / q, &as_, 1.0);
        }
        let mut next = &s + grad * cfg.pga_step;
        let n = next.norm();
        if !(n > 0.0) || !n.is_finite() {
            break;
        }
        next /= n;
        let moved = (&next - &s).norm();
        s = next;
        if moved < cfg.pga_tol {
            break;
        }
    }
    let n = s.norm();
    if n > 0.0 {
        s / n
    } else {
        s
    }
}
