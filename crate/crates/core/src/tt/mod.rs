//! Tensor trains over grid multi-indices.
//!
//! Core `k` has shape `(r_{k-1}, n_k, r_k)` and is stored row-major, so entry
//! `(a, i, b)` lives at `(a * n + i) * r_next + b`. Both the left unfolding
//! `(r_prev * n) x r_next` and the right unfolding `r_prev x (n * r_next)` are
//! plain row-major views of the same buffer.

mod cross;
mod io;

pub use cross::{cross, cross_on_grid, CrossOptions, CrossReport, CrossTarget, Supercore, TtMapTarget};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{qr_thin, svd, truncation_rank, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    r0: usize,
    n: usize,
    r1: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(r0: usize, n: usize, r1: usize, data: Vec<f64>) -> Result<Core> {
        if data.len() != r0 * n * r1 {
            return Err(Error::Shape(format!(
                "core ({r0}, {n}, {r1}) needs {} entries, got {}",
                r0 * n * r1,
                data.len()
            )));
        }
        Ok(Core { r0, n, r1, data })
    }

    pub fn zeros(r0: usize, n: usize, r1: usize) -> Core {
        Core { r0, n, r1, data: vec![0.0; r0 * n * r1] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.r0, self.n, self.r1)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.n + i) * self.r1 + b]
    }

    #[inline]
    fn idx(&self, a: usize, i: usize, b: usize) -> usize {
        (a * self.n + i) * self.r1 + b
    }

    fn left_unfolding(&self) -> Mat {
        Mat::from_row_slice(self.r0 * self.n, self.r1, &self.data)
    }

    fn right_unfolding(&self) -> Mat {
        Mat::from_row_slice(self.r0, self.n * self.r1, &self.data)
    }

    fn from_left_unfolding(m: &Mat, r0: usize, n: usize) -> Core {
        let r1 = m.ncols();
        debug_assert_eq!(m.nrows(), r0 * n);
        let mut data = Vec::with_capacity(r0 * n * r1);
        for row in 0..r0 * n {
            for c in 0..r1 {
                data.push(m[(row, c)]);
            }
        }
        Core { r0, n, r1, data }
    }

    fn from_right_unfolding(m: &Mat, n: usize, r1: usize) -> Core {
        let r0 = m.nrows();
        debug_assert_eq!(m.ncols(), n * r1);
        let mut data = Vec::with_capacity(r0 * n * r1);
        for a in 0..r0 {
            for c in 0..n * r1 {
                data.push(m[(a, c)]);
            }
        }
        Core { r0, n, r1, data }
    }

    /// `v^T G[:, i, :]` accumulated into `out` with weight `w`.
    #[inline]
    fn left_apply(&self, v: &[f64], i: usize, w: f64, out: &mut [f64]) {
        for (a, &va) in v.iter().enumerate() {
            let s = w * va;
            if s == 0.0 {
                continue;
            }
            let base = self.idx(a, i, 0);
            for (o, &g) in out.iter_mut().zip(&self.data[base..base + self.r1]) {
                *o += s * g;
            }
        }
    }
}

/// Per-dimension square matrices applied mode-wise: `(K a)(i_1..i_d) = sum_j prod_k F_k[i_k, j_k] a(j)`.
#[derive(Debug, Clone)]
pub struct KroneckerOperator {
    factors: Vec<Mat>,
}

impl KroneckerOperator {
    /// Factors given row-major as `(n, data)` pairs.
    pub fn new(factors: Vec<(usize, Vec<f64>)>) -> Result<KroneckerOperator> {
        let mut out = Vec::with_capacity(factors.len());
        for (n, data) in factors {
            if data.len() != n * n {
                return Err(Error::Shape(format!("factor of size {n} needs {} entries", n * n)));
            }
            out.push(Mat::from_row_slice(n, n, &data));
        }
        Ok(KroneckerOperator { factors: out })
    }

    pub(crate) fn from_mats(factors: Vec<Mat>) -> KroneckerOperator {
        KroneckerOperator { factors }
    }

    pub fn identity(modes: &[usize]) -> KroneckerOperator {
        KroneckerOperator { factors: modes.iter().map(|&n| Mat::identity(n, n)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, k: usize) -> &Mat {
        &self.factors[k]
    }

    pub fn factor_entry(&self, k: usize, i: usize, j: usize) -> f64 {
        self.factors[k][(i, j)]
    }
}

/// A `d`-dimensional array in tensor-train format.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
}

/// Outcome of [`TensorTrain::round_report`].
#[derive(Debug, Clone, Copy)]
pub struct RoundReport {
    /// Upper bound on `||a - round(a)||_F / ||a||_F` from the discarded singular values.
    pub relative_error: f64,
    /// True when `max_rank` cut a rank that the tolerance would have kept.
    pub rank_capped: bool,
}

impl TensorTrain {
    pub fn from_cores(cores: Vec<Core>) -> Result<TensorTrain> {
        if cores.is_empty() {
            return Err(Error::Shape("a tensor train needs at least one core".into()));
        }
        if cores[0].r0 != 1 || cores[cores.len() - 1].r1 != 1 {
            return Err(Error::Shape("boundary ranks must be 1".into()));
        }
        for k in 1..cores.len() {
            if cores[k - 1].r1 != cores[k].r0 {
                return Err(Error::Shape(format!(
                    "core {} trailing rank {} does not match core {k} leading rank {}",
                    k - 1,
                    cores[k - 1].r1,
                    cores[k].r0
                )));
            }
        }
        Ok(TensorTrain { cores })
    }

    /// Rank-one tensor `prod_k v_k(i_k)`.
    pub fn rank_one(vectors: &[Vec<f64>]) -> TensorTrain {
        let cores = vectors.iter().map(|v| Core { r0: 1, n: v.len(), r1: 1, data: v.clone() }).collect();
        TensorTrain { cores }
    }

    pub fn ones(modes: &[usize]) -> TensorTrain {
        Self::rank_one(&modes.iter().map(|&n| vec![1.0; n]).collect::<Vec<_>>())
    }

    pub fn zeros(modes: &[usize]) -> TensorTrain {
        Self::rank_one(&modes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>())
    }

    /// Samples `f` on the grid, separable in each coordinate.
    pub fn separable(grid: &Grid, f: impl Fn(usize, f64) -> f64) -> TensorTrain {
        let vs: Vec<Vec<f64>> = (0..grid.dim()).map(|k| grid.nodes().iter().map(|&x| f(k, x)).collect()).collect();
        Self::rank_one(&vs)
    }

    pub fn dim(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    /// `r_0, ..., r_d` with `r_0 = r_d = 1`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.r1));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.cores.iter().map(|c| c.r1.max(c.r0)).max().unwrap_or(1)
    }

    /// Number of stored floats.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.dim() || idx.iter().zip(&self.cores).any(|(&i, c)| i >= c.n) {
            return Err(Error::IndexOutOfBounds { index: idx.to_vec(), modes: self.mode_sizes() });
        }
        Ok(())
    }

    pub fn eval(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx)?;
        Ok(self.eval_unchecked(idx))
    }

    pub(crate) fn eval_unchecked(&self, idx: &[usize]) -> f64 {
        let mut v = vec![1.0];
        let mut next = Vec::new();
        for (core, &i) in self.cores.iter().zip(idx) {
            next.clear();
            next.resize(core.r1, 0.0);
            core.left_apply(&v, i, 1.0, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
        v[0]
    }

    /// Multilinear interpolation at a point of the grid box.
    pub fn eval_point(&self, grid: &Grid, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() || grid.len() != self.cores[0].n {
            return Err(Error::Shape(format!(
                "point of length {} for a {}-dimensional train on {} nodes",
                x.len(),
                self.dim(),
                grid.len()
            )));
        }
        let mut v = vec![1.0];
        let mut next = Vec::new();
        for (core, &xk) in self.cores.iter().zip(x) {
            if core.n != grid.len() {
                return Err(Error::Shape("mode size differs from grid size".into()));
            }
            let (j, t) = grid.locate(xk).ok_or_else(|| Error::OutsideGrid(x.to_vec()))?;
            next.clear();
            next.resize(core.r1, 0.0);
            core.left_apply(&v, j, 1.0 - t, &mut next);
            if t > 0.0 {
                core.left_apply(&v, j + 1, t, &mut next);
            }
            std::mem::swap(&mut v, &mut next);
        }
        Ok(v[0])
    }

    fn check_same_modes(&self, other: &TensorTrain) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::Shape(format!(
                "mode sizes {:?} and {:?} differ",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> TensorTrain {
        let mut out = self.clone();
        for v in out.cores[0].data.iter_mut() {
            *v *= c;
        }
        out
    }

    /// Pointwise sum; ranks add.
    pub fn add(&self, other: &TensorTrain) -> Result<TensorTrain> {
        self.check_same_modes(other)?;
        let d = self.dim();
        if d == 1 {
            let data = self.cores[0].data.iter().zip(&other.cores[0].data).map(|(a, b)| a + b).collect();
            return Ok(TensorTrain { cores: vec![Core { r0: 1, n: self.cores[0].n, r1: 1, data }] });
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (a, b) = (&self.cores[k], &other.cores[k]);
            let n = a.n;
            let r0 = if k == 0 { 1 } else { a.r0 + b.r0 };
            let r1 = if k == d - 1 { 1 } else { a.r1 + b.r1 };
            let mut c = Core::zeros(r0, n, r1);
            let (a_off0, b_off0) = (0, if k == 0 { 0 } else { a.r0 });
            let (a_off1, b_off1) = (0, if k == d - 1 { 0 } else { a.r1 });
            for x in 0..a.r0 {
                for i in 0..n {
                    for y in 0..a.r1 {
                        let t = c.idx(a_off0 + x, i, a_off1 + y);
                        c.data[t] = a.get(x, i, y);
                    }
                }
            }
            for x in 0..b.r0 {
                for i in 0..n {
                    for y in 0..b.r1 {
                        let t = c.idx(b_off0 + x, i, b_off1 + y);
                        c.data[t] += b.get(x, i, y);
                    }
                }
            }
            cores.push(c);
        }
        Ok(TensorTrain { cores })
    }

    pub fn sub(&self, other: &TensorTrain) -> Result<TensorTrain> {
        self.add(&other.scale(-1.0))
    }

    /// Pointwise product; ranks multiply.
    pub fn hadamard(&self, other: &TensorTrain) -> Result<TensorTrain> {
        self.check_same_modes(other)?;
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let (r0, r1) = (a.r0 * b.r0, a.r1 * b.r1);
                let mut c = Core::zeros(r0, a.n, r1);
                for xa in 0..a.r0 {
                    for xb in 0..b.r0 {
                        for i in 0..a.n {
                            for ya in 0..a.r1 {
                                let ga = a.get(xa, i, ya);
                                if ga == 0.0 {
                                    continue;
                                }
                                for yb in 0..b.r1 {
                                    let t = c.idx(xa * b.r0 + xb, i, ya * b.r1 + yb);
                                    c.data[t] = ga * b.get(xb, i, yb);
                                }
                            }
                        }
                    }
                }
                c
            })
            .collect();
        Ok(TensorTrain { cores })
    }

    /// Mode-wise product with (possibly rectangular) matrices, `new[a, i, b] = sum_j F[i, j] old[a, j, b]`.
    pub(crate) fn apply_modes(&self, factors: &[&Mat]) -> Result<TensorTrain> {
        if factors.len() != self.dim() {
            return Err(Error::Shape(format!("{} factors for a {}-dimensional train", factors.len(), self.dim())));
        }
        let mut cores = Vec::with_capacity(self.dim());
        for (core, f) in self.cores.iter().zip(factors) {
            if f.ncols() != core.n {
                return Err(Error::Shape(format!("factor with {} columns on mode of size {}", f.ncols(), core.n)));
            }
            cores.push(apply_mode(core, f));
        }
        Ok(TensorTrain { cores })
    }

    /// Apply a Kronecker-structured operator; ranks are unchanged.
    pub fn apply_kron(&self, op: &KroneckerOperator) -> Result<TensorTrain> {
        for (f, c) in op.factors.iter().zip(&self.cores) {
            if f.nrows() != c.n || f.ncols() != c.n {
                return Err(Error::Shape(format!("factor {}x{} on mode of size {}", f.nrows(), f.ncols(), c.n)));
            }
        }
        let refs: Vec<&Mat> = op.factors.iter().collect();
        self.apply_modes(&refs)
    }

    /// Replace one core with its mode product by `f`.
    pub(crate) fn apply_one_mode(&self, k: usize, f: &Mat) -> TensorTrain {
        let mut out = self.clone();
        out.cores[k] = apply_mode(&self.cores[k], f);
        out
    }

    /// `sum_idx a(idx) prod_k w_k(idx_k)`.
    pub fn contract_weights(&self, weights: &[Vec<f64>]) -> Result<f64> {
        if weights.len() != self.dim() || weights.iter().zip(&self.cores).any(|(w, c)| w.len() != c.n) {
            return Err(Error::Shape("weight vectors do not match mode sizes".into()));
        }
        let mut v = vec![1.0];
        for (core, w) in self.cores.iter().zip(weights) {
            let mut next = vec![0.0; core.r1];
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    core.left_apply(&v, i, wi, &mut next);
                }
            }
            v = next;
        }
        Ok(v[0])
    }

    /// Quadrature integral over the grid box.
    pub fn integrate(&self, grid: &Grid) -> Result<f64> {
        let w = vec![grid.weights().to_vec(); self.dim()];
        self.contract_weights(&w)
    }

    /// Left-orthogonalize cores `0..d-1`; the returned train carries the whole norm in its last core.
    fn left_orthogonalized(&self) -> TensorTrain {
        let mut cores = self.cores.clone();
        let d = cores.len();
        for k in 0..d - 1 {
            let (r0, n) = (cores[k].r0, cores[k].n);
            let (q, r) = qr_thin(cores[k].left_unfolding());
            cores[k] = Core::from_left_unfolding(&q, r0, n);
            let next = &cores[k + 1];
            let merged = &r * next.right_unfolding();
            cores[k + 1] = Core::from_right_unfolding(&merged, next.n, next.r1);
        }
        TensorTrain { cores }
    }

    /// Frobenius norm, computed through orthogonalization.
    pub fn norm(&self) -> f64 {
        let o = self.left_orthogonalized();
        o.cores[o.dim() - 1].data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Inner product `sum_idx a(idx) b(idx)`.
    pub fn dot(&self, other: &TensorTrain) -> Result<f64> {
        self.check_same_modes(other)?;
        // left interface matrix of size r_a x r_b
        let mut m = Mat::from_element(1, 1, 1.0);
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let mut next = Mat::zeros(a.r1, b.r1);
            for i in 0..a.n {
                let sa = Mat::from_fn(a.r0, a.r1, |x, y| a.get(x, i, y));
                let sb = Mat::from_fn(b.r0, b.r1, |x, y| b.get(x, i, y));
                next += sa.transpose() * &m * sb;
            }
            m = next;
        }
        Ok(m[(0, 0)])
    }

    pub fn round(&self, tol: f64, max_rank: usize) -> TensorTrain {
        self.round_report(tol, max_rank).0
    }

    /// Left-to-right QR followed by right-to-left truncated SVD with per-bond threshold
    /// `tol / sqrt(d-1) * ||a||`, ranks capped at `max_rank`.
    pub fn round_report(&self, tol: f64, max_rank: usize) -> (TensorTrain, RoundReport) {
        let d = self.dim();
        if d == 1 {
            return (self.clone(), RoundReport { relative_error: 0.0, rank_capped: false });
        }
        let mut tt = self.left_orthogonalized();
        let total = tt.cores[d - 1].data.iter().map(|v| v * v).sum::<f64>().sqrt();
        if total == 0.0 || !total.is_finite() {
            let zero = TensorTrain::zeros(&self.mode_sizes());
            return (zero, RoundReport { relative_error: 0.0, rank_capped: false });
        }
        let delta = tol.max(0.0) / ((d - 1) as f64).sqrt() * total;
        let mut discarded_sq = 0.0;
        let mut capped = false;
        for k in (1..d).rev() {
            let core = &tt.cores[k];
            let (n, r1) = (core.n, core.r1);
            let dec = svd(&core.right_unfolding());
            // zero singular values never carry information
            let positive = dec.s.iter().take_while(|&&s| s > 0.0).count().max(1);
            let s = &dec.s[..positive];
            let (free_rank, _) = truncation_rank(s, delta, usize::MAX);
            let (rank, tail) = truncation_rank(s, delta, max_rank);
            if rank < free_rank {
                capped = true;
            }
            discarded_sq += tail * tail;
            let vt = dec.vt.rows(0, rank).clone_owned();
            let us = Mat::from_fn(dec.u.nrows(), rank, |i, j| dec.u[(i, j)] * dec.s[j]);
            tt.cores[k] = Core::from_right_unfolding(&vt, n, r1);
            let prev = &tt.cores[k - 1];
            let merged = prev.left_unfolding() * us;
            tt.cores[k - 1] = Core::from_left_unfolding(&merged, prev.r0, prev.n);
        }
        let report = RoundReport { relative_error: discarded_sq.sqrt() / total, rank_capped: capped };
        (tt, report)
    }

    /// Sum of many trains, rounding after every `batch` additions.
    pub fn sum_rounded(terms: &[TensorTrain], batch: usize, tol: f64, max_rank: usize) -> Result<TensorTrain> {
        let first = terms.first().ok_or_else(|| Error::InvalidArgument("empty sum".into()))?;
        let mut acc = first.clone();
        let mut pending = 1;
        for t in &terms[1..] {
            acc = acc.add(t)?;
            pending += 1;
            if pending >= batch.max(1) {
                acc = acc.round(tol, max_rank);
                pending = 0;
            }
        }
        Ok(if pending > 0 { acc.round(tol, max_rank) } else { acc })
    }
}

fn apply_mode(core: &Core, f: &Mat) -> Core {
    let m = f.nrows();
    let mut out = Core::zeros(core.r0, m, core.r1);
    for a in 0..core.r0 {
        // slab for fixed a is n x r1 row-major
        let slab = Mat::from_row_slice(core.n, core.r1, &core.data[a * core.n * core.r1..(a + 1) * core.n * core.r1]);
        let prod = f * slab;
        for i in 0..m {
            for b in 0..core.r1 {
                let t = out.idx(a, i, b);
                out.data[t] = prod[(i, b)];
            }
        }
    }
    out
}
