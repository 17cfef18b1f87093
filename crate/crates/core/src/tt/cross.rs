//! Two-site cross approximation.
//!
//! Each step samples the supercore `f(I_k[a], i, j, J_{k+2}[c])` for a neighbouring pair of
//! modes, factors it (dense SVD when small, partially pivoted ACA otherwise) and picks new
//! index sets with maxvol. Forward sweeps update the left sets, backward sweeps the right sets.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Core, TensorTrain};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{maxvol, qr_thin, right_divide, select_rows, svd, truncation_rank, Mat};

/// A function on grid multi-indices.
pub trait CrossTarget: Sync {
    fn eval(&self, idx: &[usize]) -> f64;

    /// Matrix view of the pair `(k, k+1)`: rows are `(a, i)` with `a` indexing `left`,
    /// columns are `(j, c)` with `c` indexing `right`.
    fn supercore<'a>(
        &'a self,
        modes: &'a [usize],
        k: usize,
        left: &'a [Vec<usize>],
        right: &'a [Vec<usize>],
    ) -> Box<dyn Supercore + 'a> {
        Box::new(PointSupercore { target: self, modes, k, left, right })
    }
}

impl<F: Fn(&[usize]) -> f64 + Sync> CrossTarget for F {
    fn eval(&self, idx: &[usize]) -> f64 {
        self(idx)
    }
}

pub trait Supercore {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn row(&self, i: usize, out: &mut [f64]);
    fn col(&self, j: usize, out: &mut [f64]);
    fn full(&self) -> Mat {
        let (r, c) = (self.rows(), self.cols());
        let mut m = Mat::zeros(r, c);
        let mut buf = vec![0.0; c];
        for i in 0..r {
            self.row(i, &mut buf);
            for j in 0..c {
                m[(i, j)] = buf[j];
            }
        }
        m
    }
}

fn supercore_index(modes: &[usize], k: usize, left: &[Vec<usize>], right: &[Vec<usize>], row: usize, col: usize) -> Vec<usize> {
    let (n1, rr) = (modes[k], right.len());
    let mut idx = left[row / n1].clone();
    idx.push(row % n1);
    idx.push(col / rr);
    idx.extend_from_slice(&right[col % rr]);
    idx
}

struct PointSupercore<'a, T: ?Sized> {
    target: &'a T,
    modes: &'a [usize],
    k: usize,
    left: &'a [Vec<usize>],
    right: &'a [Vec<usize>],
}

impl<T: CrossTarget + ?Sized> Supercore for PointSupercore<'_, T> {
    fn rows(&self) -> usize {
        self.left.len() * self.modes[self.k]
    }
    fn cols(&self) -> usize {
        self.modes[self.k + 1] * self.right.len()
    }
    fn row(&self, i: usize, out: &mut [f64]) {
        let k = self.k;
        let n1 = self.modes[k];
        let mut idx = self.left[i / n1].clone();
        idx.push(i % n1);
        idx.push(0);
        let base = idx.len();
        for (col, o) in out.iter_mut().enumerate() {
            let rr = self.right.len();
            idx.truncate(base);
            idx[base - 1] = col / rr;
            idx.extend_from_slice(&self.right[col % rr]);
            *o = self.target.eval(&idx);
        }
    }
    fn col(&self, j: usize, out: &mut [f64]) {
        let k = self.k;
        let (n1, rr) = (self.modes[k], self.right.len());
        let tail = &self.right[j % rr];
        let mut idx = Vec::with_capacity(self.modes.len());
        for (row, o) in out.iter_mut().enumerate() {
            idx.clear();
            idx.extend_from_slice(&self.left[row / n1]);
            idx.push(row % n1);
            idx.push(j / rr);
            idx.extend_from_slice(tail);
            *o = self.target.eval(&idx);
        }
    }
}

/// Elementwise map of one or more tensor trains, e.g. `1 / a` or `a / max(b, floor)`.
///
/// Supercore entries are formed from interface vectors, so a row or column costs
/// `O(size * rank)` instead of a full chain product per entry.
pub struct TtMapTarget<'t, F> {
    tts: Vec<&'t TensorTrain>,
    map: F,
}

impl<'t, F: Fn(&[f64]) -> f64 + Sync> TtMapTarget<'t, F> {
    pub fn new(tts: Vec<&'t TensorTrain>, map: F) -> Result<Self> {
        let first = tts.first().ok_or_else(|| Error::InvalidArgument("no trains given".into()))?;
        if tts.iter().any(|t| t.mode_sizes() != first.mode_sizes()) {
            return Err(Error::Shape("trains in a map target must share mode sizes".into()));
        }
        Ok(TtMapTarget { tts, map })
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.tts[0].mode_sizes()
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> CrossTarget for TtMapTarget<'_, F> {
    fn eval(&self, idx: &[usize]) -> f64 {
        let vals: Vec<f64> = self.tts.iter().map(|t| t.eval_unchecked(idx)).collect();
        (self.map)(&vals)
    }

    fn supercore<'a>(
        &'a self,
        modes: &'a [usize],
        k: usize,
        left: &'a [Vec<usize>],
        right: &'a [Vec<usize>],
    ) -> Box<dyn Supercore + 'a> {
        let (n1, n2) = (modes[k], modes[k + 1]);
        let mut a_mats = Vec::with_capacity(self.tts.len());
        let mut b_mats = Vec::with_capacity(self.tts.len());
        for tt in &self.tts {
            let cores = tt.cores();
            let mid = cores[k].r1;
            // rows: prefix interface times core k slice
            let mut a = Mat::zeros(left.len() * n1, mid);
            for (ai, prefix) in left.iter().enumerate() {
                let mut v = vec![1.0];
                for (p, &i) in prefix.iter().enumerate() {
                    let mut next = vec![0.0; cores[p].r1];
                    cores[p].left_apply(&v, i, 1.0, &mut next);
                    v = next;
                }
                for i in 0..n1 {
                    let mut next = vec![0.0; mid];
                    cores[k].left_apply(&v, i, 1.0, &mut next);
                    for (b, x) in next.into_iter().enumerate() {
                        a[(ai * n1 + i, b)] = x;
                    }
                }
            }
            // columns: core k+1 slice times suffix interface
            let rr = right.len();
            let mut bm = Mat::zeros(n2 * rr, mid);
            for (ci, suffix) in right.iter().enumerate() {
                let mut w = vec![1.0];
                for (off, &i) in suffix.iter().enumerate().rev() {
                    let core = &cores[k + 2 + off];
                    let mut next = vec![0.0; core.r0];
                    for (x, nx) in next.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for (y, wy) in w.iter().enumerate() {
                            s += core.get(x, i, y) * wy;
                        }
                        *nx = s;
                    }
                    w = next;
                }
                let core = &cores[k + 1];
                for j in 0..n2 {
                    for x in 0..mid {
                        let mut s = 0.0;
                        for (y, wy) in w.iter().enumerate() {
                            s += core.get(x, j, y) * wy;
                        }
                        bm[(j * rr + ci, x)] = s;
                    }
                }
            }
            a_mats.push(a);
            b_mats.push(bm);
        }
        Box::new(MapSupercore { a: a_mats, b: b_mats, map: &self.map })
    }
}

struct MapSupercore<'a, F> {
    a: Vec<Mat>,
    b: Vec<Mat>,
    map: &'a F,
}

impl<F: Fn(&[f64]) -> f64> Supercore for MapSupercore<'_, F> {
    fn rows(&self) -> usize {
        self.a[0].nrows()
    }
    fn cols(&self) -> usize {
        self.b[0].nrows()
    }
    fn row(&self, i: usize, out: &mut [f64]) {
        let mut vals = vec![0.0; self.a.len()];
        for (j, o) in out.iter_mut().enumerate() {
            for (t, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
                vals[t] = a.row(i).dot(&b.row(j));
            }
            *o = (self.map)(&vals);
        }
    }
    fn col(&self, j: usize, out: &mut [f64]) {
        let mut vals = vec![0.0; self.a.len()];
        for (i, o) in out.iter_mut().enumerate() {
            for (t, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
                vals[t] = a.row(i).dot(&b.row(j));
            }
            *o = (self.map)(&vals);
        }
    }
    fn full(&self) -> Mat {
        let prods: Vec<Mat> = self.a.iter().zip(&self.b).map(|(a, b)| a * b.transpose()).collect();
        let (r, c) = prods[0].shape();
        let mut vals = vec![0.0; prods.len()];
        Mat::from_fn(r, c, |i, j| {
            for (t, p) in prods.iter().enumerate() {
                vals[t] = p[(i, j)];
            }
            (self.map)(&vals)
        })
    }
}

#[derive(Debug, Clone)]
pub struct CrossOptions {
    /// Relative tolerance for local truncation and for the sweep-to-sweep change.
    pub tol: f64,
    pub max_rank: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Size of the random right index sets before the first sweep.
    pub init_rank: usize,
    pub validation_size: usize,
    /// Supercores with at most this many entries are sampled densely.
    pub dense_limit: usize,
}

impl Default for CrossOptions {
    fn default() -> Self {
        CrossOptions {
            tol: 1e-6,
            max_rank: 64,
            max_sweeps: 8,
            seed: 0,
            init_rank: 2,
            validation_size: 1000,
            dense_limit: 150_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossReport {
    pub ranks: Vec<usize>,
    pub sweeps: usize,
    /// Relative change between the last two sweeps on the validation set.
    pub relative_change: f64,
    /// Relative error against the target on the validation set.
    pub residual: f64,
    pub rank_capped: bool,
    pub converged: bool,
    /// Number of target entries requested.
    pub evaluations: usize,
}

struct Factor {
    u: Mat,
    s: Vec<f64>,
    v: Mat,
    capped: bool,
}

struct Driver<'a> {
    target: &'a dyn CrossTarget,
    modes: &'a [usize],
    opts: &'a CrossOptions,
    evals: Cell<usize>,
    rng: ChaCha8Rng,
}

impl Driver<'_> {
    fn check(&self, k: usize, left: &[Vec<usize>], right: &[Vec<usize>], values: &[f64], at: impl Fn(usize) -> (usize, usize)) -> Result<()> {
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = at(p);
            return Err(Error::NonFinite { index: supercore_index(self.modes, k, left, right, r, c), value: values[p] });
        }
        Ok(())
    }

    fn factor(&mut self, k: usize, left: &[Vec<usize>], right: &[Vec<usize>]) -> Result<Factor> {
        let d = self.modes.len();
        let sc = self.target.supercore(self.modes, k, left, right);
        let (rows, cols) = (sc.rows(), sc.cols());
        let local_tol = self.opts.tol / ((d - 1) as f64).sqrt();
        let (u, s, v) = if rows * cols <= self.opts.dense_limit {
            let m = sc.full();
            self.evals.set(self.evals.get() + rows * cols);
            if let Some(p) = m.iter().position(|v| !v.is_finite()) {
                // column-major storage
                let (r, c) = (p % rows, p / rows);
                return Err(Error::NonFinite { index: supercore_index(self.modes, k, left, right, r, c), value: m[(r, c)] });
            }
            let dec = svd(&m);
            (dec.u, dec.s, dec.vt.transpose())
        } else {
            self.aca(sc.as_ref(), k, left, right, local_tol)?
        };
        let s_max = s.first().copied().unwrap_or(0.0);
        let useful = s.iter().take_while(|&&x| x > s_max * 1e-14 && x > 0.0).count().max(1);
        let total = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let delta = local_tol * total;
        let (free, _) = truncation_rank(&s[..useful], delta, usize::MAX);
        let (rank, _) = truncation_rank(&s[..useful], delta, self.opts.max_rank);
        Ok(Factor {
            u: u.columns(0, rank).clone_owned(),
            s: s[..rank].to_vec(),
            v: v.columns(0, rank).clone_owned(),
            capped: rank < free,
        })
    }

    /// Partially pivoted adaptive cross approximation of a supercore, recompressed by QR + SVD.
    fn aca(&mut self, sc: &dyn Supercore, k: usize, left: &[Vec<usize>], right: &[Vec<usize>], tol: f64) -> Result<(Mat, Vec<f64>, Mat)> {
        let (rows, cols) = (sc.rows(), sc.cols());
        let max_terms = rows.min(cols).min(2 * self.opts.max_rank + 8);
        let mut us: Vec<Vec<f64>> = Vec::new();
        let mut vs: Vec<Vec<f64>> = Vec::new();
        let mut used_rows = vec![false; rows];
        let mut used_cols = vec![false; cols];
        let mut row = vec![0.0; cols];
        let mut col = vec![0.0; rows];

        // start from the row of the largest of a few random probes
        let mut start = 0;
        let mut best = -1.0;
        let mut probe = vec![0.0; cols];
        for _ in 0..4 {
            let i = self.rng.random_range(0..rows);
            sc.row(i, &mut probe);
            self.evals.set(self.evals.get() + cols);
            self.check(k, left, right, &probe, |p| (i, p))?;
            let m = probe.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > best {
                best = m;
                start = i;
            }
        }

        let mut i = start;
        let mut frob2 = 0.0f64;
        let mut small = 0;
        let mut misses = 0;
        while us.len() < max_terms {
            sc.row(i, &mut row);
            self.evals.set(self.evals.get() + cols);
            self.check(k, left, right, &row, |p| (i, p))?;
            used_rows[i] = true;
            for (u, v) in us.iter().zip(&vs) {
                let ui = u[i];
                if ui != 0.0 {
                    for (r, vv) in row.iter_mut().zip(v) {
                        *r -= ui * vv;
                    }
                }
            }
            let mut j = usize::MAX;
            let mut jv = 0.0;
            for (c, &r) in row.iter().enumerate() {
                if !used_cols[c] && r.abs() > jv {
                    jv = r.abs();
                    j = c;
                }
            }
            let floor = 1e-14 * frob2.sqrt() / ((rows * cols) as f64).sqrt();
            if j == usize::MAX || jv <= floor {
                misses += 1;
                let free: Vec<usize> = (0..rows).filter(|&r| !used_rows[r]).collect();
                if misses >= 3 || free.is_empty() {
                    break;
                }
                i = free[self.rng.random_range(0..free.len())];
                continue;
            }
            misses = 0;
            sc.col(j, &mut col);
            self.evals.set(self.evals.get() + rows);
            self.check(k, left, right, &col, |p| (p, j))?;
            used_cols[j] = true;
            for (u, v) in us.iter().zip(&vs) {
                let vj = v[j];
                if vj != 0.0 {
                    for (c, uu) in col.iter_mut().zip(u) {
                        *c -= vj * uu;
                    }
                }
            }
            let pivot = row[j];
            let u_new = col.clone();
            let v_new: Vec<f64> = row.iter().map(|r| r / pivot).collect();
            let nu2: f64 = u_new.iter().map(|x| x * x).sum();
            let nv2: f64 = v_new.iter().map(|x| x * x).sum();
            let mut cross_terms = 0.0;
            for (u, v) in us.iter().zip(&vs) {
                let a: f64 = u.iter().zip(&u_new).map(|(x, y)| x * y).sum();
                let b: f64 = v.iter().zip(&v_new).map(|(x, y)| x * y).sum();
                cross_terms += a * b;
            }
            frob2 = (frob2 + 2.0 * cross_terms + nu2 * nv2).max(0.0);
            // next row: largest entry of the new column among unused rows
            let mut next = usize::MAX;
            let mut nvv = -1.0;
            for (r, &x) in u_new.iter().enumerate() {
                if !used_rows[r] && x.abs() > nvv {
                    nvv = x.abs();
                    next = r;
                }
            }
            us.push(u_new);
            vs.push(v_new);
            if (nu2 * nv2).sqrt() <= tol * frob2.sqrt() {
                small += 1;
                if small >= 2 {
                    break;
                }
            } else {
                small = 0;
            }
            if next == usize::MAX {
                break;
            }
            i = next;
        }
        if us.is_empty() {
            return Ok((Mat::zeros(rows, 1), vec![0.0], Mat::from_fn(cols, 1, |j, _| if j == 0 { 1.0 } else { 0.0 })));
        }
        let t = us.len();
        let umat = Mat::from_fn(rows, t, |r, c| us[c][r]);
        let vmat = Mat::from_fn(cols, t, |r, c| vs[c][r]);
        let (qu, ru) = qr_thin(umat);
        let (qv, rv) = qr_thin(vmat);
        let small_m = ru * rv.transpose();
        let dec = svd(&small_m);
        Ok((qu * dec.u, dec.s, qv * dec.vt.transpose()))
    }
}

/// Cross approximation of `target` on a grid of the given mode sizes.
///
/// Never forms the full tensor. Stops when the sweep-to-sweep change on a fixed validation
/// set drops below `tol` or after `max_sweeps`; the result is flagged non-converged if the
/// rank cap was hit with the validation residual above `tol`.
pub fn cross(target: &dyn CrossTarget, modes: &[usize], opts: &CrossOptions) -> Result<(TensorTrain, CrossReport)> {
    let d = modes.len();
    if d == 0 || modes.contains(&0) {
        return Err(Error::InvalidArgument(format!("bad mode sizes {modes:?}")));
    }
    if d == 1 {
        let mut v = Vec::with_capacity(modes[0]);
        for i in 0..modes[0] {
            let x = target.eval(&[i]);
            if !x.is_finite() {
                return Err(Error::NonFinite { index: vec![i], value: x });
            }
            v.push(x);
        }
        let report = CrossReport {
            ranks: vec![1, 1],
            sweeps: 0,
            relative_change: 0.0,
            residual: 0.0,
            rank_capped: false,
            converged: true,
            evaluations: modes[0],
        };
        return Ok((TensorTrain::rank_one(&[v]), report));
    }

    let mut drv = Driver { target, modes, opts, evals: Cell::new(0), rng: ChaCha8Rng::seed_from_u64(opts.seed) };
    let random_index = |rng: &mut ChaCha8Rng| -> Vec<usize> { modes.iter().map(|&n| rng.random_range(0..n)).collect() };

    let eval_checked = |idx: &[usize], drv: &Driver| -> Result<f64> {
        let v = target.eval(idx);
        drv.evals.set(drv.evals.get() + 1);
        if !v.is_finite() {
            return Err(Error::NonFinite { index: idx.to_vec(), value: v });
        }
        Ok(v)
    };

    // probe for a large entry to seed the index sets
    let mut best: Vec<usize> = modes.iter().map(|&n| n / 2).collect();
    let mut best_val = eval_checked(&best, &drv)?.abs();
    for _ in 0..256 {
        let idx = random_index(&mut drv.rng);
        let v = eval_checked(&idx, &drv)?.abs();
        if v > best_val {
            best_val = v;
            best = idx;
        }
    }

    let validation: Vec<Vec<usize>> = (0..opts.validation_size.max(1)).map(|_| random_index(&mut drv.rng)).collect();
    let mut exact = Vec::with_capacity(validation.len());
    for idx in &validation {
        exact.push(eval_checked(idx, &drv)?);
    }
    let exact_norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();

    if best_val == 0.0 && exact_norm == 0.0 {
        let report = CrossReport {
            ranks: vec![1; d + 1],
            sweeps: 0,
            relative_change: 0.0,
            residual: 0.0,
            rank_capped: false,
            converged: true,
            evaluations: drv.evals.get(),
        };
        return Ok((TensorTrain::zeros(modes), report));
    }

    let mut left: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d + 1];
    let mut right: Vec<Vec<Vec<usize>>> = vec![Vec::new(); d + 1];
    left[0] = vec![vec![]];
    right[d] = vec![vec![]];
    for b in 1..d {
        let mut set = vec![best[b..].to_vec()];
        while set.len() < opts.init_rank.max(1) {
            let idx = random_index(&mut drv.rng);
            let suffix = idx[b..].to_vec();
            if !set.contains(&suffix) {
                set.push(suffix);
            } else if set.len() >= modes[b..].iter().product::<usize>() {
                break;
            }
        }
        right[b] = set;
    }

    let mut cores: Vec<Core> = modes.iter().map(|&n| Core::zeros(1, n, 1)).collect();
    let mut previous: Option<Vec<f64>> = None;
    let mut change = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut capped = false;
    let mut sweeps = 0;

    for _ in 0..opts.max_sweeps.max(1) {
        sweeps += 1;
        capped = false;
        for k in 0..d - 1 {
            let f = drv.factor(k, &left[k], &right[k + 2])?;
            capped |= f.capped;
            let n = modes[k];
            let piv = maxvol(&f.u, 1.05, 200);
            left[k + 1] = piv
                .iter()
                .map(|&p| {
                    let mut idx = left[k][p / n].clone();
                    idx.push(p % n);
                    idx
                })
                .collect();
            let sub = select_rows(&f.u, &piv);
            let interp = right_divide(&f.u, &sub);
            cores[k] = Core::from_left_unfolding(&interp, left[k].len(), n);
            if k == d - 2 {
                let sv = Mat::from_fn(f.s.len(), f.v.nrows(), |i, j| f.s[i] * f.v[(j, i)]);
                let last = sub * sv;
                cores[d - 1] = Core::from_right_unfolding(&last, modes[d - 1], 1);
            }
        }
        for k in (0..d - 1).rev() {
            let f = drv.factor(k, &left[k], &right[k + 2])?;
            capped |= f.capped;
            let rr = right[k + 2].len();
            let piv = maxvol(&f.v, 1.05, 200);
            right[k + 1] = piv
                .iter()
                .map(|&q| {
                    let mut idx = vec![q / rr];
                    idx.extend_from_slice(&right[k + 2][q % rr]);
                    idx
                })
                .collect();
            let sub = select_rows(&f.v, &piv);
            let interp = right_divide(&f.v, &sub).transpose();
            cores[k + 1] = Core::from_right_unfolding(&interp, modes[k + 1], rr);
            if k == 0 {
                let us = Mat::from_fn(f.u.nrows(), f.s.len(), |i, j| f.u[(i, j)] * f.s[j]);
                let first = us * sub.transpose();
                cores[0] = Core::from_left_unfolding(&first, 1, modes[0]);
            }
        }

        let tt = TensorTrain { cores: cores.clone() };
        let approx: Vec<f64> = validation.iter().map(|idx| tt.eval_unchecked(idx)).collect();
        let an = approx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = approx.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        residual = if exact_norm > 0.0 { diff / exact_norm } else { diff };
        if let Some(prev) = &previous {
            let dd = approx.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            change = if an > 0.0 { dd / an } else { dd };
        }
        previous = Some(approx);
        log::debug!("cross sweep {sweeps}: ranks {:?}, change {change:e}, residual {residual:e}", tt.ranks());
        if change < opts.tol {
            break;
        }
    }

    let tt = TensorTrain { cores };
    let converged = change < opts.tol && !(capped && residual > opts.tol);
    let report = CrossReport {
        ranks: tt.ranks(),
        sweeps,
        relative_change: change,
        residual,
        rank_capped: capped,
        converged,
        evaluations: drv.evals.get(),
    };
    if !converged {
        log::warn!("cross approximation did not converge: ranks {:?}, residual {residual:e}, change {change:e}", report.ranks);
    }
    Ok((tt, report))
}

/// Cross approximation of a function of grid coordinates.
pub fn cross_on_grid(grid: &Grid, f: impl Fn(&[f64]) -> f64 + Sync, opts: &CrossOptions) -> Result<(TensorTrain, CrossReport)> {
    let nodes = grid.nodes();
    let target = move |idx: &[usize]| {
        let x: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
        f(&x)
    };
    cross(&target, &grid.mode_sizes(), opts)
}
