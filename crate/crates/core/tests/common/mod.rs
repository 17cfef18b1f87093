//! Brute-force dense tensors used as an independent oracle for tensor-train algebra.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttbrwp::grid::Grid;
use ttbrwp::tt::{Core, KroneckerOperator, TensorTrain};

/// Row-major dense tensor (first index slowest).
#[derive(Debug, Clone)]
pub struct Dense {
    pub modes: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn multi_index(mut flat: usize, modes: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; modes.len()];
    for k in (0..modes.len()).rev() {
        idx[k] = flat % modes[k];
        flat /= modes[k];
    }
    idx
}

impl Dense {
    /// Every entry by explicit products of core slices.
    pub fn from_tt(tt: &TensorTrain) -> Dense {
        let modes = tt.mode_sizes();
        let total: usize = modes.iter().product();
        let data = (0..total)
            .map(|flat| {
                let idx = multi_index(flat, &modes);
                let mut row = vec![1.0];
                for (core, &i) in tt.cores().iter().zip(&idx) {
                    let (r0, _, r1) = core.shape();
                    row = (0..r1).map(|b| (0..r0).map(|a| row[a] * core.get(a, i, b)).sum()).collect();
                }
                row[0]
            })
            .collect();
        Dense { modes, data }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn zip(&self, other: &Dense, f: impl Fn(f64, f64) -> f64) -> Dense {
        assert_eq!(self.modes, other.modes);
        Dense { modes: self.modes.clone(), data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect() }
    }

    /// `sum_j prod_k F_k[i_k, j_k] a(j)` by direct summation.
    pub fn apply_kron(&self, factors: &[Vec<f64>]) -> Dense {
        let total = self.data.len();
        let data = (0..total)
            .map(|out| {
                let i = multi_index(out, &self.modes);
                (0..total)
                    .map(|inp| {
                        let j = multi_index(inp, &self.modes);
                        let w: f64 = (0..self.modes.len()).map(|k| factors[k][i[k] * self.modes[k] + j[k]]).product();
                        w * self.data[inp]
                    })
                    .sum()
            })
            .collect();
        Dense { modes: self.modes.clone(), data }
    }

    /// `(sum_j prod_k w_k[j_k] a(j), sum_j |prod_k w_k[j_k] a(j)|)`.
    pub fn contract(&self, weights: &[Vec<f64>]) -> (f64, f64) {
        let mut s = 0.0;
        let mut abs = 0.0;
        for (flat, v) in self.data.iter().enumerate() {
            let idx = multi_index(flat, &self.modes);
            let t = v * idx.iter().enumerate().map(|(k, &i)| weights[k][i]).product::<f64>();
            s += t;
            abs += t.abs();
        }
        (s, abs)
    }

    /// Multilinear interpolation on uniform nodes `lo + i * step` by summing over the 2^d corners.
    pub fn interpolate(&self, lo: f64, step: f64, x: &[f64]) -> (f64, f64) {
        let d = self.modes.len();
        let mut base = vec![0; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let u = (x[k] - lo) / step;
            let j = (u.floor() as usize).min(self.modes[k] - 2);
            base[k] = j;
            frac[k] = u - j as f64;
        }
        let (mut s, mut abs) = (0.0, 0.0);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                let up = (corner >> k) & 1 == 1;
                w *= if up { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.modes[k] + base[k] + up as usize;
            }
            s += w * self.data[flat];
            abs += (w * self.data[flat]).abs();
        }
        (s, abs)
    }
}

pub fn rel_diff(a: &Dense, b: &Dense) -> f64 {
    a.zip(b, |x, y| x - y).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn random_tt(rng: &mut ChaCha8Rng, modes: &[usize], max_rank: usize) -> TensorTrain {
    let d = modes.len();
    let mut ranks = vec![1; d + 1];
    for r in ranks.iter_mut().take(d).skip(1) {
        *r = rng.random_range(1..=max_rank);
    }
    let cores = (0..d)
        .map(|k| {
            let len = ranks[k] * modes[k] * ranks[k + 1];
            Core::new(ranks[k], modes[k], ranks[k + 1], (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        })
        .collect();
    TensorTrain::from_cores(cores).unwrap()
}

pub fn random_factors(rng: &mut ChaCha8Rng, modes: &[usize]) -> Vec<Vec<f64>> {
    modes.iter().map(|&n| (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn kron(factors: &[Vec<f64>], modes: &[usize]) -> KroneckerOperator {
    KroneckerOperator::new(modes.iter().zip(factors).map(|(&n, f)| (n, f.clone())).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform grid with `n` nodes on `[-half, half]` and its (lo, step).
pub fn uniform_grid(d: usize, half: f64, n: usize) -> (Grid, f64, f64) {
    let g = Grid::uniform_n(d, half, n).unwrap();
    (g, -half, 2.0 * half / (n - 1) as f64)
}

/// Largest discrepancy of the six operations against the dense oracle for one random case,
/// each measured relative to the magnitude of the quantity being computed.
pub fn tt_algebra_discrepancy(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = r.random_range(1..=3);
    let n = r.random_range(2..=12);
    // independent mode sizes for the grid-free operations
    let modes: Vec<usize> = (0..d).map(|_| r.random_range(2..=12)).collect();
    let a = random_tt(&mut r, &modes, 4);
    let b = random_tt(&mut r, &modes, 4);
    let (da, db) = (Dense::from_tt(&a), Dense::from_tt(&b));
    let mut worst = 0.0f64;

    worst = worst.max(rel_diff(&Dense::from_tt(&a.add(&b).unwrap()), &da.zip(&db, |x, y| x + y)));
    worst = worst.max(rel_diff(&Dense::from_tt(&a.hadamard(&b).unwrap()), &da.zip(&db, |x, y| x * y)));
    // rounding a train with redundant rank must not change it
    let doubled = a.add(&a).unwrap();
    worst = worst.max(rel_diff(&Dense::from_tt(&doubled.round(1e-14, 1000)), &da.zip(&da, |x, y| x + y)));

    let factors = random_factors(&mut r, &modes);
    worst = worst.max(rel_diff(&Dense::from_tt(&a.apply_kron(&kron(&factors, &modes)).unwrap()), &da.apply_kron(&factors)));

    let weights: Vec<Vec<f64>> = modes.iter().map(|&m| (0..m).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let (exact, scale) = da.contract(&weights);
    worst = worst.max((a.contract_weights(&weights).unwrap() - exact).abs() / scale.max(f64::MIN_POSITIVE));

    let grid_modes = vec![n; d];
    let c = random_tt(&mut r, &grid_modes, 4);
    let dc = Dense::from_tt(&c);
    let (grid, lo, step) = uniform_grid(d, 1.5, n);
    let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.5..1.5)).collect();
    let (exact, scale) = dc.interpolate(lo, step, &x);
    worst = worst.max((c.eval_point(&grid, &x).unwrap() - exact).abs() / scale.max(f64::MIN_POSITIVE));
    worst
}
