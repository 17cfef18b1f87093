//! Tensor-train versus Monte-Carlo evaluation of the normalizer integral
//! `N(x) = int exp(-beta/2 (V(z) + |z - x|^2 / (2T))) dz`.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::potentials::{Gaussian, LpNonconvex, Potential};
use crate::tt::{cross_on_grid, CrossOptions};

use super::config::ExperimentConfig;

/// Samples behind the Monte-Carlo reference of integrands without a closed form.
pub const REFERENCE_SAMPLES: usize = 10_000_000;

/// Coordinate at which `N` is evaluated (every component).
pub const EVAL_COORD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// `gaussian` or `lp-nonconvex`.
    pub case: String,
    pub dim: usize,
    /// `tt`, `mc-matched`, `mc-<budget>`, `mc-at-tt-accuracy` or `reference`.
    pub method: String,
    /// Integrand evaluations (cross evaluations for `tt`).
    pub samples: f64,
    pub estimate: f64,
    pub reference: f64,
    pub rel_error: f64,
    /// 95% half-width relative to the estimate (Monte-Carlo rows only, NaN otherwise).
    pub rel_ci: f64,
    /// Measured seconds; for `mc-at-tt-accuracy` the extrapolated time.
    pub seconds: f64,
}

/// Example-2-style covariance: the coupled 3x3 block followed by an identity block.
pub fn block_covariance(d: usize) -> Result<Vec<f64>> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("the block covariance needs d >= 3, got {d}")));
    }
    let block = [[0.4, 0.2, 0.3], [0.2, 3.0, 0.2], [0.3, 0.2, 6.0]];
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        cov[i * d + i] = 1.0;
    }
    for i in 0..3 {
        for j in 0..3 {
            cov[i * d + j] = block[i][j];
        }
    }
    Ok(cov)
}

/// Closed form of `N(x)` for `V = (z - mu)^T Sigma^-1 (z - mu) / 2`.
pub fn gaussian_normalizer(mean: &[f64], cov: &[f64], x: &[f64], t: f64, beta: f64) -> Result<f64> {
    let d = mean.len();
    let s = DMatrix::from_row_slice(d, d, cov);
    let prec = s.clone().cholesky().ok_or_else(|| Error::NotSpd("covariance".into()))?.inverse();
    let a = prec + DMatrix::identity(d, d) / t;
    let log_det_a = 2.0 * a.cholesky().ok_or_else(|| Error::NotSpd("precision + I/T".into()))?.l().diagonal().map(f64::ln).sum();
    let shifted = s + DMatrix::identity(d, d) * t;
    let r = nalgebra::DVector::from_iterator(d, x.iter().zip(mean).map(|(a, b)| a - b));
    let sol = shifted.cholesky().ok_or_else(|| Error::NotSpd("Sigma + T I".into()))?.solve(&r);
    let log_n = 0.5 * d as f64 * (4.0 * std::f64::consts::PI / beta).ln() - 0.5 * log_det_a - beta * r.dot(&sol) / 4.0;
    Ok(log_n.exp())
}

/// Tensor-train value of `N(x)`: cross of `exp(-beta V / 2)` on the grid, contracted with the
/// quadrature weights times the heat kernel. Returns `(value, evaluations)`.
pub fn tt_normalizer(potential: &dyn Potential, x: &[f64], cfg: &ExperimentConfig) -> Result<(f64, usize)> {
    let grid = cfg.grid.build(potential.dim())?;
    let beta = cfg.beta;
    let opts = CrossOptions { tol: cfg.cross_tol, max_rank: cfg.max_rank, seed: cfg.seed, ..CrossOptions::default() };
    let (tt, report) = cross_on_grid(&grid, |z| (-beta * potential.value(z) / 2.0).exp(), &opts)?;
    let weights: Vec<Vec<f64>> = x
        .iter()
        .map(|&xk| grid.nodes().iter().zip(grid.weights()).map(|(z, w)| w * (-beta * (z - xk).powi(2) / (4.0 * cfg.prox_t)).exp()).collect())
        .collect();
    Ok((tt.contract_weights(&weights)?, report.evaluations))
}

/// Monte-Carlo estimate with proposals `N(x, 2T/beta I)`. Returns `(estimate, standard error)`.
pub fn mc_normalizer(potential: &dyn Potential, x: &[f64], t: f64, beta: f64, samples: usize, seed: u64) -> (f64, f64) {
    let d = x.len();
    let sd = (2.0 * t / beta).sqrt();
    let scale = (4.0 * std::f64::consts::PI * t / beta).powf(d as f64 / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; d];
    let (mut sum, mut sum2) = (0.0, 0.0);
    let n = samples.max(2);
    for _ in 0..n {
        for (zk, xk) in z.iter_mut().zip(x) {
            let e: f64 = StandardNormal.sample(&mut rng);
            *zk = xk + sd * e;
        }
        let f = (-beta * potential.value(&z) / 2.0).exp();
        sum += f;
        sum2 += f * f;
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0) * n as f64 / (n - 1) as f64;
    (scale * mean, scale * (var / n as f64).sqrt())
}

fn bench_case(case: &str, potential: &dyn Potential, reference: Option<f64>, cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let d = potential.dim();
    let x = vec![EVAL_COORD; d];
    let mut rows = Vec::new();
    let row = |method: String, samples: f64, estimate: f64, reference: f64, rel_ci: f64, seconds: f64| BenchRow {
        case: case.to_string(),
        dim: d,
        method,
        samples,
        estimate,
        reference,
        rel_error: ((estimate - reference) / reference).abs(),
        rel_ci,
        seconds,
    };

    let reference = match reference {
        Some(r) => r,
        None => {
            let start = Instant::now();
            let (r, se) = mc_normalizer(potential, &x, cfg.prox_t, cfg.beta, REFERENCE_SAMPLES, cfg.seed ^ 0x5eed);
            rows.push(row("reference".into(), REFERENCE_SAMPLES as f64, r, r, 1.96 * se / r, start.elapsed().as_secs_f64()));
            r
        }
    };

    let start = Instant::now();
    let (tt, evals) = tt_normalizer(potential, &x, cfg)?;
    let tt_seconds = start.elapsed().as_secs_f64();
    let tt_row = row("tt".into(), evals as f64, tt, reference, f64::NAN, tt_seconds);
    let tt_error = tt_row.rel_error;
    rows.push(tt_row);

    let mut budgets: Vec<(String, usize)> = vec![("mc-matched".into(), evals)];
    budgets.extend(cfg.bench_mc_budget.iter().map(|&b| (format!("mc-{b}"), b)));
    let mut per_sample = f64::NAN;
    let mut rel_sd = f64::NAN;
    for (i, (name, n)) in budgets.into_iter().enumerate() {
        let start = Instant::now();
        let (est, se) = mc_normalizer(potential, &x, cfg.prox_t, cfg.beta, n, cfg.seed.wrapping_add(i as u64 + 1));
        let secs = start.elapsed().as_secs_f64();
        if i == 0 {
            per_sample = secs / n.max(2) as f64;
            rel_sd = se * (n.max(2) as f64).sqrt() / reference.abs();
        }
        rows.push(row(name, n as f64, est, reference, 1.96 * se / est.abs(), secs));
    }
    // samples a Monte-Carlo run needs for a standard error equal to the tensor-train error
    let needed = (rel_sd / tt_error.max(f64::EPSILON)).powi(2);
    rows.push(row("mc-at-tt-accuracy".into(), needed, reference, reference, tt_error, needed * per_sample));
    Ok(rows)
}

/// Benchmark rows for the Gaussian integrand at every dimension in `cfg.bench_dims`, then the
/// nonconvex integrand at `cfg.bench_lp_dim`.
pub fn bench_integration(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &d in &cfg.bench_dims {
        let cov = block_covariance(d)?;
        let mean = vec![0.0; d];
        let exact = gaussian_normalizer(&mean, &cov, &vec![EVAL_COORD; d], cfg.prox_t, cfg.beta)?;
        let g = Gaussian::new(mean, cov)?;
        rows.extend(bench_case("gaussian", &g, Some(exact), cfg)?);
    }
    if cfg.bench_lp_dim > 0 {
        let a: Vec<f64> = (0..cfg.bench_lp_dim).map(|k| if k < 2 { 1.0 } else { 0.0 }).collect();
        rows.extend(bench_case("lp-nonconvex", &LpNonconvex::new(a), None, cfg)?);
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], w: &mut W) -> Result<()> {
    writeln!(w, "case,dim,method,samples,estimate,reference,rel_error,rel_ci,seconds")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{},{},{}", r.case, r.dim, r.method, r.samples, r.estimate, r.reference, r.rel_error, r.rel_ci, r.seconds)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::IsotropicGaussian;

    #[test]
    fn closed_form_matches_one_dimensional_quadrature() {
        // direct trapezoid on a fine grid
        let (t, beta, sigma, x) = (0.1, 1.3, 0.7f64, 0.4);
        let f = |z: f64| (-beta / 2.0 * (z * z / (2.0 * sigma * sigma) + (z - x).powi(2) / (2.0 * t))).exp();
        let n = 200_001;
        let h = 20.0 / (n - 1) as f64;
        let direct: f64 = (0..n).map(|i| f(-10.0 + i as f64 * h)).sum::<f64>() * h;
        let closed = gaussian_normalizer(&[0.0], &[sigma * sigma], &[x], t, beta).unwrap();
        assert!((direct / closed - 1.0).abs() < 1e-10, "{direct} {closed}");
    }

    #[test]
    fn monte_carlo_is_unbiased_within_its_error() {
        let g = IsotropicGaussian::new(2, 1.0, vec![0.0, 0.0]);
        let exact = gaussian_normalizer(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], &[0.5, 0.5], 0.1, 1.0).unwrap();
        let (est, se) = mc_normalizer(&g, &[0.5, 0.5], 0.1, 1.0, 100_000, 9);
        assert!((est - exact).abs() < 4.0 * se, "{est} {exact} {se}");
    }

    #[test]
    fn block_covariance_embeds_the_block() {
        let c = block_covariance(4).unwrap();
        assert_eq!(&c[0..4], &[0.4, 0.2, 0.3, 0.0]);
        assert_eq!(c[15], 1.0);
        assert!(block_covariance(2).is_err());
    }
}
