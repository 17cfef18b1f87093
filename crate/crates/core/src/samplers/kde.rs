//! Gaussian kernel density estimate of the ensemble as a tensor train.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{svd, Mat};
use crate::tt::TensorTrain;

/// Basis cutoff relative to the rounding tolerance; never below 1e-14.
const BASIS_CUTOFF_FACTOR: f64 = 1e-2;

/// `(1/M) sum_j N(x_j, diag(bandwidth))` on the grid.
///
/// Every summand is a rank-1 train. The one-dimensional bumps of each mode are first
/// compressed onto an orthonormal basis (left singular vectors of the `n x M` bump matrix),
/// the rank-1 terms are summed in that small coefficient space with rounding after every
/// `batch` additions, and the result is expanded back onto the grid.
pub fn build_rho0_tt(points: &[f64], bandwidth: &[f64], grid: &Grid, batch: usize, tol: f64, max_rank: usize) -> Result<TensorTrain> {
    let d = grid.dim();
    if bandwidth.len() != d || points.is_empty() || !points.len().is_multiple_of(d) {
        return Err(Error::Shape(format!("{} coordinates with {} bandwidths on a {d}-dimensional grid", points.len(), bandwidth.len())));
    }
    if let Some(h) = bandwidth.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let m = points.len() / d;
    let z = grid.nodes();
    let n = z.len();

    let cutoff = (tol * BASIS_CUTOFF_FACTOR).max(1e-14);
    let mut bases = Vec::with_capacity(d);
    let mut coeffs = Vec::with_capacity(d);
    for k in 0..d {
        let h = bandwidth[k];
        let norm = 1.0 / (2.0 * std::f64::consts::PI * h).sqrt();
        let bumps = Mat::from_fn(n, m, |i, j| norm * (-(z[i] - points[j * d + k]).powi(2) / (2.0 * h)).exp());
        let dec = svd(&bumps);
        let s0 = dec.s.first().copied().unwrap_or(0.0);
        let r = dec.s.iter().take_while(|&&s| s > cutoff * s0).count().max(1);
        let u = dec.u.columns(0, r).clone_owned();
        coeffs.push(u.transpose() * &bumps);
        bases.push(u);
    }

    let scale = 1.0 / m as f64;
    let terms: Vec<TensorTrain> = (0..m)
        .map(|j| {
            let vecs: Vec<Vec<f64>> = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let f = if k == 0 { scale } else { 1.0 };
                    c.column(j).iter().map(|v| v * f).collect()
                })
                .collect();
            TensorTrain::rank_one(&vecs)
        })
        .collect();
    let core = TensorTrain::sum_rounded(&terms, batch, tol, max_rank)?;
    let refs: Vec<&Mat> = bases.iter().collect();
    core.apply_modes(&refs)
}

/// Direct evaluation of the same mixture at a point (for checks).
pub fn mixture_density(points: &[f64], bandwidth: &[f64], x: &[f64]) -> f64 {
    let d = bandwidth.len();
    let m = points.len() / d;
    let mut total = 0.0;
    for j in 0..m {
        let mut v = 1.0;
        for k in 0..d {
            let h = bandwidth[k];
            v *= (-(x[k] - points[j * d + k]).powi(2) / (2.0 * h)).exp() / (2.0 * std::f64::consts::PI * h).sqrt();
        }
        total += v;
    }
    total / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::ParticleEnsemble;

    #[test]
    fn single_bump_has_unit_mass() {
        let g = Grid::uniform(2, 6.0, 32).unwrap();
        let rho = build_rho0_tt(&[0.3, -0.5], &[0.25, 0.25], &g, 8, 1e-10, 64).unwrap();
        let mass = rho.integrate(&g).unwrap();
        assert!((0.995..=1.005).contains(&mass), "{mass}");
    }

    #[test]
    fn far_apart_pair_is_rank_two() {
        let g = Grid::uniform(3, 6.0, 8).unwrap();
        let rho = build_rho0_tt(&[-3.0, -3.0, -3.0, 3.0, 3.0, 3.0], &[0.1; 3], &g, 8, 1e-10, 64).unwrap();
        assert!(rho.max_rank() <= 2);
    }

    #[test]
    fn matches_direct_mixture() {
        let g = Grid::uniform(2, 6.0, 16).unwrap();
        let e = ParticleEnsemble::gaussian(100, &[0.0, 0.0], 1.0, 3);
        let h = [0.49, 0.49];
        let rho = build_rho0_tt(e.positions(), &h, &g, 8, 1e-12, 200).unwrap();
        let mut worst = 0.0f64;
        for a in (0..g.len()).step_by(7) {
            for b in (0..g.len()).step_by(5) {
                let x = [g.nodes()[a], g.nodes()[b]];
                let exact = mixture_density(e.positions(), &h, &x);
                worst = worst.max((rho.eval(&[a, b]).unwrap() - exact).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }
}
