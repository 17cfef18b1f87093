//! Closed-form evolution of Gaussian ensembles under the exact proximal dynamics.
//!
//! For a Gaussian target `V(x) = (x - mu)^T Sigma^-1 (x - mu) / 2` and a Gaussian ensemble
//! `N(mu_k, Sigma_k)` every quantity of the sampler stays Gaussian, so the particle update is
//! an affine map whose moments can be propagated exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Mean and covariance of a Gaussian ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Gaussian target for the recursions: `exp(-beta V)` has covariance `cov / beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Which density estimate of `rho_0` the sampler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityEstimate {
    /// Corrected kernel density estimate with the bandwidth `Sigma_k / 2 - T^2 beta^-2 Sigma_k^-1`.
    Corrected,
    /// Empirical particle measure (no bandwidth correction).
    Empirical,
}

fn inverse_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse()).ok_or_else(|| Error::NotSpd(what.to_string()))
}

impl GaussianState {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<GaussianState> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::Shape(format!("covariance of length {} for dimension {d}", cov.len())));
        }
        Ok(GaussianState { mean: DVector::from_vec(mean), cov: DMatrix::from_row_slice(d, d, &cov) })
    }

    pub fn isotropic(d: usize, mean: f64, var: f64) -> GaussianState {
        GaussianState { mean: DVector::from_element(d, mean), cov: DMatrix::identity(d, d) * var }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

impl GaussianTarget {
    pub fn isotropic(d: usize, sigma: f64, center: f64) -> GaussianTarget {
        GaussianTarget { mean: DVector::from_element(d, center), cov: DMatrix::identity(d, d) * (sigma * sigma) }
    }

    /// Stationary state `(mu, Sigma / beta)`.
    pub fn stationary(&self, beta: f64) -> GaussianState {
        GaussianState { mean: self.mean.clone(), cov: &self.cov / beta }
    }
}

/// Mean and covariance of `rho_T` for the given ensemble state.
pub fn proximal_moments(state: &GaussianState, target: &GaussianTarget, t: f64, beta: f64, density: DensityEstimate) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = state.dim();
    if target.mean.len() != d || target.cov.nrows() != d {
        return Err(Error::Shape("state and target dimensions differ".into()));
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let sigma_inv = inverse_spd(&target.cov, "target covariance")?;
    let k = inverse_spd(&(&eye + &sigma_inv * t), "I + T Sigma^-1")?;
    let spread = match density {
        DensityEstimate::Corrected => {
            let ck_inv = inverse_spd(&state.cov, "ensemble covariance")?;
            let h = &state.cov * 0.5 - ck_inv * (t * t / (beta * beta));
            if h.clone().cholesky().is_none() {
                return Err(Error::NotSpd("bandwidth Sigma_k/2 - T^2 beta^-2 Sigma_k^-1".into()));
            }
            h + &state.cov * 0.5
        }
        DensityEstimate::Empirical => state.cov.clone(),
    };
    let cov_t = &k * (2.0 * t / beta) + &k * spread * k.transpose();
    let mean_t = &k * &state.mean + (&eye - &k) * &target.mean;
    Ok((mean_t, (&cov_t + cov_t.transpose()) * 0.5))
}

/// One step of the particle update `x <- x - h (grad V + beta^-1 grad log rho_T)`.
pub fn oracle_step(state: &GaussianState, target: &GaussianTarget, t: f64, h: f64, beta: f64, density: DensityEstimate) -> Result<GaussianState> {
    let d = state.dim();
    let (mean_t, cov_t) = proximal_moments(state, target, t, beta, density)?;
    let sigma_inv = inverse_spd(&target.cov, "target covariance")?;
    let cov_t_inv = inverse_spd(&cov_t, "proximal covariance")?;
    let a = DMatrix::<f64>::identity(d, d) - &sigma_inv * h + &cov_t_inv * (h / beta);
    let mean = &state.mean - &sigma_inv * (&state.mean - &target.mean) * h + &cov_t_inv * (&state.mean - &mean_t) * (h / beta);
    let cov = &a * &state.cov * a.transpose();
    Ok(GaussianState { mean, cov: (&cov + cov.transpose()) * 0.5 })
}

/// Scalar form of the recursion for target `N(0, sigma2)` (before the beta scaling):
/// returns `(m_{k+1}, s2_{k+1})`.
pub fn scalar_recursion(m: f64, s2: f64, sigma2: f64, t: f64, h: f64, beta: f64) -> Result<(f64, f64)> {
    scalar_step(m, s2, sigma2, t, h, beta, DensityEstimate::Corrected)
}

/// Same recursion with the empirical density estimate.
pub fn biased_recursion(m: f64, s2: f64, sigma2: f64, t: f64, h: f64, beta: f64) -> Result<(f64, f64)> {
    scalar_step(m, s2, sigma2, t, h, beta, DensityEstimate::Empirical)
}

fn scalar_step(m: f64, s2: f64, sigma2: f64, t: f64, h: f64, beta: f64, density: DensityEstimate) -> Result<(f64, f64)> {
    if !(s2 > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::NonPositiveDenominator(s2.min(sigma2)));
    }
    let spread = match density {
        DensityEstimate::Corrected => s2 - t * t / (beta * beta * s2),
        DensityEstimate::Empirical => s2,
    };
    let k = sigma2 / (sigma2 + t);
    // cov_T = k^2 (spread + 2 T beta^-1 (1 + T / sigma^2))
    let denom = spread + 2.0 * t / beta * (1.0 + t / sigma2);
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator(denom));
    }
    let cov_t = k * k * denom;
    let mean_t = k * m;
    let a = 1.0 - h / sigma2 + h / (beta * cov_t);
    let m_next = m - h * m / sigma2 + h / (beta * cov_t) * (m - mean_t);
    Ok((m_next, a * a * s2))
}

/// `(3/2) min{1, sqrt(sum lambda_i^2)}` with `lambda_i` the eigenvalues of `Sigma1^-1 Sigma2 - I`.
pub fn tv_gaussians_same_mean(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let d = s1.nrows();
    if s2.nrows() != d || s1.ncols() != d || s2.ncols() != d {
        return Err(Error::Shape("covariances of different sizes".into()));
    }
    let l1 = (s1 + s1.transpose()) * 0.5;
    let chol = l1.cholesky().ok_or_else(|| Error::NotSpd("first covariance".into()))?;
    if ((s2 + s2.transpose()) * 0.5).cholesky().is_none() {
        return Err(Error::NotSpd("second covariance".into()));
    }
    // similar symmetric matrix L^-1 S2 L^-T - I has the same eigenvalues
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::NotSpd("first covariance".into()))?;
    let m = &linv * s2 * linv.transpose() - DMatrix::<f64>::identity(d, d);
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigenvalues();
    let s: f64 = eig.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(1.5 * s.min(1.0))
}

/// `(1/sqrt 2) max{ |Sigma1^-1|_F |Sigma1 - Sigma2|_F, |Sigma1^-1/2 (mu1 - mu2)| }` for commuting covariances.
pub fn tv_upper_bound(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let comm = (s1 * s2 - s2 * s1).norm();
    if comm > 1e-10 {
        return Err(Error::InvalidArgument(format!("covariances do not commute (|[S1,S2]|_F = {comm:e})")));
    }
    let inv = inverse_spd(s1, "first covariance")?;
    let cov_term = inv.norm() * (s1 - s2).norm();
    let dm = mu1 - mu2;
    let mean_term = (dm.transpose() * &inv * &dm)[(0, 0)].max(0.0).sqrt();
    Ok(cov_term.max(mean_term) / 2f64.sqrt())
}

/// Smallest `k` with `(3/2) sqrt(d) (1 - h / sigma_m^2)^k <= eps`.
pub fn mixing_time_bound(eps: f64, d: usize, h: f64, sigma_m: f64) -> Result<usize> {
    if !(eps > 0.0) || d == 0 || !(h > 0.0) || !(sigma_m > 0.0) {
        return Err(Error::InvalidArgument("mixing time needs eps, d, h, sigma_m > 0".into()));
    }
    if h > sigma_m * sigma_m / 4.0 {
        return Err(Error::InvalidArgument(format!("step {h} exceeds sigma_m^2/4 = {}", sigma_m * sigma_m / 4.0)));
    }
    let start = 1.5 * (d as f64).sqrt();
    if start <= eps {
        return Ok(0);
    }
    let rate = 1.0 - h / (sigma_m * sigma_m);
    let mut k = ((eps / start).ln() / rate.ln()).ceil().max(0.0) as usize;
    // guard against rounding on either side of the boundary
    while k > 0 && start * rate.powi(k as i32 - 1) <= eps {
        k -= 1;
    }
    while start * rate.powi(k as i32) > eps {
        k += 1;
    }
    Ok(k)
}

/// Contraction factor of the mean recursion in the stationary-variance regime (`beta = 1`).
pub fn bayes_mean_factor(sigma2: f64, t: f64, h: f64) -> Result<f64> {
    let denom = sigma2 * sigma2 + 2.0 * t * sigma2 - t * t;
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator(denom));
    }
    Ok(1.0 - h * (t + sigma2) / denom)
}

pub fn bayes_mean_recursion(m: f64, sigma2: f64, t: f64, h: f64) -> Result<f64> {
    Ok(bayes_mean_factor(sigma2, t, h)? * m)
}

/// Trace of `(m_k, s2_k)` for `iterations` steps of either recursion; stops early on error.
#[allow(clippy::too_many_arguments)]
pub fn recursion_trace(m0: f64, s2_0: f64, sigma2: f64, t: f64, h: f64, beta: f64, density: DensityEstimate, iterations: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(iterations + 1);
    let (mut m, mut s2) = (m0, s2_0);
    out.push((m, s2));
    for _ in 0..iterations {
        (m, s2) = scalar_step(m, s2, sigma2, t, h, beta, density)?;
        out.push((m, s2));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proximal_moments_direct_arithmetic() {
        let s = GaussianState::isotropic(1, 0.0, 1.0);
        let tg = GaussianTarget::isotropic(1, 1.0, 0.0);
        let (_, c) = proximal_moments(&s, &tg, 0.1, 1.0, DensityEstimate::Corrected).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12);
        // T = 0 leaves the ensemble untouched
        let s = GaussianState::new(vec![0.3, -0.2], vec![0.7, 0.1, 0.1, 1.4]).unwrap();
        let tg = GaussianTarget { mean: DVector::from_vec(vec![1.0, 2.0]), cov: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]) };
        let (m, c) = proximal_moments(&s, &tg, 0.0, 1.0, DensityEstimate::Corrected).unwrap();
        assert!((c - &s.cov).norm() < 1e-14);
        assert!((m - &s.mean).norm() < 1e-14);
    }

    #[test]
    fn stationary_point_is_fixed() {
        let tg = GaussianTarget { mean: DVector::from_vec(vec![1.0, -2.0]), cov: DMatrix::from_row_slice(2, 2, &[0.8, 0.3, 0.3, 1.7]) };
        for beta in [0.5, 1.0, 3.0] {
            let s = tg.stationary(beta);
            let n = oracle_step(&s, &tg, 0.1, 0.1, beta, DensityEstimate::Corrected).unwrap();
            assert!((n.cov - &s.cov).norm() < 1e-12);
            assert!((n.mean - &s.mean).norm() < 1e-12);
        }
        let s = tg.stationary(1.0);
        assert_eq!(oracle_step(&s, &tg, 0.1, 0.0, 1.0, DensityEstimate::Corrected).unwrap(), s);
    }

    #[test]
    fn diagonal_step_matches_scalar() {
        let tg = GaussianTarget { mean: DVector::zeros(2), cov: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])) };
        let s = GaussianState::new(vec![0.5, -0.4], vec![0.64, 0.0, 0.0, 1.5]).unwrap();
        let n = oracle_step(&s, &tg, 0.1, 0.1, 1.0, DensityEstimate::Corrected).unwrap();
        for (i, s2) in [(0, 1.0), (1, 2.0)] {
            let (m, v) = scalar_recursion(s.mean[i], s.cov[(i, i)], s2, 0.1, 0.1, 1.0).unwrap();
            assert!((m - n.mean[i]).abs() < 1e-14);
            assert!((v - n.cov[(i, i)]).abs() < 1e-14);
        }
        assert!(n.cov[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn convergence_from_below() {
        let mut s = 0.8f64;
        for _ in 0..200 {
            let before = (s - 1.0).abs();
            let (_, v) = scalar_recursion(0.0, s * s, 1.0, 0.1, 0.1, 1.0).unwrap();
            s = v.sqrt();
            assert!((s - 1.0).abs() <= 0.9 * before + 1e-15);
        }
        let trace = recursion_trace(0.0, 0.64, 1.0, 0.1, 0.1, 1.0, DensityEstimate::Corrected, 400).unwrap();
        assert!((trace.last().unwrap().1 - 1.0).abs() < 1e-8);
        assert!(trace.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn biased_fixed_point_differs() {
        let trace = recursion_trace(0.0, 1.0, 1.0, 0.1, 0.1, 1.0, DensityEstimate::Empirical, 2000).unwrap();
        let v = trace.last().unwrap().1;
        assert!((v - 1.0).abs() > 1e-3 && (v - 1.0).abs() < 0.05, "{v}");
        let (_, a) = biased_recursion(0.3, 0.7, 1.0, 0.0, 0.1, 1.0).unwrap();
        let (_, b) = scalar_recursion(0.3, 0.7, 1.0, 0.0, 0.1, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn total_variation_formulas() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let four = DMatrix::from_element(1, 1, 4.0);
        assert_eq!(tv_gaussians_same_mean(&one, &one).unwrap(), 0.0);
        assert!((tv_gaussians_same_mean(&one, &four).unwrap() - 1.5).abs() < 1e-15);
        let eye = DMatrix::<f64>::identity(3, 3);
        let mut dm = DVector::zeros(3);
        dm[0] = 0.3;
        let b = tv_upper_bound(&DVector::zeros(3), &eye, &dm, &eye).unwrap();
        assert!((b - 0.3 / 2f64.sqrt()).abs() < 1e-15);
        let nc = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        assert!(tv_upper_bound(&DVector::zeros(2), &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0])), &DVector::zeros(2), &nc).is_err());
    }

    #[test]
    fn mixing_time_values() {
        // ceil(log(0.01 / (1.5 sqrt 6)) / log 0.9) = ceil(56.06)
        assert_eq!(mixing_time_bound(0.01, 6, 0.1, 1.0).unwrap(), 57);
        assert_eq!(mixing_time_bound(1.5 * 6f64.sqrt(), 6, 0.1, 1.0).unwrap(), 0);
        let a = mixing_time_bound(0.01, 6, 0.1, 1.0).unwrap();
        let b = mixing_time_bound(0.01, 12, 0.1, 1.0).unwrap();
        assert!(b - a <= ((2f64.sqrt()).ln() / -(0.9f64).ln()).ceil() as usize);
    }

    #[test]
    fn bayes_mean_contraction() {
        assert!((bayes_mean_factor(1.0, 0.1, 0.1).unwrap() - 0.907563).abs() < 1e-6);
        assert_eq!(bayes_mean_recursion(0.0, 1.0, 0.1, 0.1).unwrap(), 0.0);
    }
}
