//! Target potentials `V` with `rho* ~ exp(-beta V)`.

mod inverse;
mod measurement;
mod targets;

pub use inverse::{BayesElliptic, BayesHeat, BayesWave};
pub use measurement::MeasurementSet;
pub use targets::{DoubleMoon, Gaussian, GaussianMixture, IsotropicGaussian, LpNonconvex};

/// Smoothing width for `|t| ~ sqrt(t^2 + eps^2)`.
pub const SMOOTHING: f64 = 1e-8;

pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn name(&self) -> String;

    /// Mean of `exp(-beta V)` when known in closed form (independent of beta).
    fn known_mean(&self) -> Option<Vec<f64>> {
        None
    }

    /// Covariance of `exp(-V)`, row-major; the beta-scaled target has covariance `cov / beta`.
    fn known_cov(&self) -> Option<Vec<f64>> {
        None
    }

    /// True when `V` is exactly quadratic, so `known_mean`/`known_cov` describe `exp(-beta V)`
    /// for every beta and the normalizer has a closed form.
    fn is_gaussian(&self) -> bool {
        false
    }

    /// Ground-truth parameter for inverse problems.
    fn truth(&self) -> Option<Vec<f64>> {
        None
    }

    fn grad_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }
}

pub(crate) fn smooth_abs(t: f64) -> f64 {
    (t * t + SMOOTHING * SMOOTHING).sqrt()
}

/// Relative mismatch between `gradient` and central differences at `x`.
pub fn gradient_check(p: &dyn Potential, x: &[f64], step: f64) -> f64 {
    let g = p.grad_vec(x);
    let mut fd = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for k in 0..x.len() {
        y[k] = x[k] + step;
        let up = p.value(&y);
        y[k] = x[k] - step;
        let down = p.value(&y);
        y[k] = x[k];
        fd[k] = (up - down) / (2.0 * step);
    }
    let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt()).max(1e-8);
    num / den
}
