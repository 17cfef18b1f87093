use nalgebra::DMatrix;

use super::{smooth_abs, Potential};
use crate::error::{Error, Result};

/// `V = |x - a|^2 / (2 sigma^2)`.
#[derive(Debug, Clone)]
pub struct IsotropicGaussian {
    sigma: f64,
    center: Vec<f64>,
}

impl IsotropicGaussian {
    pub fn new(dim: usize, sigma: f64, center: Vec<f64>) -> IsotropicGaussian {
        assert_eq!(center.len(), dim, "center has the wrong length");
        assert!(sigma > 0.0, "sigma must be positive");
        IsotropicGaussian { sigma, center }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Potential for IsotropicGaussian {
    fn is_gaussian(&self) -> bool {
        true
    }
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * self.sigma * self.sigma)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s2 = self.sigma * self.sigma;
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.center) {
            *o = (a - b) / s2;
        }
    }
    fn name(&self) -> String {
        format!("isotropic-gaussian(d={}, sigma={})", self.dim(), self.sigma)
    }
    fn known_mean(&self) -> Option<Vec<f64>> {
        Some(self.center.clone())
    }
    fn known_cov(&self) -> Option<Vec<f64>> {
        let d = self.dim();
        let s2 = self.sigma * self.sigma;
        Some((0..d * d).map(|i| if i / d == i % d { s2 } else { 0.0 }).collect())
    }
}

/// `V = (x - mu)^T Sigma^{-1} (x - mu) / 2` for a general SPD `Sigma`.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: Vec<f64>,
    precision: Vec<f64>,
    label: String,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Gaussian> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::Shape(format!("covariance needs {} entries", d * d)));
        }
        let m = DMatrix::from_row_slice(d, d, &cov);
        if (&m - m.transpose()).norm() > 1e-12 * m.norm() {
            return Err(Error::NotSpd("covariance is not symmetric".into()));
        }
        let chol = m.cholesky().ok_or_else(|| Error::NotSpd("covariance is not positive definite".into()))?;
        let p = chol.inverse();
        let precision = (0..d * d).map(|i| p[(i / d, i % d)]).collect();
        Ok(Gaussian { mean, cov, precision, label: "gaussian".into() })
    }

    /// Six-dimensional target with a coupled 3x3 block and an identity block.
    pub fn block_spd() -> Gaussian {
        let block = [[0.4, 0.2, 0.3], [0.2, 3.0, 0.2], [0.3, 0.2, 6.0]];
        let mut cov = vec![0.0; 36];
        for i in 0..3 {
            for j in 0..3 {
                cov[i * 6 + j] = block[i][j];
            }
            cov[(i + 3) * 6 + i + 3] = 1.0;
        }
        let mut g = Gaussian::new(vec![0.0; 6], cov).expect("block matrix is SPD");
        g.label = "block-spd-gaussian".into();
        g
    }
}

impl Potential for Gaussian {
    fn is_gaussian(&self) -> bool {
        true
    }
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let r: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += r[i] * self.precision[i * d + j] * r[j];
            }
        }
        s / 2.0
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..d).map(|j| self.precision[i * d + j] * (x[j] - self.mean[j])).sum();
        }
    }
    fn name(&self) -> String {
        format!("{}(d={})", self.label, self.dim())
    }
    fn known_mean(&self) -> Option<Vec<f64>> {
        Some(self.mean.clone())
    }
    fn known_cov(&self) -> Option<Vec<f64>> {
        Some(self.cov.clone())
    }
}

/// Equal-weight mixture of unit Gaussians at `a` and `-a`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    a: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(a: Vec<f64>) -> GaussianMixture {
        GaussianMixture { a }
    }

    fn exponents(&self, x: &[f64]) -> (f64, f64) {
        let p: f64 = x.iter().zip(&self.a).map(|(u, v)| (u - v) * (u - v)).sum();
        let m: f64 = x.iter().zip(&self.a).map(|(u, v)| (u + v) * (u + v)).sum();
        (-p / 2.0, -m / 2.0)
    }
}

impl Potential for GaussianMixture {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let (e1, e2) = self.exponents(x);
        let m = e1.max(e2);
        -(m + ((e1 - m).exp() + (e2 - m).exp()).ln() - std::f64::consts::LN_2)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (e1, e2) = self.exponents(x);
        // weight of the +a component
        let w = 1.0 / (1.0 + (e2 - e1).exp());
        for ((o, xi), ai) in out.iter_mut().zip(x).zip(&self.a) {
            *o = w * (xi - ai) + (1.0 - w) * (xi + ai);
        }
    }
    fn name(&self) -> String {
        format!("gaussian-mixture(d={})", self.dim())
    }
    fn known_mean(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim()])
    }
    fn known_cov(&self) -> Option<Vec<f64>> {
        let d = self.dim();
        Some((0..d * d).map(|i| (if i / d == i % d { 1.0 } else { 0.0 }) + self.a[i / d] * self.a[i % d]).collect())
    }
}

/// `rho* ~ exp(-2(|x| - a)^2) [exp(-2(x_1 - a)^2) + exp(-2(x_1 + a)^2)]`.
#[derive(Debug, Clone)]
pub struct DoubleMoon {
    dim: usize,
    a: f64,
}

impl DoubleMoon {
    pub fn new(dim: usize, a: f64) -> DoubleMoon {
        assert!(a > 0.0 && dim >= 1);
        DoubleMoon { dim, a }
    }
}

impl Potential for DoubleMoon {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r = smooth_abs(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let e1 = -2.0 * (x[0] - self.a).powi(2);
        let e2 = -2.0 * (x[0] + self.a).powi(2);
        let m = e1.max(e2);
        2.0 * (r - self.a).powi(2) - (m + ((e1 - m).exp() + (e2 - m).exp()).ln())
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let r = (norm2 + super::SMOOTHING * super::SMOOTHING).sqrt();
        let radial = 4.0 * (r - self.a) / r;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = radial * xi;
        }
        let e1 = -2.0 * (x[0] - self.a).powi(2);
        let e2 = -2.0 * (x[0] + self.a).powi(2);
        let w = 1.0 / (1.0 + (e2 - e1).exp());
        out[0] += w * 4.0 * (x[0] - self.a) + (1.0 - w) * 4.0 * (x[0] + self.a);
    }
    fn name(&self) -> String {
        format!("double-moon(d={}, a={})", self.dim, self.a)
    }
}

/// `V = (sum_j |x_j - a_j|^{1/2})^2` with smoothed absolute values.
#[derive(Debug, Clone)]
pub struct LpNonconvex {
    a: Vec<f64>,
}

impl LpNonconvex {
    pub fn new(a: Vec<f64>) -> LpNonconvex {
        LpNonconvex { a }
    }
}

impl Potential for LpNonconvex {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().zip(&self.a).map(|(u, v)| smooth_abs(u - v).sqrt()).sum();
        s * s
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s: f64 = x.iter().zip(&self.a).map(|(u, v)| smooth_abs(u - v).sqrt()).sum();
        for ((o, u), v) in out.iter_mut().zip(x).zip(&self.a) {
            let t = u - v;
            let m = smooth_abs(t);
            *o = s * t / m.powf(1.5);
        }
    }
    fn name(&self) -> String {
        format!("lp-nonconvex(d={})", self.dim())
    }
    fn known_mean(&self) -> Option<Vec<f64>> {
        // V is symmetric about a in every coordinate
        Some(self.a.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::gradient_check;

    #[test]
    fn isotropic_minimum() {
        let p = IsotropicGaussian::new(3, 0.2, vec![1.0, -1.0, 0.5]);
        assert_eq!(p.value(&[1.0, -1.0, 0.5]), 0.0);
        assert!(p.grad_vec(&[1.0, -1.0, 0.5]).iter().all(|&g| g == 0.0));
        let x = [0.3, 0.1, -0.2];
        let y: Vec<f64> = x.iter().zip(&[1.0, -1.0, 0.5]).map(|(x, a)| 2.0 * x - a).collect();
        let gx = p.grad_vec(&x);
        let gy = p.grad_vec(&y);
        for k in 0..3 {
            assert!((gy[k] - 2.0 * gx[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn block_matrix_entries() {
        let g = Gaussian::block_spd();
        let c = g.known_cov().unwrap();
        assert_eq!(&c[0..3], &[0.4, 0.2, 0.3]);
        assert_eq!(&c[6..9], &[0.2, 3.0, 0.2]);
        assert_eq!(&c[12..15], &[0.3, 0.2, 6.0]);
        assert_eq!(c[21], 1.0);
        assert!(g.grad_vec(&[0.0; 6]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mixture_is_symmetric() {
        let p = GaussianMixture::new(vec![2.0, 0.0, 0.0, 0.0]);
        let x = [0.7, -0.2, 1.1, 0.4];
        let mx: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((p.value(&x) - p.value(&mx)).abs() < 1e-12);
        assert!(p.grad_vec(&[0.0; 4]).iter().all(|v| v.abs() < 1e-15));
        assert!(gradient_check(&p, &x, 1e-5) < 1e-6);
    }

    #[test]
    fn double_moon_symmetry_and_ring() {
        let p = DoubleMoon::new(6, 2.0);
        let x = [0.4, 1.0, -0.3, 0.2, 0.1, 0.5];
        let mut y = x;
        y[0] = -y[0];
        assert!((p.value(&x) - p.value(&y)).abs() < 1e-12);
        // on the sphere |x| = a with x_1 = a the radial term vanishes
        let on = [2.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let e2 = -2.0f64 * 16.0;
        let expected = -(1.0 + e2.exp()).ln();
        assert!((p.value(&on) - expected).abs() < 1e-12);
        assert!(gradient_check(&p, &x, 1e-5) < 1e-6);
    }

    #[test]
    fn lp_minimum_and_gradient() {
        let p = LpNonconvex::new(vec![1.0, 1.0, 0.0]);
        assert!(p.value(&[1.0, 1.0, 0.0]) < 1e-7);
        assert!(gradient_check(&p, &[0.3, 1.7, -0.9], 1e-5) < 1e-6);
    }
}
