//! Posterior potentials for three synthetic inverse problems.

use super::{smooth_abs, MeasurementSet, Potential};

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
}

/// Recover sine coefficients of the initial heat profile on `[0, pi]` from the solution
/// at time `t_heat`: `V = |u(theta) - y|^2 / (2 sigma^2) + tau |theta|_1`.
#[derive(Debug, Clone)]
pub struct BayesHeat {
    theta_star: Vec<f64>,
    sigma: f64,
    tau: f64,
    /// `J[i][k] = exp(-k^2 t) sin(k x_i)`
    jacobian: Vec<Vec<f64>>,
    pub data: MeasurementSet,
}

impl BayesHeat {
    pub const SENSORS: usize = 50;

    pub fn new(theta_star: Vec<f64>, t_heat: f64, sigma: f64, tau: f64, seed: u64) -> BayesHeat {
        let d = theta_star.len();
        let xs: Vec<f64> = (0..Self::SENSORS).map(|i| std::f64::consts::PI * i as f64 / (Self::SENSORS - 1) as f64).collect();
        let jacobian: Vec<Vec<f64>> = xs
            .iter()
            .map(|&x| (1..=d).map(|k| (-((k * k) as f64) * t_heat).exp() * (k as f64 * x).sin()).collect())
            .collect();
        let clean: Vec<f64> = jacobian.iter().map(|row| row.iter().zip(&theta_star).map(|(a, b)| a * b).sum()).collect();
        let params = vec![
            ("t_heat".to_string(), format!("{t_heat}")),
            ("tau".to_string(), format!("{tau}")),
            ("theta_star".to_string(), fmt_vec(&theta_star)),
        ];
        let data = MeasurementSet::generate("bayes-heat", seed, sigma, params, xs.iter().map(|&x| vec![x]).collect(), clean);
        BayesHeat { theta_star, sigma, tau, jacobian, data }
    }

    /// Solution `u(t_heat, x)` of the forward problem for coefficients `theta`.
    pub fn forward(theta: &[f64], t_heat: f64, x: f64) -> f64 {
        theta
            .iter()
            .enumerate()
            .map(|(i, th)| {
                let k = (i + 1) as f64;
                th * (-k * k * t_heat).exp() * (k * x).sin()
            })
            .sum()
    }

    fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        self.jacobian
            .iter()
            .zip(&self.data.values)
            .map(|(row, y)| row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - y)
            .collect()
    }
}

impl Potential for BayesHeat {
    fn dim(&self) -> usize {
        self.theta_star.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residuals(x);
        r.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.sigma * self.sigma) + self.tau * x.iter().map(|&t| smooth_abs(t)).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = self.residuals(x);
        let s2 = self.sigma * self.sigma;
        for (k, o) in out.iter_mut().enumerate() {
            let misfit: f64 = self.jacobian.iter().zip(&r).map(|(row, ri)| row[k] * ri).sum();
            *o = misfit / s2 + self.tau * x[k] / smooth_abs(x[k]);
        }
    }
    fn name(&self) -> String {
        format!("bayes-heat(d={})", self.dim())
    }
    fn truth(&self) -> Option<Vec<f64>> {
        Some(self.theta_star.clone())
    }
}

/// Two-parameter elliptic problem with closed-form solution
/// `p(y) = x_2 y + exp(-x_1)(y/2 - y^2/2)` observed at two points.
#[derive(Debug, Clone)]
pub struct BayesElliptic {
    x_star: Vec<f64>,
    points: [f64; 2],
    sigma: f64,
    tau: f64,
    pub data: MeasurementSet,
}

impl BayesElliptic {
    pub fn new(x_star: [f64; 2], points: [f64; 2], sigma: f64, tau: f64, seed: u64) -> BayesElliptic {
        let clean = points.iter().map(|&y| Self::pressure(&x_star, y)).collect();
        let params = vec![("tau".to_string(), format!("{tau}")), ("x_star".to_string(), fmt_vec(&x_star))];
        let data = MeasurementSet::generate("bayes-elliptic", seed, sigma, params, points.iter().map(|&y| vec![y]).collect(), clean);
        BayesElliptic { x_star: x_star.to_vec(), points, sigma, tau, data }
    }

    pub fn pressure(x: &[f64], y: f64) -> f64 {
        x[1] * y + (-x[0]).exp() * (y / 2.0 - y * y / 2.0)
    }
}

impl Potential for BayesElliptic {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mis: f64 = self.points.iter().zip(&self.data.values).map(|(&y, &p)| (Self::pressure(x, y) - p).powi(2)).sum();
        mis / (2.0 * self.sigma * self.sigma) + self.tau * (x[0] * x[0] + x[1] * x[1])
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s2 = self.sigma * self.sigma;
        out[0] = 2.0 * self.tau * x[0];
        out[1] = 2.0 * self.tau * x[1];
        for (&y, &p) in self.points.iter().zip(&self.data.values) {
            let r = Self::pressure(x, y) - p;
            out[0] += r * (-(-x[0]).exp() * (y / 2.0 - y * y / 2.0)) / s2;
            out[1] += r * y / s2;
        }
    }
    fn name(&self) -> String {
        "bayes-elliptic(d=2)".into()
    }
    fn truth(&self) -> Option<Vec<f64>> {
        Some(self.x_star.clone())
    }
}

/// Source identification for the 1-D wave equation: the initial profile is a sum of sinc
/// bumps at unknown locations, observed through d'Alembert's solution on a space-time grid.
#[derive(Debug, Clone)]
pub struct BayesWave {
    theta_star: Vec<f64>,
    wavenumber: f64,
    sigma: f64,
    tau: f64,
    /// `(t, x)` design pairs.
    design: Vec<(f64, f64)>,
    pub data: MeasurementSet,
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0 + z.powi(4) / 120.0
    } else {
        z.sin() / z
    }
}

fn sinc_prime(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        -z / 3.0 + z.powi(3) / 30.0
    } else {
        (z * z.cos() - z.sin()) / (z * z)
    }
}

impl BayesWave {
    #[allow(clippy::too_many_arguments)]
    pub fn new(theta_star: Vec<f64>, wavenumber: f64, n_space: usize, n_time: usize, noise: f64, sigma: f64, tau: f64, seed: u64) -> BayesWave {
        let lin = |a: f64, b: f64, n: usize, i: usize| if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
        let mut design = Vec::with_capacity(n_space * n_time);
        for i in 0..n_space {
            for j in 0..n_time {
                design.push((lin(0.0, 1.0, n_time, j), lin(-2.0, 2.0, n_space, i)));
            }
        }
        let clean = design.iter().map(|&(t, x)| Self::solution(&theta_star, wavenumber, t, x)).collect();
        let params = vec![
            ("k".to_string(), format!("{wavenumber}")),
            ("sigma".to_string(), format!("{sigma}")),
            ("tau".to_string(), format!("{tau}")),
            ("theta_star".to_string(), fmt_vec(&theta_star)),
        ];
        let data = MeasurementSet::generate("bayes-wave", seed, noise, params, design.iter().map(|&(t, x)| vec![t, x]).collect(), clean);
        BayesWave { theta_star, wavenumber, sigma, tau, design, data }
    }

    /// Initial profile `h(x) = sum_j sinc(k (x - theta_j))`.
    pub fn source(theta: &[f64], k: f64, x: f64) -> f64 {
        theta.iter().map(|th| sinc(k * (x - th))).sum()
    }

    pub fn solution(theta: &[f64], k: f64, t: f64, x: f64) -> f64 {
        (Self::source(theta, k, x - t) + Self::source(theta, k, x + t)) / 2.0
    }
}

impl Potential for BayesWave {
    fn dim(&self) -> usize {
        self.theta_star.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let k = self.wavenumber;
        let mis: f64 = self.design.iter().zip(&self.data.values).map(|(&(t, s), &u)| (Self::solution(x, k, t, s) - u).powi(2)).sum();
        mis / (2.0 * self.sigma * self.sigma) + self.tau * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let k = self.wavenumber;
        let s2 = self.sigma * self.sigma;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = 2.0 * self.tau * xi;
        }
        for (&(t, s), &u) in self.design.iter().zip(&self.data.values) {
            let r = Self::solution(x, k, t, s) - u;
            for (j, th) in x.iter().enumerate() {
                // d/dtheta sinc(k (y - theta)) = -k sinc'(k (y - theta))
                let dm = -k * sinc_prime(k * (s - t - th));
                let dp = -k * sinc_prime(k * (s + t - th));
                out[j] += r * (dm + dp) / 2.0 / s2;
            }
        }
    }
    fn name(&self) -> String {
        format!("bayes-wave(d={}, k={})", self.dim(), self.wavenumber)
    }
    fn truth(&self) -> Option<Vec<f64>> {
        Some(self.theta_star.clone())
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::gradient_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn heat_series_value() {
        let mut th = vec![0.0; 10];
        th[0] = 1.0;
        let u = BayesHeat::forward(&th, 0.1, std::f64::consts::FRAC_PI_2);
        assert!((u - 0.904837).abs() < 1e-6);
    }

    #[test]
    fn heat_noise_free_minimum() {
        let th = vec![1.0, -0.5, 0.3, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0];
        let p = BayesHeat::new(th.clone(), 0.1, 0.0, 0.0, 1);
        // zero noise, no prior: the truth is a zero of V
        let mut q = p.clone();
        q.sigma = 1.0;
        assert!(q.value(&th).abs() < 1e-20);
    }

    #[test]
    fn elliptic_pressure_value() {
        let v = BayesElliptic::pressure(&[0.4, 1.0], 0.25);
        assert!((v - 0.312843).abs() < 1e-6);
    }

    #[test]
    fn inverse_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let heat = BayesHeat::new(vec![1.0, -0.5, 0.3, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0], 0.1, 0.1f64.sqrt(), 0.01, 3);
        let ell = BayesElliptic::new([0.4, 1.0], [0.25, 0.75], 0.1, 0.01, 3);
        let wave = BayesWave::new(vec![-0.9, -0.3, 0.4, 1.0], 8.0, 21, 21, 0.1, 1.0, 0.01, 3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!(gradient_check(&heat, &x, 1e-5) < 1e-6);
            assert!(gradient_check(&ell, &x[..2], 1e-5) < 1e-6);
            assert!(gradient_check(&wave, &x[..4], 1e-5) < 1e-6);
        }
    }

    #[test]
    fn wave_source_limits() {
        assert_eq!(BayesWave::source(&[0.3], 8.0, 0.3), 1.0);
        let th = [-0.9, -0.3, 0.4, 1.0];
        for x in [-1.5, 0.0, 0.7] {
            assert_eq!(BayesWave::solution(&th, 8.0, 0.0, x), BayesWave::source(&th, 8.0, x));
        }
    }
}
