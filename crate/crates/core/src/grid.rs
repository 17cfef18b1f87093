//! Tensor-product grids on the box `[-L, L]^d` with per-dimension quadrature weights.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    UniformTrapezoid,
    GaussLegendre,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::UniformTrapezoid => write!(f, "uniform"),
            Scheme::GaussLegendre => write!(f, "gauss-legendre"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "trapezoid" | "uniform-trapezoid" => Ok(Scheme::UniformTrapezoid),
            "gauss-legendre" | "legendre" | "gl" => Ok(Scheme::GaussLegendre),
            other => Err(Error::Parse(format!("unknown grid scheme '{other}'"))),
        }
    }
}

/// Isotropic grid: the same nodes and weights are used in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scheme: Scheme,
}

impl Grid {
    /// `points_per_unit * L` equispaced nodes spanning `[-L, L]` (endpoints included)
    /// with trapezoid weights.
    pub fn uniform(dim: usize, half_width: f64, points_per_unit: usize) -> Result<Grid> {
        if dim == 0 || !(half_width > 0.0) || points_per_unit < 2 {
            return Err(Error::InvalidArgument(format!(
                "uniform grid needs d >= 1, L > 0, points per unit >= 2 (got {dim}, {half_width}, {points_per_unit})"
            )));
        }
        let n = (points_per_unit as f64 * half_width).round() as usize;
        Self::uniform_n(dim, half_width, n)
    }

    /// Uniform grid with an explicit node count.
    pub fn uniform_n(dim: usize, half_width: f64, n: usize) -> Result<Grid> {
        if dim == 0 || !(half_width > 0.0) || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "uniform grid needs d >= 1, L > 0, n >= 2 (got {dim}, {half_width}, {n})"
            )));
        }
        let step = 2.0 * half_width / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { half_width } else { -half_width + step * i as f64 })
            .collect();
        let mut weights = vec![step; n];
        weights[0] = step / 2.0;
        weights[n - 1] = step / 2.0;
        Ok(Grid { dim, half_width, nodes, weights, scheme: Scheme::UniformTrapezoid })
    }

    /// Gauss-Legendre nodes and weights mapped to `[-L, L]`.
    pub fn gauss_legendre(dim: usize, half_width: f64, n: usize) -> Result<Grid> {
        if dim == 0 || !(half_width > 0.0) || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "Gauss-Legendre grid needs d >= 1, L > 0, n >= 1 (got {dim}, {half_width}, {n})"
            )));
        }
        let (x, w) = legendre_nodes(n);
        let nodes = x.iter().map(|v| v * half_width).collect();
        let weights = w.iter().map(|v| v * half_width).collect();
        Ok(Grid { dim, half_width, nodes, weights, scheme: Scheme::GaussLegendre })
    }

    pub fn build(dim: usize, half_width: f64, points_per_unit: usize, scheme: Scheme) -> Result<Grid> {
        match scheme {
            Scheme::UniformTrapezoid => Self::uniform(dim, half_width, points_per_unit),
            Scheme::GaussLegendre => {
                Self::gauss_legendre(dim, half_width, (points_per_unit as f64 * half_width).round() as usize)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn mode_sizes(&self) -> Vec<usize> {
        vec![self.nodes.len(); self.dim]
    }

    /// Same nodes and weights in a different dimension.
    pub fn with_dim(&self, dim: usize) -> Grid {
        Grid { dim, ..self.clone() }
    }

    /// Coordinates of a multi-index.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.nodes[i]).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let lo = self.nodes[0];
        let hi = self.nodes[self.nodes.len() - 1];
        x.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12)
    }

    /// Clamp a point into the node range; returns true if anything moved.
    pub fn clamp(&self, x: &mut [f64]) -> bool {
        let lo = self.nodes[0];
        let hi = self.nodes[self.nodes.len() - 1];
        let mut moved = false;
        for v in x.iter_mut() {
            if *v < lo {
                *v = lo;
                moved = true;
            } else if *v > hi {
                *v = hi;
                moved = true;
            } else if v.is_nan() {
                *v = 0.0;
                moved = true;
            }
        }
        moved
    }

    /// Interval containing `x`: returns `(j, t)` with `x = (1-t) z_j + t z_{j+1}`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.nodes.len();
        let lo = self.nodes[0];
        let hi = self.nodes[n - 1];
        if !(x >= lo - 1e-12 && x <= hi + 1e-12) {
            return None;
        }
        if n == 1 {
            return Some((0, 0.0));
        }
        let x = x.clamp(lo, hi);
        let j = match self.scheme {
            Scheme::UniformTrapezoid => {
                let step = (hi - lo) / (n - 1) as f64;
                (((x - lo) / step).floor() as usize).min(n - 2)
            }
            Scheme::GaussLegendre => {
                let p = self.nodes.partition_point(|&z| z <= x);
                p.saturating_sub(1).min(n - 2)
            }
        };
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
        Some((j, t))
    }

    /// One-dimensional quadrature of `f` on this grid's nodes.
    pub fn integrate_1d(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Legendre roots and weights on `[-1, 1]` by Newton iteration on the three-term recurrence.
pub fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_eval(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_eval(n, z);
        dp = if d.is_finite() { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_eval(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_box_grid_size() {
        let g = Grid::uniform(6, 6.0, 32).unwrap();
        assert_eq!(g.len(), 192);
        assert_eq!(g.mode_sizes(), vec![192; 6]);
    }

    #[test]
    fn two_node_trapezoid() {
        let g = Grid::uniform(1, 1.0, 2).unwrap();
        assert_eq!(g.nodes(), &[-1.0, 1.0]);
        assert_eq!(g.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn weights_sum_to_box_length() {
        for n in [2usize, 5, 17, 64] {
            let g = Grid::uniform_n(1, 3.0, n).unwrap();
            assert!((g.weights().iter().sum::<f64>() - 6.0).abs() < 1e-10);
            let g = Grid::gauss_legendre(1, 3.0, n).unwrap();
            assert!((g.weights().iter().sum::<f64>() - 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_integral_matches_reference() {
        let g = Grid::uniform(1, 6.0, 32).unwrap();
        let got = g.integrate_1d(|x| (-x * x / 2.0).exp());
        // truncated integral over [-6, 6] from a 200-node Gauss-Legendre rule
        let reference = Grid::gauss_legendre(1, 6.0, 200).unwrap().integrate_1d(|x| (-x * x / 2.0).exp());
        assert!((got - reference).abs() < 1e-9, "{got} vs {reference}");
        assert!((reference - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn legendre_small_cases() {
        let g = Grid::gauss_legendre(1, 2.0, 1).unwrap();
        assert_eq!(g.nodes(), &[0.0]);
        assert!((g.weights()[0] - 4.0).abs() < 1e-14);
        let g = Grid::gauss_legendre(1, 1.5, 2).unwrap();
        let r = 1.5 / 3f64.sqrt();
        assert!((g.nodes()[0] + r).abs() < 1e-14 && (g.nodes()[1] - r).abs() < 1e-14);
        let exact = 2.0 * 1.5f64.powi(3) / 3.0 * 2.0; // int of 2x^2 + x^3 - x over [-1.5, 1.5]
        let got = g.integrate_1d(|x| 2.0 * x * x + x * x * x - x);
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn legendre_exactness_order() {
        let n = 7;
        let g = Grid::gauss_legendre(1, 1.0, n).unwrap();
        for p in 0..(2 * n) {
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            let got = g.integrate_1d(|x| x.powi(p as i32));
            assert!((got - exact).abs() < 1e-13, "degree {p}");
        }
    }

    #[test]
    fn locate_brackets_point() {
        let g = Grid::uniform_n(1, 1.0, 5).unwrap();
        assert_eq!(g.locate(-1.0), Some((0, 0.0)));
        let (j, t) = g.locate(0.25).unwrap();
        assert_eq!(j, 2);
        assert!((t - 0.5).abs() < 1e-14);
        assert_eq!(g.locate(1.0).unwrap().0, 3);
        assert!(g.locate(1.1).is_none());
        let g = Grid::gauss_legendre(1, 1.0, 4).unwrap();
        let (j, t) = g.locate(g.nodes()[2]).unwrap();
        let back = (1.0 - t) * g.nodes()[j] + t * g.nodes()[j + 1];
        assert!((back - g.nodes()[2]).abs() < 1e-14);
    }
}
