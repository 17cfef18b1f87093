use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::rng::{particle_rng, Stream};
use crate::error::{Error, Result};

/// `M` particles in `R^d`, stored row-major, plus the iteration counter and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    pub iteration: usize,
    pub seed: u64,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, seed: u64) -> Result<ParticleEnsemble> {
        if dim == 0 || !positions.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!("{} coordinates for dimension {dim}", positions.len())));
        }
        if let Some(v) = positions.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite particle coordinate {v}")));
        }
        Ok(ParticleEnsemble { dim, positions, iteration: 0, seed })
    }

    /// `m` draws from `N(mean, var I)`; each particle uses its own stream.
    pub fn gaussian(m: usize, mean: &[f64], var: f64, seed: u64) -> ParticleEnsemble {
        let d = mean.len();
        let sd = var.sqrt();
        let mut positions = Vec::with_capacity(m * d);
        for j in 0..m {
            let mut rng = particle_rng(seed, 0, j, Stream::Init);
            for &mu in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                positions.push(mu + sd * z);
            }
        }
        ParticleEnsemble { dim: d, positions, iteration: 0, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
    pub fn particle(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }
    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks(self.dim)
    }

    /// Same seed and counter with new positions and the counter advanced.
    pub(crate) fn advanced(&self, positions: Vec<f64>) -> ParticleEnsemble {
        ParticleEnsemble { dim: self.dim, positions, iteration: self.iteration + 1, seed: self.seed }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# ensemble iteration={} seed={} particles={} dim={}", self.iteration, self.seed, self.len(), self.dim)?;
        let cols: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        writeln!(w, "{}", cols.join(","))?;
        for p in self.particles() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<ParticleEnsemble> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty ensemble file".into()))??;
        let meta = header.strip_prefix("# ensemble ").ok_or_else(|| Error::Parse("missing ensemble header".into()))?;
        let mut iteration = None;
        let mut seed = None;
        for tok in meta.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parse(format!("bad header token '{tok}'")))?;
            let bad = |e: std::num::ParseIntError| Error::Parse(format!("{k}: {e}"));
            match k {
                "iteration" => iteration = Some(v.parse::<usize>().map_err(bad)?),
                "seed" => seed = Some(v.parse::<u64>().map_err(bad)?),
                _ => {}
            }
        }
        let cols = lines.next().ok_or_else(|| Error::Parse("missing column header".into()))??;
        let dim = cols.split(',').count();
        let mut positions = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = positions.len();
            for s in line.split(',') {
                positions.push(s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")))?);
            }
            if positions.len() - before != dim {
                return Err(Error::Parse(format!("expected {dim} columns in '{line}'")));
            }
        }
        let mut ens = ParticleEnsemble::new(dim, positions, seed.ok_or_else(|| Error::Parse("header lacks seed".into()))?)?;
        ens.iteration = iteration.ok_or_else(|| Error::Parse("header lacks iteration".into()))?;
        Ok(ens)
    }
}

/// Sample mean and unbiased, symmetrized sample covariance.
pub fn estimate_moments(ens: &ParticleEnsemble) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (m, d) = (ens.len(), ens.dim());
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least two particles, got {m}")));
    }
    let mut mean = DVector::zeros(d);
    for p in ens.particles() {
        for k in 0..d {
            mean[k] += p[k];
        }
    }
    mean /= m as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut c = vec![0.0; d];
    for p in ens.particles() {
        for k in 0..d {
            c[k] = p[k] - mean[k];
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += c[a] * c[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (m - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok((mean, cov))
}

/// Whether the density estimate uses only the diagonal of the sample covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMode {
    Diagonal,
    Full,
}

impl std::str::FromStr for BandwidthMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(BandwidthMode::Diagonal),
            "full" => Ok(BandwidthMode::Full),
            o => Err(Error::Parse(format!("unknown bandwidth mode '{o}'"))),
        }
    }
}

impl std::fmt::Display for BandwidthMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BandwidthMode::Diagonal => "diagonal",
            BandwidthMode::Full => "full",
        })
    }
}

/// Smallest admissible bandwidth eigenvalue.
pub const BANDWIDTH_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Bandwidth {
    pub matrix: DMatrix<f64>,
    /// Number of eigenvalues raised to the floor.
    pub clamped: usize,
}

impl Bandwidth {
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }
}

/// `H = cov / 2 - T^2 beta^-2 cov^-1`, eigenvalue-wise, with small eigenvalues clamped.
pub fn bandwidth_matrix(cov: &DMatrix<f64>, t: f64, beta: f64, mode: BandwidthMode) -> Result<Bandwidth> {
    let d = cov.nrows();
    let c = t * t / (beta * beta);
    let shrink = |lambda: f64, clamped: &mut usize| -> Result<f64> {
        if !(lambda >= 1e-12) {
            return Err(Error::DegenerateEnsemble(lambda));
        }
        let h = lambda / 2.0 - c / lambda;
        if h < BANDWIDTH_FLOOR {
            *clamped += 1;
            Ok(BANDWIDTH_FLOOR)
        } else {
            Ok(h)
        }
    };
    let mut clamped = 0;
    let matrix = match mode {
        BandwidthMode::Diagonal => {
            let mut h = DMatrix::zeros(d, d);
            for k in 0..d {
                h[(k, k)] = shrink(cov[(k, k)], &mut clamped)?;
            }
            h
        }
        BandwidthMode::Full => {
            let eig = ((cov + cov.transpose()) * 0.5).symmetric_eigen();
            let mut vals = DVector::zeros(d);
            for k in 0..d {
                vals[k] = shrink(eig.eigenvalues[k], &mut clamped)?;
            }
            &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
        }
    };
    if clamped > 0 {
        log::warn!("bandwidth clamped to {BANDWIDTH_FLOOR:e} in {clamped} direction(s); the density estimate is biased (T too large for the ensemble spread)");
    }
    Ok(Bandwidth { matrix, clamped })
}

/// `x_j <- (x_j - mean) / sqrt 2 + mean`, row-major.
pub fn recentre(ens: &ParticleEnsemble, mean: &[f64]) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ens.particles().flat_map(|p| p.iter().zip(mean).map(move |(x, m)| (x - m) * s + m)).collect()
}
