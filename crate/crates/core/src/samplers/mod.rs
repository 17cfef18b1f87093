//! Particle samplers: the tensor-train proximal sampler, its particle-sum variant with a
//! Monte-Carlo normalizer, ULA and MALA.

mod ensemble;
mod kde;
mod langevin;
mod proximal;
mod rng;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

pub use ensemble::{bandwidth_matrix, estimate_moments, recentre, Bandwidth, BandwidthMode, ParticleEnsemble, BANDWIDTH_FLOOR};
pub use kde::{build_rho0_tt, mixture_density};
pub use langevin::{mala_step, ula_step};
pub use proximal::{brwp_mc_step, log_normalizer, tt_brwp_step, NormalizerMode, ProximalContext};

use crate::error::{Error, Result};
use crate::grid::{Grid, Scheme};
use crate::kernel::{DriftForm, QuotientMode};
use crate::oracle::tv_gaussians_same_mean;
use crate::potentials::Potential;
use crate::tt::CrossOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TtBrwp,
    BrwpMc,
    Ula,
    Mala,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TtBrwp, Method::BrwpMc, Method::Ula, Method::Mala];
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tt-brwp" => Ok(Method::TtBrwp),
            "brwp-mc" => Ok(Method::BrwpMc),
            "ula" => Ok(Method::Ula),
            "mala" => Ok(Method::Mala),
            o => Err(Error::Parse(format!("unknown method '{o}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::TtBrwp => "tt-brwp",
            Method::BrwpMc => "brwp-mc",
            Method::Ula => "ula",
            Method::Mala => "mala",
        })
    }
}

/// Isotropic grid `[-L, L]^d` without the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub points_per_unit: usize,
    pub scheme: Scheme,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { half_width: 6.0, points_per_unit: 32, scheme: Scheme::UniformTrapezoid }
    }
}

impl GridSpec {
    pub fn build(&self, dim: usize) -> Result<Grid> {
        Grid::build(dim, self.half_width, self.points_per_unit, self.scheme)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub method: Method,
    pub h: f64,
    /// Proximal time.
    pub t: f64,
    pub beta: f64,
    pub grid: GridSpec,
    pub cross_tol: f64,
    pub max_rank: usize,
    pub bandwidth_mode: BandwidthMode,
    /// Rounding period when summing density-estimate terms.
    pub kde_batch: usize,
    /// Proposals per particle for the Monte-Carlo normalizer.
    pub mc_samples: usize,
    pub normalizer: NormalizerMode,
    pub drift_form: DriftForm,
    pub quotient: QuotientMode,
    /// Relative clamp level for `eta0`; 0 turns nonpositive values into errors.
    pub eta0_floor: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            method: Method::TtBrwp,
            h: 0.1,
            t: 0.1,
            beta: 1.0,
            grid: GridSpec::default(),
            cross_tol: 1e-6,
            max_rank: 64,
            bandwidth_mode: BandwidthMode::Diagonal,
            kde_batch: 8,
            mc_samples: 100,
            normalizer: NormalizerMode::MonteCarlo,
            drift_form: DriftForm::Consistent,
            quotient: QuotientMode::Hadamard,
            eta0_floor: 0.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.h >= 0.0) || !self.h.is_finite() {
            return bad(format!("step size h must be nonnegative, got {}", self.h));
        }
        if !(self.t > 0.0) || !(self.beta > 0.0) {
            return bad(format!("T and beta must be positive (T={}, beta={})", self.t, self.beta));
        }
        if !(self.cross_tol > 0.0) || self.max_rank == 0 || self.kde_batch == 0 {
            return bad("cross tolerance, max rank and kde batch must be positive".into());
        }
        if !(self.grid.half_width > 0.0) || self.grid.points_per_unit < 2 {
            return bad("grid needs L > 0 and at least 2 points per unit".into());
        }
        if !(0.0..1.0).contains(&self.eta0_floor) {
            return bad(format!("eta0 floor must lie in [0, 1), got {}", self.eta0_floor));
        }
        Ok(())
    }

    pub(crate) fn cross_options(&self, salt: u64) -> CrossOptions {
        CrossOptions {
            tol: self.cross_tol,
            max_rank: self.max_rank,
            seed: self.seed.wrapping_mul(0x9e37_79b9).wrapping_add(salt),
            ..CrossOptions::default()
        }
    }

    fn needs_proximal_context(&self) -> bool {
        self.method == Method::TtBrwp || (self.method == Method::BrwpMc && self.normalizer == NormalizerMode::Tensor)
    }
}

/// Diagnostics of one update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    /// Particles clamped into the grid box for the score lookup.
    pub clamped: usize,
    /// Bandwidth eigenvalues raised to the floor.
    pub bandwidth_clamped: usize,
    /// Largest tensor-train rank built during the step (0 for grid-free methods).
    pub max_rank: usize,
    /// Metropolis acceptance rate (MALA only).
    pub acceptance: Option<f64>,
}

/// Order-preserving map over `0..n`, parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// A configured sampler bound to one potential.
pub struct Sampler<'p> {
    cfg: SamplerConfig,
    potential: &'p dyn Potential,
    context: Option<ProximalContext>,
}

impl<'p> Sampler<'p> {
    pub fn new(cfg: SamplerConfig, potential: &'p dyn Potential) -> Result<Sampler<'p>> {
        cfg.validate()?;
        let context = if cfg.needs_proximal_context() { Some(ProximalContext::build(potential, &cfg)?) } else { None };
        Ok(Sampler { cfg, potential, context })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn context(&self) -> Option<&ProximalContext> {
        self.context.as_ref()
    }

    pub fn step(&self, ens: &ParticleEnsemble) -> Result<(ParticleEnsemble, StepInfo)> {
        match self.cfg.method {
            Method::TtBrwp => tt_brwp_step(ens, self.potential, &self.cfg, self.context.as_ref().expect("context built for tt-brwp")),
            Method::BrwpMc => brwp_mc_step(ens, self.potential, &self.cfg, self.context.as_ref()),
            Method::Ula => ula_step(ens, self.potential, &self.cfg),
            Method::Mala => mala_step(ens, self.potential, &self.cfg),
        }
    }
}

/// Per-iteration summary of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub mean: Vec<f64>,
    /// `|mean - reference|_2` (known target mean or ground truth); NaN without a reference.
    pub mean_error: f64,
    /// `|cov - Sigma / beta|_F`; NaN without a known covariance.
    pub cov_error: f64,
    /// `|diag(cov) - diag(Sigma / beta)|_2`.
    pub var_error: f64,
    /// Gaussian total-variation formula between target and sample covariance (Gaussian targets).
    pub tv: f64,
    pub max_rank: usize,
    pub clamped: usize,
    pub bandwidth_clamped: usize,
    pub acceptance: f64,
    pub wall_ms: f64,
}

/// Reference moments of `exp(-beta V)` used for error columns.
#[derive(Debug, Clone, Default)]
pub struct Reference {
    pub mean: Option<Vec<f64>>,
    pub cov: Option<DMatrix<f64>>,
    pub gaussian: bool,
}

impl Reference {
    pub fn of(potential: &dyn Potential, beta: f64) -> Reference {
        let d = potential.dim();
        let mean = potential.known_mean().or_else(|| potential.truth());
        let gaussian = potential.is_gaussian();
        // non-Gaussian covariances are only meaningful at beta = 1
        let cov = potential.known_cov().filter(|_| gaussian || beta == 1.0).map(|c| DMatrix::from_row_slice(d, d, &c) / beta);
        Reference { mean, cov, gaussian }
    }

    pub fn metrics(&self, ens: &ParticleEnsemble, info: &StepInfo, wall_ms: f64) -> MetricsRow {
        let (mean, cov) = match estimate_moments(ens) {
            Ok(mc) => mc,
            Err(_) => (DVector::from_column_slice(ens.particle(0)), DMatrix::zeros(ens.dim(), ens.dim())),
        };
        let mean_error = self.mean.as_ref().map_or(f64::NAN, |r| r.iter().zip(mean.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        let (cov_error, var_error, tv) = match &self.cov {
            Some(c) => {
                let ce = (&cov - c).norm();
                let ve = (cov.diagonal() - c.diagonal()).norm();
                let tv = if self.gaussian { tv_gaussians_same_mean(c, &cov).unwrap_or(f64::NAN) } else { f64::NAN };
                (ce, ve, tv)
            }
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        MetricsRow {
            iteration: ens.iteration,
            mean: mean.iter().copied().collect(),
            mean_error,
            cov_error,
            var_error,
            tv,
            max_rank: info.max_rank,
            clamped: info.clamped,
            bandwidth_clamped: info.bandwidth_clamped,
            acceptance: info.acceptance.unwrap_or(f64::NAN),
            wall_ms,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<MetricsRow>,
    pub ensemble: ParticleEnsemble,
}

/// Iterate the configured method, recording one metrics row per iteration (row 0 is the
/// initial ensemble). `sink` sees every row as soon as it is produced.
pub fn run_sampler(
    cfg: &SamplerConfig,
    potential: &dyn Potential,
    initial: ParticleEnsemble,
    iterations: usize,
    sink: &mut dyn FnMut(&MetricsRow, &ParticleEnsemble),
) -> Result<Trajectory> {
    let setup = Instant::now();
    let sampler = Sampler::new(cfg.clone(), potential)?;
    let reference = Reference::of(potential, cfg.beta);
    let mut rows = Vec::with_capacity(iterations + 1);
    let first = reference.metrics(&initial, &StepInfo::default(), setup.elapsed().as_secs_f64() * 1e3);
    sink(&first, &initial);
    rows.push(first);
    let mut ens = initial;
    for _ in 0..iterations {
        let start = Instant::now();
        let (next, info) = sampler.step(&ens)?;
        ens = next;
        let row = reference.metrics(&ens, &info, start.elapsed().as_secs_f64() * 1e3);
        sink(&row, &ens);
        rows.push(row);
    }
    Ok(Trajectory { rows, ensemble: ens })
}
