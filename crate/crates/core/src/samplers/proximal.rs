//! Proximal-kernel particle updates: the tensor-train version and the particle-sum version.

use rand_distr::{Distribution, StandardNormal};

use super::ensemble::{bandwidth_matrix, estimate_moments, recentre, ParticleEnsemble};
use super::kde::build_rho0_tt;
use super::rng::{particle_rng, Stream};
use super::{par_map, SamplerConfig, StepInfo};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{compute_eta0, forward_heat, score_drift, DriftForm, Eta0Options, KernelSet, ProximalState, QuotientMode};
use crate::potentials::Potential;
use crate::tt::{cross, CrossOptions, TensorTrain, TtMapTarget};

/// Above this product of ranks the Hadamard quotient is replaced by a cross of the product.
const HADAMARD_RANK_LIMIT: usize = 256;

/// Grid, kernels and normalizer shared by all iterations of a run.
#[derive(Debug, Clone)]
pub struct ProximalContext {
    pub grid: Grid,
    pub kernels: KernelSet,
    pub state: ProximalState,
}

impl ProximalContext {
    pub fn build(potential: &dyn Potential, cfg: &SamplerConfig) -> Result<ProximalContext> {
        let grid = cfg.grid.build(potential.dim())?;
        let kernels = KernelSet::new(&grid, cfg.t, cfg.beta)?;
        let opts = Eta0Options {
            cross: cfg.cross_options(0),
            floor: cfg.eta0_floor,
            with_inverse: cfg.quotient == QuotientMode::Hadamard,
        };
        let state = compute_eta0(potential, &grid, &kernels, &opts)?;
        Ok(ProximalContext { grid, kernels, state })
    }
}

/// `eta_hat_0 = rho_0 / eta0` as a train.
fn quotient(rho0: &TensorTrain, ctx: &ProximalContext, cfg: &SamplerConfig, opts: &CrossOptions) -> Result<TensorTrain> {
    let modes = rho0.mode_sizes();
    match (&ctx.state.inv_eta0, cfg.quotient) {
        (Some(inv), QuotientMode::Hadamard) => {
            if rho0.max_rank() * inv.max_rank() <= HADAMARD_RANK_LIMIT {
                Ok(rho0.hadamard(inv)?.round(cfg.cross_tol, cfg.max_rank))
            } else {
                let target = TtMapTarget::new(vec![rho0, inv], |v: &[f64]| v[0] * v[1])?;
                Ok(cross(&target, &modes, opts)?.0)
            }
        }
        _ => {
            let floor = ctx.state.floor;
            let target = TtMapTarget::new(vec![rho0, &ctx.state.eta0], move |v: &[f64]| {
                if floor <= 0.0 && v[1] <= 0.0 {
                    f64::NAN
                } else {
                    v[0] / v[1].max(floor)
                }
            })?;
            cross(&target, &modes, opts).map(|r| r.0).map_err(|e| match e {
                Error::NonFinite { index, .. } => Error::Underflow(format!("eta0 is not positive at node {index:?}")),
                other => other,
            })
        }
    }
}

/// One step of the tensor-train proximal sampler.
pub fn tt_brwp_step(ens: &ParticleEnsemble, potential: &dyn Potential, cfg: &SamplerConfig, ctx: &ProximalContext) -> Result<(ParticleEnsemble, StepInfo)> {
    let d = ens.dim();
    if potential.dim() != d || ctx.grid.dim() != d {
        return Err(Error::Shape(format!("ensemble of dimension {d} with a {}-dimensional potential", potential.dim())));
    }
    let (mean, cov) = estimate_moments(ens)?;
    let bw = bandwidth_matrix(&cov, cfg.t, cfg.beta, cfg.bandwidth_mode)?;
    if cfg.bandwidth_mode != super::BandwidthMode::Diagonal {
        return Err(Error::InvalidArgument("only the diagonal bandwidth mode keeps the density estimate separable".into()));
    }
    let points = recentre(ens, mean.as_slice());
    let rho0 = build_rho0_tt(&points, &bw.diagonal(), &ctx.grid, cfg.kde_batch, cfg.cross_tol, cfg.max_rank)?;
    let opts = cfg.cross_options(ens.iteration as u64 + 1);
    let hat_eta0 = quotient(&rho0, ctx, cfg, &opts)?;
    let field = forward_heat(&hat_eta0, &ctx.kernels)?;

    let drifts = par_map(ens.len(), |j| score_drift(ens.particle(j), &field, &ctx.grid, potential, cfg.beta, cfg.drift_form));
    let mut positions = Vec::with_capacity(ens.positions().len());
    let mut clamped = 0;
    for (j, r) in drifts.into_iter().enumerate() {
        let (drift, c) = r?;
        clamped += c as usize;
        positions.extend(ens.particle(j).iter().zip(&drift).map(|(x, v)| x - cfg.h * v));
    }
    if clamped > 0 {
        log::warn!("iteration {}: {clamped} particle(s) outside the grid box were clamped for the score lookup", ens.iteration);
    }
    let info = StepInfo {
        clamped,
        bandwidth_clamped: bw.clamped,
        max_rank: rho0.max_rank().max(hat_eta0.max_rank()),
        acceptance: None,
    };
    Ok((ens.advanced(positions), info))
}

/// How the particle-sum sampler estimates the normalizer at each particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizerMode {
    /// Importance sampling with proposals `N(x_i, 2T/beta I)`.
    MonteCarlo,
    /// Exact value for Gaussian potentials.
    ClosedForm,
    /// Interpolated from the tensor-train `eta0`.
    Tensor,
}

impl std::str::FromStr for NormalizerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" | "monte-carlo" => Ok(NormalizerMode::MonteCarlo),
            "closed-form" => Ok(NormalizerMode::ClosedForm),
            "tensor" => Ok(NormalizerMode::Tensor),
            o => Err(Error::Parse(format!("unknown normalizer '{o}'"))),
        }
    }
}

impl std::fmt::Display for NormalizerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormalizerMode::MonteCarlo => "mc",
            NormalizerMode::ClosedForm => "closed-form",
            NormalizerMode::Tensor => "tensor",
        })
    }
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + (v.iter().map(|x| (x - mx).exp()).sum::<f64>() / v.len() as f64).ln()
}

/// `log N(x)` up to an additive constant shared by all points.
pub fn log_normalizer(x: &[f64], j: usize, ens: &ParticleEnsemble, potential: &dyn Potential, cfg: &SamplerConfig, ctx: Option<&ProximalContext>) -> Result<f64> {
    let beta = cfg.beta;
    match cfg.normalizer {
        NormalizerMode::MonteCarlo => {
            let mut rng = particle_rng(ens.seed, ens.iteration, j, Stream::Normalizer);
            let sd = (2.0 * cfg.t / beta).sqrt();
            let mut z = vec![0.0; x.len()];
            let logs: Vec<f64> = (0..cfg.mc_samples.max(1))
                .map(|_| {
                    for (zk, xk) in z.iter_mut().zip(x) {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        *zk = xk + sd * e;
                    }
                    -beta * potential.value(&z) / 2.0
                })
                .collect();
            let v = log_mean_exp(&logs);
            if v.is_nan() {
                return Err(Error::InvalidArgument(format!("potential is not finite near particle {j}")));
            }
            Ok(v)
        }
        NormalizerMode::ClosedForm => {
            let (mean, cov) = match (potential.is_gaussian(), potential.known_mean(), potential.known_cov()) {
                (true, Some(m), Some(c)) => (m, c),
                _ => return Err(Error::InvalidArgument(format!("no closed-form normalizer for {}", potential.name()))),
            };
            let d = x.len();
            let mut a = nalgebra::DMatrix::from_row_slice(d, d, &cov);
            for k in 0..d {
                a[(k, k)] += cfg.t;
            }
            let r = nalgebra::DVector::from_iterator(d, x.iter().zip(&mean).map(|(a, b)| a - b));
            let sol = a.cholesky().ok_or_else(|| Error::NotSpd("Sigma + T I".into()))?.solve(&r);
            Ok(-beta * r.dot(&sol) / 4.0)
        }
        NormalizerMode::Tensor => {
            let ctx = ctx.ok_or_else(|| Error::InvalidArgument("tensor normalizer needs a proximal context".into()))?;
            let mut xc = x.to_vec();
            ctx.grid.clamp(&mut xc);
            let v = ctx.state.eta0.eval_point(&ctx.grid, &xc)?.max(ctx.state.floor);
            if !(v > 0.0) {
                return Err(Error::Underflow(format!("eta0 = {v:e} at particle {j}")));
            }
            Ok(v.ln())
        }
    }
}

/// One step of the particle-sum proximal sampler with the empirical density of the ensemble.
pub fn brwp_mc_step(ens: &ParticleEnsemble, potential: &dyn Potential, cfg: &SamplerConfig, ctx: Option<&ProximalContext>) -> Result<(ParticleEnsemble, StepInfo)> {
    let (m, d) = (ens.len(), ens.dim());
    if potential.dim() != d {
        return Err(Error::Shape(format!("ensemble of dimension {d} with a {}-dimensional potential", potential.dim())));
    }
    let log_n: Vec<f64> = par_map(m, |i| log_normalizer(ens.particle(i), i, ens, potential, cfg, ctx)).into_iter().collect::<Result<_>>()?;
    let c = match cfg.drift_form {
        DriftForm::Consistent => 0.5,
        DriftForm::Literal => 1.0,
    };
    let scale = cfg.beta / (4.0 * cfg.t);
    let drifts = par_map(m, |j| {
        let xj = ens.particle(j);
        let logw: Vec<f64> = (0..m)
            .map(|i| {
                let r2: f64 = xj.iter().zip(ens.particle(i)).map(|(a, b)| (a - b) * (a - b)).sum();
                -scale * r2 - log_n[i]
            })
            .collect();
        let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut pull = vec![0.0; d];
        for (i, lw) in logw.iter().enumerate() {
            let w = (lw - mx).exp();
            total += w;
            for (p, (a, b)) in pull.iter_mut().zip(xj.iter().zip(ens.particle(i))) {
                *p += w * (a - b);
            }
        }
        let g = potential.grad_vec(xj);
        g.iter().zip(&pull).map(|(gv, p)| c * gv - p / (total * 2.0 * cfg.t)).collect::<Vec<f64>>()
    });
    let mut positions = Vec::with_capacity(m * d);
    for (j, drift) in drifts.iter().enumerate() {
        positions.extend(ens.particle(j).iter().zip(drift).map(|(x, v)| x - cfg.h * v));
    }
    if let Some(v) = positions.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("particle update produced {v}")));
    }
    Ok((ens.advanced(positions), StepInfo::default()))
}
