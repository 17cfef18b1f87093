//! Unadjusted and Metropolis-adjusted Langevin baselines.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ensemble::ParticleEnsemble;
use super::rng::{particle_rng, Stream};
use super::{par_map, SamplerConfig, StepInfo};
use crate::error::{Error, Result};
use crate::potentials::Potential;

/// `x - h grad V(x) + sqrt(2h / beta) xi`.
pub fn ula_step(ens: &ParticleEnsemble, potential: &dyn Potential, cfg: &SamplerConfig) -> Result<(ParticleEnsemble, StepInfo)> {
    let noise = (2.0 * cfg.h / cfg.beta).sqrt();
    let moved = par_map(ens.len(), |j| {
        let x = ens.particle(j);
        let g = potential.grad_vec(x);
        let mut rng = particle_rng(ens.seed, ens.iteration, j, Stream::Langevin);
        x.iter()
            .zip(&g)
            .map(|(xk, gk)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                xk - cfg.h * gk + noise * z
            })
            .collect::<Vec<f64>>()
    });
    let positions: Vec<f64> = moved.into_iter().flatten().collect();
    if let Some(v) = positions.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("Langevin update produced {v}")));
    }
    Ok((ens.advanced(positions), StepInfo::default()))
}

/// Log density of the Langevin proposal `to | from`, up to constants.
fn log_proposal(to: &[f64], from: &[f64], grad_from: &[f64], h: f64, beta: f64) -> f64 {
    let r2: f64 = to.iter().zip(from).zip(grad_from).map(|((t, f), g)| (t - f + h * g).powi(2)).sum();
    -beta * r2 / (4.0 * h)
}

/// ULA proposal with a Metropolis-Hastings correction. Diverged proposals are rejected.
pub fn mala_step(ens: &ParticleEnsemble, potential: &dyn Potential, cfg: &SamplerConfig) -> Result<(ParticleEnsemble, StepInfo)> {
    let noise = (2.0 * cfg.h / cfg.beta).sqrt();
    let beta = cfg.beta;
    let moved = par_map(ens.len(), |j| {
        let x = ens.particle(j);
        let gx = potential.grad_vec(x);
        let mut rng = particle_rng(ens.seed, ens.iteration, j, Stream::Langevin);
        let y: Vec<f64> = x
            .iter()
            .zip(&gx)
            .map(|(xk, gk)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                xk - cfg.h * gk + noise * z
            })
            .collect();
        let u: f64 = rng.random();
        if y.iter().any(|v| !v.is_finite()) {
            return (x.to_vec(), false);
        }
        let gy = potential.grad_vec(&y);
        let log_alpha = -beta * (potential.value(&y) - potential.value(x)) + log_proposal(x, &y, &gy, cfg.h, beta) - log_proposal(&y, x, &gx, cfg.h, beta);
        if log_alpha >= 0.0 || u.ln() < log_alpha {
            (y, true)
        } else {
            (x.to_vec(), false)
        }
    });
    let accepted = moved.iter().filter(|(_, a)| *a).count();
    let positions: Vec<f64> = moved.into_iter().flat_map(|(p, _)| p).collect();
    let info = StepInfo { acceptance: Some(accepted as f64 / ens.len().max(1) as f64), ..StepInfo::default() };
    Ok((ens.advanced(positions), info))
}
