//! Browser bindings: a variance recursion trace, a 2-D particle sampler and a tensor-train rank probe.

use ttbrwp::oracle::{recursion_trace, DensityEstimate};
use ttbrwp::potentials::{DoubleMoon, GaussianMixture, IsotropicGaussian, Potential};
use ttbrwp::samplers::{GridSpec, Method, ParticleEnsemble, Sampler, SamplerConfig};
use ttbrwp::tt::{cross_on_grid, CrossOptions};
use ttbrwp::Grid;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn target(name: &str, dim: usize) -> Result<Box<dyn Potential>, JsError> {
    Ok(match name {
        "gaussian" => Box::new(IsotropicGaussian::new(dim, 1.0, vec![0.0; dim])),
        "mixture" => {
            let mut a = vec![0.0; dim];
            a[0] = 2.0;
            Box::new(GaussianMixture::new(a))
        }
        "moon" => Box::new(DoubleMoon::new(dim, 2.0)),
        other => return Err(JsError::new(&format!("unknown target '{other}' (gaussian, mixture, moon)"))),
    })
}

/// Variance iterates of the scalar recursion for target N(0, sigma^2), started at `start_ratio * sigma^2`.
/// Stops early (shorter array) if the recursion leaves its domain.
#[wasm_bindgen(js_name = varianceTrace)]
pub fn variance_trace(sigma: f64, t: f64, h: f64, start_ratio: f64, iterations: usize, corrected: bool) -> Vec<f64> {
    let s2 = sigma * sigma;
    let density = if corrected { DensityEstimate::Corrected } else { DensityEstimate::Empirical };
    let mut out = vec![start_ratio * s2];
    // run one step at a time so a failure still returns the prefix
    for _ in 0..iterations {
        match recursion_trace(0.0, *out.last().unwrap(), s2, t, h, 1.0, density, 1) {
            Ok(tr) => out.push(tr[1].1),
            Err(_) => break,
        }
    }
    out
}

/// A particle ensemble evolving under one of the samplers on a 2-D target.
#[wasm_bindgen]
pub struct ParticleDemo {
    potential: Box<dyn Potential>,
    cfg: SamplerConfig,
    ensemble: ParticleEnsemble,
}

#[wasm_bindgen]
impl ParticleDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(target_name: &str, method: &str, particles: usize, h: f64, t: f64, seed: u64) -> Result<ParticleDemo, JsError> {
        let method: Method = method.parse().map_err(js_err)?;
        let cfg = SamplerConfig {
            method,
            h,
            t,
            grid: GridSpec { half_width: 5.0, points_per_unit: 8, ..GridSpec::default() },
            seed,
            ..SamplerConfig::default()
        };
        cfg.validate().map_err(js_err)?;
        Ok(ParticleDemo { potential: target(target_name, 2)?, cfg, ensemble: ParticleEnsemble::gaussian(particles, &[2.0, 2.0], 0.25, seed) })
    }

    /// Advances `steps` iterations and returns the positions as x0, y0, x1, y1, ...
    pub fn step(&mut self, steps: usize) -> Result<Vec<f64>, JsError> {
        // the proximal context borrows the potential, so it is rebuilt per call; in 2-D this is cheap
        let sampler = Sampler::new(self.cfg.clone(), self.potential.as_ref()).map_err(js_err)?;
        for _ in 0..steps {
            self.ensemble = sampler.step(&self.ensemble).map_err(js_err)?.0;
        }
        Ok(self.positions())
    }

    pub fn positions(&self) -> Vec<f64> {
        self.ensemble.positions().to_vec()
    }
}

/// Tensor-train ranks of exp(-V/2) for a target in `dim` dimensions on [-6, 6]^dim.
#[wasm_bindgen(js_name = crossRanks)]
pub fn cross_ranks(target_name: &str, dim: usize, tol: f64, points_per_unit: usize) -> Result<Vec<u32>, JsError> {
    if !(1..=8).contains(&dim) {
        return Err(JsError::new("dim must be between 1 and 8"));
    }
    let p = target(target_name, dim)?;
    let grid = Grid::uniform(dim, 6.0, points_per_unit).map_err(js_err)?;
    let opts = CrossOptions { tol, max_rank: 64, ..CrossOptions::default() };
    let (tt, _) = cross_on_grid(&grid, |x| (-p.value(x) / 2.0).exp(), &opts).map_err(js_err)?;
    Ok(tt.ranks().into_iter().map(|r| r as u32).collect())
}
