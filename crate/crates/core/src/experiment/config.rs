//! Flat `key = value` experiment configuration. Keys are the long CLI flag names.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::Scheme;
use crate::kernel::{DriftForm, QuotientMode};
use crate::samplers::{GridSpec, Method, NormalizerMode, SamplerConfig};

use super::presets::preset;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub method: Method,
    pub particles: usize,
    pub iterations: usize,
    pub h: f64,
    pub prox_t: f64,
    pub beta: f64,
    pub grid: GridSpec,
    pub cross_tol: f64,
    pub max_rank: usize,
    pub algorithm_literal: bool,
    pub seed: u64,
    pub out: PathBuf,
    /// Initial ensemble mean: empty means the origin, one value is broadcast.
    pub init_mean: Vec<f64>,
    pub init_var: f64,
    pub eta0_floor: f64,
    pub quotient: QuotientMode,
    pub normalizer: NormalizerMode,
    pub mc_samples: usize,
    pub kde_batch: usize,
    /// Dimensions swept by the integration benchmark.
    pub bench_dims: Vec<usize>,
    /// Fixed Monte-Carlo sample budgets of the integration benchmark (besides the matched one).
    pub bench_mc_budget: Vec<usize>,
    /// Dimension of the nonconvex integrand in the benchmark.
    pub bench_lp_dim: usize,
}

/// Every key, in the order `write` emits them.
pub const KEYS: [&str; 22] = [
    "experiment",
    "method",
    "particles",
    "iterations",
    "h",
    "prox-T",
    "beta",
    "grid-L",
    "grid-ppu",
    "grid-scheme",
    "cross-tol",
    "max-rank",
    "algorithm-literal",
    "seed",
    "out",
    "init-mean",
    "init-var",
    "eta0-floor",
    "quotient",
    "normalizer",
    "mc-samples",
    "kde-batch",
];

/// Benchmark-only keys, appended after `KEYS`.
pub const BENCH_KEYS: [&str; 3] = ["bench-dims", "bench-mc-budget", "bench-lp-dim"];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Split one line into `(key, value)`; `None` for blank and comment lines.
fn split_line(line: &str, lineno: usize) -> Result<Option<(String, String)>> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let (k, v) = body.split_once('=').ok_or_else(|| Error::Config(format!("line {lineno}: expected 'key = value', got '{body}'")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("line {lineno}: empty key")));
    }
    Ok(Some((k.to_string(), v.trim().to_string())))
}

impl ExperimentConfig {
    /// Parse a config file body. The `experiment` key selects the preset that supplies every
    /// value the file leaves out; without it the generic defaults are used.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(kv) = split_line(line, i + 1)? {
                pairs.push(kv);
            }
        }
        let mut cfg = match pairs.iter().rev().find(|(k, _)| k == "experiment") {
            Some((_, id)) => preset(id)?,
            None => ExperimentConfig::default(),
        };
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Set one key from its textual value. Setting `experiment` only changes the id; use
    /// `presets::preset` to reset all values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.to_string(),
            "method" => self.method = value.parse()?,
            "particles" => self.particles = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "h" => self.h = parse(key, value)?,
            "prox-T" => self.prox_t = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "grid-L" => self.grid.half_width = parse(key, value)?,
            "grid-ppu" => self.grid.points_per_unit = parse(key, value)?,
            "grid-scheme" => self.grid.scheme = value.parse::<Scheme>()?,
            "cross-tol" => self.cross_tol = parse(key, value)?,
            "max-rank" => self.max_rank = parse(key, value)?,
            "algorithm-literal" => self.algorithm_literal = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "init-mean" => self.init_mean = parse_list(key, value)?,
            "init-var" => self.init_var = parse(key, value)?,
            "eta0-floor" => self.eta0_floor = parse(key, value)?,
            "quotient" => self.quotient = value.parse()?,
            "normalizer" => self.normalizer = value.parse()?,
            "mc-samples" => self.mc_samples = parse(key, value)?,
            "kde-batch" => self.kde_batch = parse(key, value)?,
            "bench-dims" => self.bench_dims = parse_list(key, value)?,
            "bench-mc-budget" => self.bench_mc_budget = parse_list(key, value)?,
            "bench-lp-dim" => self.bench_lp_dim = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "experiment" => self.experiment.clone(),
            "method" => self.method.to_string(),
            "particles" => self.particles.to_string(),
            "iterations" => self.iterations.to_string(),
            "h" => self.h.to_string(),
            "prox-T" => self.prox_t.to_string(),
            "beta" => self.beta.to_string(),
            "grid-L" => self.grid.half_width.to_string(),
            "grid-ppu" => self.grid.points_per_unit.to_string(),
            "grid-scheme" => self.grid.scheme.to_string(),
            "cross-tol" => self.cross_tol.to_string(),
            "max-rank" => self.max_rank.to_string(),
            "algorithm-literal" => self.algorithm_literal.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            "init-mean" => join(&self.init_mean),
            "init-var" => self.init_var.to_string(),
            "eta0-floor" => self.eta0_floor.to_string(),
            "quotient" => self.quotient.to_string(),
            "normalizer" => self.normalizer.to_string(),
            "mc-samples" => self.mc_samples.to_string(),
            "kde-batch" => self.kde_batch.to_string(),
            "bench-dims" => join(&self.bench_dims),
            "bench-mc-budget" => join(&self.bench_mc_budget),
            "bench-lp-dim" => self.bench_lp_dim.to_string(),
            _ => return None,
        })
    }

    /// Serialize every key; `parse(write())` reproduces the config exactly.
    pub fn write(&self) -> Result<String> {
        let out = self.out.display().to_string();
        if out.contains('#') || out.contains('\n') {
            return Err(Error::Config(format!("output path '{out}' cannot be written to a config file")));
        }
        let mut s = String::new();
        for key in KEYS.iter().chain(BENCH_KEYS.iter()) {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("known key"));
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 && !self.is_recursion_preset() && !self.is_benchmark() {
            return Err(Error::Config(format!("need at least 2 particles, got {}", self.particles)));
        }
        if !(self.init_var > 0.0) {
            return Err(Error::Config(format!("init-var must be positive, got {}", self.init_var)));
        }
        self.sampler_config().validate()
    }

    pub fn is_recursion_preset(&self) -> bool {
        matches!(self.experiment.as_str(), "fig2" | "fig3")
    }

    pub fn is_benchmark(&self) -> bool {
        self.experiment == "bench-integration"
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            method: self.method,
            h: self.h,
            t: self.prox_t,
            beta: self.beta,
            grid: self.grid,
            cross_tol: self.cross_tol,
            max_rank: self.max_rank,
            kde_batch: self.kde_batch,
            mc_samples: self.mc_samples,
            normalizer: self.normalizer,
            drift_form: if self.algorithm_literal { DriftForm::Literal } else { DriftForm::Consistent },
            quotient: self.quotient,
            eta0_floor: self.eta0_floor,
            seed: self.seed,
            ..SamplerConfig::default()
        }
    }

    /// Initial mean expanded to `d` coordinates.
    pub fn initial_mean(&self, d: usize) -> Result<Vec<f64>> {
        match self.init_mean.len() {
            0 => Ok(vec![0.0; d]),
            1 => Ok(vec![self.init_mean[0]; d]),
            n if n == d => Ok(self.init_mean.clone()),
            n => Err(Error::Config(format!("init-mean has {n} entries for a {d}-dimensional problem"))),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        ExperimentConfig {
            experiment: String::new(),
            method: s.method,
            particles: 1000,
            iterations: 50,
            h: s.h,
            prox_t: s.t,
            beta: s.beta,
            grid: s.grid,
            cross_tol: s.cross_tol,
            max_rank: s.max_rank,
            algorithm_literal: false,
            seed: 1,
            out: PathBuf::from("out"),
            init_mean: Vec::new(),
            init_var: 1.0,
            eta0_floor: s.eta0_floor,
            quotient: s.quotient,
            normalizer: s.normalizer,
            mc_samples: s.mc_samples,
            kde_batch: s.kde_batch,
            bench_dims: vec![6],
            bench_mc_budget: vec![1000, 1_000_000],
            bench_lp_dim: 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = ExperimentConfig::parse("# header\n\nexperiment = ex2  # trailing\nh=0.05\n").unwrap();
        assert_eq!(cfg.experiment, "ex2");
        assert_eq!(cfg.h, 0.05);
    }

    #[test]
    fn file_values_override_the_preset() {
        let base = preset("ex3a").unwrap();
        let cfg = ExperimentConfig::parse("experiment = ex3a\nparticles = 17\n").unwrap();
        assert_eq!(cfg.particles, 17);
        assert_eq!(cfg.init_var, base.init_var);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(ExperimentConfig::parse("nonsense = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("h = fast"), Err(Error::Config(_))));
        assert!(ExperimentConfig::parse("just a line").is_err());
        assert!(matches!(ExperimentConfig::parse("experiment = ex42"), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn initial_mean_broadcasts() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.initial_mean(3).unwrap(), vec![0.0; 3]);
        cfg.init_mean = vec![2.0];
        assert_eq!(cfg.initial_mean(2).unwrap(), vec![2.0, 2.0]);
        cfg.init_mean = vec![1.0, 2.0];
        assert!(cfg.initial_mean(3).is_err());
    }
}
