//! Running presets: sampling runs, closed-form recursion traces and method comparisons.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::oracle::{biased_recursion, scalar_recursion};
use crate::potentials::Potential;
use crate::samplers::{run_sampler, Method, MetricsRow, ParticleEnsemble};

use super::bench::{bench_integration, write_bench_csv};
use super::config::ExperimentConfig;
use super::presets::{build_potential, preset_table_hash, problem_description};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const ENSEMBLE_FILE: &str = "ensemble_final.csv";
pub const ECHO_FILE: &str = "config_echo.txt";
pub const TRACES_FILE: &str = "traces.csv";
pub const BENCH_FILE: &str = "bench.csv";
pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_SUMMARY_FILE: &str = "compare_summary.csv";

/// Fixed metrics columns; `mean_0 .. mean_{d-1}` follow.
pub const METRICS_COLUMNS: [&str; 9] = ["iteration", "mean_error", "cov_error", "var_error", "tv", "max_rank", "clamped", "bandwidth_clamped", "acceptance"];

pub fn metrics_header(d: usize) -> String {
    let mut cols: Vec<String> = METRICS_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((0..d).map(|k| format!("mean_{k}")));
    cols.join(",")
}

pub fn metrics_line(row: &MetricsRow) -> String {
    let mut s = format!(
        "{},{},{},{},{},{},{},{},{}",
        row.iteration, row.mean_error, row.cov_error, row.var_error, row.tv, row.max_rank, row.clamped, row.bandwidth_clamped, row.acceptance
    );
    for m in &row.mean {
        s.push(',');
        s.push_str(&m.to_string());
    }
    s
}

/// Config as written next to the outputs: loadable with `--config`, plus comment lines
/// identifying the problem and the preset table it came from.
pub fn config_echo(cfg: &ExperimentConfig) -> Result<String> {
    let problem = problem_description(&cfg.experiment).unwrap_or_else(|_| "custom".into());
    Ok(format!(
        "# ttbrwp {}\n# preset-table-sha256 = {}\n# problem: {problem}\n{}",
        env!("CARGO_PKG_VERSION"),
        preset_table_hash(),
        cfg.write()?
    ))
}

/// Result of a sampling run that may have stopped early.
#[derive(Debug)]
pub struct SampledRun {
    pub rows: Vec<MetricsRow>,
    pub wall_ms: Vec<f64>,
    /// Last ensemble reached (the final one when `error` is `None`).
    pub ensemble: ParticleEnsemble,
    pub error: Option<Error>,
}

/// Run the sampler of `cfg` on `potential`, keeping every row produced before a failure.
pub fn sample(cfg: &ExperimentConfig, potential: &dyn Potential) -> Result<SampledRun> {
    let d = potential.dim();
    let initial = ParticleEnsemble::gaussian(cfg.particles, &cfg.initial_mean(d)?, cfg.init_var, cfg.seed);
    let mut rows = Vec::new();
    let mut wall_ms = Vec::new();
    let mut last = initial.clone();
    let result = run_sampler(&cfg.sampler_config(), potential, initial, cfg.iterations, &mut |row, ens| {
        rows.push(row.clone());
        wall_ms.push(row.wall_ms);
        last = ens.clone();
    });
    let error = result.err();
    if let Some(e) = &error {
        log::error!("{} stopped after iteration {}: {e}", cfg.method, last.iteration);
    }
    Ok(SampledRun { rows, wall_ms, ensemble: last, error })
}

/// Files written by `run_experiment`.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    files.push(path.clone());
    Ok(BufWriter::new(File::create(path)?))
}

/// Run one preset-derived config and write its artifacts into `cfg.out`. Sampler failures
/// are reported as errors after the rows produced so far have been written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    create(&dir, ECHO_FILE, &mut files)?.write_all(config_echo(cfg)?.as_bytes())?;

    if cfg.is_recursion_preset() {
        let mut w = create(&dir, TRACES_FILE, &mut files)?;
        write_traces(&recursion_traces(cfg)?, &mut w)?;
        w.flush()?;
        return Ok(RunArtifacts { dir, files });
    }
    if cfg.is_benchmark() {
        let rows = bench_integration(cfg)?;
        let mut w = create(&dir, BENCH_FILE, &mut files)?;
        write_bench_csv(&rows, &mut w)?;
        w.flush()?;
        return Ok(RunArtifacts { dir, files });
    }

    let potential = build_potential(&cfg.experiment)?;
    let run = sample(cfg, potential.as_ref())?;
    let mut w = create(&dir, METRICS_FILE, &mut files)?;
    writeln!(w, "{}", metrics_header(potential.dim()))?;
    for row in &run.rows {
        writeln!(w, "{}", metrics_line(row))?;
    }
    w.flush()?;
    // wall-clock times live in their own file so the metrics stay byte-reproducible
    let mut t = create(&dir, TIMING_FILE, &mut files)?;
    writeln!(t, "iteration,wall_ms")?;
    for (row, ms) in run.rows.iter().zip(&run.wall_ms) {
        writeln!(t, "{},{ms:.3}", row.iteration)?;
    }
    t.flush()?;
    let mut e = create(&dir, ENSEMBLE_FILE, &mut files)?;
    run.ensemble.write_csv(&mut e)?;
    e.flush()?;
    match run.error {
        Some(err) => Err(err),
        None => Ok(RunArtifacts { dir, files }),
    }
}

/// One closed-form variance trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub series: &'static str,
    pub sigma: f64,
    pub t: f64,
    pub h: f64,
    pub iteration: usize,
    pub variance: f64,
    /// `|variance - sigma^2 / beta|`
    pub error: f64,
}

/// Variance traces of the closed-form recursions. `fig2` compares the corrected and the
/// empirical density estimate for three target widths; `fig3` sweeps the proximal time.
/// Traces start at `init_var * sigma^2 / beta` (relative to the target); a trace stops early
/// if the recursion leaves its domain.
pub fn recursion_traces(cfg: &ExperimentConfig) -> Result<Vec<TracePoint>> {
    type Step = fn(f64, f64, f64, f64, f64, f64) -> Result<(f64, f64)>;
    let mut runs: Vec<(&'static str, f64, f64, Step)> = Vec::new();
    match cfg.experiment.as_str() {
        "fig2" => {
            for sigma in [2.0, 0.5, 0.25] {
                runs.push(("corrected", sigma, cfg.prox_t, scalar_recursion));
                runs.push(("empirical", sigma, cfg.prox_t, biased_recursion));
            }
        }
        "fig3" => {
            for sigma in [0.5, 1.0] {
                for t in [0.05, 0.1, 0.2, 0.4] {
                    runs.push(("corrected", sigma, t, scalar_recursion));
                }
            }
        }
        other => return Err(Error::Config(format!("'{other}' has no recursion traces"))),
    }
    let mut out = Vec::new();
    for (series, sigma, t, step) in runs {
        let target = sigma * sigma / cfg.beta;
        let (mut m, mut s2) = (0.0, cfg.init_var * target);
        for k in 0..=cfg.iterations {
            out.push(TracePoint { series, sigma, t, h: cfg.h, iteration: k, variance: s2, error: (s2 - target).abs() });
            if k == cfg.iterations {
                break;
            }
            match step(m, s2, sigma * sigma, t, cfg.h, cfg.beta) {
                Ok((m1, s1)) if s1.is_finite() => (m, s2) = (m1, s1),
                Ok(_) | Err(_) => {
                    log::warn!("{series} trace for sigma={sigma}, T={t} stopped at iteration {k}");
                    break;
                }
            }
        }
    }
    Ok(out)
}

pub fn write_traces<W: Write>(points: &[TracePoint], w: &mut W) -> Result<()> {
    writeln!(w, "series,sigma,T,h,iteration,variance,error")?;
    for p in points {
        writeln!(w, "{},{},{},{},{},{},{}", p.series, p.sigma, p.t, p.h, p.iteration, p.variance, p.error)?;
    }
    Ok(())
}

/// Outcome of one method in a comparison.
#[derive(Debug)]
pub struct MethodRun {
    pub method: Method,
    pub rows: Vec<MetricsRow>,
    pub error: Option<Error>,
}

impl MethodRun {
    pub fn initial_error(&self) -> f64 {
        self.rows.first().map_or(f64::NAN, |r| r.mean_error)
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.mean_error)
    }

    /// The run failed, or its mean error ended above where it started.
    pub fn diverged(&self) -> bool {
        self.error.is_some() || !(self.final_error() <= self.initial_error())
    }
}

/// Run every config (one per method) on the shared problem and seed.
pub fn compare_methods(configs: &[ExperimentConfig]) -> Result<Vec<MethodRun>> {
    let Some(first) = configs.first() else {
        return Ok(Vec::new());
    };
    for c in configs {
        if c.experiment != first.experiment || c.seed != first.seed {
            return Err(Error::Config(format!(
                "configs disagree on the problem: '{}' seed {} vs '{}' seed {}",
                first.experiment, first.seed, c.experiment, c.seed
            )));
        }
        c.validate()?;
    }
    let potential = build_potential(&first.experiment)?;
    configs
        .iter()
        .map(|c| {
            let run = sample(c, potential.as_ref())?;
            Ok(MethodRun { method: c.method, rows: run.rows, error: run.error })
        })
        .collect()
}

/// `compare.csv` (one row per method and iteration) and `compare_summary.csv`.
pub fn write_comparison(runs: &[MethodRun], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut w = create(dir, COMPARE_FILE, &mut files)?;
    writeln!(w, "method,iteration,mean_error,cov_error,var_error,tv,max_rank,acceptance")?;
    for run in runs {
        for r in &run.rows {
            writeln!(w, "{},{},{},{},{},{},{},{}", run.method, r.iteration, r.mean_error, r.cov_error, r.var_error, r.tv, r.max_rank, r.acceptance)?;
        }
    }
    w.flush()?;
    let mut s = create(dir, COMPARE_SUMMARY_FILE, &mut files)?;
    writeln!(s, "method,iterations,initial_mean_error,final_mean_error,diverged,status")?;
    for run in runs {
        let status = match &run.error {
            None => "ok".to_string(),
            Some(e) => e.to_string().replace([',', '\n'], ";"),
        };
        writeln!(
            s,
            "{},{},{},{},{},{status}",
            run.method,
            run.rows.last().map_or(0, |r| r.iteration),
            run.initial_error(),
            run.final_error(),
            run.diverged()
        )?;
    }
    s.flush()?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::preset;

    #[test]
    fn fig2_corrected_beats_empirical() {
        let cfg = preset("fig2").unwrap();
        let pts = recursion_traces(&cfg).unwrap();
        for sigma in [2.0, 0.5, 0.25] {
            let last = |s: &str| pts.iter().rfind(|p| p.series == s && p.sigma == sigma).unwrap().clone();
            let (c, e) = (last("corrected"), last("empirical"));
            assert_eq!(c.iteration, cfg.iterations);
            assert!(c.error < e.error, "sigma={sigma}: {} vs {}", c.error, e.error);
        }
    }

    #[test]
    fn empty_comparison_is_empty() {
        assert!(compare_methods(&[]).unwrap().is_empty());
    }

    #[test]
    fn mismatched_comparison_is_rejected() {
        let a = preset("ex3a").unwrap();
        let b = preset("ex5").unwrap();
        assert!(matches!(compare_methods(&[a, b]), Err(Error::Config(_))));
    }

    #[test]
    fn metrics_line_matches_header() {
        let row = MetricsRow {
            iteration: 3,
            mean: vec![0.5, -1.0],
            mean_error: 0.1,
            cov_error: f64::NAN,
            var_error: 0.2,
            tv: 0.0,
            max_rank: 4,
            clamped: 0,
            bandwidth_clamped: 1,
            acceptance: f64::NAN,
            wall_ms: 12.0,
        };
        assert_eq!(metrics_line(&row).split(',').count(), metrics_header(2).split(',').count());
    }
}
