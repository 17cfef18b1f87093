use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ttbrwp::experiment::{
    compare_methods, run_experiment, write_comparison, ExperimentConfig, BENCH_FILE, PRESET_IDS,
};
use ttbrwp::samplers::Method;

#[derive(Parser)]
#[command(name = "sample", version, about = "Tensor-train proximal sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv, ensemble_final.csv and config_echo.txt.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare tensor-train and Monte-Carlo evaluation of the normalizer integral.
    BenchIntegration {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several methods on the same problem and seed and merge their metrics.
    Compare {
        /// Config files; repeat the flag for several. They must share experiment and seed.
        #[arg(long)]
        config: Vec<PathBuf>,
        /// Comma-separated methods applied to every config (default: each config's own).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the preset ids.
    Presets,
}

/// Flags named exactly like the config keys; they override values from the config file.
#[derive(Args, Default)]
struct Overrides {
    /// Preset id (ex1a, ex1b, ex2, ex3a, ex3b, ex4, ex5, ex7, ex8, ex9, bench-integration, fig2, fig3).
    #[arg(long)]
    experiment: Option<String>,
    /// tt-brwp, brwp-mc, ula or mala.
    #[arg(long)]
    method: Option<String>,
    /// Number of particles.
    #[arg(long)]
    particles: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    /// Step size.
    #[arg(long)]
    h: Option<String>,
    /// Proximal time.
    #[arg(long = "prox-T")]
    prox_t: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Half width of the grid box [-L, L]^d.
    #[arg(long = "grid-L")]
    grid_l: Option<String>,
    /// Grid points per unit length.
    #[arg(long = "grid-ppu")]
    grid_ppu: Option<String>,
    /// uniform or gauss-legendre.
    #[arg(long = "grid-scheme")]
    grid_scheme: Option<String>,
    /// Cross and rounding tolerance (default 1e-6).
    #[arg(long = "cross-tol")]
    cross_tol: Option<String>,
    /// Rank cap for cross and rounding (default 64).
    #[arg(long = "max-rank")]
    max_rank: Option<String>,
    /// Use grad V + grad log(eta_hat_T) / beta as the drift instead of the consistent form.
    #[arg(long = "algorithm-literal")]
    algorithm_literal: bool,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Initial mean: one value for every coordinate or a comma-separated vector.
    #[arg(long = "init-mean", allow_hyphen_values = true)]
    init_mean: Option<String>,
    #[arg(long = "init-var")]
    init_var: Option<String>,
    /// Relative clamp level for the normalizer (0 turns nonpositive values into errors).
    #[arg(long = "eta0-floor")]
    eta0_floor: Option<String>,
    /// hadamard or cross.
    #[arg(long)]
    quotient: Option<String>,
    /// Particle-sum normalizer: mc, closed-form or tensor.
    #[arg(long)]
    normalizer: Option<String>,
    #[arg(long = "mc-samples")]
    mc_samples: Option<String>,
    #[arg(long = "kde-batch")]
    kde_batch: Option<String>,
    #[arg(long = "bench-dims")]
    bench_dims: Option<String>,
    #[arg(long = "bench-mc-budget")]
    bench_mc_budget: Option<String>,
    #[arg(long = "bench-lp-dim")]
    bench_lp_dim: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let fields: [(&'static str, &Option<String>); 24] = [
            ("experiment", &self.experiment),
            ("method", &self.method),
            ("particles", &self.particles),
            ("iterations", &self.iterations),
            ("h", &self.h),
            ("prox-T", &self.prox_t),
            ("beta", &self.beta),
            ("grid-L", &self.grid_l),
            ("grid-ppu", &self.grid_ppu),
            ("grid-scheme", &self.grid_scheme),
            ("cross-tol", &self.cross_tol),
            ("max-rank", &self.max_rank),
            ("seed", &self.seed),
            ("out", &self.out),
            ("init-mean", &self.init_mean),
            ("init-var", &self.init_var),
            ("eta0-floor", &self.eta0_floor),
            ("quotient", &self.quotient),
            ("normalizer", &self.normalizer),
            ("mc-samples", &self.mc_samples),
            ("kde-batch", &self.kde_batch),
            ("bench-dims", &self.bench_dims),
            ("bench-mc-budget", &self.bench_mc_budget),
            ("bench-lp-dim", &self.bench_lp_dim),
        ];
        let mut out: Vec<(&'static str, String)> = fields.iter().filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone()))).collect();
        if self.algorithm_literal {
            out.push(("algorithm-literal", "true".into()));
        }
        out
    }
}

/// Preset (from the file's or the command line's `experiment`), then the file, then the flags.
fn load(config: Option<&PathBuf>, overrides: &Overrides, fallback_experiment: Option<&str>) -> Result<ExperimentConfig> {
    let mut text = match config {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    text.push('\n');
    for (k, v) in overrides.pairs() {
        if v.contains('#') || v.contains('\n') {
            bail!("value for --{k} cannot contain '#' or newlines");
        }
        text.push_str(&format!("{k} = {v}\n"));
    }
    let cfg = ExperimentConfig::parse(&text)?;
    if !cfg.experiment.is_empty() {
        return Ok(cfg);
    }
    match fallback_experiment {
        Some(id) => Ok(ExperimentConfig::parse(&format!("experiment = {id}\n{text}"))?),
        None => bail!("no experiment selected: pass --config FILE or --experiment ID"),
    }
}

fn run(config: Option<PathBuf>, overrides: Overrides) -> Result<()> {
    let cfg = load(config.as_ref(), &overrides, None)?;
    let artifacts = run_experiment(&cfg).with_context(|| format!("experiment '{}' failed; partial outputs in {}", cfg.experiment, cfg.out.display()))?;
    for f in artifacts.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn bench(config: Option<PathBuf>, overrides: Overrides) -> Result<()> {
    let mut cfg = load(config.as_ref(), &overrides, Some("bench-integration"))?;
    if !cfg.is_benchmark() {
        // a sampling config supplies grid and tolerances; the benchmark itself is fixed
        cfg.experiment = "bench-integration".into();
    }
    let artifacts = run_experiment(&cfg)?;
    print!("{}", std::fs::read_to_string(artifacts.dir.join(BENCH_FILE))?);
    for f in artifacts.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn compare(configs: Vec<PathBuf>, methods: Option<Vec<String>>, overrides: Overrides) -> Result<()> {
    let mut base = Vec::new();
    if configs.is_empty() {
        if overrides.experiment.is_some() {
            base.push(load(None, &overrides, None)?);
        }
    } else {
        for c in &configs {
            base.push(load(Some(c), &overrides, None)?);
        }
    }
    let methods: Option<Vec<Method>> = match methods {
        Some(list) => Some(list.iter().filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect::<Result<_, _>>()?),
        None => None,
    };
    let mut set = Vec::new();
    for cfg in base {
        match &methods {
            Some(ms) => set.extend(ms.iter().map(|m| ExperimentConfig { method: *m, ..cfg.clone() })),
            None => set.push(cfg),
        }
    }
    if set.is_empty() {
        return Ok(());
    }
    let dir = match &overrides.out {
        Some(o) => PathBuf::from(o),
        None => set[0].out.join("compare"),
    };
    let runs = compare_methods(&set)?;
    for f in write_comparison(&runs, &dir)? {
        eprintln!("wrote {}", f.display());
    }
    println!("method,initial_mean_error,final_mean_error,diverged,status");
    for r in &runs {
        let status = r.error.as_ref().map_or("ok".to_string(), |e| e.to_string());
        println!("{},{},{},{},{status}", r.method, r.initial_error(), r.final_error(), r.diverged());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => run(config, overrides),
        Command::BenchIntegration { config, overrides } => bench(config, overrides),
        Command::Compare { config, methods, overrides } => compare(config, methods, overrides),
        Command::Presets => {
            for id in PRESET_IDS {
                println!("{id}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
