//! Command-line front end: argument parsing, configuration and the
//! subcommands of the `condrisk` binary.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bias::{fit_components, BandwidthChoice, FitConfig, FittedComponents, LagBandwidth};
use crate::bootstrap::{risk_maps, BootstrapConfig, BootstrapEngine};
use crate::error::{Error, ErrorCategory, Result};
use crate::sim::{ik_baseline, run_study, scenario_by_name, scenario_field, scenario_registry, write_summary_csv};
use crate::spatial::{make_grid, Location, SpatialSample};

pub use config::{BandwidthSpec, GridArg, RunConfig, Settings};
pub use io::{ingest_csv, ingest_reader, IkMap, MIN_INPUT_SIZE};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 1;
/// Bootstrap replicates for `riskmap` when `--B` is absent.
pub const DEFAULT_RISKMAP_B: usize = 1000;
/// Side of the default estimation grid over the sample's bounding box.
pub const DEFAULT_GRID_SIDE: usize = 30;
/// Default scenario for `simulate` and `study`.
pub const DEFAULT_SCENARIO: &str = "table1-15x15";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Input => EXIT_INPUT,
        ErrorCategory::Numerical => EXIT_NUMERICAL,
        ErrorCategory::Config => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(name = "condrisk", version, about = "Exceedance-risk maps for heteroscedastic spatial data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate trend, variance and variogram; write per-site fitted values.
    Fit(Opts),
    /// Bootstrap exceedance probabilities on a grid or target set.
    Riskmap(Opts),
    /// Write one simulated field of a named scenario.
    Simulate(Opts),
    /// Run a Monte Carlo study of a named scenario.
    Study(Opts),
    /// Indicator kriging exceedance probabilities.
    Ik(Opts),
}

/// Options shared by all subcommands. Values stay as text so they can be
/// merged with a configuration file before validation.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<String>,
    /// `conditional` (cs) or `unconditional` (nc).
    #[arg(long)]
    pub mode: Option<String>,
    /// Comma-separated thresholds.
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Bootstrap replicates.
    #[arg(long = "B", value_name = "B")]
    pub b: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// `auto`, `h11,h12,h22` or `h11,h12,h22/h11,h12,h22` (trend/variance).
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Variogram smoothing bandwidth; cross-validated when absent.
    #[arg(long)]
    pub h3: Option<String>,
    /// `nx,ny` over the sample's bounding box, or `nx,ny,x1min,x1max,x2min,x2max`.
    #[arg(long)]
    pub grid: Option<String>,
    /// CSV of target locations with header `x1,x2`.
    #[arg(long)]
    pub targets: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
    /// Accept inputs with fewer than ten points.
    #[arg(long)]
    pub allow_small: bool,
    /// Add indicator kriging results (study rows, riskmap sidecar).
    #[arg(long)]
    pub ik: bool,
    /// List scenario names and exit.
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of simulated fields in a study.
    #[arg(long = "n-sim")]
    pub n_sim: Option<String>,
    /// Field index written by `simulate`.
    #[arg(long)]
    pub field: Option<String>,
}

impl Opts {
    fn flag_settings(&self) -> Settings {
        let mut s = Settings::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_string(), v.clone());
            }
        };
        put("input", &self.input);
        put("output", &self.output);
        put("mode", &self.mode);
        put("thresholds", &self.thresholds);
        put("B", &self.b);
        put("seed", &self.seed);
        put("bandwidth", &self.bandwidth);
        put("h3", &self.h3);
        put("grid", &self.grid);
        put("targets", &self.targets);
        put("threads", &self.threads);
        put("scenario", &self.scenario);
        put("n_sim", &self.n_sim);
        put("field", &self.field);
        if self.allow_small {
            s.insert("allow_small".into(), "true".into());
        }
        if self.ik {
            s.insert("ik".into(), "true".into());
        }
        s
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => config::read_config(p)?,
            None => Settings::new(),
        };
        RunConfig::resolve(&file, &self.flag_settings())
    }
}

/// Parses `args` and runs the command; returns the process exit code.
/// Errors are reported on stderr as `error[tag]: message`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.tag());
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let opts = match &cli.command {
        Command::Fit(o) | Command::Riskmap(o) | Command::Simulate(o) | Command::Study(o) | Command::Ik(o) => o,
    };
    if opts.list {
        let mut out = std::io::stdout().lock();
        for s in scenario_registry() {
            writeln!(out, "{}", s.name)?;
        }
        return Ok(());
    }
    let cfg = opts.resolve()?;
    let go = || match &cli.command {
        Command::Fit(_) => cmd_fit(&cfg),
        Command::Riskmap(_) => cmd_riskmap(&cfg),
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::Study(_) => cmd_study(&cfg),
        Command::Ik(_) => cmd_ik(&cfg),
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {t} threads: {e}")))?
            .install(go),
        None => go(),
    }
}

fn fit_config(cfg: &RunConfig) -> FitConfig {
    let (trend, variance) = match cfg.bandwidth {
        BandwidthSpec::Auto => (BandwidthChoice::Auto, BandwidthChoice::Auto),
        BandwidthSpec::Explicit(h, h2) => {
            (BandwidthChoice::Fixed(h), h2.map_or(BandwidthChoice::Auto, BandwidthChoice::Fixed))
        }
    };
    let h3 = cfg.h3.map_or(LagBandwidth::Auto, LagBandwidth::Fixed);
    FitConfig { trend, variance, h3, ..FitConfig::default() }
}

/// Estimation locations: `--targets`, else `--grid`, else a default grid
/// over the sample's bounding box.
fn estimation_targets(cfg: &RunConfig, sample: &SpatialSample) -> Result<Vec<Location>> {
    if let Some(p) = &cfg.targets {
        return io::read_targets(p);
    }
    let grid = cfg.grid.unwrap_or(GridArg { nx: DEFAULT_GRID_SIDE, ny: DEFAULT_GRID_SIDE, bounds: None });
    Ok(make_grid(&grid.spec(sample.locations())?))
}

fn load(cfg: &RunConfig) -> Result<SpatialSample> {
    io::ingest_csv(cfg.require_input()?, cfg.allow_small)
}

/// Path of the text report written next to `output`.
pub fn report_path(output: &Path) -> PathBuf {
    output.with_extension("report.txt")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(",")
}

/// Human-readable summary of a fit. Everything except the wall time is a
/// deterministic function of the input and settings.
pub fn fit_report(fit: &FittedComponents, extra: &[(&str, String)], seconds: f64) -> String {
    let mut s = String::new();
    let h = fit.trend_bandwidth.entries();
    let h2 = fit.variance_bandwidth.entries();
    let _ = writeln!(s, "n = {}", fit.n());
    let _ = writeln!(s, "targets = {}", fit.targets.len());
    let _ = writeln!(s, "trend_bandwidth = {:.6e},{:.6e},{:.6e}", h[0], h[1], h[2]);
    let _ = writeln!(s, "variance_bandwidth = {:.6e},{:.6e},{:.6e}", h2[0], h2[1], h2[2]);
    let _ = writeln!(s, "lag_bandwidth = {:.6e}", fit.lag_bandwidth);
    let _ = writeln!(s, "variogram_nugget = {:.6e}", fit.variogram.nugget);
    let _ = writeln!(s, "variogram_nodes = {}", fmt_list(&fit.variogram.nodes));
    let _ = writeln!(s, "variogram_weights = {}", fmt_list(&fit.variogram.weights));
    let _ = writeln!(s, "iterations = {}", fit.iterations);
    let _ = writeln!(s, "converged = {}", fit.converged);
    for (k, v) in extra {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "wall_time_s = {seconds:.3}");
    s
}

fn write_report(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output {
        Some(out) => std::fs::write(report_path(out), text)?,
        None => eprint!("{text}"),
    }
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let sample = load(cfg)?;
    let fit = fit_components(&sample, &[], &fit_config(cfg))?;
    io::write_fit_csv(io::open_output(cfg.output.as_deref())?, &fit)?;
    write_report(cfg, &fit_report(&fit, &[], start.elapsed().as_secs_f64()))
}

fn cmd_riskmap(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let thresholds = cfg.require_thresholds()?.to_vec();
    let sample = load(cfg)?;
    let targets = estimation_targets(cfg, &sample)?;
    let fit = fit_components(&sample, &targets, &fit_config(cfg))?;
    let engine = BootstrapEngine::new(&fit, cfg.mode)?;
    let b = cfg.b.unwrap_or(DEFAULT_RISKMAP_B);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let ensemble = engine.run(&BootstrapConfig::new(b, seed)?);
    let maps = risk_maps(&ensemble, &thresholds);
    io::write_riskmap_csv(io::open_output(cfg.output.as_deref())?, &maps)?;
    if cfg.ik {
        let ik = ik_maps(&sample, &targets, &thresholds)?;
        match &cfg.output {
            Some(out) => io::write_ik_csv(std::fs::File::create(out.with_extension("ik.csv"))?, &ik)?,
            None => log::warn!("--ik with riskmap needs --output; indicator map skipped"),
        }
    }
    let extra = [
        ("mode", cfg.mode.name().to_string()),
        ("B", b.to_string()),
        ("seed", seed.to_string()),
    ];
    write_report(cfg, &fit_report(&fit, &extra, start.elapsed().as_secs_f64()))
}

fn ik_maps(sample: &SpatialSample, targets: &[Location], thresholds: &[f64]) -> Result<Vec<IkMap>> {
    thresholds
        .iter()
        .map(|&c| {
            let r = ik_baseline(sample, targets, c)?;
            Ok(IkMap { locations: targets.to_vec(), threshold: c, clamped: r.clamped, raw: r.raw })
        })
        .collect()
}

fn cmd_ik(cfg: &RunConfig) -> Result<()> {
    let thresholds = cfg.require_thresholds()?.to_vec();
    let sample = load(cfg)?;
    let targets = estimation_targets(cfg, &sample)?;
    let maps = ik_maps(&sample, &targets, &thresholds)?;
    io::write_ik_csv(io::open_output(cfg.output.as_deref())?, &maps)
}

fn scenario(cfg: &RunConfig) -> Result<crate::sim::ScenarioSpec> {
    let mut spec = scenario_by_name(cfg.scenario.as_deref().unwrap_or(DEFAULT_SCENARIO))?;
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    if let Some(b) = cfg.b {
        spec.b = b;
    }
    if let Some(n) = cfg.n_sim {
        spec.n_sim = n;
    }
    if !cfg.thresholds.is_empty() {
        spec.thresholds = cfg.thresholds.clone();
    }
    spec.ik |= cfg.ik;
    Ok(spec)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let spec = scenario(cfg)?;
    let sample = scenario_field(&spec, cfg.field)?;
    io::write_sample_csv(io::open_output(cfg.output.as_deref())?, &sample)
}

fn cmd_study(cfg: &RunConfig) -> Result<()> {
    let spec = scenario(cfg)?;
    let rows = run_study(&spec)?;
    write_summary_csv(io::open_output(cfg.output.as_deref())?, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(exit_code(&Error::TooFewPoints { got: 3, need: 10 }), EXIT_INPUT);
        assert_eq!(exit_code(&Error::ZeroSill), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    }

    #[test]
    fn usage_errors_are_config() {
        assert_eq!(main_with_args(["condrisk", "riskmap", "--bogus"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["condrisk", "--help"]), EXIT_OK);
    }

    #[test]
    fn b_flag_is_capitalized() {
        let cli = Cli::try_parse_from(["condrisk", "riskmap", "--B", "20", "--thresholds", "1,2"]).unwrap();
        let Command::Riskmap(o) = cli.command else { panic!() };
        let cfg = o.resolve().unwrap();
        assert_eq!(cfg.b, Some(20));
        assert_eq!(cfg.thresholds, vec![1.0, 2.0]);
    }

    #[test]
    fn missing_input_is_config_error() {
        assert_eq!(main_with_args(["condrisk", "fit"]), EXIT_CONFIG);
    }

    #[test]
    fn fit_config_from_bandwidth() {
        let mut cfg = RunConfig::resolve(&Settings::new(), &Settings::new()).unwrap();
        assert_eq!(fit_config(&cfg).trend, BandwidthChoice::Auto);
        cfg.bandwidth = config::parse_bandwidth("0.3").unwrap();
        cfg.h3 = Some(0.1);
        let f = fit_config(&cfg);
        assert!(matches!(f.trend, BandwidthChoice::Fixed(_)));
        assert_eq!(f.variance, BandwidthChoice::Auto);
        assert_eq!(f.h3, LagBandwidth::Fixed(0.1));
    }
}
