use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::field::FieldSimulator;
use super::ik::ik_baseline;
use super::oracle::TruthKriging;
use super::scenario::{DesignKind, ScenarioSpec};
use crate::bias::{fit_components, BandwidthChoice, FitConfig, LagBandwidth};
use crate::bootstrap::{BootstrapConfig, BootstrapEngine, BootstrapMode};
use crate::error::{Error, Result};
use crate::smoothing::{select_mase_bandwidth, BandwidthMatrix, Kernel};
use crate::spatial::{split_design, Location, SpatialSample};

/// Squared-error summary for one scenario and threshold, in units of 1e-2.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub scenario: String,
    pub c: f64,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub n_failed: usize,
}

pub const SUMMARY_HEADER: [&str; 6] = ["scenario", "c", "mean", "median", "sd", "n_failed"];

impl ErrorSummary {
    /// Summarizes raw squared errors; `sd` uses the `n - 1` divisor.
    pub fn from_errors(scenario: &str, c: f64, errors: &[f64], n_failed: usize) -> Self {
        let n = errors.len();
        let (mean, median, sd) = if n == 0 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = errors.iter().sum::<f64>() / n as f64;
            let mut s = errors.to_vec();
            s.sort_by(f64::total_cmp);
            let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
            let sd = if n > 1 {
                (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (mean, median, sd)
        };
        Self {
            scenario: scenario.to_string(),
            c,
            mean: 100.0 * mean,
            median: 100.0 * median,
            sd: 100.0 * sd,
            n_failed,
        }
    }
}

/// Writes summaries as CSV with the fixed [`SUMMARY_HEADER`].
pub fn write_summary_csv<W: Write>(out: W, rows: &[ErrorSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            format!("{}", r.c),
            format!("{:.6}", r.mean),
            format!("{:.6}", r.median),
            format!("{:.6}", r.sd),
            r.n_failed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Locations shared by every field of a scenario, plus the bandwidths used
/// for all of them.
#[derive(Debug, Clone)]
pub struct StudyDesign {
    pub targets: Vec<Location>,
    /// Fixed sample sites; `None` for random designs, where each field draws
    /// its own.
    pub sample: Option<Vec<Location>>,
    pub sample_size: usize,
    pub trend_bandwidth: BandwidthMatrix,
    pub variance_bandwidth: BandwidthMatrix,
}

fn field_rng(seed: u64, field: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(field as u64);
    rng
}

fn uniform_sites(spec: &ScenarioSpec, n: usize, rng: &mut impl Rng) -> Vec<Location> {
    let b = spec.grid.bounds;
    (0..n)
        .map(|_| {
            Location::new(
                b.x1_min + (b.x1_max - b.x1_min) * rng.random::<f64>(),
                b.x2_min + (b.x2_max - b.x2_min) * rng.random::<f64>(),
            )
        })
        .collect()
}

/// Bandwidths minimizing MASE under the true trend and covariance: the trend
/// bandwidth against `(mu, Sigma)`, the variance bandwidth against
/// `(sigma^2, 2 Sigma . Sigma)`, the covariance of squared Gaussian errors.
pub fn mase_bandwidths(
    sim: &FieldSimulator,
    kernel: Kernel,
) -> Result<(BandwidthMatrix, BandwidthMatrix)> {
    let locs = sim.locations();
    let sigma = sim.covariance();
    let h = select_mase_bandwidth(locs, sim.mean(), &sigma, kernel)?;
    let var: Vec<f64> = sim.sd().iter().map(|s| s * s).collect();
    let sigma2 = DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |i, j| 2.0 * sigma[(i, j)].powi(2));
    let h2 = select_mase_bandwidth(locs, &var, &sigma2, kernel)?;
    Ok((h, h2))
}

impl StudyDesign {
    /// Builds the design. For random designs the bandwidths come from one
    /// reference draw of the sample sites.
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        let design = split_design(&spec.grid, &spec.estimation)?;
        let targets = design.estimation.locations.clone();
        let sample_size = design.sample_locations.len();
        let (sample, reference) = match spec.design {
            DesignKind::Regular => {
                (Some(design.sample_locations.clone()), design.sample_locations)
            }
            DesignKind::UniformRandom => {
                let mut rng = field_rng(spec.seed, usize::MAX);
                (None, uniform_sites(spec, sample_size, &mut rng))
            }
        };
        let sim = FieldSimulator::new(&spec.model, &reference)?;
        let (h, h2) = mase_bandwidths(&sim, Kernel::Triweight)?;
        log::info!(
            "{}: n={} n0={} H={:?} H2={:?}",
            spec.name,
            sample_size,
            targets.len(),
            h.entries(),
            h2.entries()
        );
        Ok(Self { targets, sample, sample_size, trend_bandwidth: h, variance_bandwidth: h2 })
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            trend: BandwidthChoice::Fixed(self.trend_bandwidth),
            variance: BandwidthChoice::Fixed(self.variance_bandwidth),
            h3: LagBandwidth::Auto,
            ..FitConfig::default()
        }
    }
}

/// Squared errors of one field, per threshold, over all targets.
#[derive(Debug, Clone, Default)]
struct FieldOutcome {
    np: Option<Vec<Vec<f64>>>,
    ik: Option<Vec<Vec<f64>>>,
}

/// The realization used as field `index` of a scenario.
pub fn scenario_field(spec: &ScenarioSpec, index: usize) -> Result<SpatialSample> {
    let mut rng = field_rng(spec.seed, index);
    let split = split_design(&spec.grid, &spec.estimation)?;
    let sites = match spec.design {
        DesignKind::Regular => split.sample_locations,
        DesignKind::UniformRandom => uniform_sites(spec, split.sample_locations.len(), &mut rng),
    };
    FieldSimulator::new(&spec.model, &sites)?.simulate(&mut rng)
}

struct Shared {
    sim: Option<FieldSimulator>,
    oracle: Option<TruthKriging>,
}

fn run_field(spec: &ScenarioSpec, design: &StudyDesign, shared: &Shared, index: usize) -> FieldOutcome {
    let mut rng = field_rng(spec.seed, index);
    let built;
    let (sim, oracle) = match (&shared.sim, &shared.oracle) {
        (Some(s), Some(o)) => (s, o),
        _ => {
            let sites = uniform_sites(spec, design.sample_size, &mut rng);
            let made = FieldSimulator::new(&spec.model, &sites)
                .and_then(|s| TruthKriging::new(&spec.model, &sites, &design.targets).map(|o| (s, o)));
            match made {
                Ok(v) => built = v,
                Err(e) => {
                    log::warn!("{} field {index}: {e}", spec.name);
                    return FieldOutcome::default();
                }
            }
            (&built.0, &built.1)
        }
    };
    let sample = match sim.simulate(&mut rng) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{} field {index}: {e}", spec.name);
            return FieldOutcome::default();
        }
    };
    let boot_seed = rng.next_u64();
    let truth: Vec<Vec<f64>> = spec.thresholds.iter().map(|&c| oracle.risk(sample.values(), c)).collect();
    let sq = |est: &[f64], t: &[f64]| -> Vec<f64> {
        est.iter().zip(t).map(|(a, b)| (a - b).powi(2)).collect()
    };

    let np = fit_components(&sample, &design.targets, &design.fit_config())
        .and_then(|fit| BootstrapEngine::new(&fit, BootstrapMode::Conditional))
        .and_then(|engine| {
            let ens = engine.run(&BootstrapConfig::new(spec.b, boot_seed)?);
            Ok(spec
                .thresholds
                .iter()
                .zip(&truth)
                .map(|(&c, t)| sq(&ens.exceedance(c), t))
                .collect())
        });
    let np = match np {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{} field {index}: {e}", spec.name);
            None
        }
    };
    let ik = if spec.ik {
        let r: Result<Vec<Vec<f64>>> = spec
            .thresholds
            .iter()
            .zip(&truth)
            .map(|(&c, t)| ik_baseline(&sample, &design.targets, c).map(|r| sq(&r.clamped, t)))
            .collect();
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("{} field {index} (ik): {e}", spec.name);
                None
            }
        }
    } else {
        None
    };
    FieldOutcome { np, ik }
}

fn summarize(
    name: &str,
    thresholds: &[f64],
    per_field: &[Option<&Vec<Vec<f64>>>],
) -> Vec<ErrorSummary> {
    let failed = per_field.iter().filter(|f| f.is_none()).count();
    thresholds
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let errors: Vec<f64> = per_field.iter().flatten().flat_map(|f| f[k].iter().copied()).collect();
            ErrorSummary::from_errors(name, c, &errors, failed)
        })
        .collect()
}

/// Monte Carlo study of one scenario: `n_sim` fields, each fitted with the
/// MASE bandwidths and scored against the true conditional risk at every
/// estimation location. Indicator kriging rows are labeled `<name>:ik`.
///
/// Fields run in parallel with independent seeds; results do not depend on
/// scheduling. Failed fields are logged, excluded and counted.
pub fn run_study(spec: &ScenarioSpec) -> Result<Vec<ErrorSummary>> {
    if spec.n_sim == 0 || spec.b == 0 || spec.thresholds.is_empty() {
        return Err(Error::Config("study needs N >= 1, B >= 1 and a threshold".into()));
    }
    let design = StudyDesign::new(spec)?;
    let shared = match &design.sample {
        Some(sites) => Shared {
            sim: Some(FieldSimulator::new(&spec.model, sites)?),
            oracle: Some(TruthKriging::new(&spec.model, sites, &design.targets)?),
        },
        None => Shared { sim: None, oracle: None },
    };
    let outcomes: Vec<FieldOutcome> = (0..spec.n_sim)
        .into_par_iter()
        .map(|f| {
            let o = run_field(spec, &design, &shared, f);
            log::debug!("{} field {f} done", spec.name);
            o
        })
        .collect();
    let np: Vec<Option<&Vec<Vec<f64>>>> = outcomes.iter().map(|o| o.np.as_ref()).collect();
    let mut rows = summarize(&spec.name, &spec.thresholds, &np);
    if spec.ik {
        let ik: Vec<Option<&Vec<Vec<f64>>>> = outcomes.iter().map(|o| o.ik.as_ref()).collect();
        rows.extend(summarize(&format!("{}:ik", spec.name), &spec.thresholds, &ik));
    }
    Ok(rows)
}
