//! Unconditional and conditional bootstrap of the fitted process and the
//! exceedance-risk estimates built from the replicates.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bias::FittedComponents;
use crate::error::{Error, Result};
use crate::spatial::{LagTable, Location};
use crate::variogram::{cholesky_psd, correlation_from_table, cross_correlation_matrix, PsdFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    pub b: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(b: usize, seed: u64) -> Result<Self> {
        if b == 0 {
            return Err(Error::Config("bootstrap replicate count must be at least 1".into()));
        }
        Ok(Self { b, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMode {
    Unconditional,
    Conditional,
}

impl BootstrapMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unconditional" | "nc" => Ok(Self::Unconditional),
            "conditional" | "cs" => Ok(Self::Conditional),
            _ => Err(Error::Unknown { kind: "mode", name: s.to_string() }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Unconditional => "unconditional",
            Self::Conditional => "conditional",
        }
    }
}

/// Replicated responses, one row per replicate and one column per output
/// location.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    pub mode: BootstrapMode,
    pub locations: Vec<Location>,
    pub replicates: DMatrix<f64>,
}

impl BootstrapEnsemble {
    pub fn b(&self) -> usize {
        self.replicates.nrows()
    }

    /// Fraction of replicates at or above `c`, per location.
    pub fn exceedance(&self, c: f64) -> Vec<f64> {
        let b = self.b() as f64;
        self.replicates
            .column_iter()
            .map(|col| col.iter().filter(|&&v| v >= c).count() as f64 / b)
            .collect()
    }

    pub fn risk_map(&self, c: f64) -> RiskMap {
        RiskMap {
            locations: self.locations.clone(),
            threshold: c,
            probabilities: self.exceedance(c),
        }
    }
}

/// Exceedance probabilities at a set of locations for one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskMap {
    pub locations: Vec<Location>,
    pub threshold: f64,
    pub probabilities: Vec<f64>,
}

/// Decorrelated, standardized residuals `e = L0^{-1} D0^{-1} r`, with `L0`
/// the factor of `r0`.
pub fn standardized_errors(residuals: &[f64], sd: &[f64], l0: &PsdFactor) -> Result<Vec<f64>> {
    let z: Vec<f64> = residuals.iter().zip(sd).map(|(r, s)| r / s).collect();
    let e = l0.solve_lower(&z);
    let n = e.len() as f64;
    if e.len() < 2 {
        return Err(Error::DegenerateResiduals);
    }
    let mean = e.iter().sum::<f64>() / n;
    // Population divisor: resampling draws from exactly this distribution,
    // so unit variance here gives replicates with covariance `D R D`.
    let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = e.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(var.sqrt() > 1e-12 * scale.max(f64::MIN_POSITIVE)) || !var.is_finite() {
        return Err(Error::DegenerateResiduals);
    }
    let sd = var.sqrt();
    Ok(e.iter().map(|v| (v - mean) / sd).collect())
}

/// Uncorrelated errors from the first-stage variance and variogram.
pub fn uncorrelated_errors(fit: &FittedComponents) -> Result<Vec<f64>> {
    let r0 = correlation_from_table(&LagTable::new(&fit.locations), &fit.pilot_variogram);
    let l0 = cholesky_psd(&r0)?;
    standardized_errors(&fit.residuals, &fit.pilot_sd(), &l0)
}

/// Precomputed state shared by all replicates of one fit.
#[derive(Debug, Clone)]
pub struct BootstrapEngine {
    n: usize,
    locations: Vec<Location>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    joint: PsdFactor,
    errors: Vec<f64>,
    /// Rows of the joint field where replicate values are produced.
    out: Vec<usize>,
    conditioning: Option<Conditioning>,
}

#[derive(Debug, Clone)]
struct Conditioning {
    /// Simple kriging weights, `n x out.len()`.
    weights: DMatrix<f64>,
    /// Kriged observed residuals at the output locations.
    kriged: Vec<f64>,
}

impl BootstrapEngine {
    /// Engine producing values at the fit's targets.
    pub fn new(fit: &FittedComponents, mode: BootstrapMode) -> Result<Self> {
        let n = fit.n();
        let out: Vec<usize> = (n..n + fit.targets.len()).collect();
        Self::with_outputs(fit, mode, out)
    }

    /// Engine producing values at sample locations and targets alike.
    pub fn with_sample_outputs(fit: &FittedComponents, mode: BootstrapMode) -> Result<Self> {
        let out: Vec<usize> = (0..fit.n() + fit.targets.len()).collect();
        Self::with_outputs(fit, mode, out)
    }

    fn with_outputs(fit: &FittedComponents, mode: BootstrapMode, out: Vec<usize>) -> Result<Self> {
        let n = fit.n();
        let errors = uncorrelated_errors(fit)?;
        // Targets that coincide with a sample location share its row of the
        // joint field, which keeps the joint correlation matrix nonsingular.
        let all = fit.all_locations();
        let all_sd = fit.all_sd();
        let all_mean = fit.all_trend();
        let mut alias: Vec<usize> = (0..n).collect();
        let mut locations = fit.locations.clone();
        let (mut sd, mut mean) = (all_sd[..n].to_vec(), all_mean[..n].to_vec());
        for k in n..all.len() {
            match fit.locations.iter().position(|x| *x == all[k]) {
                Some(i) => alias.push(i),
                None => {
                    alias.push(locations.len());
                    locations.push(all[k]);
                    sd.push(all_sd[k]);
                    mean.push(all_mean[k]);
                }
            }
        }
        let out: Vec<usize> = out.into_iter().map(|k| alias[k]).collect();
        let joint_r = correlation_from_table(&LagTable::new(&locations), &fit.variogram);
        let joint = cholesky_psd(&joint_r)?;
        let conditioning = match mode {
            BootstrapMode::Unconditional => None,
            BootstrapMode::Conditional => {
                let mut c = joint_r.view((0, 0), (n, n)).into_owned();
                scale_rows_cols(&mut c, &sd[..n], &sd[..n]);
                let out_locs: Vec<Location> = out.iter().map(|&k| locations[k]).collect();
                let out_sd: Vec<f64> = out.iter().map(|&k| sd[k]).collect();
                let mut cross = cross_correlation_matrix(&fit.locations, &out_locs, &fit.variogram);
                scale_rows_cols(&mut cross, &sd[..n], &out_sd);
                let factor = cholesky_psd(&c)?;
                let mut weights = factor.solve(&cross);
                // At a sample location the cross-covariance is a column of C,
                // so the weights are exactly a unit vector.
                for (a, &k) in out.iter().enumerate() {
                    if k < n {
                        weights.column_mut(a).fill(0.0);
                        weights[(k, a)] = 1.0;
                    }
                }
                let kriged = weights.tr_mul(&nalgebra::DVector::from_column_slice(&fit.residuals));
                Some(Conditioning { weights, kriged: kriged.as_slice().to_vec() })
            }
        };
        Ok(Self { n, locations, mean, sd, joint, errors, out, conditioning })
    }

    pub fn mode(&self) -> BootstrapMode {
        if self.conditioning.is_some() {
            BootstrapMode::Conditional
        } else {
            BootstrapMode::Unconditional
        }
    }

    /// Distinct locations of the joint unconditional draw: sample, then
    /// targets not already in the sample.
    pub fn joint_locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    /// Joint unconditional replicate `mu + D L e*` over sample and targets.
    pub fn unconditional_replicate(&self, rng: &mut impl Rng) -> Vec<f64> {
        let m = self.locations.len();
        let k = self.errors.len();
        let draw: Vec<f64> = (0..m).map(|_| self.errors[rng.random_range(0..k)]).collect();
        let corr = self.joint.mul_lower(&draw);
        (0..m).map(|i| self.mean[i] + self.sd[i] * corr[i]).collect()
    }

    /// Conditional replicate from a joint unconditional one:
    /// `mu + krig(r) + (delta* - krig(delta* at sample))`.
    pub fn conditional_replicate(&self, unconditional: &[f64]) -> Vec<f64> {
        let c = self
            .conditioning
            .as_ref()
            .expect("engine was built for unconditional replicates");
        let delta: Vec<f64> = unconditional.iter().zip(&self.mean).map(|(y, m)| y - m).collect();
        let ds = nalgebra::DVector::from_column_slice(&delta[..self.n]);
        let kriged_star = c.weights.tr_mul(&ds);
        self.out
            .iter()
            .enumerate()
            .map(|(a, &k)| self.mean[k] + c.kriged[a] + (delta[k] - kriged_star[a]))
            .collect()
    }

    /// Output locations of [`Self::replicate`].
    pub fn output_locations(&self) -> Vec<Location> {
        self.out.iter().map(|&k| self.locations[k]).collect()
    }

    /// Replicate `j` under `seed`, at the output locations.
    pub fn replicate(&self, seed: u64, j: usize) -> Vec<f64> {
        let mut rng = replicate_rng(seed, j);
        let u = self.unconditional_replicate(&mut rng);
        match &self.conditioning {
            Some(_) => self.conditional_replicate(&u),
            None => self.out.iter().map(|&k| u[k]).collect(),
        }
    }

    pub fn run(&self, cfg: &BootstrapConfig) -> BootstrapEnsemble {
        let rows: Vec<Vec<f64>> = (0..cfg.b)
            .into_par_iter()
            .map(|j| self.replicate(cfg.seed, j))
            .collect();
        let locations = self.output_locations();
        let m = locations.len();
        BootstrapEnsemble {
            mode: self.mode(),
            locations,
            replicates: DMatrix::from_fn(cfg.b, m, |j, k| rows[j][k]),
        }
    }
}

/// Independent random stream for replicate `j`.
pub fn replicate_rng(seed: u64, j: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    rng
}

fn scale_rows_cols(m: &mut DMatrix<f64>, rows: &[f64], cols: &[f64]) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= rows[i] * cols[j];
        }
    }
}

pub fn estimate_conditional_risk(
    fit: &FittedComponents,
    c: f64,
    cfg: &BootstrapConfig,
) -> Result<RiskMap> {
    Ok(BootstrapEngine::new(fit, BootstrapMode::Conditional)?.run(cfg).risk_map(c))
}

pub fn estimate_unconditional_risk(
    fit: &FittedComponents,
    c: f64,
    cfg: &BootstrapConfig,
) -> Result<RiskMap> {
    Ok(BootstrapEngine::new(fit, BootstrapMode::Unconditional)?.run(cfg).risk_map(c))
}

/// Risk maps for several thresholds from one ensemble.
pub fn risk_maps(ensemble: &BootstrapEnsemble, thresholds: &[f64]) -> Vec<RiskMap> {
    thresholds.iter().map(|&c| ensemble.risk_map(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::{fit_components, BandwidthChoice, FitConfig, LagBandwidth};
    use crate::smoothing::BandwidthMatrix;
    use crate::spatial::{make_grid, GridSpec, SpatialSample};
    use crate::variogram::SbModel;
    use rand_distr::StandardNormal;

    fn fit(seed: u64) -> FittedComponents {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locs = make_grid(&GridSpec::unit_square(8, 8).unwrap());
        let y: Vec<f64> = locs
            .iter()
            .map(|l| 1.0 + l.x1 + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let s = SpatialSample::new(locs, y).unwrap();
        let cfg = FitConfig {
            trend: BandwidthChoice::Fixed(BandwidthMatrix::isotropic(0.5).unwrap()),
            variance: BandwidthChoice::Fixed(BandwidthMatrix::isotropic(1.0).unwrap()),
            h3: LagBandwidth::Fixed(0.25),
            ..FitConfig::default()
        };
        fit_components(&s, &[Location::new(0.33, 0.47), Location::new(0.61, 0.52)], &cfg).unwrap()
    }

    #[test]
    fn errors_hand_case() {
        let id = cholesky_psd(&DMatrix::identity(2, 2)).unwrap();
        let e = standardized_errors(&[1.0, 2.0], &[1.0, 1.0], &id).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        assert!(matches!(
            standardized_errors(&[0.0, 0.0], &[1.0, 1.0], &id),
            Err(Error::DegenerateResiduals)
        ));
    }

    #[test]
    fn errors_are_standardized() {
        let e = uncorrelated_errors(&fit(1)).unwrap();
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_nugget_resamples_errors() {
        let mut f = fit(2);
        f.variogram = SbModel::pure_nugget(1.0);
        f.variance.iter_mut().chain(f.variance_targets.iter_mut()).for_each(|v| *v = 1.0);
        f.trend.iter_mut().chain(f.trend_targets.iter_mut()).for_each(|v| *v = 0.0);
        let eng = BootstrapEngine::new(&f, BootstrapMode::Unconditional).unwrap();
        let u = eng.unconditional_replicate(&mut replicate_rng(3, 0));
        assert!(u.iter().all(|v| eng.errors().iter().any(|e| (e - v).abs() < 1e-14)));
    }

    #[test]
    fn zero_sd_returns_trend() {
        let mut f = fit(2);
        f.variance.iter_mut().chain(f.variance_targets.iter_mut()).for_each(|v| *v = 0.0);
        f.pilot_variance = vec![1.0; f.n()];
        let eng = BootstrapEngine::new(&f, BootstrapMode::Unconditional).unwrap();
        assert_eq!(eng.unconditional_replicate(&mut replicate_rng(4, 1)), f.all_trend());
    }

    #[test]
    fn pure_nugget_conditioning_is_vacuous() {
        let mut f = fit(5);
        f.variogram = SbModel::pure_nugget(1.0);
        let eng = BootstrapEngine::new(&f, BootstrapMode::Conditional).unwrap();
        let u = eng.unconditional_replicate(&mut replicate_rng(8, 2));
        let c = eng.conditional_replicate(&u);
        assert_eq!(eng.joint_locations().len(), f.n() + 2);
        for (a, b) in c.iter().zip(&u[f.n()..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_reproduces_data() {
        let mut f = fit(6);
        f.variogram.nugget = 0.0;
        let f = FittedComponents {
            variogram: crate::variogram::rescale_to_unit_sill(&f.variogram).unwrap(),
            ..f
        };
        let eng = BootstrapEngine::with_sample_outputs(&f, BootstrapMode::Conditional).unwrap();
        let ens = eng.run(&BootstrapConfig::new(5, 9).unwrap());
        for j in 0..5 {
            for i in 0..f.n() {
                assert!((ens.replicates[(j, i)] - f.values[i]).abs() < 1e-8, "{} {} {:?}", ens.replicates[(j, i)], f.values[i], f.variogram);
            }
        }
    }

    #[test]
    fn exceedance_counts() {
        let ens = BootstrapEnsemble {
            mode: BootstrapMode::Conditional,
            locations: vec![Location::new(0.0, 0.0)],
            replicates: DMatrix::from_column_slice(4, 1, &[1.2, 3.4, 2.5, 0.9]),
        };
        assert_eq!(ens.exceedance(2.0), vec![0.5]);
        assert_eq!(ens.exceedance(f64::MIN), vec![1.0]);
    }

    #[test]
    fn runs_are_deterministic() {
        let f = fit(7);
        let eng = BootstrapEngine::new(&f, BootstrapMode::Conditional).unwrap();
        let cfg = BootstrapConfig::new(20, 42).unwrap();
        let a = eng.run(&cfg);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| eng.run(&cfg));
        assert_eq!(a, b);
    }
}
