use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::spatial::{EstimationRule, GridSpec, Location};
use crate::variogram::MaternParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendId {
    /// `2.5 + sin(2 pi x1) + 4 (x2 - 0.5)^2`
    Mu1,
    /// `5.8 (x1 - x2 + x2^2)`
    Mu2,
    /// constant 2
    Mu3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceId {
    /// `(15/16)^2 [1 - (2 x1 - 1)^2]^2 [1 - (2 x2 - 1)^2]^2 + 0.1`
    Var1,
    /// `0.5 (1 + x1 + x2)`
    Var2,
    /// constant 1
    Var3,
}

impl TrendId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mu1" => Ok(Self::Mu1),
            "mu2" => Ok(Self::Mu2),
            "mu3" => Ok(Self::Mu3),
            _ => Err(Error::Unknown { kind: "trend", name: s.into() }),
        }
    }
}

impl VarianceId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "var1" => Ok(Self::Var1),
            "var2" => Ok(Self::Var2),
            "var3" => Ok(Self::Var3),
            _ => Err(Error::Unknown { kind: "variance", name: s.into() }),
        }
    }
}

impl fmt::Display for TrendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mu1 => "mu1",
            Self::Mu2 => "mu2",
            Self::Mu3 => "mu3",
        })
    }
}

impl fmt::Display for VarianceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Var1 => "var1",
            Self::Var2 => "var2",
            Self::Var3 => "var3",
        })
    }
}

pub fn trend_fn(id: TrendId, x: &Location) -> f64 {
    match id {
        TrendId::Mu1 => 2.5 + (2.0 * PI * x.x1).sin() + 4.0 * (x.x2 - 0.5).powi(2),
        TrendId::Mu2 => 5.8 * (x.x1 - x.x2 + x.x2 * x.x2),
        TrendId::Mu3 => 2.0,
    }
}

pub fn variance_fn(id: VarianceId, x: &Location) -> f64 {
    match id {
        VarianceId::Var1 => {
            let b1 = 1.0 - (2.0 * x.x1 - 1.0).powi(2);
            let b2 = 1.0 - (2.0 * x.x2 - 1.0).powi(2);
            (15.0f64 / 16.0).powi(2) * b1 * b1 * b2 * b2 + 0.1
        }
        VarianceId::Var2 => 0.5 * (1.0 + x.x1 + x.x2),
        VarianceId::Var3 => 1.0,
    }
}

/// True trend, variance and dependence of a simulated process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldModel {
    pub trend: TrendId,
    pub variance: VarianceId,
    pub matern: MaternParams,
}

impl FieldModel {
    pub fn mean(&self, x: &Location) -> f64 {
        trend_fn(self.trend, x)
    }

    pub fn sd(&self, x: &Location) -> f64 {
        variance_fn(self.variance, x).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Regular,
    /// Sample sites drawn uniformly over the grid's bounds for every field;
    /// estimation sites as in the regular design.
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub model: FieldModel,
    pub grid: GridSpec,
    pub design: DesignKind,
    pub estimation: EstimationRule,
    pub thresholds: Vec<f64>,
    pub n_sim: usize,
    pub b: usize,
    pub seed: u64,
    /// Also score the indicator kriging baseline.
    pub ik: bool,
}

pub const DEFAULT_N_SIM: usize = 100;
pub const DEFAULT_B: usize = 200;
pub const DEFAULT_SEED: u64 = 20_240_601;

impl ScenarioSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        trend: TrendId,
        variance: VarianceId,
        matern: MaternParams,
        side: usize,
        design: DesignKind,
        thresholds: Vec<f64>,
        ik: bool,
    ) -> Self {
        let grid = GridSpec::unit_square(side, side).expect("positive grid side");
        let estimation = EstimationRule::default_for(&grid);
        Self {
            name: name.into(),
            model: FieldModel { trend, variance, matern },
            grid,
            design,
            estimation,
            thresholds,
            n_sim: DEFAULT_N_SIM,
            b: DEFAULT_B,
            seed: DEFAULT_SEED,
            ik,
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Named scenarios of the simulation study.
pub fn scenario_registry() -> Vec<ScenarioSpec> {
    let base = |c0, a, nu| MaternParams::new(c0, a, nu).expect("valid parameters");
    let mut out = Vec::new();
    for side in [15, 20, 30] {
        out.push(ScenarioSpec::new(
            format!("table1-{side}x{side}"),
            TrendId::Mu1,
            VarianceId::Var1,
            base(0.2, 0.6, 0.5),
            side,
            DesignKind::Regular,
            vec![2.0, 3.0, 4.0],
            false,
        ));
        for c in [2.0, 3.0, 4.0] {
            out.push(ScenarioSpec::new(
                format!("table1-c{}-{side}x{side}", fmt_num(c)),
                TrendId::Mu1,
                VarianceId::Var1,
                base(0.2, 0.6, 0.5),
                side,
                DesignKind::Regular,
                vec![c],
                false,
            ));
        }
    }
    for c0 in [0.0, 0.2, 0.4, 0.8] {
        for a in [0.3, 0.6, 0.9] {
            out.push(ScenarioSpec::new(
                format!("table2-c0{}-a{}", fmt_num(c0), fmt_num(a)),
                TrendId::Mu1,
                VarianceId::Var1,
                base(c0, a, 0.5),
                20,
                DesignKind::Regular,
                vec![3.0],
                false,
            ));
        }
    }
    for nu in [0.25, 0.5, 1.0] {
        out.push(ScenarioSpec::new(
            format!("table3-nu{}", fmt_num(nu)),
            TrendId::Mu3,
            VarianceId::Var3,
            base(0.2, 0.6, nu),
            20,
            DesignKind::Regular,
            vec![2.0, 3.0, 4.0],
            true,
        ));
        for c in [2.0, 3.0, 4.0] {
            out.push(ScenarioSpec::new(
                format!("table3-nu{}-c{}", fmt_num(nu), fmt_num(c)),
                TrendId::Mu3,
                VarianceId::Var3,
                base(0.2, 0.6, nu),
                20,
                DesignKind::Regular,
                vec![c],
                true,
            ));
        }
    }
    for trend in [TrendId::Mu1, TrendId::Mu2, TrendId::Mu3] {
        for variance in [VarianceId::Var1, VarianceId::Var2, VarianceId::Var3] {
            for nu in [0.25, 0.5, 1.0] {
                out.push(ScenarioSpec::new(
                    format!("table4-{trend}-{variance}-nu{}", fmt_num(nu)),
                    trend,
                    variance,
                    base(0.2, 0.6, nu),
                    20,
                    DesignKind::UniformRandom,
                    vec![3.0],
                    false,
                ));
            }
        }
    }
    out
}

pub fn scenario_by_name(name: &str) -> Result<ScenarioSpec> {
    scenario_registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Unknown { kind: "scenario", name: name.into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_values() {
        assert!((trend_fn(TrendId::Mu1, &Location::new(0.25, 0.5)) - 3.5).abs() < 1e-15);
        assert_eq!(trend_fn(TrendId::Mu3, &Location::new(0.7, 0.1)), 2.0);
        assert_eq!(trend_fn(TrendId::Mu2, &Location::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn variance_values() {
        assert!((variance_fn(VarianceId::Var1, &Location::new(0.0, 0.3)) - 0.1).abs() < 1e-15);
        let peak = (15.0f64 / 16.0).powi(2) + 0.1;
        assert!((variance_fn(VarianceId::Var1, &Location::new(0.5, 0.5)) - peak).abs() < 1e-15);
        assert_eq!(variance_fn(VarianceId::Var2, &Location::new(0.0, 0.0)), 0.5);
        assert_eq!(variance_fn(VarianceId::Var3, &Location::new(0.4, 0.9)), 1.0);
    }

    #[test]
    fn registry_names_are_unique_and_resolvable() {
        let all = scenario_registry();
        let mut names: Vec<&str> = all.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        let before = names.len();
        names.dedup();
        assert_eq!(before, names.len());
        let s = scenario_by_name("table1-c2-15x15").unwrap();
        assert_eq!(s.thresholds, vec![2.0]);
        assert_eq!((s.grid.nx, s.model.matern.c0), (15, 0.2));
        assert!(scenario_by_name("table3-nu0.5-c2").unwrap().ik);
        assert!(scenario_by_name("nope").is_err());
    }
}
