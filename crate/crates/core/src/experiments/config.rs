//! Experiment configuration, read from TOML and validated up front.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Coin,
    CoinScan,
    BalanceSign,
    BalanceVar,
    Star3Right,
    Star3WrongIndistinct,
    Star4WrongDistinct,
    Table1,
    Table2,
    DecompositionDemo,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Coin,
        Experiment::CoinScan,
        Experiment::BalanceSign,
        Experiment::BalanceVar,
        Experiment::Star3Right,
        Experiment::Star3WrongIndistinct,
        Experiment::Star4WrongDistinct,
        Experiment::Table1,
        Experiment::Table2,
        Experiment::DecompositionDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Coin => "coin",
            Experiment::CoinScan => "coin-scan",
            Experiment::BalanceSign => "balance-sign",
            Experiment::BalanceVar => "balance-var",
            Experiment::Star3Right => "star3-right",
            Experiment::Star3WrongIndistinct => "star3-wrong-indistinct",
            Experiment::Star4WrongDistinct => "star4-wrong-distinct",
            Experiment::Table1 => "table1",
            Experiment::Table2 => "table2",
            Experiment::DecompositionDemo => "decomposition-demo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }

    fn uses_replicates(self) -> bool {
        !matches!(self, Experiment::CoinScan)
    }

    fn default_n(self) -> Vec<u64> {
        match self {
            Experiment::Coin => vec![1_000, 10_000, 100_000, 1_000_000],
            Experiment::CoinScan => vec![10, 36, 100, 1_000, 11_611, 11_612, 100_000],
            Experiment::BalanceSign => vec![1_000],
            Experiment::BalanceVar => vec![100],
            Experiment::Star3Right | Experiment::Star4WrongDistinct => vec![1_000],
            Experiment::Star3WrongIndistinct => vec![100_000],
            Experiment::Table1 | Experiment::Table2 => vec![1_000, 10_000],
            Experiment::DecompositionDemo => vec![100, 1_000, 10_000, 100_000],
        }
    }

    fn default_reps(self) -> usize {
        match self {
            Experiment::Coin | Experiment::BalanceSign => 10_000,
            Experiment::BalanceVar => 100_000,
            Experiment::Star3Right | Experiment::Star3WrongIndistinct => 1_000,
            Experiment::Star4WrongDistinct | Experiment::Table1 | Experiment::Table2 => 200,
            Experiment::DecompositionDemo => 2_000,
            Experiment::CoinScan => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Simulate,
}

/// One value or a list, so `n = 1000` and `n = [1000, 10000]` both parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(u64),
    Many(Vec<u64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<u64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Everything a run needs. Unset model fields take per-experiment defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub n: Option<OneOrMany>,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,

    // coin
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub p_true: Option<f64>,
    #[serde(default)]
    pub p1: Option<f64>,
    #[serde(default)]
    pub p2: Option<f64>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub n_max: Option<u64>,

    // gaussian balance
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub tau1: Option<f64>,
    #[serde(default)]
    pub tau2: Option<f64>,
    #[serde(default)]
    pub xi: Option<f64>,

    // phylogenetics
    #[serde(default)]
    pub gamma_shape: Option<f64>,
    #[serde(default)]
    pub branch_length: Option<f64>,
    #[serde(default)]
    pub internal_length: Option<f64>,
    #[serde(default)]
    pub prior_mean_t0: Option<f64>,
    #[serde(default)]
    pub prior_mean_t1: Option<f64>,
    #[serde(default)]
    pub prior_mean_all: Option<f64>,
    #[serde(default)]
    pub points_per_dim: Option<usize>,
    #[serde(default)]
    pub mcmc_iterations: Option<u64>,
    #[serde(default)]
    pub chains: Option<usize>,
    #[serde(default)]
    pub burn_in_fraction: Option<f64>,
    #[serde(default)]
    pub ternary_bins: Option<usize>,
}

fn default_seed() -> u64 {
    20_160_101
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: None,
            reps: None,
            seed: default_seed(),
            output_dir: None,
            mode: None,
            workers: None,
            thresholds: None,
            alpha: None,
            p_true: None,
            p1: None,
            p2: None,
            threshold: None,
            level: None,
            n_max: None,
            tau: None,
            tau1: None,
            tau2: None,
            xi: None,
            gamma_shape: None,
            branch_length: None,
            internal_length: None,
            prior_mean_t0: None,
            prior_mean_t1: None,
            prior_mean_all: None,
            points_per_dim: None,
            mcmc_iterations: None,
            chains: None,
            burn_in_fraction: None,
            ternary_bins: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn n_values(&self) -> Vec<u64> {
        self.n.as_ref().map_or_else(|| self.experiment.default_n(), OneOrMany::values)
    }

    pub fn reps(&self) -> usize {
        self.reps.unwrap_or_else(|| self.experiment.default_reps())
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(match self.experiment {
            Experiment::Coin | Experiment::CoinScan => Mode::Exact,
            _ => Mode::Simulate,
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(self.experiment.name()))
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.thresholds.clone().unwrap_or_else(|| vec![0.01, 0.05, 0.95, 0.99])
    }

    /// Checks every field the chosen experiment reads.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let n = self.n_values();
        if n.is_empty() {
            return bad("n must list at least one sample size".into());
        }
        if n.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        if self.experiment.uses_replicates() && self.reps() == 0 && self.mode() == Mode::Simulate {
            return bad("reps must be positive".into());
        }
        if self.reps == Some(0) {
            return bad("reps must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if self.thresholds().iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return bad("thresholds must lie in (0,1)".into());
        }
        let open_unit = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x < 1.0) => Err(Error::Config(format!("{name} must lie in (0,1), got {x}"))),
            _ => Ok(()),
        };
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Config(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        open_unit("p_true", self.p_true)?;
        open_unit("p1", self.p1)?;
        open_unit("p2", self.p2)?;
        open_unit("threshold", self.threshold)?;
        open_unit("burn_in_fraction", self.burn_in_fraction.filter(|b| *b != 0.0))?;
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 0.5) {
                return bad(format!("alpha must lie in (0, 1/2], got {a}"));
            }
        }
        if let Some(l) = self.level {
            if !(0.0..1.0).contains(&l) {
                return bad(format!("level must lie in [0,1), got {l}"));
            }
        }
        for (name, v) in [
            ("tau", self.tau),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("xi", self.xi),
            ("gamma_shape", self.gamma_shape),
            ("branch_length", self.branch_length),
            ("prior_mean_t0", self.prior_mean_t0),
            ("prior_mean_t1", self.prior_mean_t1),
            ("prior_mean_all", self.prior_mean_all),
        ] {
            positive(name, v)?;
        }
        if let Some(t) = self.internal_length {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("internal_length must be non-negative, got {t}"));
            }
        }
        if self.points_per_dim == Some(0) || self.ternary_bins == Some(0) || self.chains == Some(0) {
            return bad("points_per_dim, ternary_bins and chains must be positive".into());
        }
        if matches!(self.mcmc_iterations, Some(i) if i < 4) {
            return bad("mcmc_iterations must be at least 4".into());
        }
        if self.p1.is_some() && self.p1 == self.p2 {
            return bad("p1 and p2 must differ".into());
        }
        match self.experiment {
            Experiment::BalanceVar => {
                if n.contains(&1) {
                    return bad("balance-var needs n >= 2".into());
                }
                if let (Some(a), Some(b)) = (self.tau1, self.tau2) {
                    if a > b {
                        return bad("tau1 must not exceed tau2".into());
                    }
                }
            }
            Experiment::DecompositionDemo if n.contains(&1) => return bad("decomposition-demo needs n >= 2".into()),
            Experiment::Coin if self.mode() == Mode::Exact && self.p_true.is_some_and(|p| p != 0.5) => {
                // The normal approximation column assumes a fair truth.
                return bad("exact coin mode reports the normal approximation, which needs p_true = 0.5".into());
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalar_and_list_n() {
        let c = ExperimentConfig::from_toml_str("experiment = \"coin\"\nn = 1000\n").unwrap();
        assert_eq!(c.n_values(), vec![1000]);
        let c = ExperimentConfig::from_toml_str("experiment = \"table1\"\nn = [1000, 10000]\nreps = 5\n").unwrap();
        assert_eq!(c.n_values(), vec![1000, 10000]);
        assert_eq!(c.reps(), 5);
        assert_eq!(c.mode(), Mode::Simulate);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml_str("experiment = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml_str("experiment = \"coin\"\nbogus = 1").is_err());
        let c = ExperimentConfig::from_toml_str("experiment = \"coin\"\nreps = 0").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = ExperimentConfig::from_toml_str("experiment = \"balance-var\"\ntau1 = 3.0\ntau2 = 0.3").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml_str("experiment = \"coin\"\nalpha = 0.7").unwrap();
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::new(Experiment::Table2).validate().is_ok());
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::parse(e.name()).unwrap(), e);
        }
    }
}
