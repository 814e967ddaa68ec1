//! Experiment configuration files.
//!
//! A config is one JSON object: a mandatory `seed`, optional `trials`, `out`
//! and `tolerances`, and an `experiment` keyed by subcommand name:
//!
//! ```json
//! {"seed": 7, "trials": 50, "experiment": {"verify-holder": {"n": [1, 2]}}}
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vecreduce::spaces::Exponent;
use vecreduce::spectral::{GridSpec, KatoPonceExponents, OperatorKind};

use crate::instances::SplitInstance;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ExampleDim(ExampleDimParams),
    VerifyHolder(HolderParams),
    VerifyKatoPonce(KatoPonceParams),
    CompareNorms(CompareParams),
    Reduce(ReduceParams),
    Split(SplitParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ExampleDim(_) => "example-dim",
            Experiment::VerifyHolder(_) => "verify-holder",
            Experiment::VerifyKatoPonce(_) => "verify-kato-ponce",
            Experiment::CompareNorms(_) => "compare-norms",
            Experiment::Reduce(_) => "reduce",
            Experiment::Split(_) => "split",
        }
    }

    /// Default parameters for a subcommand name.
    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "example-dim" => Experiment::ExampleDim(ExampleDimParams::default()),
            "verify-holder" => Experiment::VerifyHolder(HolderParams::default()),
            "verify-kato-ponce" => Experiment::VerifyKatoPonce(KatoPonceParams::default()),
            "compare-norms" => Experiment::CompareNorms(CompareParams::default()),
            "reduce" => Experiment::Reduce(ReduceParams::default()),
            "split" => Experiment::Split(SplitParams::default()),
            _ => return None,
        })
    }

    /// Trial count used when neither the config nor the flags give one.
    pub fn default_trials(&self) -> usize {
        match self {
            Experiment::ExampleDim(_) | Experiment::Reduce(_) | Experiment::Split(_) => 1,
            Experiment::VerifyHolder(_) => 100,
            Experiment::VerifyKatoPonce(_) => 50,
            Experiment::CompareNorms(_) => 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative gap of the ellipsoid fit inside reducing matrices.
    #[serde(default = "Tolerances::default_mvee")]
    pub mvee: f64,
    /// Acceptance threshold along the regularisation path of the split.
    #[serde(default = "Tolerances::default_delta_conv")]
    pub delta_conv: f64,
    /// Slack on checks that must hold exactly up to rounding.
    #[serde(default = "Tolerances::default_exact")]
    pub exact: f64,
    /// Slack on checks between numerically estimated norms.
    #[serde(default = "Tolerances::default_estimate")]
    pub estimate: f64,
}

impl Tolerances {
    fn default_mvee() -> f64 {
        1e-9
    }
    fn default_delta_conv() -> f64 {
        1e-7
    }
    fn default_exact() -> f64 {
        1e-9
    }
    fn default_estimate() -> f64 {
        1e-6
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("mvee", self.mvee),
            ("delta_conv", self.delta_conv),
            ("exact", self.exact),
            ("estimate", self.estimate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance `{name}` must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mvee: Self::default_mvee(),
            delta_conv: Self::default_delta_conv(),
            exact: Self::default_exact(),
            estimate: Self::default_estimate(),
        }
    }
}

/// Indicator functions of `n` disjoint unit intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleDimParams {
    pub n: Vec<usize>,
    pub p: Exponent,
    pub q: Exponent,
}

impl Default for ExampleDimParams {
    fn default() -> Self {
        Self {
            n: vec![1, 2, 4, 8, 16],
            p: Exponent::TWO,
            q: Exponent::TWO,
        }
    }
}

/// Random Gaussian-mixture instances of the vector Hölder inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderParams {
    pub n: Vec<usize>,
    pub p: Exponent,
    pub q: Exponent,
    pub r: Exponent,
    /// Atoms of the random measure.
    pub atoms: usize,
}

impl Default for HolderParams {
    fn default() -> Self {
        Self {
            n: vec![1, 2, 3],
            p: Exponent::TWO,
            q: Exponent::TWO,
            r: Exponent::ONE,
            atoms: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatoPonceParams {
    pub grid: GridSpec,
    pub kind: OperatorKind,
    pub s: f64,
    pub exponents: KatoPonceExponents,
    pub n: Vec<usize>,
    /// Frequency cutoff of the random test functions.
    pub cutoff: usize,
    /// Also run the two-term bootstrap with reducing matrices.
    #[serde(default = "yes")]
    pub bootstrap: bool,
}

fn yes() -> bool {
    true
}

impl Default for KatoPonceParams {
    fn default() -> Self {
        Self {
            grid: GridSpec { d: 1, n: 256 },
            kind: OperatorKind::Homogeneous,
            s: 2.0,
            exponents: KatoPonceExponents::new(2.0, 2.0, 2.0, 2.0, 1.0).expect("valid exponents"),
            n: vec![1, 2],
            cutoff: 16,
            bootstrap: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareParams {
    pub n: usize,
    pub p: Exponent,
    pub q: Exponent,
    pub atoms_x: usize,
    pub atoms_y: usize,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            n: 2,
            p: Exponent::TWO,
            q: Exponent::TWO,
            atoms_x: 16,
            atoms_y: 16,
        }
    }
}

/// Either a vector-function file or a random instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub n: usize,
    pub p: Exponent,
    pub atoms: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
}

impl Default for ReduceParams {
    fn default() -> Self {
        Self {
            input: None,
            n: 3,
            p: Exponent::TWO,
            atoms: 32,
            directions: None,
        }
    }
}

/// Either a split-problem file or a random instance of the given kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub m: usize,
    pub n: usize,
    pub instance: SplitInstance,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            input: None,
            m: 2,
            n: 2,
            instance: SplitInstance::Singular,
        }
    }
}

impl ExperimentConfig {
    pub fn new(seed: u64, experiment: Experiment) -> Self {
        Self {
            seed,
            trials: None,
            out: None,
            tolerances: Tolerances::default(),
            experiment,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.experiment.default_trials())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.tolerances.validate()?;
        if self.trials == Some(0) {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        let bad = |msg: String| Err(CliError::Config(msg));
        match &self.experiment {
            Experiment::ExampleDim(p) if p.n.is_empty() || p.n.contains(&0) => bad("example-dim needs positive n".into()),
            Experiment::VerifyHolder(p) if p.n.is_empty() || p.n.contains(&0) || p.atoms == 0 => {
                bad("verify-holder needs positive n and atoms".into())
            }
            Experiment::VerifyKatoPonce(p) if p.n.is_empty() || p.n.contains(&0) => bad("verify-kato-ponce needs positive n".into()),
            Experiment::CompareNorms(p) if p.n == 0 || p.atoms_x == 0 || p.atoms_y == 0 => {
                bad("compare-norms needs positive n and atom counts".into())
            }
            Experiment::Reduce(p) if p.input.is_none() && (p.n == 0 || p.atoms == 0) => bad("reduce needs positive n and atoms".into()),
            Experiment::Split(p) if p.input.is_none() && (p.m == 0 || p.n == 0) => bad("split needs positive m and n".into()),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for name in [
            "example-dim",
            "verify-holder",
            "verify-kato-ponce",
            "compare-norms",
            "reduce",
            "split",
        ] {
            let mut c = ExperimentConfig::new(11, Experiment::default_for(name).unwrap());
            c.trials = Some(3);
            c.out = Some("results".into());
            let text = c.to_json();
            let back = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_json(), text);
            assert_eq!(back.experiment.name(), name);
        }
    }

    #[test]
    fn seed_is_mandatory() {
        let err = ExperimentConfig::from_json(r#"{"experiment": {"example-dim": {"n": [1], "p": 2.0, "q": 2.0}}}"#);
        assert!(matches!(err, Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_tolerances() {
        assert!(ExperimentConfig::from_json(
            r#"{"seed": 1, "colour": 3, "experiment": {"split": {"m": 1, "n": 1, "instance": "canonical"}}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"seed": 1, "tolerances": {"exact": 0.0}, "experiment": {"split": {"m": 1, "n": 1, "instance": "canonical"}}}"#
        )
        .is_err());
        let ok = ExperimentConfig::from_json(
            r#"{"seed": 1, "tolerances": {"exact": 1e-8}, "experiment": {"split": {"m": 1, "n": 1, "instance": "canonical"}}}"#,
        )
        .unwrap();
        assert_eq!(ok.tolerances.exact, 1e-8);
        assert_eq!(ok.tolerances.mvee, 1e-9);
    }

    #[test]
    fn infinite_exponents_travel_as_text() {
        let c = ExperimentConfig::new(
            2,
            Experiment::ExampleDim(ExampleDimParams {
                n: vec![3],
                p: Exponent::ONE,
                q: Exponent::INFINITY,
            }),
        );
        let text = c.to_json();
        assert!(text.contains("\"inf\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }
}
