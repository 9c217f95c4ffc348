//! Experiment configuration: UTF-8 JSON, fail-closed (unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lsa_lab::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Validate,
    MseSweep,
    MomentSweep,
    Stability,
    Bias,
    Covariance,
    BoundsOnly,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::MseSweep => "mse-sweep",
            Experiment::MomentSweep => "moment-sweep",
            Experiment::Stability => "stability",
            Experiment::Bias => "bias",
            Experiment::Covariance => "covariance",
            Experiment::BoundsOnly => "bounds-only",
        }
    }

}

/// Step-size selection: the string `"optimized"` or an explicit list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Keyword(String),
    List(Vec<f64>),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Keyword("optimized".into())
    }
}

impl AlphaSpec {
    pub fn is_optimized(&self) -> bool {
        matches!(self, AlphaSpec::Keyword(_))
    }
}

fn default_p_grid() -> Vec<f64> {
    vec![2.0]
}

fn default_r() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance JSON; relative paths resolve against the config file's directory.
    pub instance_path: PathBuf,
    pub experiment: Experiment,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub alpha: AlphaSpec,
    #[serde(rename = "R", default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 means auto-detect. Results never depend on this.
    #[serde(default)]
    pub threads: usize,
    /// Update-count ceiling replacing the library default.
    #[serde(default)]
    pub budget_override: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if cfg.instance_path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.instance_path = dir.join(&cfg.instance_path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for &n in &self.n_grid {
            if n < 2 || n % 2 != 0 {
                return Err(Error::Config(format!(
                    "n_grid entries must be even and >= 2, got {n}"
                )));
            }
        }
        if self.r < 1 {
            return Err(Error::Config("R must be >= 1".into()));
        }
        for &p in &self.p_grid {
            if !p.is_finite() || p < 2.0 {
                return Err(Error::Config(format!("p_grid entries must be >= 2, got {p}")));
            }
        }
        match &self.alpha {
            AlphaSpec::Keyword(word) if word != "optimized" => {
                return Err(Error::Config(format!(
                    "alpha must be \"optimized\" or a list of step sizes, got \"{word}\""
                )));
            }
            AlphaSpec::List(list) => {
                if list.is_empty() {
                    return Err(Error::Config("alpha list must not be empty".into()));
                }
                for &a in list {
                    if !a.is_finite() || a <= 0.0 {
                        return Err(Error::Config(format!(
                            "alpha list entries must be positive, got {a}"
                        )));
                    }
                }
            }
            _ => {}
        }
        if self.experiment != Experiment::Validate && self.n_grid.is_empty() {
            return Err(Error::Config(format!(
                "experiment '{}' needs a non-empty n_grid",
                self.experiment.id()
            )));
        }
        if let Some(b) = self.budget_override {
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::Config(format!("budget_override must be positive, got {b}")));
            }
        }
        Ok(())
    }
}
