//! Run configuration: a JSON file whose fields flags may override.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::{make_delta_growth, make_lacunary, IndexSequence, LogBase};

/// Compact description of an index sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    Lacunary { q: f64, n1: u64, count: usize },
    DeltaGrowth { delta: f64, n1: u64, count: usize },
    Explicit { terms: Vec<u64> },
}

impl SequenceSpec {
    pub fn build(&self) -> Result<IndexSequence> {
        match self {
            SequenceSpec::Lacunary { q, n1, count } => make_lacunary(*q, *n1 as u128, *count),
            SequenceSpec::DeltaGrowth { delta, n1, count } => make_delta_growth(*delta, *n1 as u128, *count),
            SequenceSpec::Explicit { terms } => IndexSequence::explicit(terms.iter().map(|&t| t as u128).collect()),
        }
    }

    /// Short label used in report parameters.
    pub fn label(&self) -> String {
        match self {
            SequenceSpec::Lacunary { q, n1, .. } => format!("lacunary(q={q},n1={n1})"),
            SequenceSpec::DeltaGrowth { delta, n1, .. } => format!("delta_growth(delta={delta},n1={n1})"),
            SequenceSpec::Explicit { terms } => format!("explicit(len={})", terms.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid_level: u32,
    /// Built-in corpus name or path to a corpus JSON file.
    pub corpus: String,
    /// Heights as multiples of `||f||_1 / (2 pi)`; each must exceed 1.
    pub lambda_values: Vec<f64>,
    /// Empty means each suite uses its own sequences.
    pub sequences: Vec<SequenceSpec>,
    pub beta: u64,
    pub gamma: u64,
    pub delta: f64,
    #[serde(rename = "N_sweep")]
    pub n_sweep: Vec<usize>,
    pub log_base: LogBase,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Zero means one per available core.
    pub workers: usize,
}

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CESARO_LAB_OUT";

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_level: 10,
            corpus: "extended".into(),
            lambda_values: vec![1.5, 3.0, 6.0, 12.0, 24.0, 48.0],
            sequences: Vec::new(),
            beta: 9,
            gamma: 7,
            delta: 0.3,
            n_sweep: vec![4, 8, 16, 32],
            log_base: LogBase::Natural,
            seed: 20240611,
            output_dir: std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("reports")),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks the shared hypotheses; messages name the violated one.
    pub fn validate(&self) -> Result<()> {
        if !(4..=16).contains(&self.grid_level) {
            return Err(Error::arg("grid_level", format!("{} outside 4..=16", self.grid_level)));
        }
        if self.gamma % 2 == 0 || self.gamma <= 5 {
            return Err(Error::hypothesis("gamma", format!("gamma must be an odd integer > 5, got {}", self.gamma)));
        }
        if self.beta % 2 == 0 || self.beta <= 7 {
            return Err(Error::hypothesis(
                "beta",
                format!("beta must be an odd integer > 7 for the replacement and orthogonality checks, got {}", self.beta),
            ));
        }
        if self.beta <= self.gamma {
            return Err(Error::hypothesis(
                "beta",
                format!("beta must exceed gamma, got beta = {} and gamma = {}", self.beta, self.gamma),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::hypothesis("delta", format!("delta must lie in (0, 1/2), got {}", self.delta)));
        }
        if self.lambda_values.is_empty() || self.lambda_values.iter().any(|&l| !(l > 1.0) || !l.is_finite()) {
            return Err(Error::hypothesis(
                "lambda_values",
                "every lambda factor must exceed 1 so that lambda > ||f||_1 / (2 pi)",
            ));
        }
        if self.n_sweep.is_empty() || self.n_sweep.contains(&0) || self.n_sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("N_sweep", "must be nonempty, positive and strictly increasing"));
        }
        for s in &self.sequences {
            s.build()?;
        }
        Ok(())
    }

    pub fn built_sequences(&self) -> Result<Vec<(String, IndexSequence)>> {
        self.sequences.iter().map(|s| Ok((s.label(), s.build()?))).collect()
    }
}
