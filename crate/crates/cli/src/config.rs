use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use glsl_core::search::SearchProblem;
use glsl_core::FunctionSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Report,
    Verify,
    Flow,
    Constants,
    Logcc,
    Search,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedProblem {
    /// Small-ε fit of the deficit of `1 + εx_1`.
    Expansion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Named(NamedProblem),
    Search(SearchProblem),
}

/// Everything that determines the output of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub family: Option<FunctionSpec>,
    pub grid_order: usize,
    pub d: Option<usize>,
    pub times: Vec<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub problem: Option<ProblemSpec>,
    pub budget: usize,
    pub flows: bool,
}

pub const DEFAULT_GRID_ORDER: usize = 64;
pub const DEFAULT_BUDGET: usize = 400;
pub const DEFAULT_FLOW_TIMES: [f64; 7] = [0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0];
pub const EXPANSION_EPS: [f64; 4] = [0.003, 0.01, 0.03, 0.1];

impl RunConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        RunConfig {
            subcommand,
            family: None,
            grid_order: DEFAULT_GRID_ORDER,
            d: None,
            times: Vec::new(),
            tol: None,
            out: None,
            seed: 0,
            problem: None,
            budget: DEFAULT_BUDGET,
            flows: true,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Config as it enters the hash: the output path does not change results.
    pub fn canonical(&self) -> RunConfig {
        RunConfig { out: None, ..self.clone() }
    }

    /// SHA-256 of the canonical compact JSON, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.grid_order < 2 {
            return Err(format!("grid order {} < 2", self.grid_order));
        }
        if let Some(t) = self.tol {
            if !t.is_finite() {
                return Err(format!("tolerance {t} is not finite"));
            }
        }
        if let Some(t) = self.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(format!("time {t} is not a finite nonnegative number"));
        }
        if let Some(d) = self.d {
            if !(1..=3).contains(&d) {
                return Err(format!("d = {d} outside 1..=3"));
            }
        }
        Ok(())
    }
}
