//! Model files: the ensemble text followed by one `preprocessing` line
//! holding the CSV encoding, standardizer and cost matrix as JSON.

use std::path::Path;

use anglecs::data::{Encoding, Standardizer};
use anglecs::{CostMatrix, Ensemble};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

const MARKER: &str = "preprocessing ";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preprocessing {
    pub encoding: Encoding,
    pub standardizer: Option<Standardizer>,
    pub cost: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub ensemble: Ensemble,
    pub prep: Preprocessing,
}

impl Model {
    pub fn cost(&self) -> Result<CostMatrix> {
        Ok(CostMatrix::from_rows(&self.prep.cost)?)
    }

    pub fn to_text(&self) -> Result<String> {
        let json = serde_json::to_string(&self.prep)?;
        Ok(format!("{}{MARKER}{json}\n", self.ensemble))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let Some(pos) = text.find(&format!("\n{MARKER}")) else {
            bail!("model file has no preprocessing section");
        };
        let ensemble = Ensemble::parse(&text[..pos + 1])?;
        let json = text[pos + 1 + MARKER.len()..].trim_end();
        let prep: Preprocessing =
            serde_json::from_str(json).context("malformed preprocessing section")?;
        if prep.encoding.k() != ensemble.k() || prep.cost.len() != ensemble.k() {
            bail!("model sections disagree on the number of classes");
        }
        if prep.encoding.feature_names().len() != ensemble.n_features() {
            bail!("model sections disagree on the number of features");
        }
        Ok(Self { ensemble, prep })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read model {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid model {}", path.display()))
    }
}
