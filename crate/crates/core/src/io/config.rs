//! TOML run configuration: one table per solver layer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, IoError};
use crate::deflation::DeflationConfig;
use crate::fixed_point::InnerConfig;
use crate::oracle::OracleConfig;
use crate::perturbation::PerturbationConfig;
use crate::search::SearchConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inner: InnerConfig,
    pub search: SearchConfig,
    pub perturbation: PerturbationConfig,
    pub oracle: OracleConfig,
    pub deflation: DeflationConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::from_toml(&read_text(path.as_ref())?)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let invalid = |e: crate::error::SolveError| IoError::Invalid(e.to_string());
        self.inner.validate().map_err(invalid)?;
        self.search.validate().map_err(invalid)?;
        self.perturbation.validate().map_err(invalid)?;
        Ok(())
    }
}
