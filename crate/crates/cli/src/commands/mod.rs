pub mod ablate;
pub mod bench;
pub mod eval;
pub mod gradcheck;
pub mod sr;
pub mod train;

use std::path::PathBuf;

use anyhow::Result;

use crate::RunConfig;

/// Config file plus `key=value` overrides, as given on the command line.
#[derive(Clone, Debug, Default)]
pub struct ConfigSource {
    pub path: Option<PathBuf>,
    pub overrides: Vec<String>,
}

impl ConfigSource {
    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::load(self.path.as_deref(), &self.overrides)
    }

    pub fn resolve_over(&self, base: RunConfig) -> Result<RunConfig> {
        RunConfig::load_over(base, self.path.as_deref(), &self.overrides)
    }
}
