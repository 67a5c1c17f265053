//! Run configuration, read from a TOML file with one table per module.
//!
//! ```toml
//! [trifn]
//! d = 16
//! beta = 1.0
//!
//! [experiment]
//! seeds = [0, 1, 2]
//! cutoffs = [12, 24, 48]
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coattend::CoAttendConfig;
use crate::error::{Error, Result};
use crate::harness::Method;
use crate::synthgen::SynthConfig;
use crate::trifn::TriFnHyper;
use crate::weaksup::WeakSupParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub folds: usize,
    /// engagement windows in hours, strictly increasing
    pub cutoffs: Vec<f64>,
    /// also evaluate on the full engagement history
    pub include_full: bool,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// content vocabulary for the factorization learners
    pub vocab_min_count: usize,
    pub vocab_max_size: usize,
    pub top_k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            folds: 5,
            cutoffs: vec![12.0, 24.0, 36.0, 48.0, 96.0],
            include_full: true,
            seeds: vec![0, 1, 2, 3, 4],
            methods: Method::ALL.to_vec(),
            vocab_min_count: 2,
            vocab_max_size: 5000,
            top_k: 5,
        }
    }
}

impl ExperimentConfig {
    /// Cutoff grid as consumed by the sweep, full history last.
    pub fn cutoff_grid(&self) -> Vec<Option<f64>> {
        let mut grid: Vec<Option<f64>> = self.cutoffs.iter().copied().map(Some).collect();
        if self.include_full {
            grid.push(None);
        }
        grid
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub trifn: TriFnHyper,
    pub weaksup: WeakSupParams,
    pub coattend: CoAttendConfig,
    pub synth: SynthConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.trifn.validate()?;
        self.coattend.validate()?;
        self.synth.validate()?;
        let e = &self.experiment;
        if e.folds < 2 {
            return Err(Error::Config("experiment.folds must be >= 2".into()));
        }
        if e.seeds.is_empty() || e.methods.is_empty() {
            return Err(Error::Config("experiment.seeds and experiment.methods must be non-empty".into()));
        }
        if e.vocab_min_count == 0 || e.vocab_max_size == 0 || e.top_k == 0 {
            return Err(Error::Config("vocabulary bounds and top_k must be >= 1".into()));
        }
        if e.cutoff_grid().is_empty() {
            return Err(Error::Config("no cutoffs to evaluate".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_override_fields() {
        let cfg = RunConfig::parse(
            "[trifn]\nd = 4\nbeta = 0.0\n[experiment]\nseeds = [7]\nmethods = [\"weak_only\"]\ninclude_full = false\n",
        )
        .unwrap();
        assert_eq!(cfg.trifn.d, 4);
        assert_eq!(cfg.trifn.beta, 0.0);
        assert_eq!(cfg.trifn.alpha, TriFnHyper::default().alpha);
        assert_eq!(cfg.experiment.seeds, vec![7]);
        assert_eq!(cfg.experiment.methods, vec![Method::WeakOnly]);
        assert_eq!(cfg.experiment.cutoff_grid().last(), Some(&Some(96.0)));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(matches!(RunConfig::parse("[trifn]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[nope]\n"), Err(Error::Config(_))));
        assert!(RunConfig::parse("[experiment]\nfolds = 1\n").is_err());
        assert!(RunConfig::parse("[coattend]\nlearning_rate = -1.0\n").is_err());
    }
}
