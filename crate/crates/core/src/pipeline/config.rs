use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foreground::MrfParams;
use crate::gmcp::{ExhaustedGroups, Initialization, DEFAULT_ALPHA};
use crate::similarity::SimilarityConfig;
use crate::subset::SubsetParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub max_iterations: usize,
    /// Pools are passed in subset rank order, so `group_order` starts from
    /// each video's top-ranked proposal.
    pub init: Initialization,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            max_iterations: 1000,
            init: Initialization::GroupOrder,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiInstanceConfig {
    /// Later rounds ignore nodes whose overlap with an earlier pick of the
    /// same video exceeds this. Defaults to the localization threshold: a
    /// tube that overlaps a pick that much already counts as localizing it.
    pub overlap_threshold: f64,
    pub exhausted: ExhaustedGroups,
}

impl Default for MultiInstanceConfig {
    fn default() -> Self {
        Self {
            overlap_threshold: 0.2,
            exhausted: ExhaustedGroups::Pin,
        }
    }
}

/// Where per-video instance budgets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceBudgets {
    #[default]
    Manifest,
    One,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Manifest path; relative paths resolve against the config file.
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Proposals kept per video after subset selection.
    pub top_k: usize,
    pub instance_budgets: InstanceBudgets,
    pub eval_threshold: f64,
    pub mrf: MrfParams,
    pub subset: SubsetParams,
    pub similarity: SimilarityConfig,
    pub solver: SolverConfig,
    pub multi_instance: MultiInstanceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            output: None,
            seed: 0,
            top_k: 100,
            instance_budgets: InstanceBudgets::Manifest,
            eval_threshold: 0.2,
            mrf: MrfParams::default(),
            subset: SubsetParams::default(),
            similarity: SimilarityConfig::default(),
            solver: SolverConfig::default(),
            multi_instance: MultiInstanceConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a TOML file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.mrf.validate()?;
        self.subset.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.top_k == 0 {
            return bad("top_k must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.eval_threshold) {
            return bad("eval_threshold must be in [0, 1]");
        }
        if !(self.solver.alpha >= 0.0 && self.solver.alpha.is_finite()) {
            return bad("solver.alpha must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.multi_instance.overlap_threshold) {
            return bad("multi_instance.overlap_threshold must be in [0, 1]");
        }
        if self.similarity.clusters == 0 {
            return bad("similarity.clusters must be >= 1");
        }
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if self.similarity.chi2_gamma.is_some_and(|g| !positive(&g))
            || self.similarity.fine_sigma.is_some_and(|s| !positive(&s))
            || self.similarity.shape_sigma.is_some_and(|s| !positive(&[s]))
        {
            return bad("similarity bandwidths must be > 0");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
