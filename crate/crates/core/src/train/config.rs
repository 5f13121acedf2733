use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_MAX_BINS;
use crate::error::{Error, Result};
use crate::nn::{Activation, Architecture, KernelConfig};
use crate::selection::SelectionConfig;
use crate::survival::CensorEstimator;
use crate::task::Task;

/// Every knob of a fit. Unset options fall back to data-dependent defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub n_val_splits: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub learning_rate: f64,
    pub num_pairs: usize,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub kernel_size: usize,
    pub kernel_weight: f64,
    pub max_bins: usize,
    pub min_samples_per_bin: Option<usize>,
    /// Feature name to direction (+1 increasing, -1 decreasing).
    pub monotone: BTreeMap<String, i8>,
    pub censor_estimator: CensorEstimator,
    pub n_eval_times: Option<usize>,
    pub selection: SelectionConfig,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Regression,
            n_val_splits: 5,
            batch_size: 128,
            max_epochs: 100,
            early_stop_patience: 5,
            learning_rate: 5e-3,
            num_pairs: 0,
            embedding_dim: 16,
            hidden: vec![32],
            activation: Activation::Relu,
            kernel_size: 5,
            kernel_weight: 3.0,
            max_bins: DEFAULT_MAX_BINS,
            min_samples_per_bin: None,
            monotone: BTreeMap::new(),
            censor_estimator: CensorEstimator::KaplanMeier,
            n_eval_times: None,
            selection: SelectionConfig::default(),
            seed: 0,
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn for_task(task: Task) -> TrainConfig {
        TrainConfig {
            task,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_val_splits < 2 {
            return bad("n_val_splits must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.max_bins == 0 {
            return bad("max_bins must be at least 1");
        }
        if self.monotone.values().any(|d| d.abs() > 1) {
            return bad("monotone directions must be -1, 0 or 1");
        }
        if self.task == Task::Survival && !self.monotone.values().all(|&d| d == 0) {
            return Err(Error::UnsupportedMonotone);
        }
        self.selection.validate()?;
        self.architecture(1).validate()
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig {
            phi: self.kernel_weight,
            size: self.kernel_size,
        }
    }

    pub fn architecture(&self, out_dim: usize) -> Architecture {
        Architecture {
            embedding_dim: self.embedding_dim,
            hidden: self.hidden.clone(),
            activation: self.activation,
            out_dim,
            kernel: self.kernel(),
        }
    }
}
