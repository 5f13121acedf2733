use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::dataset::{feature_columns, prepare, Dataset, Prepared};
use super::trainer::{fit_single_split, FeatureSlot, SingleSplitModel};
use crate::data::{BinMap, BinnedMatrix, Column, FeatureSchema, Table};
use crate::error::{Error, Result};
use crate::nn::{AdditiveModel, TermKey};
use crate::scalar::Scalar;
use crate::selection::{columns_of, rank_pairs_by_gate, select_features, PairGate, SelectionResult};
use crate::task::Task;

pub const FORMAT_VERSION: &str = "1.0";
const FORMAT_MAJOR: u32 = 1;

/// k single-split models sharing bins, schema and selected sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel<T> {
    pub format_version: String,
    pub task: Task,
    pub schema: Vec<FeatureSchema>,
    pub bin_maps: Vec<BinMap>,
    pub selected_feats: Vec<String>,
    pub selected_pairs: Vec<(String, String)>,
    /// Survival evaluation grid.
    pub eval_times: Option<Vec<f64>>,
    pub config: TrainConfig,
    pub splits: Vec<SingleSplitModel<T>>,
}

/// What happened during a fit besides the model itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub selection: Option<SelectionResult>,
    /// Candidate pairs ranked by gate, when `num_pairs` drove pair selection.
    pub pair_ranking: Vec<PairGate>,
    pub best_val_loss: Vec<f64>,
    pub ipcw_clamped: usize,
}

impl FitReport {
    pub fn mean_val_loss(&self) -> f64 {
        self.best_val_loss.iter().sum::<f64>() / self.best_val_loss.len().max(1) as f64
    }
}

fn thread_pool(threads: Option<usize>, splits: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(splits).max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Fits bins, selects features and pairs if requested, then trains every split.
pub fn fit<T: Scalar>(dataset: &Dataset, cfg: &TrainConfig) -> Result<(EnsembleModel<T>, FitReport)> {
    let prepared = prepare::<T>(dataset, cfg)?;
    fit_prepared(&prepared, cfg)
}

pub fn fit_prepared<T: Scalar>(prepared: &Prepared<T>, cfg: &TrainConfig) -> Result<(EnsembleModel<T>, FitReport)> {
    cfg.validate()?;
    let names = prepared.names();
    let mut features: Vec<usize> = (0..names.len()).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut selection = None;
    let mut pair_ranking = Vec::new();
    if let Some(reg) = cfg.selection.reg_param {
        let result = select_features(prepared, cfg, reg)?;
        info!("selected {} of {} features", result.selected_feats.len(), names.len());
        features = columns_of(prepared, &result.selected_feats)?;
        if cfg.selection.select_pairs {
            for (a, b) in &result.selected_pairs {
                pairs.push((prepared.column_of(a)?, prepared.column_of(b)?));
            }
        }
        selection = Some(result);
    }
    if cfg.num_pairs > 0 && !cfg.selection.select_pairs {
        if features.len() < 2 {
            warn!("num_pairs = {} but fewer than two features remain", cfg.num_pairs);
        } else {
            pair_ranking = rank_pairs_by_gate(prepared, cfg, &features)?;
            for g in pair_ranking.iter().take(cfg.num_pairs) {
                pairs.push((prepared.column_of(&g.a)?, prepared.column_of(&g.b)?));
            }
        }
    }
    let slots = prepared.slots(&features, cfg);
    let pair_slots: Vec<(FeatureSlot, FeatureSlot)> = pairs
        .iter()
        .map(|&(a, b)| (prepared.slot(a, cfg), prepared.slot(b, cfg)))
        .collect();
    let k = prepared.folds.len();
    let splits = thread_pool(cfg.threads, k)?.install(|| {
        (0..k)
            .into_par_iter()
            .map(|s| fit_single_split(prepared.split(s), &slots, &pair_slots, cfg, s as u64))
            .collect::<Result<Vec<_>>>()
    })?;
    let best_val_loss = splits.iter().map(SingleSplitModel::best_val_loss).collect();
    let mut stored = cfg.clone();
    stored.threads = None;
    let model = EnsembleModel {
        format_version: FORMAT_VERSION.to_string(),
        task: cfg.task,
        schema: prepared.schema.clone(),
        bin_maps: prepared.bin_maps.clone(),
        selected_feats: features.iter().map(|&c| names[c].clone()).collect(),
        selected_pairs: pairs.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect(),
        eval_times: prepared.grid.as_ref().map(|g| g.times().to_vec()),
        config: stored,
        splits,
    };
    let report = FitReport {
        selection,
        pair_ranking,
        best_val_loss,
        ipcw_clamped: prepared.ipcw_clamped,
    };
    Ok((model, report))
}

impl<T: Scalar> EnsembleModel<T> {
    pub fn out_dim(&self) -> usize {
        self.eval_times.as_ref().map_or(1, Vec::len)
    }

    pub fn n_splits(&self) -> usize {
        self.splits.len()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// Bins `table` with the stored maps. Unselected features may be absent.
    pub fn bin_table(&self, table: &Table) -> Result<BinnedMatrix> {
        for name in &self.selected_feats {
            table.column(name)?;
        }
        for (a, b) in &self.selected_pairs {
            table.column(a)?;
            table.column(b)?;
        }
        let columns = feature_columns(table, &self.schema, true)?;
        let refs: Vec<&Column> = columns.iter().collect();
        BinnedMatrix::from_table_columns(&refs, &self.bin_maps)
    }

    /// Mean of the split models' linked predictions, rows x `out_dim`.
    pub fn predict_binned(&self, data: &BinnedMatrix) -> Vec<T> {
        let rows: Vec<usize> = (0..data.n_samples()).collect();
        let mut total = vec![T::zero(); rows.len() * self.out_dim()];
        for split in &self.splits {
            for (acc, p) in total.iter_mut().zip(split.model.predict(data, &rows)) {
                *acc += p;
            }
        }
        let k = T::of(self.splits.len().max(1) as f64);
        total.into_iter().map(|v| v / k).collect()
    }

    pub fn predict(&self, table: &Table) -> Result<Vec<T>> {
        Ok(self.predict_binned(&self.bin_table(table)?))
    }

    /// Index of the term for `key` in every split model.
    pub fn term_index(&self, key: &TermKey) -> Option<usize> {
        self.splits.first().and_then(|s| s.model.term_index(key))
    }

    pub fn split_models(&self) -> impl Iterator<Item = &AdditiveModel<T>> {
        self.splits.iter().map(|s| &s.model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a model document, rejecting newer major format versions.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Data("model file has no format_version".into()))?;
        let major: u32 = version
            .split('.')
            .next()
            .and_then(|m| m.parse().ok())
            .ok_or_else(|| Error::Data(format!("bad format_version `{version}`")))?;
        if major > FORMAT_MAJOR {
            return Err(Error::Version {
                found: version.to_string(),
                supported: FORMAT_MAJOR,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}
