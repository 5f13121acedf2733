use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::loss::Targets;
use super::trainer::{FeatureSlot, SplitData};
use crate::data::{
    default_min_samples_per_bin, fit_bins, infer_schema, parse_bool, split_folds, BinMap, BinnedMatrix, Column,
    FeatureKind, FeatureSchema, Fold, SchemaOverride, Table,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::survival::{
    default_grid_size, eval_time_grid, ipcw_weights, CensorEstimator, CensorModel, EvaluationGrid, SurvivalLabel,
};
use crate::task::Task;

/// Names of the label columns in a raw table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelColumns {
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub time: Option<String>,
    #[serde(default)]
    pub event: Option<String>,
}

impl LabelColumns {
    pub fn names(&self) -> Vec<&str> {
        [&self.target, &self.time, &self.event]
            .into_iter()
            .flatten()
            .map(String::as_str)
            .collect()
    }

    fn require<'a>(name: &'a Option<String>, role: &str) -> Result<&'a str> {
        name.as_deref()
            .ok_or_else(|| Error::Config(format!("no {role} column configured")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Regression(Vec<f64>),
    Classification(Vec<f64>),
    Survival(Vec<SurvivalLabel>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Regression(v) | Labels::Classification(v) => v.len(),
            Labels::Survival(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Labels::Regression(_) => Task::Regression,
            Labels::Classification(_) => Task::Classification,
            Labels::Survival(_) => Task::Survival,
        }
    }

    /// Reads labels for `task` from the named columns of `table`.
    pub fn from_table(table: &Table, task: Task, cols: &LabelColumns) -> Result<Labels> {
        let numeric = |name: &str| -> Result<Vec<f64>> {
            let Column::Numeric(v) = table.column(name)?.to_numeric(name)? else {
                unreachable!()
            };
            v.into_iter()
                .enumerate()
                .map(|(i, c)| c.ok_or_else(|| Error::Data(format!("column `{name}`: missing label in row {}", i + 1))))
                .collect()
        };
        let boolean = |name: &str| -> Result<Vec<bool>> {
            let col = table.column(name)?;
            (0..col.len())
                .map(|i| {
                    col.category_key(i)
                        .as_deref()
                        .and_then(parse_bool)
                        .ok_or_else(|| Error::Data(format!("column `{name}`: row {} is not a 0/1 indicator", i + 1)))
                })
                .collect()
        };
        match task {
            Task::Regression => Ok(Labels::Regression(numeric(LabelColumns::require(&cols.target, "target")?)?)),
            Task::Classification => {
                let y = boolean(LabelColumns::require(&cols.target, "target")?)?;
                Ok(Labels::Classification(y.into_iter().map(|b| f64::from(u8::from(b))).collect()))
            }
            Task::Survival => {
                let t = numeric(LabelColumns::require(&cols.time, "time")?)?;
                let e = boolean(LabelColumns::require(&cols.event, "event")?)?;
                t.into_iter()
                    .zip(e)
                    .map(|(t, e)| SurvivalLabel::new(e, t))
                    .collect::<Result<Vec<_>>>()
                    .map(Labels::Survival)
            }
        }
    }
}

/// Feature table, inferred schema and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Table,
    pub schema: Vec<FeatureSchema>,
    pub labels: Labels,
}

impl Dataset {
    pub fn new(features: Table, labels: Labels) -> Result<Dataset> {
        Dataset::with_override(features, labels, None)
    }

    pub fn with_override(features: Table, labels: Labels, overrides: Option<&SchemaOverride>) -> Result<Dataset> {
        if features.n_rows() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows vs {} labels",
                features.n_rows(),
                labels.len()
            )));
        }
        let mut schema = infer_schema(&features)?;
        if let Some(o) = overrides {
            for (name, kind) in &o.columns {
                if let Some(s) = schema.iter_mut().find(|s| &s.name == name) {
                    s.kind = *kind;
                }
            }
        }
        for s in &schema {
            if s.kind == FeatureKind::Continuous {
                features.column(&s.name)?.to_numeric(&s.name)?;
            }
        }
        Ok(Dataset {
            features,
            schema,
            labels,
        })
    }

    /// Splits a raw table into features and labels.
    pub fn from_table(
        table: &Table,
        task: Task,
        cols: &LabelColumns,
        overrides: Option<&SchemaOverride>,
    ) -> Result<Dataset> {
        let labels = Labels::from_table(table, task, cols)?;
        let mut drop = cols.names();
        if let Some(o) = overrides {
            drop.extend(o.ignore.iter().map(String::as_str));
        }
        Dataset::with_override(table.without(&drop), labels, overrides)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }
}

/// Columns of `table` in schema order, continuous ones parsed as numbers.
/// With `fill_absent`, columns missing from the table read as all-missing.
pub fn feature_columns(table: &Table, schema: &[FeatureSchema], fill_absent: bool) -> Result<Vec<Column>> {
    schema
        .iter()
        .map(|s| match table.column(&s.name) {
            Ok(c) if s.kind == FeatureKind::Continuous => c.to_numeric(&s.name),
            Ok(c) => Ok(c.clone()),
            Err(_) if fill_absent => Ok(Column::Numeric(vec![None; table.n_rows()])),
            Err(e) => Err(e),
        })
        .collect()
}

/// Binned data, targets and folds shared by selection and ensemble fitting.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub schema: Vec<FeatureSchema>,
    pub bin_maps: Vec<BinMap>,
    pub binned: BinnedMatrix,
    pub targets: Targets<T>,
    pub folds: Vec<Fold>,
    pub grid: Option<EvaluationGrid>,
    pub ipcw_clamped: usize,
}

/// Numeric covariates for a Cox censoring model: continuous and binary
/// features, mean-imputed; categorical features are skipped.
fn cox_covariates(dataset: &Dataset, maps: &[BinMap]) -> Vec<Vec<f64>> {
    let n = dataset.n_samples();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (s, (col, map)) in dataset.schema.iter().zip(dataset.features.columns().iter().zip(maps)) {
        let values: Vec<Option<f64>> = match s.kind {
            FeatureKind::Continuous => match col.to_numeric(&s.name) {
                Ok(Column::Numeric(v)) => v,
                _ => continue,
            },
            FeatureKind::Binary => crate::data::transform(col, map)
                .into_iter()
                .map(|b| (b > 0).then(|| f64::from(b - 1)))
                .collect(),
            FeatureKind::Categorical => continue,
        };
        let present: Vec<f64> = values.iter().flatten().copied().collect();
        let mean = present.iter().sum::<f64>() / present.len().max(1) as f64;
        cols.push(values.into_iter().map(|v| v.unwrap_or(mean)).collect());
    }
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

pub fn prepare<T: Scalar>(dataset: &Dataset, cfg: &TrainConfig) -> Result<Prepared<T>> {
    cfg.validate()?;
    if dataset.labels.task() != cfg.task {
        return Err(Error::Config(format!(
            "labels are for {:?} but the configuration asks for {:?}",
            dataset.labels.task(),
            cfg.task
        )));
    }
    for name in cfg.monotone.keys() {
        if !dataset.schema.iter().any(|s| &s.name == name) {
            return Err(Error::Config(format!("monotone constraint on unknown feature `{name}`")));
        }
    }
    let n = dataset.n_samples();
    let min_samples = cfg.min_samples_per_bin.unwrap_or_else(|| default_min_samples_per_bin(n));
    let columns = feature_columns(&dataset.features, &dataset.schema, false)?;
    let bin_maps = dataset
        .schema
        .iter()
        .zip(&columns)
        .map(|(s, c)| fit_bins(c, s, cfg.max_bins, min_samples))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<&Column> = columns.iter().collect();
    let binned = BinnedMatrix::from_table_columns(&columns, &bin_maps)?;
    let folds = split_folds(n, cfg.n_val_splits, cfg.seed)?;
    let (targets, grid, ipcw_clamped) = match &dataset.labels {
        Labels::Regression(y) => (Targets::Regression(y.iter().map(|&v| T::of(v)).collect()), None, 0),
        Labels::Classification(y) => (Targets::Classification(y.iter().map(|&v| T::of(v)).collect()), None, 0),
        Labels::Survival(labels) => {
            let k = cfg.n_eval_times.unwrap_or_else(|| default_grid_size(labels));
            let grid = eval_time_grid(labels, k)?;
            let covariates = (cfg.censor_estimator == CensorEstimator::Cox).then(|| cox_covariates(dataset, &bin_maps));
            let censor = CensorModel::fit(cfg.censor_estimator, labels, covariates)?;
            let w = ipcw_weights(labels, grid.times(), &censor);
            (Targets::survival(&w), Some(grid), w.clamped)
        }
    };
    Ok(Prepared {
        schema: dataset.schema.clone(),
        bin_maps,
        binned,
        targets,
        folds,
        grid,
        ipcw_clamped,
    })
}

impl<T: Scalar> Prepared<T> {
    pub fn split(&self, s: usize) -> SplitData<'_, T> {
        SplitData {
            data: &self.binned,
            fold: &self.folds[s],
            targets: &self.targets,
        }
    }

    pub fn slot(&self, column: usize, cfg: &TrainConfig) -> FeatureSlot {
        let map = &self.bin_maps[column];
        FeatureSlot {
            column,
            space: map.index_space(),
            ordinal: map.is_ordinal(),
            monotone: cfg.monotone.get(&map.feature).copied().unwrap_or(0),
        }
    }

    pub fn slots(&self, columns: &[usize], cfg: &TrainConfig) -> Vec<FeatureSlot> {
        columns.iter().map(|&c| self.slot(c, cfg)).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.schema.iter().map(|s| s.name.clone()).collect()
    }

    pub fn column_of(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }
}
