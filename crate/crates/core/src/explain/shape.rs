use serde::{Deserialize, Serialize};

use super::{mean_se, ExportMetadata};
use crate::data::{BinMap, FeatureKind, Table};
use crate::error::{Error, Result};
use crate::nn::TermKey;
use crate::scalar::Scalar;
use crate::survival::{calibration_table, CalibrationPoint, EvaluationGrid, SurvivalLabel};
use crate::task::Task;
use crate::train::EnsembleModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeBin {
    pub index: usize,
    pub label: String,
    /// Bin interval for continuous features.
    pub interval: Option<(f64, f64)>,
    pub mean: f64,
    pub se: f64,
    pub per_split: Vec<f64>,
}

/// One shape curve; survival models give one block per evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeBlock {
    pub eval_time: Option<f64>,
    pub bins: Vec<ShapeBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunctionExport {
    pub metadata: ExportMetadata,
    pub feature: String,
    pub kind: FeatureKind,
    pub include_missing: bool,
    pub blocks: Vec<ShapeBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairShapeExport {
    pub metadata: ExportMetadata,
    pub feature_a: String,
    pub feature_b: String,
    pub eval_time: Option<f64>,
    pub labels_a: Vec<String>,
    pub labels_b: Vec<String>,
    /// Mean across splits, `labels_a.len()` rows by `labels_b.len()` columns.
    pub mean: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBlock {
    pub eval_time: f64,
    pub points: Vec<CalibrationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationExport {
    pub metadata: ExportMetadata,
    pub n_bins: usize,
    pub blocks: Vec<CalibrationBlock>,
}

/// Output columns for the requested times: nearest grid time each, or every grid time.
fn output_slices<T: Scalar>(ensemble: &EnsembleModel<T>, eval_times: &[f64]) -> Result<Vec<(usize, Option<f64>)>> {
    let Some(times) = &ensemble.eval_times else {
        return Ok(vec![(0, None)]);
    };
    let grid = EvaluationGrid::new(times.clone())?;
    if eval_times.is_empty() {
        return Ok(times.iter().enumerate().map(|(k, &t)| (k, Some(t))).collect());
    }
    Ok(eval_times
        .iter()
        .map(|&t| {
            let k = grid.nearest(t);
            (k, Some(times[k]))
        })
        .collect())
}

/// Per-split centered gated outputs of a term, one vector per split.
fn split_shapes<T: Scalar>(ensemble: &EnsembleModel<T>, key: &TermKey) -> Option<Vec<Vec<f64>>> {
    let t = ensemble.term_index(key)?;
    Some(
        ensemble
            .split_models()
            .map(|m| m.centered_shape(t).into_iter().map(|v| v.as_f64()).collect())
            .collect(),
    )
}

fn interval(map: &BinMap, index: usize) -> Option<(f64, f64)> {
    (map.is_ordinal() && index > 0).then(|| map.interval(index))
}

/// Centered gated shape of `feature` at every bin, with spread across splits.
pub fn shape_function<T: Scalar>(
    ensemble: &EnsembleModel<T>,
    feature: &str,
    include_missing: bool,
    eval_times: &[f64],
) -> Result<ShapeFunctionExport> {
    let column = ensemble.feature_index(feature)?;
    let shapes =
        split_shapes(ensemble, &TermKey::Main(column)).ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    let map = &ensemble.bin_maps[column];
    let out = ensemble.out_dim();
    let first = usize::from(!include_missing);
    let slices = output_slices(ensemble, eval_times)?;
    let blocks = slices
        .iter()
        .map(|&(q, time)| ShapeBlock {
            eval_time: time,
            bins: (first..map.index_space())
                .map(|b| {
                    let per_split: Vec<f64> = shapes.iter().map(|s| s[b * out + q]).collect();
                    let stat = mean_se(&per_split);
                    ShapeBin {
                        index: b,
                        label: map.label(b),
                        interval: interval(map, b),
                        mean: stat.mean,
                        se: stat.se,
                        per_split,
                    }
                })
                .collect(),
        })
        .collect();
    let mut metadata = ExportMetadata::new(ensemble)?;
    metadata.eval_times = time_list(&slices);
    Ok(ShapeFunctionExport {
        metadata,
        feature: feature.to_string(),
        kind: map.kind,
        include_missing,
        blocks,
    })
}

fn time_list(slices: &[(usize, Option<f64>)]) -> Option<Vec<f64>> {
    let times: Vec<f64> = slices.iter().filter_map(|s| s.1).collect();
    (!times.is_empty()).then_some(times)
}

/// Centered gated pair surface over the full bin grid, including missing rows and columns.
pub fn pair_shape_function<T: Scalar>(
    ensemble: &EnsembleModel<T>,
    feature_a: &str,
    feature_b: &str,
    eval_time: Option<f64>,
) -> Result<PairShapeExport> {
    let not_selected = || Error::PairNotSelected(feature_a.to_string(), feature_b.to_string());
    let (ca, cb) = (ensemble.feature_index(feature_a)?, ensemble.feature_index(feature_b)?);
    let (shapes, swapped) = match split_shapes(ensemble, &TermKey::Pair(ca, cb)) {
        Some(s) => (s, false),
        None => (split_shapes(ensemble, &TermKey::Pair(cb, ca)).ok_or_else(not_selected)?, true),
    };
    let (ma, mb) = (&ensemble.bin_maps[ca], &ensemble.bin_maps[cb]);
    let (na, nb) = (ma.index_space(), mb.index_space());
    let out = ensemble.out_dim();
    let slices = output_slices(ensemble, eval_time.as_slice())?;
    let (q, time) = match (eval_time, &ensemble.eval_times) {
        (None, Some(times)) => {
            let k = times.len() / 2;
            (k, Some(times[k]))
        }
        _ => slices[0],
    };
    let mut mean = vec![vec![0.0; nb]; na];
    let mut se = vec![vec![0.0; nb]; na];
    for i in 0..na {
        for j in 0..nb {
            let cell = if swapped { j * na + i } else { i * nb + j };
            let stat = mean_se(&shapes.iter().map(|s| s[cell * out + q]).collect::<Vec<_>>());
            mean[i][j] = stat.mean;
            se[i][j] = stat.se;
        }
    }
    let mut metadata = ExportMetadata::new(ensemble)?;
    metadata.eval_times = time.map(|t| vec![t]);
    Ok(PairShapeExport {
        metadata,
        feature_a: feature_a.to_string(),
        feature_b: feature_b.to_string(),
        eval_time: time,
        labels_a: (0..na).map(|b| ma.label(b)).collect(),
        labels_b: (0..nb).map(|b| mb.label(b)).collect(),
        mean,
        se,
    })
}

/// Calibration of a survival ensemble on `table` at the requested times (default: median grid time).
pub fn calibration<T: Scalar>(
    ensemble: &EnsembleModel<T>,
    table: &Table,
    labels: &[SurvivalLabel],
    eval_times: &[f64],
    n_bins: usize,
) -> Result<CalibrationExport> {
    if ensemble.task != Task::Survival {
        return Err(Error::Config("calibration needs a survival model".into()));
    }
    let times = ensemble.eval_times.clone().unwrap_or_default();
    let slices = if eval_times.is_empty() {
        let k = times.len() / 2;
        vec![(k, Some(times[k]))]
    } else {
        output_slices(ensemble, eval_times)?
    };
    let pred = ensemble.predict(table)?;
    let out = ensemble.out_dim();
    let blocks = slices
        .iter()
        .map(|&(q, t)| {
            let column: Vec<f64> = pred.chunks(out).map(|row| row[q].as_f64()).collect();
            let t = t.unwrap_or(times[q]);
            Ok(CalibrationBlock {
                eval_time: t,
                points: calibration_table(&column, labels, t, n_bins)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut metadata = ExportMetadata::new(ensemble)?;
    metadata.eval_times = time_list(&slices);
    Ok(CalibrationExport {
        metadata,
        n_bins,
        blocks,
    })
}
