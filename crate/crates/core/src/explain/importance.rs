use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{mean_se, ExportMetadata, Summary};
use crate::data::{BinnedMatrix, MISSING_BIN};
use crate::error::{Error, Result};
use crate::nn::{AdditiveModel, TermKey};
use crate::scalar::Scalar;
use crate::train::{CellCounts, EnsembleModel};

/// How the missing bin enters an importance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMode {
    /// Missing samples count like any other.
    #[default]
    Include,
    /// Only samples with the feature observed.
    Ignore,
    /// Observed score as in `Ignore`, plus a separate missing-bin score.
    Stratify,
}

impl FromStr for ImportanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "include" => Ok(ImportanceMode::Include),
            "ignore" => Ok(ImportanceMode::Ignore),
            "stratify" => Ok(ImportanceMode::Stratify),
            other => Err(Error::Config(format!(
                "unknown importance mode `{other}` (expected include, ignore or stratify)"
            ))),
        }
    }
}

impl fmt::Display for ImportanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImportanceMode::Include => "include",
            ImportanceMode::Ignore => "ignore",
            ImportanceMode::Stratify => "stratify",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermImportance {
    /// Feature name, or `a x b` for a pair.
    pub name: String,
    pub features: Vec<String>,
    /// Score over the included samples (the observed score in stratify mode).
    pub score: Summary,
    /// Missing-bin score, stratify mode only.
    pub missing: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub metadata: ExportMetadata,
    pub mode: ImportanceMode,
    /// Sorted by decreasing score.
    pub terms: Vec<TermImportance>,
}

impl ImportanceReport {
    pub fn get(&self, name: &str) -> Option<&TermImportance> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// Term names in report order.
    pub fn order(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.name.as_str()).collect()
    }
}

/// Whether every axis of a cell is observed.
fn observed(key: &TermKey, axes: &[usize], cell: usize) -> bool {
    match key {
        TermKey::Main(_) => cell != MISSING_BIN as usize,
        TermKey::Pair(..) => cell / axes[1] != 0 && cell % axes[1] != 0,
    }
}

/// Mean over outputs of `|shape|` at `cell`.
fn abs_at<T: Scalar>(shape: &[T], out: usize, cell: usize) -> f64 {
    shape[cell * out..(cell + 1) * out]
        .iter()
        .map(|v| v.as_f64().abs())
        .sum::<f64>()
        / out as f64
}

fn weighted_mean<'a>(items: impl Iterator<Item = (&'a usize, f64)>) -> f64 {
    let (mut total, mut n) = (0.0, 0usize);
    for (&count, v) in items {
        total += count as f64 * v;
        n += count;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Scores of one term in one split model: (included, missing).
fn split_scores<T: Scalar>(
    model: &AdditiveModel<T>,
    t: usize,
    counts: &CellCounts,
    mode: ImportanceMode,
) -> (f64, Option<f64>) {
    let term = &model.terms[t];
    let shape = model.centered_shape(t);
    let out = model.out_dim();
    let abs = |c: usize| abs_at(&shape, out, c);
    let is_obs = |c: usize| observed(&term.key, &term.axes, c);
    let included = match mode {
        ImportanceMode::Include => weighted_mean(counts.iter().map(|(c, n)| (n, abs(*c)))),
        ImportanceMode::Ignore | ImportanceMode::Stratify => {
            weighted_mean(counts.iter().filter(|(c, _)| is_obs(*c)).map(|(c, n)| (n, abs(*c))))
        }
    };
    let missing = (mode == ImportanceMode::Stratify).then(|| match term.key {
        TermKey::Main(_) => abs(MISSING_BIN as usize),
        TermKey::Pair(..) => weighted_mean(counts.iter().filter(|(c, _)| !is_obs(*c)).map(|(c, n)| (n, abs(*c)))),
    });
    (included, missing)
}

fn counts_on<T: Scalar>(model: &AdditiveModel<T>, t: usize, data: &BinnedMatrix) -> CellCounts {
    let term = &model.terms[t];
    let mut counts = std::collections::BTreeMap::new();
    for r in 0..data.n_samples() {
        *counts.entry(term.cell_of(data.row(r))).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}

fn importance<T: Scalar>(
    ensemble: &EnsembleModel<T>,
    mode: ImportanceMode,
    data: Option<&BinnedMatrix>,
) -> Result<ImportanceReport> {
    let Some(first) = ensemble.splits.first() else {
        return Err(Error::EmptyExport);
    };
    let mut terms = Vec::new();
    for (t, term) in first.model.terms.iter().enumerate() {
        let features: Vec<String> = term
            .key
            .features()
            .into_iter()
            .map(|c| ensemble.schema[c].name.clone())
            .collect();
        let mut scores = Vec::new();
        let mut missing = Vec::new();
        for split in &ensemble.splits {
            let counts = match data {
                Some(d) => counts_on(&split.model, t, d),
                None => split.cell_counts[t].clone(),
            };
            let (s, m) = split_scores(&split.model, t, &counts, mode);
            scores.push(s);
            missing.extend(m);
        }
        terms.push(TermImportance {
            name: features.join(" x "),
            features,
            score: mean_se(&scores),
            missing: (mode == ImportanceMode::Stratify).then(|| mean_se(&missing)),
        });
    }
    terms.sort_by(|a, b| b.score.mean.total_cmp(&a.score.mean).then_with(|| a.name.cmp(&b.name)));
    let mut metadata = ExportMetadata::new(ensemble)?;
    metadata.mode = Some(mode);
    metadata.importance_data = Some(
        if data.is_some() {
            "supplied data"
        } else {
            "training fold of each split"
        }
        .to_string(),
    );
    Ok(ImportanceReport { metadata, mode, terms })
}

/// Importance of every main and pair term, each split scored on its own training fold.
pub fn feature_importance<T: Scalar>(ensemble: &EnsembleModel<T>, mode: ImportanceMode) -> Result<ImportanceReport> {
    importance(ensemble, mode, None)
}

/// Importance scored on the given binned data for every split.
pub fn feature_importance_on<T: Scalar>(
    ensemble: &EnsembleModel<T>,
    data: &BinnedMatrix,
    mode: ImportanceMode,
) -> Result<ImportanceReport> {
    importance(ensemble, mode, Some(data))
}
