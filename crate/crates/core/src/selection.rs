use std::collections::BTreeMap;
use std::io::Write;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{auc, rmse};
use crate::nn::{AdditiveModel, Gate, GatePenalty, Objective, TermKey};
use crate::scalar::Scalar;
use crate::train::{add_pairs, fit_mains, init_model, run_epochs, split_rng, LoopOptions, Prepared, SplitData, Targets, TrainConfig};

/// Multiplier between consecutive penalties on the regularization path.
pub const LADDER_FACTOR: f64 = 2.0;
pub const MAX_PATH_STEPS: usize = 20;
/// Pair penalty used when ranking candidate pairs for `num_pairs`.
pub const DEFAULT_PAIR_RANKING_REG: f64 = 1e-4;
/// With more features than this, pair candidates come from the most important ones.
pub const MAX_PAIR_CANDIDATE_FEATURES: usize = 20;

/// Random stream reserved for selection runs, disjoint from split streams.
const SELECTION_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Main-gate penalty; when set, `fit` selects features before training.
    pub reg_param: Option<f64>,
    /// Pair-gate penalty; defaults to `reg_param` when selecting pairs.
    pub pair_reg_param: Option<f64>,
    pub gamma: Option<f64>,
    pub pair_gamma: Option<f64>,
    pub select_pairs: bool,
    pub selection_epochs: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            reg_param: None,
            pair_reg_param: None,
            gamma: None,
            pair_gamma: None,
            select_pairs: false,
            selection_epochs: 100,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("reg_param", self.reg_param), ("pair_reg_param", self.pair_reg_param)] {
            if v.is_some_and(|v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0")));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("pair_gamma", self.pair_gamma)] {
            if v.is_some_and(|v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn gamma_for(&self, n_samples: usize, batch_size: usize, dim: usize) -> f64 {
        self.gamma
            .unwrap_or_else(|| default_gamma(n_samples, batch_size, dim))
    }

    pub fn pair_gamma_for(&self, n_samples: usize, batch_size: usize, dim: usize) -> f64 {
        self.pair_gamma
            .unwrap_or_else(|| self.gamma_for(n_samples, batch_size, dim) / 4.0)
    }
}

/// `min(N/B * 1/250 * 16/d, 1)`: more iterations per epoch call for a wider gate.
pub fn default_gamma(n_samples: usize, batch_size: usize, dim: usize) -> f64 {
    let iters = n_samples as f64 / batch_size.max(1) as f64;
    (iters / 250.0 * 16.0 / dim.max(1) as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGate {
    pub a: String,
    pub b: String,
    pub gate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub reg_param: f64,
    pub selected_feats: Vec<String>,
    pub selected_pairs: Vec<(String, String)>,
    /// Gate value of every candidate feature at convergence.
    pub feature_gates: Vec<(String, f64)>,
    pub pair_gates: Vec<PairGate>,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub reg_param: f64,
    pub num_feats: usize,
    pub val_loss: f64,
    pub val_score: f64,
}

/// Selected-feature sets and validation metrics along an increasing penalty ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationPath {
    pub records: Vec<PathRecord>,
    /// Number of selected features to the first (smallest-penalty) set of that size.
    pub feats: BTreeMap<usize, Vec<String>>,
}

impl RegularizationPath {
    /// Feature set of size `k`, or of the nearest smaller recorded size.
    pub fn feats_at(&self, k: usize) -> Option<(usize, &[String])> {
        self.feats
            .range(..=k)
            .next_back()
            .map(|(&n, f)| (n, f.as_slice()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["reg_param", "num_feats", "val_loss", "val_score"])?;
        for r in &self.records {
            out.write_record([
                r.reg_param.to_string(),
                r.num_feats.to_string(),
                r.val_loss.to_string(),
                r.val_score.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn feats_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.feats)?)
    }
}

/// Score reported on the path: AUC, RMSE or the IPCW loss.
pub fn validation_score<T: Scalar>(model: &AdditiveModel<T>, split: &SplitData<'_, T>) -> Result<f64> {
    let rows = &split.fold.validation;
    let eta = model.raw_logits(split.data, rows);
    match split.targets {
        Targets::Regression(y) => {
            let pred: Vec<f64> = eta.iter().map(|v| v.as_f64()).collect();
            let y: Vec<f64> = rows.iter().map(|&r| y[r].as_f64()).collect();
            Ok(rmse(&pred, &y))
        }
        Targets::Classification(y) => {
            let pred: Vec<f64> = eta.iter().map(|v| v.as_f64()).collect();
            let y: Vec<f64> = rows.iter().map(|&r| y[r].as_f64()).collect();
            auc(&pred, &y)
        }
        Targets::Survival { .. } => Ok(split.targets.value(&eta, rows).as_f64()),
    }
}

fn gate_phase<T: Scalar>(
    model: &mut AdditiveModel<T>,
    split: &SplitData<'_, T>,
    trained: Vec<bool>,
    penalty: GatePenalty<T>,
    cfg: &TrainConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<()> {
    let mut opts = LoopOptions {
        epochs: cfg.selection.selection_epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        patience: cfg.early_stop_patience,
        penalty,
        trained,
        restore_best: false,
        prune: true,
        penalized_validation: true,
    };
    run_epochs(model, split, &mut opts, rng)?;
    Ok(())
}

/// Mean absolute deviation of a term's gated output over `rows`, averaged over outputs.
pub(crate) fn term_importance<T: Scalar>(model: &AdditiveModel<T>, t: usize, split: &SplitData<'_, T>) -> f64 {
    let out = model.out_dim();
    let outputs = model.gated_outputs(t);
    let term = &model.terms[t];
    let rows = &split.fold.train;
    let cells: Vec<usize> = rows.iter().map(|&r| term.cell_of(split.data.row(r))).collect();
    let n = rows.len().max(1) as f64;
    let mut total = 0.0;
    for q in 0..out {
        let mean = cells.iter().map(|&c| outputs[c * out + q].as_f64()).sum::<f64>() / n;
        total += cells
            .iter()
            .map(|&c| (outputs[c * out + q].as_f64() - mean).abs())
            .sum::<f64>()
            / n;
    }
    total / out as f64
}

/// All pairs among `features`, restricted to the most important mains when there are many.
fn candidate_pairs<T: Scalar>(
    model: &AdditiveModel<T>,
    split: &SplitData<'_, T>,
    features: &[usize],
) -> Vec<(usize, usize)> {
    let mut pool: Vec<usize> = features.to_vec();
    if pool.len() > MAX_PAIR_CANDIDATE_FEATURES {
        let mut scored: Vec<(f64, usize)> = pool
            .iter()
            .map(|&c| {
                let score = model
                    .term_index(&TermKey::Main(c))
                    .map_or(0.0, |t| term_importance(model, t, split));
                (score, c)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        pool = scored[..MAX_PAIR_CANDIDATE_FEATURES].iter().map(|s| s.1).collect();
    }
    pool.sort_unstable();
    let mut pairs = Vec::new();
    for (i, &a) in pool.iter().enumerate() {
        for &b in &pool[i + 1..] {
            pairs.push((a, b));
        }
    }
    pairs
}

/// Adds learnable pair gates for `pairs` and trains only them under `reg`.
fn pair_gate_phase<T: Scalar>(
    model: &mut AdditiveModel<T>,
    prepared: &Prepared<T>,
    split: &SplitData<'_, T>,
    pairs: &[(usize, usize)],
    reg: f64,
    pair_gamma: f64,
    cfg: &TrainConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<PairGate>> {
    let slots: Vec<_> = pairs
        .iter()
        .map(|&(a, b)| (prepared.slot(a, cfg), prepared.slot(b, cfg)))
        .collect();
    let gate = Gate::learnable(T::of(pair_gamma))?;
    let added = add_pairs(model, &slots, || gate, rng)?;
    let mut trained = vec![false; model.terms.len()];
    for &t in &added {
        trained[t] = true;
    }
    let penalty = GatePenalty {
        main: T::zero(),
        pair: T::of(reg),
    };
    gate_phase(model, split, trained, penalty, cfg, rng)?;
    let names = prepared.names();
    let mut gates: Vec<PairGate> = pairs
        .iter()
        .zip(&added)
        .map(|(&(a, b), &t)| PairGate {
            a: names[a].clone(),
            b: names[b].clone(),
            gate: model.terms[t].gate.value().as_f64(),
        })
        .collect();
    let order = rank_pairs(pairs, &gates);
    gates = order.into_iter().map(|i| gates[i].clone()).collect();
    Ok(gates)
}

/// Indices sorted by gate value (largest first), ties by pair index.
fn rank_pairs(pairs: &[(usize, usize)], gates: &[PairGate]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&i, &j| gates[j].gate.total_cmp(&gates[i].gate).then(pairs[i].cmp(&pairs[j])));
    order
}

struct Selector<'a, T> {
    prepared: &'a Prepared<T>,
    cfg: &'a TrainConfig,
    gamma: f64,
    pair_gamma: f64,
}

impl<'a, T: Scalar> Selector<'a, T> {
    fn new(prepared: &'a Prepared<T>, cfg: &'a TrainConfig) -> Self {
        let n = prepared.folds[0].train.len();
        Selector {
            prepared,
            cfg,
            gamma: cfg.selection.gamma_for(n, cfg.batch_size, cfg.embedding_dim),
            pair_gamma: cfg.selection.pair_gamma_for(n, cfg.batch_size, cfg.embedding_dim),
        }
    }

    fn split(&self) -> SplitData<'a, T> {
        self.prepared.split(0)
    }

    fn gated_model(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<AdditiveModel<T>> {
        let columns: Vec<usize> = (0..self.prepared.schema.len()).collect();
        let slots = self.prepared.slots(&columns, self.cfg);
        let gate = Gate::learnable(T::of(self.gamma))?;
        let arch = self.cfg.architecture(self.prepared.targets.out_dim());
        init_model(self.cfg.task, arch, &slots, || gate, rng)
    }

    fn main_gates(&self, model: &AdditiveModel<T>) -> Vec<(String, f64)> {
        model
            .terms
            .iter()
            .filter_map(|t| match t.key {
                TermKey::Main(c) => Some((self.prepared.schema[c].name.clone(), t.gate.value().as_f64())),
                TermKey::Pair(..) => None,
            })
            .collect()
    }

    fn val_loss(&self, model: &AdditiveModel<T>) -> f64 {
        let split = self.split();
        model
            .objective(split.data, &split.fold.validation, split.targets, &GatePenalty::none(), None)
            .as_f64()
    }
}

fn selected(gates: &[(String, f64)]) -> Vec<String> {
    gates.iter().filter(|g| g.1 > 0.0).map(|g| g.0.clone()).collect()
}

/// Trains gated mains (and optionally pairs) on the first split under the sparsity penalty.
pub fn select_features<T: Scalar>(prepared: &Prepared<T>, cfg: &TrainConfig, reg_param: f64) -> Result<SelectionResult> {
    if !(reg_param >= 0.0) {
        return Err(Error::Config("reg_param must be >= 0".into()));
    }
    let sel = Selector::new(prepared, cfg);
    let split = sel.split();
    let mut rng = split_rng(cfg.seed, SELECTION_STREAM);
    let mut model = sel.gated_model(&mut rng)?;
    let penalty = GatePenalty {
        main: T::of(reg_param),
        pair: T::zero(),
    };
    let trained = vec![true; model.terms.len()];
    gate_phase(&mut model, &split, trained, penalty, cfg, &mut rng)?;
    let feature_gates = sel.main_gates(&model);
    let mut pair_gates = Vec::new();
    if cfg.selection.select_pairs {
        let all: Vec<usize> = (0..prepared.schema.len()).collect();
        let candidates = candidate_pairs(&model, &split, &all);
        let reg = cfg.selection.pair_reg_param.unwrap_or(reg_param);
        pair_gates = pair_gate_phase(&mut model, prepared, &split, &candidates, reg, sel.pair_gamma, cfg, &mut rng)?;
    }
    let selected_feats = selected(&feature_gates);
    if selected_feats.is_empty() {
        warn!("reg_param {reg_param} removed every feature");
    }
    let selected_pairs = pair_gates
        .iter()
        .filter(|g| g.gate > 0.0)
        .map(|g| (g.a.clone(), g.b.clone()))
        .collect();
    Ok(SelectionResult {
        reg_param,
        selected_feats,
        selected_pairs,
        feature_gates,
        pair_gates,
        val_loss: sel.val_loss(&model),
    })
}

/// Ranks candidate pairs among `features` by their gate after a lightly penalized fit on the first split.
pub fn rank_pairs_by_gate<T: Scalar>(prepared: &Prepared<T>, cfg: &TrainConfig, features: &[usize]) -> Result<Vec<PairGate>> {
    let sel = Selector::new(prepared, cfg);
    let split = sel.split();
    let mut rng = split_rng(cfg.seed, SELECTION_STREAM + 1);
    let slots = prepared.slots(features, cfg);
    let arch = cfg.architecture(prepared.targets.out_dim());
    let mut model = init_model(cfg.task, arch, &slots, Gate::open, &mut rng)?;
    fit_mains(&mut model, split, cfg, &mut rng)?;
    let candidates = candidate_pairs(&model, &split, features);
    let reg = cfg.selection.pair_reg_param.unwrap_or(DEFAULT_PAIR_RANKING_REG);
    pair_gate_phase(&mut model, prepared, &split, &candidates, reg, sel.pair_gamma, cfg, &mut rng)
}

/// Runs selection over `init_reg_param * 2^s`, warm-starting each step from the last.
pub fn regularization_path<T: Scalar>(
    prepared: &Prepared<T>,
    cfg: &TrainConfig,
    init_reg_param: f64,
) -> Result<RegularizationPath> {
    if !(init_reg_param > 0.0) || !init_reg_param.is_finite() {
        return Err(Error::Config("init_reg_param must be positive".into()));
    }
    let sel = Selector::new(prepared, cfg);
    let split = sel.split();
    let mut rng = split_rng(cfg.seed, SELECTION_STREAM);
    let mut model = sel.gated_model(&mut rng)?;
    let mut path = RegularizationPath {
        records: Vec::new(),
        feats: BTreeMap::new(),
    };
    let mut reg = init_reg_param;
    let reopen = T::of(sel.gamma / 4.0);
    for step in 0..MAX_PATH_STEPS {
        let trained: Vec<bool> = model.terms.iter().map(|t| t.gate.trainable).collect();
        for term in model.terms.iter_mut().filter(|t| t.gate.trainable) {
            term.gate.mu = reopen;
        }
        let penalty = GatePenalty {
            main: T::of(reg),
            pair: T::zero(),
        };
        gate_phase(&mut model, &split, trained, penalty, cfg, &mut rng)?;
        let feats = selected(&sel.main_gates(&model));
        let record = PathRecord {
            reg_param: reg,
            num_feats: feats.len(),
            val_loss: sel.val_loss(&model),
            val_score: validation_score(&model, &split)?,
        };
        info!(
            "path step {step}: reg_param {reg:.3e}, {} features, val_loss {:.5}",
            record.num_feats, record.val_loss
        );
        if let Some(prev) = path.records.last() {
            if record.num_feats > prev.num_feats {
                warn!(
                    "selected features grew from {} to {} at reg_param {reg:.3e}",
                    prev.num_feats, record.num_feats
                );
            }
        }
        path.feats.entry(feats.len()).or_insert(feats);
        path.records.push(record);
        if record.num_feats == 0 {
            break;
        }
        reg *= LADDER_FACTOR;
    }
    Ok(path)
}

/// Column indices of `names` in schema order.
pub(crate) fn columns_of<T: Scalar>(prepared: &Prepared<T>, names: &[String]) -> Result<Vec<usize>> {
    let mut cols = names
        .iter()
        .map(|n| prepared.column_of(n))
        .collect::<Result<Vec<_>>>()?;
    cols.sort_unstable();
    cols.dedup();
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_gamma_examples() {
        assert_eq!(default_gamma(32000, 128, 16), 1.0);
        assert!((default_gamma(128, 128, 16) - 0.004).abs() < 1e-15);
        let cfg = SelectionConfig::default();
        assert!((cfg.pair_gamma_for(128, 128, 16) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SelectionConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.gamma = Some(0.0);
        assert!(cfg.validate().is_err());
        cfg.gamma = None;
        cfg.reg_param = Some(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn feats_lookup_uses_nearest_smaller_size() {
        let mut feats = BTreeMap::new();
        feats.insert(5, vec!["a".to_string(); 5]);
        feats.insert(2, vec!["b".to_string(); 2]);
        let path = RegularizationPath {
            records: Vec::new(),
            feats,
        };
        assert_eq!(path.feats_at(5).unwrap().0, 5);
        assert_eq!(path.feats_at(4).unwrap().0, 2);
        assert_eq!(path.feats_at(9).unwrap().0, 5);
        assert!(path.feats_at(1).is_none());
    }

    #[test]
    fn pair_ranking_breaks_ties_by_index() {
        let pairs = [(0, 3), (0, 1), (1, 2)];
        let g = |gate| PairGate {
            a: String::new(),
            b: String::new(),
            gate,
        };
        let gates = [g(1.0), g(1.0), g(0.5)];
        assert_eq!(rank_pairs(&pairs, &gates), vec![1, 0, 2]);
    }
}
