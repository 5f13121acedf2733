use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::TrainConfig;
use super::loss::Targets;
use crate::data::{BinnedMatrix, Fold};
use crate::error::{Error, Result};
use crate::nn::{AdditiveModel, Architecture, Gate, GatePenalty, Objective, TermKey};
use crate::scalar::Scalar;
use crate::task::Task;

/// Generator for one split; streams keep splits independent under one seed.
pub fn split_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One binned feature column as seen by a main-effect term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSlot {
    pub column: usize,
    pub space: usize,
    pub ordinal: bool,
    pub monotone: i8,
}

/// Data for one train/validation split.
#[derive(Clone, Copy)]
pub struct SplitData<'a, T> {
    pub data: &'a BinnedMatrix,
    pub fold: &'a Fold,
    pub targets: &'a Targets<T>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    /// Validation loss before training followed by one entry per epoch.
    pub val_loss: Vec<f64>,
    /// Index into `val_loss` of the restored parameters.
    pub best: usize,
}

impl History {
    pub fn best_loss(&self) -> f64 {
        self.val_loss.get(self.best).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LoopOptions<T> {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub penalty: GatePenalty<T>,
    /// Terms receiving updates; pruning clears entries.
    pub trained: Vec<bool>,
    /// Restore the parameters with the lowest validation value.
    pub restore_best: bool,
    /// Freeze gates that reach exactly zero and stop updating their terms.
    pub prune: bool,
    /// Include the gate penalty in the validation value.
    pub penalized_validation: bool,
}

impl<T: Scalar> LoopOptions<T> {
    pub fn plain(cfg: &TrainConfig, trained: Vec<bool>) -> Self {
        LoopOptions {
            epochs: cfg.max_epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            patience: cfg.early_stop_patience,
            penalty: GatePenalty::none(),
            trained,
            restore_best: true,
            prune: false,
            penalized_validation: false,
        }
    }
}

fn validation_value<T: Scalar>(
    model: &AdditiveModel<T>,
    split: &SplitData<'_, T>,
    opts: &LoopOptions<T>,
) -> f64 {
    let penalty = if opts.penalized_validation {
        opts.penalty
    } else {
        GatePenalty::none()
    };
    model
        .objective(split.data, &split.fold.validation, split.targets, &penalty, None)
        .as_f64()
}

/// Minibatch Adam with early stopping on the validation value.
pub(crate) fn run_epochs<T: Scalar, R: Rng>(
    model: &mut AdditiveModel<T>,
    split: &SplitData<'_, T>,
    opts: &mut LoopOptions<T>,
    rng: &mut R,
) -> Result<History> {
    let mut adam = Adam::new(opts.learning_rate);
    let mut order = split.fold.train.clone();
    let first = validation_value(model, split, opts);
    let mut history = History {
        val_loss: vec![first],
        best: 0,
    };
    let mut best_terms = opts.restore_best.then(|| model.terms.clone());
    let mut best = first;
    let mut stale = 0;
    for epoch in 1..=opts.epochs {
        if !opts.trained.iter().any(|&t| t) {
            break;
        }
        order.shuffle(rng);
        for batch in order.chunks(opts.batch_size) {
            let (_, grads) = model
                .objective_and_grad(split.data, batch, split.targets, &opts.penalty, None, &opts.trained)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}: {e}")))?;
            adam.step(model, &grads);
            if opts.prune {
                for (t, term) in model.terms.iter_mut().enumerate() {
                    if opts.trained[t] && term.gate.trainable && term.gate.is_closed() {
                        term.gate.freeze();
                        opts.trained[t] = false;
                    }
                }
            }
        }
        let val = validation_value(model, split, opts);
        if !val.is_finite() {
            return Err(Error::NonFinite(format!("validation loss diverged at epoch {epoch}")));
        }
        history.val_loss.push(val);
        if val < best {
            best = val;
            history.best = epoch;
            stale = 0;
            if let Some(b) = best_terms.as_mut() {
                b.clone_from(&model.terms);
            }
        } else {
            stale += 1;
            if stale >= opts.patience {
                break;
            }
        }
    }
    match best_terms {
        Some(b) => model.terms = b,
        None => history.best = history.val_loss.len() - 1,
    }
    Ok(history)
}

/// Fresh model with one main term per slot.
pub fn init_model<T: Scalar, R: Rng>(
    task: Task,
    arch: Architecture,
    slots: &[FeatureSlot],
    gate: impl Fn() -> Gate<T>,
    rng: &mut R,
) -> Result<AdditiveModel<T>> {
    let mut model = AdditiveModel::new(task, arch)?;
    for s in slots {
        model.add_term(
            TermKey::Main(s.column),
            vec![s.space],
            vec![s.ordinal],
            s.monotone,
            gate(),
            rng,
        )?;
    }
    Ok(model)
}

/// Adds pair terms built from two slots each.
pub fn add_pairs<T: Scalar, R: Rng>(
    model: &mut AdditiveModel<T>,
    pairs: &[(FeatureSlot, FeatureSlot)],
    gate: impl Fn() -> Gate<T>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    pairs
        .iter()
        .map(|(a, b)| {
            model.add_term(
                TermKey::Pair(a.column, b.column),
                vec![a.space, b.space],
                vec![a.ordinal, b.ordinal],
                0,
                gate(),
                rng,
            )
        })
        .collect()
}

/// Trains every main term of `model`.
pub fn fit_mains<T: Scalar, R: Rng>(
    model: &mut AdditiveModel<T>,
    split: SplitData<'_, T>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<History> {
    let trained = model.terms.iter().map(|t| !t.key.is_pair()).collect();
    run_epochs(model, &split, &mut LoopOptions::plain(cfg, trained), rng)
}

/// Adds and trains the given pair terms while every main term stays frozen.
pub fn fit_pairs<T: Scalar, R: Rng>(
    model: &mut AdditiveModel<T>,
    pairs: &[(FeatureSlot, FeatureSlot)],
    split: SplitData<'_, T>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Option<History>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let added = add_pairs(model, pairs, Gate::open, rng)?;
    let mut trained = vec![false; model.terms.len()];
    for t in added {
        trained[t] = true;
    }
    run_epochs(model, &split, &mut LoopOptions::plain(cfg, trained), rng).map(Some)
}

/// Training-fold cell occupancy of a term, as sorted `(cell, count)` pairs.
pub type CellCounts = Vec<(usize, usize)>;

/// One member of the ensemble: a finalized model plus its training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSplitModel<T> {
    pub model: AdditiveModel<T>,
    pub mains_history: History,
    pub pairs_history: Option<History>,
    pub n_train: usize,
    /// Per term, the training-fold occupancy of each cell.
    pub cell_counts: Vec<CellCounts>,
}

impl<T: Scalar> SingleSplitModel<T> {
    /// Centers the model on its training fold and records cell occupancy.
    pub fn finalize(
        mut model: AdditiveModel<T>,
        data: &BinnedMatrix,
        train: &[usize],
        mains_history: History,
        pairs_history: Option<History>,
    ) -> SingleSplitModel<T> {
        model.finalize(data, train);
        let cell_counts = model
            .terms
            .iter()
            .map(|term| {
                let mut counts = BTreeMap::new();
                for &r in train {
                    *counts.entry(term.cell_of(data.row(r))).or_insert(0usize) += 1;
                }
                counts.into_iter().collect()
            })
            .collect();
        SingleSplitModel {
            model,
            mains_history,
            pairs_history,
            n_train: train.len(),
            cell_counts,
        }
    }

    /// Lowest validation loss over both training stages.
    pub fn best_val_loss(&self) -> f64 {
        self.pairs_history
            .as_ref()
            .map_or(self.mains_history.best_loss(), History::best_loss)
    }
}

/// Mains, then pairs with mains frozen, then centering.
pub fn fit_single_split<T: Scalar>(
    split: SplitData<'_, T>,
    slots: &[FeatureSlot],
    pairs: &[(FeatureSlot, FeatureSlot)],
    cfg: &TrainConfig,
    stream: u64,
) -> Result<SingleSplitModel<T>> {
    let mut rng = split_rng(cfg.seed, stream);
    let mut model = init_model(
        cfg.task,
        cfg.architecture(split.targets.out_dim()),
        slots,
        Gate::open,
        &mut rng,
    )?;
    let mains = fit_mains(&mut model, split, cfg, &mut rng)?;
    let pairs = fit_pairs(&mut model, pairs, split, cfg, &mut rng)?;
    Ok(SingleSplitModel::finalize(model, split.data, &split.fold.train, mains, pairs))
}
