use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gate::Gate;
use super::kernel::kernel_weights;
use super::term::{Architecture, Term, TermEval, TermKey};
use crate::data::BinnedMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::task::Task;

/// A differentiable objective over the additive predictor of a set of rows.
pub trait Objective<T> {
    fn out_dim(&self) -> usize;
    /// Mean loss over `rows` and its gradient with respect to `eta` (rows x out_dim).
    fn value_and_grad(&self, eta: &[T], rows: &[usize]) -> (T, Vec<T>);
    fn value(&self, eta: &[T], rows: &[usize]) -> T {
        self.value_and_grad(eta, rows).0
    }
}

/// Sparsity pressure `lambda * sum s(mu)` over learnable gates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GatePenalty<T> {
    pub main: T,
    pub pair: T,
}

impl<T: Scalar> GatePenalty<T> {
    pub fn none() -> Self {
        GatePenalty {
            main: T::zero(),
            pair: T::zero(),
        }
    }

    fn weight(&self, key: &TermKey) -> T {
        if key.is_pair() {
            self.pair
        } else {
            self.main
        }
    }
}

/// Gradient of one term: its flat parameter vector and its gate parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGrad<T> {
    pub params: Vec<T>,
    pub mu: T,
}

/// Per-term gradients; `None` for terms that were not differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub terms: Vec<Option<TermGrad<T>>>,
}

pub(crate) struct Forward<T> {
    pub evals: Vec<Option<TermEval<T>>>,
    pub eta: Vec<T>,
}

/// Additive model: gated main and pair shape functions plus a post-hoc intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModel<T> {
    pub task: Task,
    pub arch: Architecture,
    pub terms: Vec<Term<T>>,
    /// Per-output intercept; zero until the model is finalized.
    pub intercept: Vec<T>,
    /// Per-term, per-output centering constants; zero until finalized.
    pub centers: Vec<Vec<T>>,
}

impl<T: Scalar> AdditiveModel<T> {
    pub fn new(task: Task, arch: Architecture) -> Result<Self> {
        arch.validate()?;
        if task != Task::Survival && arch.out_dim != 1 {
            return Err(Error::Config("regression and classification use one output".into()));
        }
        Ok(AdditiveModel {
            task,
            intercept: vec![T::zero(); arch.out_dim],
            arch,
            terms: Vec::new(),
            centers: Vec::new(),
        })
    }

    pub fn out_dim(&self) -> usize {
        self.arch.out_dim
    }

    pub fn add_term<R: Rng>(
        &mut self,
        key: TermKey,
        axes: Vec<usize>,
        ordinal: Vec<bool>,
        monotone: i8,
        gate: Gate<T>,
        rng: &mut R,
    ) -> Result<usize> {
        let term = Term::new(key, axes, ordinal, monotone, gate, &self.arch, rng)?;
        self.terms.push(term);
        self.centers.push(vec![T::zero(); self.arch.out_dim]);
        Ok(self.terms.len() - 1)
    }

    pub fn term_index(&self, key: &TermKey) -> Option<usize> {
        self.terms.iter().position(|t| &t.key == key)
    }

    pub(crate) fn weights(&self) -> Vec<T> {
        kernel_weights(self.arch.kernel.size, self.arch.kernel.phi)
    }

    fn eval_term(&self, t: usize, data: &BinnedMatrix, rows: &[usize], weights: &[T]) -> TermEval<T> {
        let term = &self.terms[t];
        if term.key.is_pair() {
            let mut cells: Vec<usize> = rows.iter().map(|&r| term.cell_of(data.row(r))).collect();
            cells.sort_unstable();
            cells.dedup();
            term.eval_cells(&self.arch, weights, cells)
        } else {
            term.eval_all(&self.arch, weights)
        }
    }

    /// Terms that contribute: selected by `active` and not gated to exactly zero.
    fn contributes(&self, t: usize, active: Option<&[bool]>) -> bool {
        active.is_none_or(|a| a[t]) && !self.terms[t].gate.is_closed()
    }

    /// Raw additive predictor `sum_t s_t f_t` (no intercept, no centering).
    pub(crate) fn forward(&self, data: &BinnedMatrix, rows: &[usize], active: Option<&[bool]>) -> Forward<T> {
        let weights = self.weights();
        let out = self.out_dim();
        let mut eta = vec![T::zero(); rows.len() * out];
        let mut evals = Vec::with_capacity(self.terms.len());
        for (t, term) in self.terms.iter().enumerate() {
            if !self.contributes(t, active) {
                evals.push(None);
                continue;
            }
            let eval = self.eval_term(t, data, rows, &weights);
            let s = term.gate.value();
            for (k, &r) in rows.iter().enumerate() {
                let o = eval.output(term.cell_of(data.row(r)));
                for (e, &v) in eta[k * out..(k + 1) * out].iter_mut().zip(o) {
                    *e += s * v;
                }
            }
            evals.push(Some(eval));
        }
        Forward { evals, eta }
    }

    /// Raw additive predictor from the trained parameters, without intercept.
    pub fn raw_logits(&self, data: &BinnedMatrix, rows: &[usize]) -> Vec<T> {
        self.forward(data, rows, None).eta
    }

    /// `intercept + sum_t s_t (f_t - c_t)`.
    pub fn logits(&self, data: &BinnedMatrix, rows: &[usize]) -> Vec<T> {
        let weights = self.weights();
        let out = self.out_dim();
        let mut eta: Vec<T> = rows.iter().flat_map(|_| self.intercept.iter().copied()).collect();
        for (t, term) in self.terms.iter().enumerate() {
            if !self.contributes(t, None) {
                continue;
            }
            let eval = self.eval_term(t, data, rows, &weights);
            let s = term.gate.value();
            let c = &self.centers[t];
            for (k, &r) in rows.iter().enumerate() {
                let o = eval.output(term.cell_of(data.row(r)));
                for ((e, &v), &ci) in eta[k * out..(k + 1) * out].iter_mut().zip(o).zip(c) {
                    *e += s * (v - ci);
                }
            }
        }
        eta
    }

    /// Linked predictions, rows x out_dim.
    pub fn predict(&self, data: &BinnedMatrix, rows: &[usize]) -> Vec<T> {
        let task = self.task;
        self.logits(data, rows).into_iter().map(|e| task.link(e)).collect()
    }

    /// Objective value (mean loss plus gate penalty) without gradients.
    pub fn objective(
        &self,
        data: &BinnedMatrix,
        rows: &[usize],
        loss: &dyn Objective<T>,
        penalty: &GatePenalty<T>,
        active: Option<&[bool]>,
    ) -> T {
        let fwd = self.forward(data, rows, active);
        loss.value(&fwd.eta, rows) + self.penalty_value(penalty, active)
    }

    fn penalty_value(&self, penalty: &GatePenalty<T>, active: Option<&[bool]>) -> T {
        self.terms
            .iter()
            .enumerate()
            .filter(|(t, term)| term.gate.trainable && active.is_none_or(|a| a[*t]))
            .map(|(_, term)| penalty.weight(&term.key) * term.gate.value())
            .sum()
    }

    /// Objective and exact gradients for the terms flagged in `trained`.
    pub fn objective_and_grad(
        &self,
        data: &BinnedMatrix,
        rows: &[usize],
        loss: &dyn Objective<T>,
        penalty: &GatePenalty<T>,
        active: Option<&[bool]>,
        trained: &[bool],
    ) -> Result<(T, Gradients<T>)> {
        if loss.out_dim() != self.out_dim() {
            return Err(Error::Dimension(format!(
                "objective has {} outputs, model has {}",
                loss.out_dim(),
                self.out_dim()
            )));
        }
        let fwd = self.forward(data, rows, active);
        let (value, d_eta) = loss.value_and_grad(&fwd.eta, rows);
        let value = value + self.penalty_value(penalty, active);
        let out = self.out_dim();
        let mut grads = Vec::with_capacity(self.terms.len());
        for (t, term) in self.terms.iter().enumerate() {
            let Some(eval) = fwd.evals[t].as_ref().filter(|_| trained[t]) else {
                grads.push(None);
                continue;
            };
            let s = term.gate.value();
            let mut d_out = vec![T::zero(); eval.n_cells() * out];
            let mut d_gate = T::zero();
            for (k, &r) in rows.iter().enumerate() {
                let cell = term.cell_of(data.row(r));
                let p = eval.pos(cell);
                let de = &d_eta[k * out..(k + 1) * out];
                let o = &eval.out[p * out..(p + 1) * out];
                for ((dst, &g), &v) in d_out[p * out..(p + 1) * out].iter_mut().zip(de).zip(o) {
                    *dst += s * g;
                    d_gate += g * v;
                }
            }
            let slope = term.gate.slope();
            let mu = slope * (d_gate + penalty.weight(&term.key));
            let mut params = vec![T::zero(); term.params.len()];
            if s != T::zero() {
                term.backward(&self.arch, eval, &d_out, &mut params);
            }
            if !mu.is_finite() || params.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of term {t}")));
            }
            grads.push(Some(TermGrad { params, mu }));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        Ok((value, Gradients { terms: grads }))
    }

    /// Gated term outputs on every cell of term `t`, before centering.
    pub fn gated_outputs(&self, t: usize) -> Vec<T> {
        let term = &self.terms[t];
        let s = term.gate.value();
        let eval = term.eval_all(&self.arch, &self.weights());
        eval.out.into_iter().map(|v| s * v).collect()
    }

    /// Centered gated shape `s_t (f_t - c_t)` on every cell of term `t`.
    pub fn centered_shape(&self, t: usize) -> Vec<T> {
        let term = &self.terms[t];
        let s = term.gate.value();
        let out = self.out_dim();
        let eval = term.eval_all(&self.arch, &self.weights());
        eval.out
            .iter()
            .enumerate()
            .map(|(k, &v)| s * (v - self.centers[t][k % out]))
            .collect()
    }

    /// Sets centering constants and the intercept from `rows` of `data`.
    pub fn finalize(&mut self, data: &BinnedMatrix, rows: &[usize]) {
        let out = self.out_dim();
        let n = T::of(rows.len().max(1) as f64);
        let fwd = self.forward(data, rows, None);
        let mut intercept = vec![T::zero(); out];
        for (t, term) in self.terms.iter().enumerate() {
            let mut c = vec![T::zero(); out];
            if let Some(eval) = &fwd.evals[t] {
                let s = term.gate.value();
                for &r in rows {
                    for (ci, &v) in c.iter_mut().zip(eval.output(term.cell_of(data.row(r)))) {
                        *ci += s * v;
                    }
                }
                for ci in &mut c {
                    *ci /= n;
                }
            }
            for (b, &ci) in intercept.iter_mut().zip(&c) {
                *b += ci;
            }
            self.centers[t] = c;
        }
        self.intercept = intercept;
    }

    /// FNV-1a digest over the parameters of the given terms.
    pub fn checksum(&self, terms: impl Iterator<Item = usize>) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for t in terms {
            let term = &self.terms[t];
            for v in term.params.iter().chain([term.gate.mu].iter()) {
                for b in v.as_f64().to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }
}
