use crate::error::{Error, Result};
use crate::nn::Objective;
use crate::scalar::Scalar;
use crate::survival::{ipcw_weights, CensorModel, IpcwWeights, SurvivalLabel};
use crate::task::sigmoid;

/// Mean squared error.
pub fn loss_mse<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let n = T::of(pred.len().max(1) as f64);
    pred.iter().zip(target).map(|(&p, &y)| (p - y) * (p - y)).sum::<T>() / n
}

/// Mean negative Bernoulli log-likelihood of probabilities `prob`.
pub fn loss_bce<T: Scalar>(prob: &[T], target: &[T]) -> Result<T> {
    let n = T::of(prob.len().max(1) as f64);
    let mut total = T::zero();
    for (&p, &y) in prob.iter().zip(target) {
        if y != T::zero() && y != T::one() {
            return Err(Error::Data(format!("binary target must be 0 or 1, got {y}")));
        }
        total -= if y == T::one() { p.ln() } else { (T::one() - p).ln() };
    }
    Ok(total / n)
}

/// IPCW Brier loss of a predicted CDF matrix (n x K, row-major), averaged over
/// samples and evaluation times.
pub fn loss_ipcw(cdf: &[f64], labels: &[SurvivalLabel], times: &[f64], censor: &CensorModel) -> Result<f64> {
    if cdf.len() != labels.len() * times.len() {
        return Err(Error::Dimension("cdf matrix vs labels x times".into()));
    }
    let w = ipcw_weights(labels, times, censor);
    Ok(ipcw_from_weights(cdf, &w))
}

pub(crate) fn ipcw_from_weights(cdf: &[f64], w: &IpcwWeights) -> f64 {
    let total: f64 = cdf
        .iter()
        .zip(w.late.iter().zip(&w.early))
        .map(|(&p, (&a, &b))| a * p * p + b * (1.0 - p) * (1.0 - p))
        .sum();
    total / cdf.len().max(1) as f64
}

/// Training targets; every variant is scored on the unlinked predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets<T> {
    Regression(Vec<T>),
    Classification(Vec<T>),
    Survival {
        n_times: usize,
        late: Vec<T>,
        early: Vec<T>,
    },
}

impl<T: Scalar> Targets<T> {
    pub fn survival(w: &IpcwWeights) -> Targets<T> {
        Targets::Survival {
            n_times: w.n_times,
            late: w.late.iter().map(|&v| T::of(v)).collect(),
            early: w.early.iter().map(|&v| T::of(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(y) | Targets::Classification(y) => y.len(),
            Targets::Survival { n_times, late, .. } => late.len() / n_times.max(&1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Scalar> Objective<T> for Targets<T> {
    fn out_dim(&self) -> usize {
        match self {
            Targets::Survival { n_times, .. } => *n_times,
            _ => 1,
        }
    }

    fn value_and_grad(&self, eta: &[T], rows: &[usize]) -> (T, Vec<T>) {
        let mut grad = vec![T::zero(); eta.len()];
        let mut total = T::zero();
        let n = T::of(eta.len().max(1) as f64);
        match self {
            Targets::Regression(y) => {
                for ((g, &e), &r) in grad.iter_mut().zip(eta).zip(rows) {
                    let d = e - y[r];
                    total += d * d;
                    *g = T::of(2.0) * d / n;
                }
            }
            Targets::Classification(y) => {
                for ((g, &e), &r) in grad.iter_mut().zip(eta).zip(rows) {
                    // log(1 + exp(e)) - y e, evaluated stably
                    total += e.max(T::zero()) - y[r] * e + (-e.abs()).exp().ln_1p();
                    *g = (sigmoid(e) - y[r]) / n;
                }
            }
            Targets::Survival { n_times, late, early } => {
                let k = *n_times;
                for (i, &r) in rows.iter().enumerate() {
                    for q in 0..k {
                        let e = eta[i * k + q];
                        let (a, b) = (late[r * k + q], early[r * k + q]);
                        let p = sigmoid(e);
                        let one_m = T::one() - p;
                        total += a * p * p + b * one_m * one_m;
                        grad[i * k + q] = T::of(2.0) * (a * p - b * one_m) * p * one_m / n;
                    }
                }
            }
        }
        (total / n, grad)
    }
}
