use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
    Survival,
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl Task {
    /// Link applied element-wise to the additive predictor.
    #[inline]
    pub fn link<T: Scalar>(self, eta: T) -> T {
        match self {
            Task::Regression => eta,
            Task::Classification | Task::Survival => sigmoid(eta),
        }
    }
}

impl Task {
    /// Name of the score reported on regularization paths.
    pub fn score_name(self) -> &'static str {
        match self {
            Task::Regression => "rmse",
            Task::Classification => "auc",
            Task::Survival => "ipcw_loss",
        }
    }
}
