use serde::{Deserialize, Serialize};

use super::cox::{cox_fit, CoxFit, CoxOptions};
use super::km::{flipped, kaplan_meier, StepSurvivalCurve};
use super::labels::SurvivalLabel;
use crate::error::{Error, Result};

/// Censoring-survival values below this floor are clamped before inversion.
pub const IPCW_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorEstimator {
    #[default]
    KaplanMeier,
    Cox,
}

/// Estimate of the censoring survival `G(t | X) = P(C > t | X)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CensorModel {
    KaplanMeier(StepSurvivalCurve),
    Cox {
        fit: CoxFit,
        covariates: Vec<Vec<f64>>,
    },
}

impl CensorModel {
    /// Fits on flipped event indicators. Cox requires one covariate row per label.
    pub fn fit(
        estimator: CensorEstimator,
        labels: &[SurvivalLabel],
        covariates: Option<Vec<Vec<f64>>>,
    ) -> Result<CensorModel> {
        let censoring = flipped(labels);
        let any_censored = censoring.iter().any(|l| l.event);
        match (estimator, covariates) {
            (CensorEstimator::Cox, Some(x)) if any_censored => {
                let fit = cox_fit(&x, &censoring, CoxOptions::default())?;
                Ok(CensorModel::Cox { fit, covariates: x })
            }
            (CensorEstimator::Cox, None) => Err(Error::Config("cox censoring needs covariates".into())),
            _ => Ok(CensorModel::KaplanMeier(kaplan_meier(&censoring))),
        }
    }

    pub fn survival(&self, row: usize, t: f64) -> f64 {
        match self {
            CensorModel::KaplanMeier(c) => c.at(t),
            CensorModel::Cox { fit, covariates } => fit.survival(&covariates[row], t),
        }
    }

    /// Left limit `G(t- | X)`.
    pub fn survival_left(&self, row: usize, t: f64) -> f64 {
        match self {
            CensorModel::KaplanMeier(c) => c.left_of(t),
            CensorModel::Cox { fit, covariates } => fit.survival_left(&covariates[row], t),
        }
    }
}

/// Per-sample, per-time IPCW coefficients so that the loss is
/// `mean(late * p^2 + early * (1 - p)^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpcwWeights {
    pub n_times: usize,
    /// `1{Z > t_k} / G(t_k | X)`, row-major n x K.
    pub late: Vec<f64>,
    /// `1{Z <= t_k, δ = 1} / G(Z- | X)`, row-major n x K.
    pub early: Vec<f64>,
    /// How many evaluations hit the clamp.
    pub clamped: usize,
}

pub fn ipcw_weights(labels: &[SurvivalLabel], times: &[f64], censor: &CensorModel) -> IpcwWeights {
    let k = times.len();
    let mut late = vec![0.0; labels.len() * k];
    let mut early = vec![0.0; labels.len() * k];
    let mut clamped = 0;
    let mut floor = |g: f64| {
        if g < IPCW_FLOOR {
            clamped += 1;
            IPCW_FLOOR
        } else {
            g
        }
    };
    for (i, l) in labels.iter().enumerate() {
        let g_event = l.event.then(|| floor(censor.survival_left(i, l.time)));
        for (q, &t) in times.iter().enumerate() {
            if l.time > t {
                late[i * k + q] = 1.0 / floor(censor.survival(i, t));
            } else if let Some(g) = g_event {
                early[i * k + q] = 1.0 / g;
            }
        }
    }
    if clamped > 0 {
        log::warn!("censoring survival clamped to {IPCW_FLOOR} in {clamped} weight evaluations");
    }
    IpcwWeights {
        n_times: k,
        late,
        early,
        clamped,
    }
}
