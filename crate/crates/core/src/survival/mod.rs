//! Survival statistics: labels, evaluation grid, Kaplan–Meier and Cox
//! censoring estimators, IPCW weights and calibration tables.

mod calibration;
mod censor;
mod cox;
mod km;
mod labels;

pub use calibration::{calibration_table, CalibrationPoint};
pub use censor::{ipcw_weights, CensorEstimator, CensorModel, IpcwWeights, IPCW_FLOOR};
pub use cox::{cox_fit, CoxFit, CoxOptions};
pub use km::{kaplan_meier, StepSurvivalCurve};
pub use labels::{default_grid_size, eval_time_grid, EvaluationGrid, SurvivalLabel, MIN_TIME};
