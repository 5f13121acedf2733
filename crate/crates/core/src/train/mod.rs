mod adam;
mod config;
mod dataset;
mod ensemble;
mod loss;
mod trainer;

pub use adam::Adam;
pub use config::TrainConfig;
pub use dataset::{feature_columns, prepare, Dataset, LabelColumns, Labels, Prepared};
pub use ensemble::{fit, fit_prepared, EnsembleModel, FitReport, FORMAT_VERSION};
pub use loss::{loss_bce, loss_ipcw, loss_mse, Targets};
pub(crate) use trainer::{run_epochs, LoopOptions};
pub use trainer::{
    add_pairs, fit_mains, fit_pairs, fit_single_split, init_model, split_rng, CellCounts, FeatureSlot, History,
    SingleSplitModel, SplitData,
};
