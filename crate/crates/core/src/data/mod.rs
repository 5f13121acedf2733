//! Tabular ingestion, feature typing, quantile binning and fold assignment.

mod bins;
mod folds;
mod schema;
mod table;

pub use bins::{
    default_min_samples_per_bin, fit_bins, quantile_linear, transform, BinMap, Bins,
    BinnedMatrix, DEFAULT_MAX_BINS, MISSING_BIN,
};
pub use folds::{split_folds, Fold};
pub use schema::{infer_column_kind, infer_schema, FeatureKind, FeatureSchema};
pub use table::{is_missing_token, parse_bool, Column, SchemaOverride, Table};
