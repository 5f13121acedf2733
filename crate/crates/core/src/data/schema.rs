use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::table::{Column, Table};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
    Binary,
}

impl FeatureKind {
    pub fn is_ordinal(self) -> bool {
        self == FeatureKind::Continuous
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
}

/// Kind of a single column: categorical if non-numeric, binary with exactly two
/// distinct observed values, otherwise continuous.
pub fn infer_column_kind(name: &str, column: &Column) -> Result<FeatureKind> {
    let distinct: BTreeSet<String> = (0..column.len())
        .filter_map(|i| column.category_key(i))
        .collect();
    if distinct.is_empty() {
        return Err(Error::AllMissing(name.to_string()));
    }
    Ok(match (column, distinct.len()) {
        (_, 2) => FeatureKind::Binary,
        (Column::Text(_), _) => FeatureKind::Categorical,
        (Column::Numeric(_), _) => FeatureKind::Continuous,
    })
}

pub fn infer_schema(table: &Table) -> Result<Vec<FeatureSchema>> {
    if table.n_cols() == 0 || table.n_rows() == 0 {
        return Err(Error::EmptyTable);
    }
    let mut seen = HashSet::new();
    table
        .names()
        .iter()
        .zip(table.columns())
        .map(|(name, col)| {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
            Ok(FeatureSchema {
                name: name.clone(),
                kind: infer_column_kind(name, col)?,
            })
        })
        .collect()
}
