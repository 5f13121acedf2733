use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::schema::{FeatureKind, FeatureSchema};
use super::table::Column;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_BINS: usize = 32;

/// Bin index reserved for missing values in every feature.
pub const MISSING_BIN: u32 = 0;

/// `min(50, ceil(0.01 * n))`, floored at 1.
pub fn default_min_samples_per_bin(n_samples: usize) -> usize {
    let one_percent = (n_samples as f64 * 0.01).ceil() as usize;
    one_percent.clamp(1, 50)
}

/// Linear interpolation between order statistics: position `(n - 1) * p`
/// on the zero-based sorted sample.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bins {
    /// Cut points; bin `b` (1-based) holds values in `(edges[b-2], edges[b-1]]`.
    Edges(Vec<f64>),
    /// Sorted distinct category keys.
    Categories(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMap {
    pub feature: String,
    pub kind: FeatureKind,
    pub bins: Bins,
    /// Observed training range of a continuous feature, used for labels and plots.
    #[serde(default)]
    pub range: Option<(f64, f64)>,
}

impl BinMap {
    /// Number of non-missing bins.
    pub fn n_bins(&self) -> usize {
        match &self.bins {
            Bins::Edges(e) => e.len() + 1,
            Bins::Categories(c) => c.len(),
        }
    }

    /// Size of the index space including the missing bin.
    pub fn index_space(&self) -> usize {
        self.n_bins() + 1
    }

    pub fn is_ordinal(&self) -> bool {
        matches!(self.bins, Bins::Edges(_))
    }

    pub fn bin_of_value(&self, v: f64) -> u32 {
        match &self.bins {
            Bins::Edges(edges) => 1 + edges.partition_point(|&e| e < v) as u32,
            Bins::Categories(_) => self.bin_of_key(&format!("{v}")),
        }
    }

    pub fn bin_of_key(&self, key: &str) -> u32 {
        match &self.bins {
            Bins::Edges(_) => key.trim().parse::<f64>().map_or(MISSING_BIN, |v| self.bin_of_value(v)),
            Bins::Categories(cats) => cats
                .binary_search_by(|c| c.as_str().cmp(key))
                .map_or(MISSING_BIN, |p| p as u32 + 1),
        }
    }

    /// Human-readable label for a bin index.
    pub fn label(&self, index: usize) -> String {
        if index == 0 {
            return "missing".to_string();
        }
        match &self.bins {
            Bins::Categories(c) => c[index - 1].clone(),
            Bins::Edges(_) => {
                let (lo, hi) = self.interval(index);
                if index == 1 {
                    format!("[{lo}, {hi}]")
                } else {
                    format!("({lo}, {hi}]")
                }
            }
        }
    }

    /// Interval covered by a continuous bin, bounded by the observed range.
    pub fn interval(&self, index: usize) -> (f64, f64) {
        let Bins::Edges(e) = &self.bins else {
            return (index as f64 - 0.5, index as f64 + 0.5);
        };
        let (min, max) = self.range.unwrap_or((
            e.first().copied().unwrap_or(0.0),
            e.last().copied().unwrap_or(0.0),
        ));
        let lo = if index <= 1 { min } else { e[index - 2] };
        let hi = if index > e.len() { max } else { e[index - 1] };
        (lo, hi)
    }

    pub fn midpoint(&self, index: usize) -> f64 {
        let (lo, hi) = self.interval(index);
        0.5 * (lo + hi)
    }
}

pub fn fit_bins(
    column: &Column,
    schema: &FeatureSchema,
    max_bins: usize,
    min_samples_per_bin: usize,
) -> Result<BinMap> {
    if max_bins == 0 {
        return Err(Error::Config("max_bins must be at least 1".into()));
    }
    let n_present = column.len() - column.n_missing();
    if n_present == 0 {
        return Err(Error::AllMissing(schema.name.clone()));
    }
    if n_present < min_samples_per_bin {
        return Err(Error::TooFewSamples {
            feature: schema.name.clone(),
            found: n_present,
            required: min_samples_per_bin,
        });
    }
    match schema.kind {
        FeatureKind::Categorical | FeatureKind::Binary => {
            let cats: BTreeSet<String> =
                (0..column.len()).filter_map(|i| column.category_key(i)).collect();
            Ok(BinMap {
                feature: schema.name.clone(),
                kind: schema.kind,
                bins: Bins::Categories(cats.into_iter().collect()),
                range: None,
            })
        }
        FeatureKind::Continuous => {
            let numeric = column.to_numeric(&schema.name)?;
            let Column::Numeric(cells) = numeric else { unreachable!() };
            let mut sorted: Vec<f64> = cells.into_iter().flatten().collect();
            sorted.sort_by(f64::total_cmp);
            let edges = quantile_edges(&sorted, max_bins, min_samples_per_bin);
            Ok(BinMap {
                feature: schema.name.clone(),
                kind: schema.kind,
                bins: Bins::Edges(edges),
                range: Some((sorted[0], sorted[sorted.len() - 1])),
            })
        }
    }
}

fn quantile_edges(sorted: &[f64], max_bins: usize, min_samples: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (1..max_bins)
        .map(|k| quantile_linear(sorted, k as f64 / max_bins as f64))
        .collect();
    edges.dedup();
    // A bin above the largest value would stay empty.
    while edges.last().is_some_and(|&e| e >= sorted[sorted.len() - 1]) {
        edges.pop();
    }
    let mut counts = bin_counts(sorted, &edges);
    // Merge the smallest underfull bin into its smaller neighbour until every bin
    // meets the floor.
    while counts.len() > 1 {
        let Some((b, _)) = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c < min_samples)
            .min_by_key(|(i, &c)| (c, *i))
        else {
            break;
        };
        let merge_left = match (b.checked_sub(1), (b + 1 < counts.len()).then_some(b + 1)) {
            (Some(l), Some(r)) => counts[l] <= counts[r],
            (Some(_), None) => true,
            _ => false,
        };
        let (left, right) = if merge_left { (b - 1, b) } else { (b, b + 1) };
        counts[left] += counts[right];
        counts.remove(right);
        edges.remove(left);
    }
    edges
}

fn bin_counts(sorted: &[f64], edges: &[f64]) -> Vec<usize> {
    let mut counts = vec![0usize; edges.len() + 1];
    for &v in sorted {
        counts[edges.partition_point(|&e| e < v)] += 1;
    }
    counts
}

/// Maps a column onto bin indices. Missing and unseen values map to bin 0.
pub fn transform(column: &Column, binmap: &BinMap) -> Vec<u32> {
    match column {
        Column::Numeric(cells) => cells
            .iter()
            .map(|c| c.map_or(MISSING_BIN, |v| binmap.bin_of_value(v)))
            .collect(),
        Column::Text(cells) => cells
            .iter()
            .map(|c| c.as_deref().map_or(MISSING_BIN, |k| binmap.bin_of_key(k)))
            .collect(),
    }
}

/// Row-major matrix of bin indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    n_samples: usize,
    n_features: usize,
    indices: Vec<u32>,
    index_space: Vec<usize>,
}

impl BinnedMatrix {
    pub fn from_columns(columns: &[Vec<u32>], index_space: Vec<usize>) -> Result<BinnedMatrix> {
        let n_features = columns.len();
        if index_space.len() != n_features {
            return Err(Error::Dimension("index space per feature".into()));
        }
        let n_samples = columns.first().map_or(0, Vec::len);
        let mut indices = vec![0u32; n_samples * n_features];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n_samples {
                return Err(Error::Dimension("columns differ in length".into()));
            }
            for (i, &b) in col.iter().enumerate() {
                if b as usize >= index_space[j] {
                    return Err(Error::IndexOutOfRange {
                        index: b as usize,
                        size: index_space[j],
                    });
                }
                indices[i * n_features + j] = b;
            }
        }
        Ok(BinnedMatrix {
            n_samples,
            n_features,
            indices,
            index_space,
        })
    }

    pub fn from_table_columns(columns: &[&Column], maps: &[BinMap]) -> Result<BinnedMatrix> {
        let cols: Vec<Vec<u32>> = columns.iter().zip(maps).map(|(c, m)| transform(c, m)).collect();
        BinnedMatrix::from_columns(&cols, maps.iter().map(BinMap::index_space).collect())
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn index_space(&self) -> &[usize] {
        &self.index_space
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> usize {
        self.indices[row * self.n_features + feature] as usize
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.indices[row * self.n_features..(row + 1) * self.n_features]
    }

    pub fn select_rows(&self, rows: &[usize]) -> BinnedMatrix {
        let mut indices = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            indices.extend_from_slice(self.row(r));
        }
        BinnedMatrix {
            n_samples: rows.len(),
            n_features: self.n_features,
            indices,
            index_space: self.index_space.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn continuous(name: &str) -> FeatureSchema {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Continuous,
        }
    }

    fn numeric(values: &[f64]) -> Column {
        Column::Numeric(values.iter().map(|&v| Some(v)).collect())
    }

    // Independent order-statistic quantile: walk the sorted list by position.
    fn brute_quantile(values: &[f64], p: f64) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let pos = p * (v.len() - 1) as f64;
        let below = v[pos as usize];
        let above = v.get(pos as usize + 1).copied().unwrap_or(below);
        below + pos.fract() * (above - below)
    }

    #[test]
    fn uniform_quartile_edges() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let expected: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|&p| brute_quantile(&values, p)).collect();
        assert_eq!(expected, vec![25.75, 50.5, 75.25]);
        let map = fit_bins(&numeric(&values), &continuous("x"), 4, 1).unwrap();
        assert_eq!(map.bins, Bins::Edges(expected));
        assert_eq!(map.n_bins(), 4);
        assert_eq!(map.index_space(), 5);
    }

    #[test]
    fn categorical_one_bin_per_value() {
        let col = Column::from_tokens(&["B", "A", "C", "A", ""]);
        let schema = FeatureSchema {
            name: "c".into(),
            kind: FeatureKind::Categorical,
        };
        let map = fit_bins(&col, &schema, 32, 1).unwrap();
        assert_eq!(map.n_bins(), 3);
        assert_eq!(map.index_space(), 4);
        assert_eq!(transform(&col, &map), vec![2, 1, 3, 1, 0]);
    }

    #[test]
    fn constant_column_single_bin() {
        let map = fit_bins(&numeric(&[5.0; 20]), &continuous("k"), 32, 1).unwrap();
        assert_eq!(map.n_bins(), 1);
        assert_eq!(transform(&numeric(&[5.0, 4.0, 6.0]), &map), vec![1, 1, 1]);
    }

    #[test]
    fn transform_edge_cases() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let map = fit_bins(&numeric(&values), &continuous("x"), 4, 1).unwrap();
        let col = Column::Numeric(vec![None, Some(-10.0), Some(25.75), Some(25.76), Some(1e9)]);
        assert_eq!(transform(&col, &map), vec![0, 1, 1, 2, 4]);
    }

    #[test]
    fn unseen_category_maps_to_missing() {
        let col = Column::from_tokens(&["A", "B", "C"]);
        let schema = FeatureSchema {
            name: "c".into(),
            kind: FeatureKind::Categorical,
        };
        let map = fit_bins(&col, &schema, 32, 1).unwrap();
        assert_eq!(transform(&Column::from_tokens(&["Z", "C"]), &map), vec![0, 3]);
    }

    #[test]
    fn too_few_samples_is_error() {
        let col = Column::Numeric(vec![Some(1.0), None, Some(2.0)]);
        assert!(matches!(
            fit_bins(&col, &continuous("x"), 32, 3),
            Err(Error::TooFewSamples { found: 2, .. })
        ));
    }

    #[test]
    fn default_min_samples() {
        assert_eq!(default_min_samples_per_bin(100), 1);
        assert_eq!(default_min_samples_per_bin(1234), 13);
        assert_eq!(default_min_samples_per_bin(100_000), 50);
    }

    #[test]
    fn heavy_ties_are_merged_to_floor() {
        let mut values = vec![0.0; 80];
        values.extend((1..=20).map(f64::from));
        let map = fit_bins(&numeric(&values), &continuous("x"), 10, 5).unwrap();
        let idx = transform(&numeric(&values), &map);
        let mut counts = vec![0; map.index_space()];
        for b in idx {
            counts[b as usize] += 1;
        }
        assert!(counts[1..].iter().all(|&c| c >= 5), "{counts:?}");
    }

    proptest! {
        #[test]
        fn binning_invariants(
            values in proptest::collection::vec(prop_oneof![Just(None), (-50i32..50).prop_map(|v| Some(v as f64 / 4.0))], 30..200),
            max_bins in 1usize..40,
            min_samples in 1usize..12,
        ) {
            let col = Column::Numeric(values.clone());
            let present = values.iter().flatten().count();
            prop_assume!(present >= min_samples);
            let map = fit_bins(&col, &continuous("x"), max_bins, min_samples).unwrap();
            let Bins::Edges(edges) = &map.bins else { unreachable!() };
            prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(map.n_bins() >= 1 && map.n_bins() <= max_bins);
            let idx = transform(&col, &map);
            let mut counts = vec![0usize; map.index_space()];
            for (&b, v) in idx.iter().zip(&values) {
                prop_assert!((b as usize) < map.index_space());
                prop_assert_eq!(b == 0, v.is_none());
                counts[b as usize] += 1;
            }
            prop_assert!(counts[1..].iter().all(|&c| c >= min_samples));
            let mut pairs: Vec<(f64, u32)> = values.iter().zip(&idx).filter_map(|(v, &b)| v.map(|v| (v, b))).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }
}
