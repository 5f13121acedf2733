use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gaussian neighbourhood smoothing over ordinal bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Kernel variance; 0 disables smoothing.
    pub phi: f64,
    /// Neighbourhood half-width in bins.
    pub size: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { phi: 3.0, size: 5 }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi >= 0.0) || !self.phi.is_finite() {
            return Err(Error::Config(format!("kernel weight must be >= 0, got {}", self.phi)));
        }
        Ok(())
    }
}

/// Weights for offsets `-size..=size`, stored at position `offset + size`.
pub fn kernel_weights<T: Scalar>(size: usize, phi: f64) -> Vec<T> {
    (0..=2 * size)
        .map(|p| {
            let o = p as f64 - size as f64;
            if phi > 0.0 {
                T::of((-(o * o) / (2.0 * phi)).exp())
            } else if o == 0.0 {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Neighbours of `index` along one axis with index space `space` (= n_bins + 1).
///
/// The missing bin is never smoothed and never used as a neighbour; offsets
/// falling outside `1..=n_bins` are dropped.
pub(crate) fn axis_neighbors<T: Scalar>(
    index: usize,
    space: usize,
    weights: &[T],
    ordinal: bool,
) -> Vec<(usize, T)> {
    if index == 0 || !ordinal {
        return vec![(index, T::one())];
    }
    let size = (weights.len() - 1) / 2;
    let lo = index.saturating_sub(size).max(1);
    let hi = (index + size).min(space - 1);
    (lo..=hi)
        .filter_map(|n| {
            let w = weights[n + size - index];
            (w != T::zero()).then_some((n, w))
        })
        .collect()
}

/// Flat neighbour list for a cell of a 1-D or 2-D index space (row-major).
pub(crate) fn cell_neighbors<T: Scalar>(
    cell: usize,
    axes: &[usize],
    ordinal: &[bool],
    weights: &[T],
) -> Vec<(usize, T)> {
    match axes {
        [space] => axis_neighbors(cell, *space, weights, ordinal[0]),
        [a, b] => {
            let (ia, ib) = (cell / b, cell % b);
            let na = axis_neighbors(ia, *a, weights, ordinal[0]);
            let nb = axis_neighbors(ib, *b, weights, ordinal[1]);
            let mut out = Vec::with_capacity(na.len() * nb.len());
            for &(ra, wa) in &na {
                for &(rb, wb) in &nb {
                    out.push((ra * b + rb, wa * wb));
                }
            }
            out
        }
        _ => unreachable!("terms have one or two axes"),
    }
}

/// Per-feature embedding matrix with one row per bin index (row 0 = missing).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(rows: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Dimension(format!(
                "embedding data has {} entries, expected {rows}x{dim}",
                data.len()
            )));
        }
        Ok(EmbeddingTable { rows, dim, data })
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }
}

fn weighted_sum<T: Scalar>(data: &[T], dim: usize, neighbors: &[(usize, T)]) -> Vec<T> {
    let mut out = vec![T::zero(); dim];
    for &(r, w) in neighbors {
        for (o, &e) in out.iter_mut().zip(&data[r * dim..(r + 1) * dim]) {
            *o += w * e;
        }
    }
    out
}

/// Kernel-smoothed embedding of bin `index` of an ordinal feature.
pub fn smoothed_embedding<T: Scalar>(
    table: &EmbeddingTable<T>,
    index: usize,
    cfg: &KernelConfig,
) -> Result<Vec<T>> {
    if index >= table.rows {
        return Err(Error::IndexOutOfRange {
            index,
            size: table.rows,
        });
    }
    let w = kernel_weights::<T>(cfg.size, cfg.phi);
    let nb = axis_neighbors(index, table.rows, &w, true);
    Ok(weighted_sum(&table.data, table.dim, &nb))
}

/// Kernel-smoothed embedding of cell `(ia, ib)` of a pair table laid out row-major
/// over `space_a x space_b` rows.
pub fn pair_smoothed_embedding<T: Scalar>(
    table: &EmbeddingTable<T>,
    (space_a, space_b): (usize, usize),
    (ia, ib): (usize, usize),
    cfg: &KernelConfig,
) -> Result<Vec<T>> {
    if space_a * space_b != table.rows {
        return Err(Error::Dimension("pair table rows".into()));
    }
    if ia >= space_a || ib >= space_b {
        return Err(Error::IndexOutOfRange {
            index: ia.max(ib),
            size: space_a.min(space_b),
        });
    }
    let w = kernel_weights::<T>(cfg.size, cfg.phi);
    let nb = cell_neighbors(ia * space_b + ib, &[space_a, space_b], &[true, true], &w);
    Ok(weighted_sum(&table.data, table.dim, &nb))
}
