use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gate::Gate;
use super::kernel::{cell_neighbors, KernelConfig};
use super::mlp::{Activation, MlpCache, MlpShape};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which feature columns a term reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKey {
    Main(usize),
    Pair(usize, usize),
}

impl TermKey {
    pub fn features(&self) -> Vec<usize> {
        match *self {
            TermKey::Main(j) => vec![j],
            TermKey::Pair(a, b) => vec![a, b],
        }
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, TermKey::Pair(..))
    }
}

/// Hyperparameters shared by every term of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub out_dim: usize,
    pub kernel: KernelConfig,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            embedding_dim: 16,
            hidden: vec![32],
            activation: Activation::Relu,
            out_dim: 1,
            kernel: KernelConfig::default(),
        }
    }
}

impl Architecture {
    pub fn mlp(&self) -> MlpShape {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.embedding_dim);
        sizes.extend(&self.hidden);
        sizes.push(self.out_dim);
        MlpShape {
            sizes,
            activation: self.activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.out_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        self.kernel.validate()
    }
}

/// Monotone transform of per-bin raw outputs.
///
/// Bin 0 (missing) is emitted as `offset + raw[0]`; for `i >= 1` the output is
/// `offset ± sum_{m=1..=i} raw[m]^2`.
pub fn monotone_output<T: Scalar>(raw: &[T], direction: i8, offset: T) -> Result<Vec<T>> {
    if direction == 0 || direction.abs() != 1 {
        return Err(Error::Config(format!("monotone direction must be ±1, got {direction}")));
    }
    let sign = T::of(direction as f64);
    let mut out = Vec::with_capacity(raw.len());
    let mut acc = T::zero();
    for (i, &r) in raw.iter().enumerate() {
        if i == 0 {
            out.push(offset + r);
        } else {
            acc += r * r;
            out.push(offset + sign * acc);
        }
    }
    Ok(out)
}

/// One shape function: an embedding table, a subnetwork, a gate and an
/// optional monotone offset, all for a single feature or feature pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term<T> {
    pub key: TermKey,
    /// Index space (n_bins + 1) of each axis.
    pub axes: Vec<usize>,
    /// Whether each axis is smoothed across neighbouring bins.
    pub ordinal: Vec<bool>,
    pub monotone: i8,
    pub gate: Gate<T>,
    /// `[embedding rows | subnetwork | monotone offset]`, row-major.
    pub params: Vec<T>,
}

/// Outputs of a term on a set of cells, with everything needed to backpropagate.
#[derive(Debug, Clone)]
pub struct TermEval<T> {
    /// Sorted evaluated cells; `None` means every cell in order.
    cells: Option<Vec<usize>>,
    inputs: Vec<Vec<(usize, T)>>,
    cache: MlpCache<T>,
    raw: Vec<T>,
    pub out: Vec<T>,
    out_dim: usize,
}

impl<T: Scalar> TermEval<T> {
    #[inline]
    pub fn pos(&self, cell: usize) -> usize {
        match &self.cells {
            None => cell,
            Some(c) => c.binary_search(&cell).expect("cell was evaluated"),
        }
    }

    #[inline]
    pub fn output(&self, cell: usize) -> &[T] {
        let p = self.pos(cell);
        &self.out[p * self.out_dim..(p + 1) * self.out_dim]
    }

    pub fn n_cells(&self) -> usize {
        self.inputs.len()
    }
}

impl<T: Scalar> Term<T> {
    pub fn new<R: Rng>(
        key: TermKey,
        axes: Vec<usize>,
        ordinal: Vec<bool>,
        monotone: i8,
        gate: Gate<T>,
        arch: &Architecture,
        rng: &mut R,
    ) -> Result<Term<T>> {
        if axes.len() != key.features().len() || ordinal.len() != axes.len() {
            return Err(Error::Dimension("term axes".into()));
        }
        if axes.iter().any(|&a| a < 2) {
            return Err(Error::Dimension("every axis needs a missing bin and at least one bin".into()));
        }
        if monotone != 0 && (key.is_pair() || arch.out_dim != 1) {
            return Err(Error::UnsupportedMonotone);
        }
        if monotone.abs() > 1 {
            return Err(Error::Config(format!("monotone direction must be -1, 0 or 1, got {monotone}")));
        }
        let mut term = Term {
            key,
            axes,
            ordinal,
            monotone,
            gate,
            params: Vec::new(),
        };
        let n_emb = term.n_cells() * arch.embedding_dim;
        let mlp = arch.mlp();
        let mut params = vec![T::zero(); n_emb + mlp.n_params() + usize::from(monotone != 0)];
        let bound = 1.0 / (arch.embedding_dim as f64).sqrt();
        for p in &mut params[..n_emb] {
            *p = T::of(rng.random_range(-bound..bound));
        }
        // Squared increments have zero gradient at zero, so monotone terms start off-zero.
        mlp.init(rng, &mut params[n_emb..n_emb + mlp.n_params()], monotone == 0);
        term.params = params;
        Ok(term)
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().product()
    }

    /// Flattened cell index of a sample's bin indices.
    #[inline]
    pub fn cell_of(&self, bins: &[u32]) -> usize {
        match self.key {
            TermKey::Main(j) => bins[j] as usize,
            TermKey::Pair(a, b) => bins[a] as usize * self.axes[1] + bins[b] as usize,
        }
    }

    fn emb_len(&self, arch: &Architecture) -> usize {
        self.n_cells() * arch.embedding_dim
    }

    pub fn embeddings(&self, arch: &Architecture) -> &[T] {
        &self.params[..self.emb_len(arch)]
    }

    fn mlp_range(&self, arch: &Architecture) -> std::ops::Range<usize> {
        let s = self.emb_len(arch);
        s..s + arch.mlp().n_params()
    }

    pub fn offset(&self) -> Option<T> {
        (self.monotone != 0).then(|| *self.params.last().unwrap())
    }

    /// Evaluates every cell (required for monotone terms).
    pub fn eval_all(&self, arch: &Architecture, weights: &[T]) -> TermEval<T> {
        let cells: Vec<usize> = (0..self.n_cells()).collect();
        self.eval_inner(arch, weights, &cells, None)
    }

    /// Evaluates the given cells, which must be sorted and unique.
    pub fn eval_cells(&self, arch: &Architecture, weights: &[T], cells: Vec<usize>) -> TermEval<T> {
        if self.monotone != 0 || cells.len() == self.n_cells() {
            return self.eval_all(arch, weights);
        }
        self.eval_inner(arch, weights, &cells.clone(), Some(cells))
    }

    fn eval_inner(
        &self,
        arch: &Architecture,
        weights: &[T],
        cells: &[usize],
        stored: Option<Vec<usize>>,
    ) -> TermEval<T> {
        let d = arch.embedding_dim;
        let emb = self.embeddings(arch);
        let mut z = vec![T::zero(); cells.len() * d];
        let mut inputs = Vec::with_capacity(cells.len());
        for (k, &cell) in cells.iter().enumerate() {
            let nb = cell_neighbors(cell, &self.axes, &self.ordinal, weights);
            let zk = &mut z[k * d..(k + 1) * d];
            for &(r, w) in &nb {
                for (zi, &e) in zk.iter_mut().zip(&emb[r * d..(r + 1) * d]) {
                    *zi += w * e;
                }
            }
            inputs.push(nb);
        }
        let mlp = arch.mlp();
        let cache = mlp.forward(&self.params[self.mlp_range(arch)], z, cells.len());
        let raw = cache.output().to_vec();
        let out = match self.offset() {
            Some(o) => monotone_output(&raw, self.monotone, o).expect("validated direction"),
            None => raw.clone(),
        };
        TermEval {
            cells: stored,
            inputs,
            cache,
            raw,
            out,
            out_dim: arch.out_dim,
        }
    }

    /// Output vector for a single cell.
    pub fn output_at(&self, arch: &Architecture, weights: &[T], cell: usize) -> Vec<T> {
        let eval = if self.monotone != 0 {
            self.eval_all(arch, weights)
        } else {
            self.eval_cells(arch, weights, vec![cell])
        };
        eval.output(cell).to_vec()
    }

    /// Backpropagates `d_out` (cells x out_dim, aligned with `eval`) into `grad`.
    pub fn backward(&self, arch: &Architecture, eval: &TermEval<T>, d_out: &[T], grad: &mut [T]) {
        let d_raw = match self.offset() {
            None => d_out.to_vec(),
            Some(_) => {
                let sign = T::of(self.monotone as f64);
                let n = eval.n_cells();
                let mut d_raw = vec![T::zero(); n];
                *grad.last_mut().unwrap() += d_out.iter().copied().sum::<T>();
                d_raw[0] = d_out[0];
                let mut tail = T::zero();
                for m in (1..n).rev() {
                    tail += d_out[m];
                    d_raw[m] = sign * T::of(2.0) * eval.raw[m] * tail;
                }
                d_raw
            }
        };
        let mlp = arch.mlp();
        let range = self.mlp_range(arch);
        let dz = mlp.backward(&self.params[range.clone()], &eval.cache, &d_raw, &mut grad[range]);
        let d = arch.embedding_dim;
        for (k, nb) in eval.inputs.iter().enumerate() {
            let dzk = &dz[k * d..(k + 1) * d];
            if dzk.iter().all(|&v| v == T::zero()) {
                continue;
            }
            for &(r, w) in nb {
                for (g, &v) in grad[r * d..(r + 1) * d].iter_mut().zip(dzk) {
                    *g += w * v;
                }
            }
        }
    }
}
