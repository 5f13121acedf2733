use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// Layer widths of a fully connected network `sizes[0] -> ... -> sizes[last]`.
///
/// Parameters are stored per layer as a row-major `out x in` weight block
/// followed by the `out` biases. The last layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub sizes: Vec<usize>,
    pub activation: Activation,
}

/// Activations kept for the backward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub n: usize,
    pub acts: Vec<Vec<T>>,
}

impl<T> MlpCache<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpShape {
    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of layer `l`'s weight block inside the parameter vector.
    fn layer_offset(&self, l: usize) -> usize {
        self.sizes[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Layers uniform in `±1/sqrt(fan_in)`, except a zero output layer when `zero_output`.
    pub fn init<T: Scalar, R: Rng>(&self, rng: &mut R, out: &mut [T], zero_output: bool) {
        let mut k = 0;
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let n = fan_in * fan_out + fan_out;
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut out[k..k + n] {
                *p = if zero_output && l + 1 == self.n_layers() {
                    T::zero()
                } else {
                    T::of(rng.random_range(-bound..bound))
                };
            }
            k += n;
        }
    }

    pub fn forward<T: Scalar>(&self, params: &[T], input: Vec<T>, n: usize) -> MlpCache<T> {
        debug_assert_eq!(input.len(), n * self.input_dim());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input);
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.layer_offset(l);
            let w = &params[off..off + fan_in * fan_out];
            let b = &params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let last = l + 1 == self.n_layers();
            let x = &acts[l];
            let mut y = vec![T::zero(); n * fan_out];
            for r in 0..n {
                let xr = &x[r * fan_in..(r + 1) * fan_in];
                for (o, yo) in y[r * fan_out..(r + 1) * fan_out].iter_mut().enumerate() {
                    let wo = &w[o * fan_in..(o + 1) * fan_in];
                    let mut acc = b[o];
                    for (&wi, &xi) in wo.iter().zip(xr) {
                        acc += wi * xi;
                    }
                    *yo = if last { acc } else { self.activation.apply(acc) };
                }
            }
            acts.push(y);
        }
        MlpCache { n, acts }
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        cache: &MlpCache<T>,
        d_out: &[T],
        grad: &mut [T],
    ) -> Vec<T> {
        let n = cache.n;
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.layer_offset(l);
            let w = &params[off..off + fan_in * fan_out];
            let x = &cache.acts[l];
            {
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for r in 0..n {
                    let xr = &x[r * fan_in..(r + 1) * fan_in];
                    for o in 0..fan_out {
                        let d = delta[r * fan_out + o];
                        if d == T::zero() {
                            continue;
                        }
                        gb[o] += d;
                        for (g, &xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(xr) {
                            *g += d * xi;
                        }
                    }
                }
            }
            let mut d_in = vec![T::zero(); n * fan_in];
            for r in 0..n {
                let di = &mut d_in[r * fan_in..(r + 1) * fan_in];
                for o in 0..fan_out {
                    let d = delta[r * fan_out + o];
                    if d == T::zero() {
                        continue;
                    }
                    for (g, &wi) in di.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *g += d * wi;
                    }
                }
            }
            if l > 0 {
                for (g, &y) in d_in.iter_mut().zip(x) {
                    *g *= self.activation.slope_from_output(y);
                }
            }
            delta = d_in;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_output_layer_gives_zero() {
        let shape = MlpShape {
            sizes: vec![3, 5, 2],
            activation: Activation::Relu,
        };
        let mut p = vec![0.0f64; shape.n_params()];
        shape.init(&mut ChaCha8Rng::seed_from_u64(1), &mut p, true);
        let c = shape.forward(&p, vec![0.3, -1.0, 2.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(c.output(), &[0.0; 4]);
    }

    #[test]
    fn identity_single_hidden_is_affine() {
        let shape = MlpShape {
            sizes: vec![2, 1, 1],
            activation: Activation::Identity,
        };
        // w1 = [2, -1], b1 = 0.5, w2 = [3], b2 = 1
        let p = vec![2.0, -1.0, 0.5, 3.0, 1.0];
        let c = shape.forward(&p, vec![1.0, 4.0], 1);
        assert_eq!(c.output(), &[3.0 * (2.0 - 4.0 + 0.5) + 1.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Identity] {
            let shape = MlpShape {
                sizes: vec![3, 4, 2],
                activation: act,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let p: Vec<f64> = (0..shape.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dout = vec![0.3, -0.7, 1.1, 0.2];
            let f = |p: &[f64], x: &[f64]| -> f64 {
                let c = shape.forward(p, x.to_vec(), 2);
                c.output().iter().zip(&dout).map(|(a, b)| a * b).sum()
            };
            let cache = shape.forward(&p, x.clone(), 2);
            let mut g = vec![0.0; p.len()];
            let dx = shape.backward(&p, &cache, &dout, &mut g);
            let h = 1e-6;
            for k in 0..p.len() {
                let mut a = p.clone();
                let mut b = p.clone();
                a[k] += h;
                b[k] -= h;
                let fd = (f(&a, &x) - f(&b, &x)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7, "param {k}: {fd} vs {}", g[k]);
            }
            for k in 0..x.len() {
                let mut a = x.clone();
                let mut b = x.clone();
                a[k] += h;
                b[k] -= h;
                let fd = (f(&p, &a) - f(&p, &b)) / (2.0 * h);
                assert!((fd - dx[k]).abs() < 1e-7);
            }
        }
    }
}
