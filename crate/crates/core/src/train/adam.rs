use crate::nn::{AdditiveModel, Gradients};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
    m_mu: T,
    v_mu: T,
    steps: i32,
}

/// Adaptive moment estimation over the parameters of an [`AdditiveModel`].
///
/// Each term keeps its own step count, so terms that sit out some steps
/// (pruned or frozen) get correct bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    state: Vec<Option<Moments<T>>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Adam<T> {
        Adam {
            lr: T::of(lr),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            state: Vec::new(),
        }
    }

    pub fn step(&mut self, model: &mut AdditiveModel<T>, grads: &Gradients<T>) {
        if self.state.len() < model.terms.len() {
            self.state.resize(model.terms.len(), None);
        }
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((term, g), st) in model.terms.iter_mut().zip(&grads.terms).zip(&mut self.state) {
            let Some(g) = g else { continue };
            let st = st.get_or_insert_with(|| Moments {
                m: vec![T::zero(); g.params.len()],
                v: vec![T::zero(); g.params.len()],
                m_mu: T::zero(),
                v_mu: T::zero(),
                steps: 0,
            });
            st.steps += 1;
            let c1 = T::one() - b1.powi(st.steps);
            let c2 = T::one() - b2.powi(st.steps);
            let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            for (((p, m), v), &gi) in term.params.iter_mut().zip(&mut st.m).zip(&mut st.v).zip(&g.params) {
                update(p, m, v, gi);
            }
            if term.gate.trainable {
                update(&mut term.gate.mu, &mut st.m_mu, &mut st.v_mu, g.mu);
            }
        }
    }
}
