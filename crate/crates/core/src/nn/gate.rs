use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[inline]
pub(crate) fn step_value<T: Scalar>(mu: T, gamma: T) -> T {
    let half = gamma * T::of(0.5);
    if mu <= -half {
        T::zero()
    } else if mu >= half {
        T::one()
    } else {
        -T::of(2.0) / (gamma * gamma * gamma) * mu * mu * mu + T::of(1.5) / gamma * mu + T::of(0.5)
    }
}

#[inline]
pub(crate) fn step_grad<T: Scalar>(mu: T, gamma: T) -> T {
    let half = gamma * T::of(0.5);
    if mu <= -half || mu >= half {
        T::zero()
    } else {
        -T::of(6.0) / (gamma * gamma * gamma) * mu * mu + T::of(1.5) / gamma
    }
}

/// Cubic smooth-step: exactly 0 below `-gamma/2`, exactly 1 above `gamma/2`, C¹.
pub fn smooth_step<T: Scalar>(mu: T, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::NonPositiveGamma(gamma.as_f64()));
    }
    Ok(step_value(mu, gamma))
}

/// Derivative of [`smooth_step`] with respect to `mu`.
pub fn smooth_step_grad<T: Scalar>(mu: T, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::NonPositiveGamma(gamma.as_f64()));
    }
    Ok(step_grad(mu, gamma))
}

/// A feature or pair gate `s(mu; gamma)`.
///
/// Fixed gates are held open at exactly 1 and never receive gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate<T> {
    pub mu: T,
    pub gamma: T,
    pub trainable: bool,
}

impl<T: Scalar> Gate<T> {
    /// Learnable gate starting at `mu = gamma / 4`, where `s ≈ 0.844` and the slope is nonzero.
    pub fn learnable(gamma: T) -> Result<Gate<T>> {
        smooth_step(T::zero(), gamma)?;
        Ok(Gate {
            mu: gamma * T::of(0.25),
            gamma,
            trainable: true,
        })
    }

    /// Gate held at exactly 1.
    pub fn open() -> Gate<T> {
        Gate {
            mu: T::one(),
            gamma: T::one(),
            trainable: false,
        }
    }

    #[inline]
    pub fn value(&self) -> T {
        step_value(self.mu, self.gamma)
    }

    #[inline]
    pub fn slope(&self) -> T {
        if self.trainable {
            step_grad(self.mu, self.gamma)
        } else {
            T::zero()
        }
    }

    /// True once the gate sits in the exact-zero region.
    pub fn is_closed(&self) -> bool {
        self.value() == T::zero()
    }

    /// Freezes the gate at its current value.
    pub fn freeze(&mut self) {
        self.trainable = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_center() {
        for gamma in [0.01, 1.0, 100.0] {
            assert_eq!(smooth_step(-gamma / 2.0, gamma).unwrap(), 0.0);
            assert_eq!(smooth_step(0.0, gamma).unwrap(), 0.5);
            assert_eq!(smooth_step(gamma / 2.0, gamma).unwrap(), 1.0);
        }
    }

    #[test]
    fn quarter_point() {
        // -2/64 + 3/8 + 1/2
        for gamma in [0.01f64, 0.3, 1.0, 7.0, 100.0] {
            let v = smooth_step(gamma / 4.0, gamma).unwrap();
            assert!((v - 0.84375).abs() < 1e-12, "{gamma}: {v}");
        }
    }

    #[test]
    fn gradient_values() {
        for gamma in [0.5f64, 2.0] {
            assert!((smooth_step_grad(0.0, gamma).unwrap() - 1.5 / gamma).abs() < 1e-15);
            assert_eq!(smooth_step_grad(gamma / 2.0, gamma).unwrap(), 0.0);
            assert_eq!(smooth_step_grad(-gamma / 2.0, gamma).unwrap(), 0.0);
            assert_eq!(smooth_step_grad(gamma, gamma).unwrap(), 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let gamma = 1.3f64;
        let h = 1e-6;
        for k in -20..=20 {
            let mu = k as f64 * 0.031 + 0.0007;
            if (mu.abs() - gamma / 2.0).abs() < 1e-3 {
                continue;
            }
            let fd = (step_value(mu + h, gamma) - step_value(mu - h, gamma)) / (2.0 * h);
            let an = step_grad(mu, gamma);
            let rel = (fd - an).abs() / an.abs().max(1e-12);
            assert!(an == 0.0 && fd.abs() < 1e-9 || rel < 1e-6, "mu={mu}: {an} vs {fd}");
        }
    }

    #[test]
    fn rejects_bad_gamma() {
        assert!(smooth_step(0.1, 0.0).is_err());
        assert!(smooth_step_grad(0.1, -1.0).is_err());
        assert!(Gate::<f64>::learnable(0.0).is_err());
    }

    #[test]
    fn f32_agrees() {
        assert_eq!(smooth_step(0.25f32, 1.0f32).unwrap(), 0.84375);
    }

    proptest! {
        #[test]
        fn range_and_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0, gamma in 1e-3f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s_lo = step_value(lo, gamma);
            let s_hi = step_value(hi, gamma);
            prop_assert!((0.0..=1.0).contains(&s_lo));
            prop_assert!((0.0..=1.0).contains(&s_hi));
            prop_assert!(s_lo <= s_hi + 1e-15);
        }
    }
}
