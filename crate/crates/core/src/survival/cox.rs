use serde::{Deserialize, Serialize};

use super::labels::SurvivalLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxOptions {
    /// Convergence threshold on the Euclidean norm of the score.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        CoxOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Proportional-hazards fit with a Breslow baseline cumulative hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub coefficients: Vec<f64>,
    /// Covariate means; the baseline refers to centered covariates.
    pub means: Vec<f64>,
    /// Distinct event times and the cumulative hazard after each.
    pub times: Vec<f64>,
    pub cumulative_hazard: Vec<f64>,
    pub iterations: usize,
    pub score_norm: f64,
}

impl CoxFit {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.means)
            .zip(&self.coefficients)
            .map(|((v, m), b)| (v - m) * b)
            .sum()
    }

    /// Baseline cumulative hazard `Λ0(t)`.
    pub fn baseline(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative_hazard[k - 1]
        }
    }

    fn baseline_left(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            0.0
        } else {
            self.cumulative_hazard[k - 1]
        }
    }

    /// `exp(-Λ0(t) exp(x β))`.
    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        (-self.baseline(t) * self.linear_predictor(x).exp()).exp()
    }

    pub fn survival_left(&self, x: &[f64], t: f64) -> f64 {
        (-self.baseline_left(t) * self.linear_predictor(x).exp()).exp()
    }
}

/// Breslow partial log-likelihood, score and negated Hessian at `beta`.
/// `order` sorts samples by descending time.
fn partial_likelihood(
    x: &[Vec<f64>],
    labels: &[SurvivalLabel],
    order: &[usize],
    beta: &[f64],
) -> (f64, Vec<f64>, Vec<f64>) {
    let p = beta.len();
    let mut loglik = 0.0;
    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let eta: Vec<f64> = x.iter().map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let mut i = 0;
    while i < order.len() {
        let t = labels[order[i]].time;
        let start = i;
        while i < order.len() && labels[order[i]].time == t {
            let r = order[i];
            let w = eta[r].exp();
            s0 += w;
            for a in 0..p {
                s1[a] += w * x[r][a];
                for b in 0..p {
                    s2[a * p + b] += w * x[r][a] * x[r][b];
                }
            }
            i += 1;
        }
        let events: Vec<usize> = order[start..i].iter().copied().filter(|&r| labels[r].event).collect();
        if events.is_empty() {
            continue;
        }
        let d = events.len() as f64;
        loglik -= d * s0.ln();
        for &r in &events {
            loglik += eta[r];
            for a in 0..p {
                score[a] += x[r][a];
            }
        }
        for a in 0..p {
            let ma = s1[a] / s0;
            score[a] -= d * ma;
            for b in 0..p {
                info[a * p + b] += d * (s2[a * p + b] / s0 - ma * s1[b] / s0);
            }
        }
    }
    (loglik, score, info)
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 1e-12 * scale {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

/// Maximizes the Breslow partial likelihood by damped Newton iterations.
///
/// Zero-variance covariates carry no information and get coefficient 0; any
/// other singular information matrix is reported as rank deficiency.
pub fn cox_fit(x: &[Vec<f64>], labels: &[SurvivalLabel], opts: CoxOptions) -> Result<CoxFit> {
    if x.len() != labels.len() {
        return Err(Error::Dimension("covariate rows vs labels".into()));
    }
    if !labels.iter().any(|l| l.event) {
        return Err(Error::NoEvents);
    }
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("covariates must be finite with equal row lengths".into()));
    }
    let n = x.len() as f64;
    let means: Vec<f64> = (0..p).map(|a| x.iter().map(|r| r[a]).sum::<f64>() / n).collect();
    let varying: Vec<usize> = (0..p)
        .filter(|&a| x.iter().any(|r| (r[a] - means[a]).abs() > 1e-12 * (1.0 + means[a].abs())))
        .collect();
    let xc: Vec<Vec<f64>> = x
        .iter()
        .map(|r| varying.iter().map(|&a| r[a] - means[a]).collect())
        .collect();
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| labels[b].time.total_cmp(&labels[a].time));

    let q = varying.len();
    let mut beta = vec![0.0; q];
    let (mut loglik, mut score, mut info) = partial_likelihood(&xc, labels, &order, &beta);
    let mut iterations = 0;
    let norm = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>().sqrt();
    while norm(&score) >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence(opts.max_iter));
        }
        iterations += 1;
        let step = cholesky_solve(&info, &score).ok_or(Error::RankDeficient)?;
        let mut scale = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let (l, s, i) = partial_likelihood(&xc, labels, &order, &cand);
            if l.is_finite() && (l >= loglik - 1e-12 * loglik.abs() || scale < 1e-10) {
                beta = cand;
                loglik = l;
                score = s;
                info = i;
                break;
            }
            scale *= 0.5;
        }
    }

    let mut coefficients = vec![0.0; p];
    for (k, &a) in varying.iter().enumerate() {
        coefficients[a] = beta[k];
    }
    // Breslow: Λ0(t) = sum_{t_i <= t} d_i / sum_{j in R(t_i)} exp(x_j β).
    let risk: Vec<f64> = xc
        .iter()
        .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp())
        .collect();
    let mut by_time: Vec<usize> = (0..labels.len()).collect();
    by_time.sort_by(|&a, &b| labels[a].time.total_cmp(&labels[b].time));
    let mut remaining: f64 = risk.iter().sum();
    let mut times = Vec::new();
    let mut cumulative_hazard = Vec::new();
    let mut cum = 0.0;
    let mut i = 0;
    while i < by_time.len() {
        let t = labels[by_time[i]].time;
        let mut d = 0.0;
        let mut leaving = 0.0;
        while i < by_time.len() && labels[by_time[i]].time == t {
            d += f64::from(u8::from(labels[by_time[i]].event));
            leaving += risk[by_time[i]];
            i += 1;
        }
        if d > 0.0 {
            cum += d / remaining;
            times.push(t);
            cumulative_hazard.push(cum);
        }
        remaining -= leaving;
    }
    Ok(CoxFit {
        coefficients,
        means,
        times,
        cumulative_hazard,
        iterations,
        score_norm: norm(&score),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lab(event: bool, time: f64) -> SurvivalLabel {
        SurvivalLabel { event, time }
    }

    #[test]
    fn constant_covariate_gives_zero() {
        let x = vec![vec![2.0]; 5];
        let labels = vec![lab(true, 1.0), lab(false, 2.0), lab(true, 3.0), lab(true, 4.0), lab(false, 5.0)];
        let fit = cox_fit(&x, &labels, CoxOptions::default()).unwrap();
        assert_eq!(fit.coefficients, vec![0.0]);
    }

    #[test]
    fn collinear_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a: f64 = rng.random();
                vec![a, 2.0 * a]
            })
            .collect();
        let labels: Vec<_> = (0..40).map(|i| lab(i % 3 != 0, 1.0 + i as f64)).collect();
        assert!(matches!(cox_fit(&x, &labels, CoxOptions::default()), Err(Error::RankDeficient)));
    }

    #[test]
    fn no_events() {
        assert!(matches!(
            cox_fit(&[vec![1.0]], &[lab(false, 1.0)], CoxOptions::default()),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn score_vanishes_and_information_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random::<f64>(), rng.random_range(-1.0..1.0)]).collect();
        let labels: Vec<_> = x
            .iter()
            .map(|r| {
                let rate = (0.8 * r[0] - 0.5 * r[1]).exp();
                let t = -rng.random::<f64>().ln() / rate;
                let c = -rng.random::<f64>().ln() * 2.0;
                lab(t <= c, t.min(c))
            })
            .collect();
        let fit = cox_fit(&x, &labels, CoxOptions::default()).unwrap();
        assert!(fit.score_norm < 1e-8);
        let xc: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] - fit.means[0], r[1] - fit.means[1]]).collect();
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by(|&a, &b| labels[b].time.total_cmp(&labels[a].time));
        let (_, score, info) = partial_likelihood(&xc, &labels, &order, &fit.coefficients);
        assert!(score.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8);
        // Information = -Hessian must be PSD: diagonal and determinant non-negative.
        assert!(info[0] >= 0.0 && info[3] >= 0.0 && info[0] * info[3] - info[1] * info[2] >= 0.0);
    }

    #[test]
    fn zero_coefficients_match_nelson_aalen() {
        let labels = vec![lab(true, 1.0), lab(false, 2.0), lab(true, 3.0), lab(true, 3.0), lab(false, 4.0)];
        let x = vec![vec![1.0]; 5];
        let fit = cox_fit(&x, &labels, CoxOptions::default()).unwrap();
        let na3 = 1.0 / 5.0 + 2.0 / 3.0;
        assert!((fit.baseline(3.0) - na3).abs() < 1e-15);
        assert!((fit.survival(&[1.0], 3.5) - (-na3).exp()).abs() < 1e-15);
        assert!((fit.survival_left(&[1.0], 3.0) - (-0.2f64).exp()).abs() < 1e-15);
    }
}
