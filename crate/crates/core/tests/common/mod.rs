#![allow(dead_code)]

use namlite::data::{Column, Table};
use namlite::survival::SurvivalLabel;
use namlite::train::{Dataset, Labels};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn table(names: &[String], cols: Vec<Vec<f64>>) -> Table {
    Table::new(
        names.to_vec(),
        cols.into_iter()
            .map(|c| Column::Numeric(c.into_iter().map(|v| (!v.is_nan()).then_some(v)).collect()))
            .collect(),
    )
    .unwrap()
}

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn truth_sin(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x).sin()
}

pub fn truth_step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn truth_linear(x: f64) -> f64 {
    0.5 * x
}

/// `y = sin(2 pi x1) + 1{x2 > 0} + 0.5 x3 + N(0, 0.1)` plus `noise` pure-noise columns.
pub struct Additive {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
}

pub fn additive(n: usize, noise: usize, seed: u64) -> Additive {
    let mut r = rng(seed);
    let x: Vec<Vec<f64>> = (0..3 + noise).map(|_| uniform(&mut r, n)).collect();
    let eps = Normal::new(0.0, 0.1).unwrap();
    let y = (0..n)
        .map(|i| truth_sin(x[0][i]) + truth_step(x[1][i]) + truth_linear(x[2][i]) + eps.sample(&mut r))
        .collect();
    Additive {
        x,
        y,
        names: names("x", 3 + noise),
    }
}

impl Additive {
    pub fn dataset(&self) -> Dataset {
        Dataset::new(table(&self.names, self.x.clone()), Labels::Regression(self.y.clone())).unwrap()
    }

    pub fn features(&self) -> Table {
        table(&self.names, self.x.clone())
    }
}

/// Five informative features among `p`: the three additive terms plus
/// `x4^2 - 1/3` and `0.5 cos(pi x5)`.
pub fn sparse_regression(n: usize, p: usize, seed: u64) -> Additive {
    let mut r = rng(seed);
    let x: Vec<Vec<f64>> = (0..p).map(|_| uniform(&mut r, n)).collect();
    let eps = Normal::new(0.0, 0.1).unwrap();
    let y = (0..n)
        .map(|i| {
            truth_sin(x[0][i])
                + truth_step(x[1][i])
                + truth_linear(x[2][i])
                + (x[3][i] * x[3][i] - 1.0 / 3.0)
                + 0.5 * (std::f64::consts::PI * x[4][i]).cos()
                + eps.sample(&mut r)
        })
        .collect();
    Additive {
        x,
        y,
        names: names("x", p),
    }
}

pub struct Binary {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
}

impl Binary {
    pub fn dataset(&self) -> Dataset {
        Dataset::new(table(&self.names, self.x.clone()), Labels::Classification(self.y.clone())).unwrap()
    }

    pub fn features(&self) -> Table {
        table(&self.names, self.x.clone())
    }
}

/// XOR of the signs of the last two columns, labels flipped with probability 0.05;
/// the first `noise` columns carry no signal.
pub fn xor(n: usize, noise: usize, seed: u64) -> Binary {
    let mut r = rng(seed);
    let x: Vec<Vec<f64>> = (0..noise + 2).map(|_| uniform(&mut r, n)).collect();
    let (a, b) = (noise, noise + 1);
    let y = (0..n)
        .map(|i| {
            let clean = (x[a][i] > 0.0) ^ (x[b][i] > 0.0);
            let flip = r.random::<f64>() < 0.05;
            f64::from(u8::from(clean ^ flip))
        })
        .collect();
    let mut names = names("noise", noise);
    names.extend(["x1".to_string(), "x2".to_string()]);
    Binary { x, y, names }
}

fn bernoulli_logit(r: &mut ChaCha8Rng, eta: f64) -> f64 {
    let p = 1.0 / (1.0 + (-eta).exp());
    f64::from(u8::from(r.random::<f64>() < p))
}

/// Logistic truth increasing in x1, decreasing in x2, plus one free feature.
pub fn monotone(n: usize, seed: u64) -> Binary {
    let mut r = rng(seed);
    let x: Vec<Vec<f64>> = (0..3).map(|_| uniform(&mut r, n)).collect();
    let y = (0..n)
        .map(|i| {
            let eta = 2.0 * x[0][i] + (2.0 * x[0][i]).powi(3) / 4.0 - 2.0 * x[1][i] + truth_sin(x[2][i] / 2.0);
            bernoulli_logit(&mut r, eta)
        })
        .collect();
    Binary {
        x,
        y,
        names: names("x", 3),
    }
}

/// Classification where x1 is missing for 30% of rows, more often for positives,
/// and `p - 1` other columns each have 10% values missing completely at random.
pub fn informative_missing(n: usize, p: usize, seed: u64) -> Binary {
    let mut r = rng(seed);
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| uniform(&mut r, n)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| bernoulli_logit(&mut r, 0.6 * x[0][i] + 1.5 * x[1][i] - 1.0 * x[2][i]))
        .collect();
    for i in 0..n {
        let p_missing = if y[i] > 0.5 { 0.5 } else { 0.1 };
        if r.random::<f64>() < p_missing {
            x[0][i] = f64::NAN;
        }
        for col in x.iter_mut().skip(1) {
            if r.random::<f64>() < 0.1 {
                col[i] = f64::NAN;
            }
        }
    }
    Binary {
        x,
        y,
        names: names("x", p),
    }
}

/// Log-logistic survival data with `P(T <= t | x) = 1 / (1 + (t / scale(x))^-1.5)`,
/// `scale(x) = exp(-(0.8 x1 + 0.5 sin(pi x2)))`, and independent exponential censoring.
/// The CDF is a sigmoid of a function additive in x at every t.
pub struct Survival {
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<SurvivalLabel>,
    pub names: Vec<String>,
}

pub const SURVIVAL_SHAPE: f64 = 1.5;

pub fn survival_scale(x1: f64, x2: f64) -> f64 {
    (-(0.8 * x1 + 0.5 * (std::f64::consts::PI * x2).sin())).exp()
}

pub fn true_cdf(x1: f64, x2: f64, t: f64) -> f64 {
    1.0 / (1.0 + (t / survival_scale(x1, x2)).powf(-SURVIVAL_SHAPE))
}

pub fn survival(n: usize, seed: u64) -> Survival {
    let mut r = rng(seed);
    let x: Vec<Vec<f64>> = (0..3).map(|_| uniform(&mut r, n)).collect();
    let labels = (0..n)
        .map(|i| {
            let u: f64 = r.random_range(1e-12..1.0 - 1e-12);
            let t = survival_scale(x[0][i], x[1][i]) * (u / (1.0 - u)).powf(1.0 / SURVIVAL_SHAPE);
            let c = -r.random_range(1e-12..1.0f64).ln() / 0.3;
            SurvivalLabel::new(t <= c, t.min(c)).unwrap()
        })
        .collect();
    Survival {
        x,
        labels,
        names: names("x", 3),
    }
}

impl Survival {
    pub fn dataset(&self) -> Dataset {
        Dataset::new(table(&self.names, self.x.clone()), Labels::Survival(self.labels.clone())).unwrap()
    }

    pub fn features(&self) -> Table {
        table(&self.names, self.x.clone())
    }
}
