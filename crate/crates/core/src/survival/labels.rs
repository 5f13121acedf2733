use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed times are clipped to at least this value.
pub const MIN_TIME: f64 = 1e-5;

/// Observed outcome `(δ, Z)` with `Z = min(C, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalLabel {
    pub event: bool,
    pub time: f64,
}

impl SurvivalLabel {
    pub fn new(event: bool, time: f64) -> Result<SurvivalLabel> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::Data(format!("survival time must be finite and non-negative, got {time}")));
        }
        Ok(SurvivalLabel {
            event,
            time: time.max(MIN_TIME),
        })
    }
}

/// Strictly increasing positive evaluation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    times: Vec<f64>,
}

impl EvaluationGrid {
    pub fn new(times: Vec<f64>) -> Result<EvaluationGrid> {
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Data("evaluation times must be positive and finite".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data("evaluation times must be strictly increasing".into()));
        }
        Ok(EvaluationGrid { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid time closest to `t` (earlier on ties).
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &g) in self.times.iter().enumerate() {
            if (g - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }
}

/// `min(50, number of distinct uncensored times)`.
pub fn default_grid_size(labels: &[SurvivalLabel]) -> usize {
    let mut t: Vec<f64> = labels.iter().filter(|l| l.event).map(|l| l.time).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t.len().min(50)
}

/// Quantiles `k / (K + 1)`, `k = 1..=K`, of the uncensored times, using the
/// inverted empirical CDF so that every grid time is an observed event time.
pub fn eval_time_grid(labels: &[SurvivalLabel], k: usize) -> Result<EvaluationGrid> {
    let mut events: Vec<f64> = labels.iter().filter(|l| l.event).map(|l| l.time).collect();
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    if k == 0 {
        return Err(Error::Config("grid size must be positive".into()));
    }
    events.sort_by(f64::total_cmp);
    let n = events.len();
    let mut times: Vec<f64> = (1..=k)
        .map(|q| {
            let p = q as f64 / (k + 1) as f64;
            let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
            events[rank - 1]
        })
        .collect();
    times.dedup();
    EvaluationGrid::new(times)
}
