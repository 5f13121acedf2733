use serde::{Deserialize, Serialize};

use super::labels::SurvivalLabel;

/// Right-continuous nonincreasing step function with value 1 before the first jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvivalCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepSurvivalCurve {
    /// `S(t)`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit `S(t-)`.
    pub fn left_of(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Product-limit estimate `prod_{t_j <= t} (1 - d_j / n_j)` over distinct event times.
pub fn kaplan_meier(labels: &[SurvivalLabel]) -> StepSurvivalCurve {
    let mut order: Vec<&SurvivalLabel> = labels.iter().collect();
    order.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut at_risk = order.len();
    let mut s = 1.0;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = order[i].time;
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while i < order.len() && order[i].time == t {
            deaths += usize::from(order[i].event);
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            times.push(t);
            values.push(s);
        }
        at_risk -= leaving;
    }
    StepSurvivalCurve { times, values }
}

/// Flips event indicators, so the product-limit estimate targets `P(C > t)`.
pub(crate) fn flipped(labels: &[SurvivalLabel]) -> Vec<SurvivalLabel> {
    labels
        .iter()
        .map(|l| SurvivalLabel {
            event: !l.event,
            time: l.time,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(event: bool, time: f64) -> SurvivalLabel {
        SurvivalLabel { event, time }
    }

    /// Risk-set enumeration straight from the definition.
    fn brute(labels: &[SurvivalLabel], t: f64) -> f64 {
        let mut event_times: Vec<f64> = labels.iter().filter(|l| l.event && l.time <= t).map(|l| l.time).collect();
        event_times.sort_by(f64::total_cmp);
        event_times.dedup();
        event_times
            .iter()
            .map(|&u| {
                let d = labels.iter().filter(|l| l.event && l.time == u).count() as f64;
                let n = labels.iter().filter(|l| l.time >= u).count() as f64;
                1.0 - d / n
            })
            .product()
    }

    #[test]
    fn all_censored_is_flat() {
        let km = kaplan_meier(&[lab(false, 1.0), lab(false, 2.0)]);
        assert_eq!(km.at(0.5), 1.0);
        assert_eq!(km.at(10.0), 1.0);
    }

    #[test]
    fn three_events() {
        let km = kaplan_meier(&[lab(true, 1.0), lab(true, 2.0), lab(true, 3.0)]);
        assert!((km.at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.at(2.5) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.at(3.0), 0.0);
        assert_eq!(km.left_of(1.0), 1.0);
    }

    #[test]
    fn classic_toy() {
        let km = kaplan_meier(&[lab(true, 1.0), lab(false, 2.0), lab(true, 3.0)]);
        assert!((km.at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.at(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.at(3.0), 0.0);
    }

    #[test]
    fn exhaustive_small_patterns() {
        // Times with deliberate ties; every censoring pattern for n <= 6.
        let base = [2.0, 1.0, 3.0, 2.0, 5.0, 1.0];
        for n in 1..=base.len() {
            for mask in 0..(1u32 << n) {
                let labels: Vec<_> = (0..n).map(|i| lab(mask & (1 << i) != 0, base[i])).collect();
                let km = kaplan_meier(&labels);
                let mut prev = 1.0;
                for t in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0] {
                    let v = km.at(t);
                    assert!((v - brute(&labels, t)).abs() < 1e-14);
                    assert!(v <= prev + 1e-15);
                    prev = v;
                }
            }
        }
    }
}
