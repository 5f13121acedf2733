use serde::{Deserialize, Serialize};

use super::km::kaplan_meier;
use super::labels::SurvivalLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub bin: usize,
    pub n: usize,
    pub mean_pred: f64,
    /// `1 - KM(t)` over the bin's samples.
    pub km_cdf: f64,
}

/// Groups samples into equal-count bins of predicted CDF at `t` and compares the
/// mean prediction against the bin's Kaplan–Meier CDF.
///
/// A boundary falling inside a run of tied predictions moves to the end of the
/// run, so a constant predictor yields a single bin.
pub fn calibration_table(
    pred: &[f64],
    labels: &[SurvivalLabel],
    t: f64,
    n_bins: usize,
) -> Result<Vec<CalibrationPoint>> {
    if n_bins < 2 {
        return Err(Error::Config("calibration needs at least 2 bins".into()));
    }
    if pred.len() != labels.len() || pred.is_empty() {
        return Err(Error::Dimension("predictions vs labels".into()));
    }
    if pred.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Data("predicted CDF values must lie in [0, 1]".into()));
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[a].total_cmp(&pred[b]).then(a.cmp(&b)));
    let n = order.len();
    let bins = n_bins.min(n);
    let (base, extra) = (n / bins, n % bins);
    let mut chunks: Vec<Vec<usize>> = Vec::with_capacity(bins);
    let (mut start, mut target) = (0, 0);
    for b in 0..bins {
        target += base + usize::from(b < extra);
        let mut end = target.max(start);
        while end < n && end > 0 && pred[order[end]] == pred[order[end - 1]] {
            end += 1;
        }
        if end > start {
            chunks.push(order[start..end].to_vec());
            start = end;
        }
    }
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(bin, rows)| {
            let sub: Vec<SurvivalLabel> = rows.iter().map(|&r| labels[r]).collect();
            let mean_pred = rows.iter().map(|&r| pred[r]).sum::<f64>() / rows.len() as f64;
            CalibrationPoint {
                bin,
                n: rows.len(),
                mean_pred,
                km_cdf: 1.0 - kaplan_meier(&sub).at(t),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(event: bool, time: f64) -> SurvivalLabel {
        SurvivalLabel { event, time }
    }

    #[test]
    fn hand_table_two_bins() {
        // Low bin {1, 3}: event at 2 with two at risk, KM(3) = 1/2.
        // High bin {2, 0}: event at 1 with two at risk, KM(3) = 1/2.
        let pred = [0.8, 0.1, 0.6, 0.3];
        let labels = [lab(true, 1.0), lab(true, 2.0), lab(false, 4.0), lab(false, 5.0)];
        let table = calibration_table(&pred, &labels, 3.0, 2).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table[0].n, 2);
        assert!((table[0].mean_pred - 0.2).abs() < 1e-15);
        assert!((table[0].km_cdf - 0.5).abs() < 1e-15);
        assert!((table[1].mean_pred - 0.7).abs() < 1e-15);
        assert!((table[1].km_cdf - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor_single_bin() {
        let labels = [lab(true, 1.0), lab(false, 2.0), lab(true, 3.0), lab(true, 4.0)];
        let table = calibration_table(&[0.4; 4], &labels, 3.5, 3).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].n, 4);
        // pooled KM(3.5) = (3/4) * (1/2)
        assert!((table[0].km_cdf - (1.0 - 0.375)).abs() < 1e-15);
    }

    #[test]
    fn bins_partition_with_balanced_sizes() {
        let pred: Vec<f64> = (0..23).map(|i| (i as f64 * 0.37).sin() * 0.4 + 0.5).collect();
        let labels: Vec<_> = (0..23).map(|i| lab(i % 2 == 0, 1.0 + i as f64)).collect();
        let table = calibration_table(&pred, &labels, 10.0, 5).unwrap();
        assert_eq!(table.iter().map(|p| p.n).sum::<usize>(), 23);
        let (mn, mx) = (table.iter().map(|p| p.n).min().unwrap(), table.iter().map(|p| p.n).max().unwrap());
        assert!(mx - mn <= 1);
    }

    #[test]
    fn rejects_bad_input() {
        let labels = [lab(true, 1.0)];
        assert!(calibration_table(&[0.5], &labels, 1.0, 1).is_err());
        assert!(calibration_table(&[1.5], &labels, 1.0, 2).is_err());
    }
}
