//! Importances, shape-function and pair-surface exports, calibration tables
//! and SVG rendering for fitted ensembles.

mod importance;
mod shape;
mod svg;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use importance::{feature_importance, feature_importance_on, ImportanceMode, ImportanceReport, TermImportance};
pub use shape::{
    calibration, pair_shape_function, shape_function, CalibrationBlock, CalibrationExport, PairShapeExport,
    ShapeBin, ShapeBlock, ShapeFunctionExport,
};
pub use svg::{render_svg, Export, PlotKind, SvgOptions};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::task::Task;
use crate::train::EnsembleModel;

/// Half-width multiplier of the reported confidence intervals.
pub const CI_Z: f64 = 1.96;

/// Mean across splits with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
}

impl Summary {
    pub fn ci_half_width(&self) -> f64 {
        CI_Z * self.se
    }
}

/// Mean and `sd / sqrt(k)` with the k-1 denominator; a single value has zero error.
pub fn mean_se(values: &[f64]) -> Summary {
    let k = values.len();
    if k == 0 {
        return Summary { mean: 0.0, se: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return Summary { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    Summary {
        mean,
        se: (var / k as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportMetadata {
    pub model_hash: String,
    pub task: Task,
    pub n_splits: usize,
    pub mode: Option<ImportanceMode>,
    pub eval_times: Option<Vec<f64>>,
    pub interval: String,
    pub importance_data: Option<String>,
}

impl ExportMetadata {
    pub fn new<T: Scalar>(ensemble: &EnsembleModel<T>) -> Result<Self> {
        Ok(ExportMetadata {
            model_hash: ensemble.hash()?,
            task: ensemble.task,
            n_splits: ensemble.n_splits(),
            mode: None,
            eval_times: None,
            interval: format!("mean +/- {CI_Z} * sd / sqrt(k) across k splits"),
            importance_data: None,
        })
    }

    fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# model_hash: {}", self.model_hash)?;
        writeln!(w, "# task: {}", serde_json::to_value(self.task)?.as_str().unwrap_or_default())?;
        writeln!(w, "# n_splits: {}", self.n_splits)?;
        if let Some(mode) = self.mode {
            writeln!(w, "# mode: {mode}")?;
        }
        if let Some(times) = &self.eval_times {
            let t: Vec<String> = times.iter().map(f64::to_string).collect();
            writeln!(w, "# eval_times: {}", t.join(" "))?;
        }
        writeln!(w, "# interval: {}", self.interval)?;
        if let Some(d) = &self.importance_data {
            writeln!(w, "# importance_data: {d}")?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn csv_body<W: Write>(mut w: W, meta: &ExportMetadata, rows: Vec<Vec<String>>) -> Result<()> {
    meta.write_header(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.write_record(&r)?;
    }
    out.flush()?;
    Ok(())
}

macro_rules! json_export {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn to_json(&self) -> Result<String> {
                Ok(serde_json::to_string_pretty(self)?)
            }
        }
    )*};
}

json_export!(ImportanceReport, ShapeFunctionExport, PairShapeExport, CalibrationExport);

impl ImportanceReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let stratify = self.mode == ImportanceMode::Stratify;
        let mut header = vec!["term", "score", "se"];
        if stratify {
            header.extend(["missing_score", "missing_se"]);
        }
        let mut rows = vec![header.into_iter().map(String::from).collect()];
        for t in &self.terms {
            let mut row = vec![t.name.clone(), t.score.mean.to_string(), t.score.se.to_string()];
            if let Some(m) = t.missing {
                row.extend([m.mean.to_string(), m.se.to_string()]);
            }
            rows.push(row);
        }
        csv_body(w, &self.metadata, rows)
    }
}

impl ShapeFunctionExport {
    pub fn n_splits(&self) -> usize {
        self.metadata.n_splits
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header: Vec<String> = ["eval_time", "index", "label", "lower", "upper", "mean", "se"]
            .into_iter()
            .map(String::from)
            .collect();
        header.extend((0..self.n_splits()).map(|s| format!("split_{s}")));
        let mut rows = vec![header];
        for block in &self.blocks {
            for b in &block.bins {
                let mut row = vec![
                    opt(block.eval_time),
                    b.index.to_string(),
                    b.label.clone(),
                    opt(b.interval.map(|i| i.0)),
                    opt(b.interval.map(|i| i.1)),
                    b.mean.to_string(),
                    b.se.to_string(),
                ];
                row.extend(b.per_split.iter().map(f64::to_string));
                rows.push(row);
            }
        }
        csv_body(w, &self.metadata, rows)
    }
}

impl PairShapeExport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let header = ["index_a", "label_a", "index_b", "label_b", "mean", "se"];
        let mut rows = vec![header.into_iter().map(String::from).collect()];
        for (i, la) in self.labels_a.iter().enumerate() {
            for (j, lb) in self.labels_b.iter().enumerate() {
                rows.push(vec![
                    i.to_string(),
                    la.clone(),
                    j.to_string(),
                    lb.clone(),
                    self.mean[i][j].to_string(),
                    self.se[i][j].to_string(),
                ]);
            }
        }
        csv_body(w, &self.metadata, rows)
    }
}

impl CalibrationExport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let header = ["eval_time", "bin", "n", "mean_pred", "km_cdf"];
        let mut rows = vec![header.into_iter().map(String::from).collect()];
        for block in &self.blocks {
            for p in &block.points {
                rows.push(vec![
                    block.eval_time.to_string(),
                    p.bin.to_string(),
                    p.n.to_string(),
                    p.mean_pred.to_string(),
                    p.km_cdf.to_string(),
                ]);
            }
        }
        csv_body(w, &self.metadata, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_conventions() {
        assert_eq!(mean_se(&[2.5]), Summary { mean: 2.5, se: 0.0 });
        let s = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/3 / 4)
        assert!((s.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!((s.ci_half_width() - 1.96 * s.se).abs() < 1e-15);
    }
}
