mod common;

use namlite::data::BinnedMatrix;
use namlite::explain::{
    feature_importance, pair_shape_function, render_svg, shape_function, Export, ImportanceMode, PlotKind, SvgOptions,
};
use namlite::nn::{Activation, AdditiveModel, Architecture, Gate, KernelConfig, TermKey};
use namlite::train::{fit, History, SingleSplitModel, TrainConfig};
use namlite::{Ensemble, Error, Task};

use common::*;

/// Main term whose output on bin b is `values[b]`: one-dimensional embeddings
/// through an identity network.
fn identity_term(model: &mut AdditiveModel<f64>, column: usize, values: [f64; 3]) {
    let t = model
        .add_term(TermKey::Main(column), vec![3], vec![false], 0, Gate::open(), &mut rng(0))
        .unwrap();
    let mut params = values.to_vec();
    params.extend([1.0, 0.0, 1.0, 0.0]);
    assert_eq!(params.len(), model.terms[t].params.len());
    model.terms[t].params = params;
}

/// Three binary features with hand-set shapes of height 1, 0.5 and 0.25,
/// centered on four samples split evenly between the two bins.
fn hand_ensemble() -> Ensemble {
    let mut r = rng(3);
    let x: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..40).map(|_| f64::from(rand::Rng::random_range(&mut r, 0..2u8))).collect())
        .collect();
    let y: Vec<f64> = (0..40).map(|i| x[0][i]).collect();
    let data = namlite::train::Dataset::new(
        table(&names("x", 3), x),
        namlite::train::Labels::Regression(y),
    )
    .unwrap();
    let cfg = TrainConfig {
        max_epochs: 1,
        n_val_splits: 2,
        ..TrainConfig::default()
    };
    let (mut ens, _) = fit::<f64>(&data, &cfg).unwrap();
    assert!(ens.bin_maps.iter().all(|m| m.index_space() == 3));
    let arch = Architecture {
        embedding_dim: 1,
        hidden: vec![1],
        activation: Activation::Identity,
        out_dim: 1,
        kernel: KernelConfig { phi: 0.0, size: 1 },
    };
    let binned = BinnedMatrix::from_columns(&vec![vec![1, 1, 2, 2]; 3], vec![3; 3]).unwrap();
    for split in &mut ens.splits {
        let mut model = AdditiveModel::new(Task::Regression, arch.clone()).unwrap();
        for (j, h) in [1.0, 0.5, 0.25].into_iter().enumerate() {
            identity_term(&mut model, j, [0.0, h, -h]);
        }
        *split = SingleSplitModel::finalize(model, &binned, &[0, 1, 2, 3], History::default(), None);
    }
    ens
}

#[test]
fn hand_computed_importance() {
    let ens = hand_ensemble();
    let report = feature_importance(&ens, ImportanceMode::Include).unwrap();
    assert_eq!(report.order(), ["x1", "x2", "x3"]);
    assert_eq!(report.get("x1").unwrap().score.mean, 1.0);
    assert_eq!(report.get("x2").unwrap().score.mean, 0.5);
    assert_eq!(report.get("x3").unwrap().score.se, 0.0);
}

#[test]
fn closed_gate_scores_zero() {
    let mut ens = hand_ensemble();
    for split in &mut ens.splits {
        split.model.terms[0].gate = Gate {
            mu: -1.0,
            gamma: 1.0,
            trainable: false,
        };
    }
    let report = feature_importance(&ens, ImportanceMode::Include).unwrap();
    assert_eq!(report.get("x1").unwrap().score.mean, 0.0);
    assert_eq!(report.order()[2], "x1");
}

#[test]
fn centered_shape_export() {
    let ens = hand_ensemble();
    let shape = shape_function(&ens, "x2", true, &[]).unwrap();
    let means: Vec<f64> = shape.blocks[0].bins.iter().map(|b| b.mean).collect();
    assert_eq!(means, [0.0, 0.5, -0.5]);
    assert_eq!(shape.blocks[0].bins[1].per_split.len(), 2);
    let observed = shape_function(&ens, "x2", false, &[]).unwrap();
    assert_eq!(observed.blocks[0].bins.len(), 2);

    let mut csv = Vec::new();
    shape.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with(&format!("# model_hash: {}\n", ens.hash().unwrap())));
    assert!(text.contains("eval_time,index,label,lower,upper,mean,se,split_0,split_1\n"));
}

#[test]
fn lookup_errors() {
    let ens = hand_ensemble();
    assert!(matches!(shape_function(&ens, "nope", false, &[]), Err(Error::UnknownFeature(_))));
    assert!(matches!(
        pair_shape_function(&ens, "x1", "x2", None),
        Err(Error::PairNotSelected(..))
    ));
    assert!(matches!("average".parse::<ImportanceMode>(), Err(Error::Config(_))));
}

#[test]
fn importance_svg_matches_golden() {
    let ens = hand_ensemble();
    let report = feature_importance(&ens, ImportanceMode::Include).unwrap();
    let svg = render_svg(Export::Importance(&report), PlotKind::ImportanceBars, &SvgOptions::default()).unwrap();
    assert_eq!(svg.matches(r#"class="bar""#).count(), 3);
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/importance.svg");
    if std::env::var_os("NAMLITE_BLESS").is_some() {
        std::fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, std::fs::read_to_string(golden).unwrap());
    let again = render_svg(Export::Importance(&report), PlotKind::ImportanceBars, &SvgOptions::default()).unwrap();
    assert_eq!(svg, again);
}

#[test]
fn svg_rejects_mismatched_kind() {
    let ens = hand_ensemble();
    let report = feature_importance(&ens, ImportanceMode::Include).unwrap();
    assert!(render_svg(Export::Importance(&report), PlotKind::PairHeatmap, &SvgOptions::default()).is_err());
    let shape = shape_function(&ens, "x1", false, &[]).unwrap();
    let svg = render_svg(Export::Shape(&shape), PlotKind::ShapeCategoryBars, &SvgOptions::default()).unwrap();
    assert_eq!(svg.matches(r#"class="bar""#).count(), 2);
}

#[test]
fn survival_exports_one_block_per_time() {
    let data = survival(600, 4);
    let cfg = TrainConfig {
        max_epochs: 3,
        n_val_splits: 2,
        n_eval_times: Some(4),
        ..TrainConfig::for_task(Task::Survival)
    };
    let (ens, _) = fit::<f64>(&data.dataset(), &cfg).unwrap();
    let times = ens.eval_times.clone().unwrap();
    assert_eq!(times.len(), 4);
    let all = shape_function(&ens, "x1", false, &[]).unwrap();
    assert_eq!(all.blocks.len(), 4);
    let one = shape_function(&ens, "x1", false, &[times[2] + 1e-9]).unwrap();
    assert_eq!(one.blocks.len(), 1);
    assert_eq!(one.blocks[0].eval_time, Some(times[2]));
    assert_eq!(one.blocks[0].bins, all.blocks[2].bins);
    let cal = namlite::explain::calibration(&ens, &data.features(), &data.labels, &[], 5).unwrap();
    assert_eq!(cal.blocks[0].eval_time, times[2]);
    assert_eq!(cal.blocks[0].points.iter().map(|p| p.n).sum::<usize>(), 600);
}
