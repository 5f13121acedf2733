use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;
use namlite::data::Table;
use namlite::explain::{
    calibration, feature_importance, feature_importance_on, pair_shape_function, render_svg, shape_function, Export,
    ImportanceMode, PlotKind, SvgOptions,
};
use namlite::metrics::{auc, r2, rmse};
use namlite::selection::{regularization_path, select_features};
use namlite::survival::{CensorEstimator, CensorModel};
use namlite::train::{fit, loss_ipcw, prepare, Labels, LabelColumns};
use namlite::{Ensemble, Task};
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::ConfigError;

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<Ensemble> {
    Ensemble::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn read_table(path: &Path) -> anyhow::Result<Table> {
    Table::from_path(path).with_context(|| format!("reading {}", path.display()))
}

/// Test-set metrics of a fitted ensemble.
fn test_metrics(model: &Ensemble, cfg: &RunConfig, path: &Path) -> anyhow::Result<serde_json::Value> {
    let data = cfg.dataset(path)?;
    let pred = model.predict(&data.features)?;
    Ok(match &data.labels {
        Labels::Regression(y) => json!({ "n": y.len(), "rmse": rmse(&pred, y), "r2": r2(&pred, y) }),
        Labels::Classification(y) => json!({ "n": y.len(), "auc": auc(&pred, y)? }),
        Labels::Survival(labels) => {
            let times = model.eval_times.clone().unwrap_or_default();
            let censor = CensorModel::fit(CensorEstimator::KaplanMeier, labels, None)?;
            json!({ "n": labels.len(), "ipcw_loss": loss_ipcw(&pred, labels, &times, &censor)? })
        }
    })
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<()> {
    let data = cfg.dataset(&cfg.train_data)?;
    let (model, report) = fit::<f64>(&data, &cfg.model)?;
    cfg.create_output_dir()?;
    let model_path = cfg.output_dir.join("model.json");
    model.save(&model_path)?;
    let mut metrics = json!({
        "model_hash": model.hash()?,
        "task": cfg.model.task,
        "n_train": data.n_samples(),
        "selected_feats": model.selected_feats,
        "selected_pairs": model.selected_pairs,
        "validation": {
            "loss_per_split": report.best_val_loss,
            "mean_loss": report.mean_val_loss(),
        },
        "ipcw_clamped": report.ipcw_clamped,
        "selection": report.selection,
        "pair_ranking": report.pair_ranking,
        "config": cfg,
    });
    if let Some(test) = &cfg.test_data {
        metrics["test"] = test_metrics(&model, cfg, test)?;
    }
    write_text(&cfg.output_dir.join("metrics.json"), &serde_json::to_string_pretty(&metrics)?)?;
    println!("model: {}", model_path.display());
    println!("validation loss (mean over {} splits): {:.6}", report.best_val_loss.len(), report.mean_val_loss());
    if let Some(test) = metrics.get("test") {
        println!("test: {test}");
    }
    Ok(())
}

fn prediction_header(model: &Ensemble) -> Vec<String> {
    match (model.task, &model.eval_times) {
        (Task::Survival, Some(times)) => times.iter().map(|t| format!("cdf_{t}")).collect(),
        (Task::Classification, _) => vec!["probability".into()],
        _ => vec!["prediction".into()],
    }
}

pub fn predict(model_path: &Path, data: &Path, out: &Path) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let table = read_table(data)?;
    let pred = model.predict(&table)?;
    let header = prediction_header(&model);
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(&header)?;
    for row in pred.chunks(header.len()) {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    info!("wrote {} predictions to {}", table.n_rows(), out.display());
    Ok(())
}

pub fn select(cfg: &RunConfig) -> anyhow::Result<()> {
    let reg = cfg
        .model
        .selection
        .reg_param
        .ok_or_else(|| ConfigError("select needs model.selection.reg_param".into()))?;
    let data = cfg.dataset(&cfg.train_data)?;
    let prepared = prepare::<f64>(&data, &cfg.model)?;
    let result = select_features(&prepared, &cfg.model, reg)?;
    cfg.create_output_dir()?;
    write_text(&cfg.output_dir.join("selection.json"), &serde_json::to_string_pretty(&result)?)?;
    println!("selected {} features: {}", result.selected_feats.len(), result.selected_feats.join(", "));
    if !result.selected_pairs.is_empty() {
        let pairs: Vec<String> = result.selected_pairs.iter().map(|(a, b)| format!("{a} x {b}")).collect();
        println!("selected {} pairs: {}", pairs.len(), pairs.join(", "));
    }
    Ok(())
}

pub fn path(cfg: &RunConfig, init_reg_param: f64) -> anyhow::Result<()> {
    let data = cfg.dataset(&cfg.train_data)?;
    let prepared = prepare::<f64>(&data, &cfg.model)?;
    let path = regularization_path(&prepared, &cfg.model, init_reg_param)?;
    cfg.create_output_dir()?;
    path.write_csv(create(&cfg.output_dir.join("path.csv"))?)?;
    write_text(&cfg.output_dir.join("path_feats.json"), &path.feats_json()?)?;
    for r in &path.records {
        println!(
            "reg_param {:.4e}  features {:>3}  val_loss {:.6}  {} {:.6}",
            r.reg_param,
            r.num_feats,
            r.val_loss,
            cfg.model.task.score_name(),
            r.val_score
        );
    }
    Ok(())
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn write_svg(dir: Option<&Path>, name: &str, export: Export<'_>, kind: PlotKind, opts: &SvgOptions) -> anyhow::Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        write_text(&dir.join(format!("{name}.svg")), &render_svg(export, kind, opts)?)?;
    }
    Ok(())
}

pub struct ExplainArgs {
    pub model: PathBuf,
    pub out_dir: PathBuf,
    pub importance: bool,
    pub mode: ImportanceMode,
    pub data: Option<PathBuf>,
    pub shapes: Vec<String>,
    pub include_missing: bool,
    pub pairs: Vec<String>,
    pub eval_times: Vec<f64>,
    pub svg_dir: Option<PathBuf>,
    pub top_n: usize,
}

pub fn explain(args: &ExplainArgs) -> anyhow::Result<()> {
    let model = load_model(&args.model)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let svg_dir = args.svg_dir.as_deref();
    let opts = SvgOptions {
        top_n: args.top_n,
        ..SvgOptions::default()
    };
    if args.importance {
        let report = match &args.data {
            Some(path) => {
                let mut r = feature_importance_on(&model, &model.bin_table(&read_table(path)?)?, args.mode)?;
                r.metadata.importance_data = Some(path.display().to_string());
                r
            }
            None => feature_importance(&model, args.mode)?,
        };
        report.write_csv(create(&args.out_dir.join("importance.csv"))?)?;
        write_text(&args.out_dir.join("importance.json"), &report.to_json()?)?;
        write_svg(svg_dir, "importance", Export::Importance(&report), PlotKind::ImportanceBars, &opts)?;
        for t in &report.terms {
            match t.missing {
                Some(m) => println!("{:<24} {:.6} +/- {:.6}  missing {:.6}", t.name, t.score.mean, t.score.ci_half_width(), m.mean),
                None => println!("{:<24} {:.6} +/- {:.6}", t.name, t.score.mean, t.score.ci_half_width()),
            }
        }
    }
    for feature in &args.shapes {
        let export = shape_function(&model, feature, args.include_missing, &args.eval_times)?;
        let stem = format!("shape_{}", file_stem(feature));
        export.write_csv(create(&args.out_dir.join(format!("{stem}.csv")))?)?;
        write_text(&args.out_dir.join(format!("{stem}.json")), &export.to_json()?)?;
        let kind = if export.kind.is_ordinal() {
            PlotKind::ShapeLine
        } else {
            PlotKind::ShapeCategoryBars
        };
        for block in 0..export.blocks.len() {
            let name = if export.blocks.len() == 1 {
                stem.clone()
            } else {
                format!("{stem}_t{block}")
            };
            let opts = SvgOptions { block, ..opts.clone() };
            write_svg(svg_dir, &name, Export::Shape(&export), kind, &opts)?;
        }
    }
    for pair in args.pairs.chunks(2) {
        let [a, b] = pair else {
            return Err(ConfigError("--pair takes two feature names".into()).into());
        };
        let export = pair_shape_function(&model, a, b, args.eval_times.first().copied())?;
        let stem = format!("pair_{}__{}", file_stem(a), file_stem(b));
        export.write_csv(create(&args.out_dir.join(format!("{stem}.csv")))?)?;
        write_text(&args.out_dir.join(format!("{stem}.json")), &export.to_json()?)?;
        write_svg(svg_dir, &stem, Export::Pair(&export), PlotKind::PairHeatmap, &opts)?;
    }
    Ok(())
}

pub struct CalibrateArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub time: String,
    pub event: String,
    pub eval_times: Vec<f64>,
    pub bins: usize,
    pub out: PathBuf,
    pub svg: Option<PathBuf>,
}

pub fn calibrate(args: &CalibrateArgs) -> anyhow::Result<()> {
    let model = load_model(&args.model)?;
    if model.task != Task::Survival {
        return Err(ConfigError("calibrate needs a survival model".into()).into());
    }
    let table = read_table(&args.data)?;
    let cols = LabelColumns {
        target: None,
        time: Some(args.time.clone()),
        event: Some(args.event.clone()),
    };
    let Labels::Survival(labels) = Labels::from_table(&table, Task::Survival, &cols)? else {
        unreachable!("survival labels requested");
    };
    let export = calibration(&model, &table, &labels, &args.eval_times, args.bins)?;
    export.write_csv(create(&args.out)?)?;
    if let Some(svg) = &args.svg {
        let text = render_svg(Export::Calibration(&export), PlotKind::Calibration, &SvgOptions::default())?;
        write_text(svg, &text)?;
    }
    for block in &export.blocks {
        for p in &block.points {
            println!(
                "t={:<10} bin {:>2}  n {:>6}  predicted {:.4}  observed {:.4}",
                block.eval_time, p.bin, p.n, p.mean_pred, p.km_cdf
            );
        }
    }
    Ok(())
}
