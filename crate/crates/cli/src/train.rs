use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use diodeq::dataset::{split_indices, IvDataset, Split};
use diodeq::knn::{Knn, KnnConfig};
use diodeq::mlp::{self, EpochRecord, MlpConfig};
use diodeq::model::{fit_and_report, mse, r2_score, FitReport, Regressor, Scaled, Xy};
use diodeq::pipeline::{
    fig5_pipeline, gp_search, write_fitness_csv, GbtParams, GpConfig, PipelineRegressor,
};
use diodeq::qnn::{self, QnnConfig, QnnEpochRecord};
use diodeq::scaler::{ScalerKind, ScalerParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::failure::{CmdResult, Failure};
use crate::io::{merge_config, metadata, parse_config, with_metadata, OutDir};
use crate::model_file::{matrix_rows, ModelFile, SavedModel};
use crate::{seeds, Cli, ModelKind, TEST_FRACTION};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model kind; may also be given as `--model`.
    #[arg(value_enum)]
    pub kind: Option<ModelKind>,
    #[arg(long = "model", value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub input: PathBuf,
    /// Hyperparameters as inline JSON or a JSON file; flags below win.
    #[arg(long)]
    pub config: Option<String>,
    /// Neighbour count (knn, fig5).
    #[arg(long)]
    pub k: Option<usize>,
    /// Minkowski exponent (knn, fig5).
    #[arg(long)]
    pub p: Option<f64>,
    /// Training epochs (mlp, qnn).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// GP generations.
    #[arg(long)]
    pub generations: Option<usize>,
    /// GP population size.
    #[arg(long)]
    pub population: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct Fig5Config {
    gbt: GbtParams,
    knn: KnnConfig,
}

struct Trained {
    file: ModelFile,
    report: FitReport,
    history_csv: Option<Vec<u8>>,
    extra: Value,
}

fn set(patch: &mut Value, path: &[&str], v: Value) {
    let mut cur = patch;
    for key in &path[..path.len() - 1] {
        let obj = cur.as_object_mut().expect("config patch is an object");
        cur = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    cur.as_object_mut()
        .expect("config patch is an object")
        .insert(path[path.len() - 1].to_string(), v);
}

fn flag_patch(kind: ModelKind, a: &TrainArgs) -> CmdResult<Value> {
    let mut patch = parse_config(a.config.as_deref())?;
    let knn_prefix: &[&str] = match kind {
        ModelKind::Fig5 => &["knn"],
        _ => &[],
    };
    let mut used = Vec::new();
    if let Some(k) = a.k {
        used.push(("--k", matches!(kind, ModelKind::Knn | ModelKind::Fig5)));
        set(&mut patch, &[knn_prefix, &["k"]].concat(), json!(k));
    }
    if let Some(p) = a.p {
        used.push(("--p", matches!(kind, ModelKind::Knn | ModelKind::Fig5)));
        set(
            &mut patch,
            &[knn_prefix, &["metric"]].concat(),
            json!({ "kind": "minkowski", "p": p }),
        );
    }
    if let Some(e) = a.epochs {
        used.push(("--epochs", matches!(kind, ModelKind::Mlp | ModelKind::Qnn)));
        set(&mut patch, &["epochs"], json!(e));
    }
    if let Some(g) = a.generations {
        used.push(("--generations", kind == ModelKind::Gp));
        set(&mut patch, &["generations"], json!(g));
    }
    if let Some(p) = a.population {
        used.push(("--population", kind == ModelKind::Gp));
        set(&mut patch, &["population"], json!(p));
    }
    if let Some((flag, _)) = used.iter().find(|(_, ok)| !ok) {
        return Err(Failure::input_msg(format!(
            "{flag} does not apply to `train {}`",
            kind.name()
        )));
    }
    Ok(patch)
}

/// Scores a fitted model on both partitions.
fn evaluate(
    name: &str,
    hyperparameters: Value,
    model: &dyn Regressor,
    train: &Xy,
    test: &Xy,
    validation_mse: Option<f64>,
) -> CmdResult<FitReport> {
    let p_train = model.predict(&train.x)?;
    let p_test = model.predict(&test.x)?;
    Ok(FitReport {
        model: name.into(),
        hyperparameters,
        train_mse: mse(train.y.as_slice(), p_train.as_slice())?,
        test_mse: Some(mse(test.y.as_slice(), p_test.as_slice())?),
        validation_mse,
        r2: r2_score(test.y.as_slice(), p_test.as_slice()).ok(),
        wall_time_seconds: 0.0,
    })
}

/// Writes what a failed run managed to record, then returns the failure.
fn fail_with_history(
    out: &OutDir,
    cli: &Cli,
    kind: ModelKind,
    start: Instant,
    err: diodeq::Error,
    history: Value,
    csv: Vec<u8>,
) -> Failure {
    let failure = Failure::from(err);
    let written = out.write("history.csv", csv).and_then(|_| {
        let report = with_metadata(
            json!({
                "command": "train",
                "model": kind.name(),
                "status": "failed",
                "error": failure.to_string(),
                "history": history,
            }),
            metadata(start, cli.seed),
        )?;
        out.write_json("report.json", &report)
    });
    match written {
        Ok(_) => failure,
        Err(w) => w,
    }
}

fn train_knn(patch: &Value, tr: &Xy, te: &Xy, seed: u64) -> CmdResult<Trained> {
    let cfg: KnnConfig = merge_config(&KnnConfig::default(), patch)?;
    cfg.validate()?;
    let mut m = Scaled::new(ScalerKind::IqrRobust, Knn::new(cfg));
    let report = fit_and_report(&mut m, tr, Some(te), None)?;
    let saved = SavedModel::Knn {
        scaler: m.scaler.clone().ok_or(diodeq::Error::NotFitted)?,
        model: m.inner.model.clone().ok_or(diodeq::Error::NotFitted)?,
    };
    Ok(Trained {
        file: ModelFile::new("knn", tr.x.ncols(), seed, saved),
        report,
        history_csv: None,
        extra: json!({}),
    })
}

fn target_moments(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let sd = if y.len() > 1 {
        (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, if sd > 0.0 { sd } else { 1.0 })
}

fn train_mlp(
    cli: &Cli,
    out: &OutDir,
    start: Instant,
    patch: &Value,
    tr: &Xy,
    te: &Xy,
) -> CmdResult<Trained> {
    let mut cfg: MlpConfig = merge_config(&MlpConfig::default(), patch)?;
    cfg.seed = seeds::derive(cli.seed, seeds::MLP);
    cfg.validate()?;
    let scaler = ScalerParams::fit(ScalerKind::IqrRobust, &tr.x)?;
    let (m, sd) = target_moments(tr.y.as_slice());
    let scale = |d: &Xy| -> CmdResult<Xy> {
        Ok(Xy::new(scaler.transform(&d.x)?, d.y.map(|v| (v - m) / sd))?)
    };
    let (trs, tes) = (scale(tr)?, scale(te)?);
    let mut history: Vec<EpochRecord> = Vec::new();
    let outcome = match mlp::train_observed(&cfg, &trs, Some(&tes), &mut |r| history.push(*r)) {
        Ok(o) => o,
        Err(e) => {
            let mut csv = Vec::new();
            let _ = mlp::write_history_csv(&history, &mut csv);
            let h = serde_json::to_value(&history).unwrap_or_default();
            return Err(fail_with_history(out, cli, ModelKind::Mlp, start, e, h, csv));
        }
    };
    let mut csv = Vec::new();
    mlp::write_history_csv(&outcome.history, &mut csv).map_err(Failure::compute)?;
    let file = ModelFile::new(
        "mlp",
        tr.x.ncols(),
        cli.seed,
        SavedModel::Mlp {
            scaler,
            target: (m, sd),
            config: cfg.clone(),
            weights: outcome.weights,
        },
    );
    let reg = file.regressor()?;
    let hyper = serde_json::to_value(&cfg).map_err(Failure::compute)?;
    let report = evaluate("mlp", hyper, reg.as_ref(), tr, te, None)?;
    Ok(Trained {
        file,
        report,
        history_csv: Some(csv),
        extra: json!({ "history_units": "standardised targets" }),
    })
}

fn pipeline_file(name: &str, tree: &diodeq::pipeline::PipelineTree, tr: &Xy, seed: u64) -> ModelFile {
    ModelFile::new(
        name,
        tr.x.ncols(),
        seed,
        SavedModel::Pipeline {
            tree: tree.clone(),
            train_x: matrix_rows(&tr.x),
            train_y: tr.y.iter().copied().collect(),
        },
    )
}

fn train_fig5(patch: &Value, tr: &Xy, te: &Xy, seed: u64) -> CmdResult<Trained> {
    let cfg: Fig5Config = merge_config(&Fig5Config::default(), patch)?;
    let (model, report) = fig5_pipeline(tr, Some(te), cfg.gbt, cfg.knn)?;
    Ok(Trained {
        file: pipeline_file("fig5", &model.tree, tr, seed),
        report,
        history_csv: None,
        extra: json!({ "pipeline": model.tree.to_string() }),
    })
}

fn train_gp(cli: &Cli, patch: &Value, tr: &Xy, te: &Xy) -> CmdResult<Trained> {
    let mut cfg: GpConfig = merge_config(&GpConfig::default(), patch)?;
    cfg.seed = seeds::derive(cli.seed, seeds::GP);
    cfg.validate()?;
    let res = gp_search(&cfg, tr)?;
    let mut model = PipelineRegressor::new(res.best.clone());
    let report = fit_and_report(&mut model, tr, Some(te), Some(res.best_mse))?;
    let mut csv = Vec::new();
    write_fitness_csv(&res.history, &mut csv).map_err(Failure::compute)?;
    Ok(Trained {
        file: pipeline_file("gp", &res.best, tr, cli.seed),
        report,
        history_csv: Some(csv),
        extra: json!({
            "pipeline": res.best.to_string(),
            "cv_mse": res.best_mse,
            "evaluations": res.evaluations,
            "config": cfg,
        }),
    })
}

fn train_qnn(
    cli: &Cli,
    out: &OutDir,
    start: Instant,
    patch: &Value,
    sets: (&IvDataset, &IvDataset),
    xy: (&Xy, &Xy),
) -> CmdResult<Trained> {
    let mut cfg: QnnConfig = merge_config(&QnnConfig::default(), patch)?;
    cfg.seed = seeds::derive(cli.seed, seeds::QNN);
    cfg.validate()?;
    let mut history: Vec<QnnEpochRecord> = Vec::new();
    let outcome = match qnn::train_observed(cfg.clone(), sets.0, Some(sets.1), &mut |r| {
        history.push(*r)
    }) {
        Ok(o) => o,
        Err(e) => {
            let mut csv = Vec::new();
            let _ = qnn::write_history_csv(&history, &mut csv);
            let h = serde_json::to_value(&history).unwrap_or_default();
            return Err(fail_with_history(out, cli, ModelKind::Qnn, start, e, h, csv));
        }
    };
    let mut csv = Vec::new();
    qnn::write_history_csv(&outcome.history, &mut csv).map_err(Failure::compute)?;
    let extra = json!({
        "initial": outcome.initial,
        "final_train_loss": outcome.final_train_loss(),
        "min_trace": outcome.min_trace(),
        "epochs_run": outcome.history.len(),
    });
    let file = ModelFile::new(
        "qnn",
        xy.0.x.ncols(),
        cli.seed,
        SavedModel::Qnn {
            model: outcome.model,
        },
    );
    let reg = file.regressor()?;
    let hyper = serde_json::to_value(&cfg).map_err(Failure::compute)?;
    let report = evaluate("qnn", hyper, reg.as_ref(), xy.0, xy.1, None)?;
    Ok(Trained {
        file,
        report,
        history_csv: Some(csv),
        extra,
    })
}

pub fn run(cli: &Cli, a: &TrainArgs) -> CmdResult {
    let start = Instant::now();
    let kind = match (a.kind, a.model) {
        (Some(k), None) | (None, Some(k)) => k,
        (Some(k), Some(m)) if k == m => k,
        (Some(_), Some(_)) => return Err(Failure::input_msg("conflicting model kinds given")),
        (None, None) => return Err(Failure::input_msg("a model kind is required")),
    };
    let patch = flag_patch(kind, a)?;
    let ds = IvDataset::load_csv(&a.input)?;
    let split: Split = split_indices(ds.len(), TEST_FRACTION, cli.seed)?;
    let out = OutDir::create(&cli.out)?;
    out.write_json(
        "split_manifest.json",
        &json!({
            "input": a.input.display().to_string(),
            "samples": ds.len(),
            "split": split,
        }),
    )?;

    let all = Xy::from_dataset(&ds);
    let (tr, te) = (all.rows(&split.train), all.rows(&split.test));
    let trained = match kind {
        ModelKind::Knn => train_knn(&patch, &tr, &te, cli.seed)?,
        ModelKind::Mlp => train_mlp(cli, &out, start, &patch, &tr, &te)?,
        ModelKind::Fig5 => train_fig5(&patch, &tr, &te, cli.seed)?,
        ModelKind::Gp => train_gp(cli, &patch, &tr, &te)?,
        ModelKind::Qnn => {
            let sets = (ds.select(&split.train), ds.select(&split.test));
            train_qnn(cli, &out, start, &patch, (&sets.0, &sets.1), (&tr, &te))?
        }
    };

    out.write_json("model.json", &trained.file)?;
    if let Some(csv) = &trained.history_csv {
        out.write("history.csv", csv)?;
    }
    let mut report = serde_json::to_value(&trained.report).map_err(Failure::compute)?;
    let fit_seconds = report
        .as_object_mut()
        .and_then(|o| o.remove("wall_time_seconds"))
        .unwrap_or(Value::Null);
    let mut meta = metadata(start, cli.seed);
    meta["fit_seconds"] = fit_seconds;
    let body = with_metadata(
        json!({
            "command": "train",
            "model": kind.name(),
            "status": "ok",
            "input": a.input.display().to_string(),
            "split": { "train": split.train.len(), "test": split.test.len() },
            "report": report,
            "details": trained.extra,
        }),
        meta,
    )?;
    out.write_json("report.json", &body)?;
    let test = trained.report.test_mse.map(|v| format!("{v:.4e}")).unwrap_or_default();
    println!(
        "{}: train MSE {:.4e}, test MSE {test}",
        kind.name(),
        trained.report.train_mse
    );
    Ok(())
}
