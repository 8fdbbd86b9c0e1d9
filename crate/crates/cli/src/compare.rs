use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use diodeq::dataset::split_indices;
use diodeq::model::{score, Xy};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use crate::failure::{CmdResult, Failure};
use crate::io::{metadata, with_metadata, OutDir, Table};
use crate::model_file::ModelFile;
use crate::{Cli, TEST_FRACTION};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Model files, reported in the order given.
    #[arg(long = "model", required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    /// Dataset split 85/15 by the seed into train and test rows. The last
    /// column is the target; the others are features.
    #[arg(long)]
    pub input: PathBuf,
    /// Optional held-out dataset scored as a whole.
    #[arg(long)]
    pub validation: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Row {
    path: String,
    model: String,
    train_mse: f64,
    test_mse: f64,
    validation_mse: Option<f64>,
}

fn load_xy(path: &Path) -> CmdResult<Xy> {
    let t = Table::load(path)?;
    let d = t.header.len();
    if d < 2 {
        return Err(Failure::input_msg(format!(
            "{}: need at least one feature column and a target",
            path.display()
        )));
    }
    let x = DMatrix::from_fn(t.rows.len(), d - 1, |i, j| t.rows[i][j]);
    let y = DVector::from_vec(t.column(d - 1));
    Ok(Xy::new(x, y)?)
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into())
}

pub fn run(cli: &Cli, a: &CompareArgs) -> CmdResult {
    let start = Instant::now();
    let data = load_xy(&a.input)?;
    let validation = a.validation.as_deref().map(load_xy).transpose()?;
    let files = a
        .models
        .iter()
        .map(|p| ModelFile::load(p))
        .collect::<CmdResult<Vec<_>>>()?;
    for f in &files {
        f.check_features(data.x.ncols())?;
        if let Some(v) = &validation {
            f.check_features(v.x.ncols())?;
        }
    }
    let split = split_indices(data.len(), TEST_FRACTION, cli.seed)?;
    let (tr, te) = (data.rows(&split.train), data.rows(&split.test));

    let mut rows = Vec::new();
    for (path, f) in a.models.iter().zip(&files) {
        let reg = f.regressor()?;
        rows.push(Row {
            path: path.display().to_string(),
            model: f.name.clone(),
            train_mse: score(reg.as_ref(), &tr)?,
            test_mse: score(reg.as_ref(), &te)?,
            validation_mse: validation
                .as_ref()
                .map(|v| score(reg.as_ref(), v))
                .transpose()?,
        });
    }

    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let mut table = format!(
        "{:<width$}  {:>12}  {:>12}  {:>12}\n",
        "model", "train_mse", "test_mse", "val_mse"
    );
    for r in &rows {
        table.push_str(&format!(
            "{:<width$}  {:>12}  {:>12}  {:>12}\n",
            r.model,
            cell(Some(r.train_mse)),
            cell(Some(r.test_mse)),
            cell(r.validation_mse)
        ));
    }

    let out = OutDir::create(&cli.out)?;
    out.write("compare.txt", &table)?;
    let report = with_metadata(
        json!({
            "command": "compare",
            "input": a.input.display().to_string(),
            "split": { "train": split.train.len(), "test": split.test.len() },
            "models": rows,
        }),
        metadata(start, cli.seed),
    )?;
    out.write_json("report.json", &report)?;
    print!("{table}");
    Ok(())
}
