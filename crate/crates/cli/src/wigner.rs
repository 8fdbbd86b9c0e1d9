use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use diodeq::dataset::linspace;
use diodeq::fock::{wigner, wigner_svg, write_wigner_csv, FockSpace, FockState};
use diodeq::qnn::{encode_state, output_state, x_expectation};
use num_complex::Complex64;
use serde_json::json;

use crate::failure::{CmdResult, Failure};
use crate::io::{metadata, with_metadata, OutDir};
use crate::model_file::{ModelFile, SavedModel};
use crate::{Cli, Format};

#[derive(Debug, Args)]
pub struct WignerArgs {
    /// Real displacement amplitude.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Imaginary part of the displacement amplitude.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha_im: f64,
    /// Squeezing magnitude r of z = r·e^{iθ}.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub r: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 40)]
    pub cutoff: usize,
    /// Grid half-width in both quadratures.
    #[arg(long, default_value_t = 5.0)]
    pub extent: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 81)]
    pub points: usize,
    /// Trained QNN; the encoded sample is passed through its circuit.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub voltage: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub intensity: Option<f64>,
    /// Pixel size of SVG cells.
    #[arg(long, default_value_t = 6)]
    pub cell: usize,
}

fn qnn_state(a: &WignerArgs, path: &Path) -> CmdResult<(FockState, serde_json::Value)> {
    let file = ModelFile::load(path)?;
    let SavedModel::Qnn { model } = &file.model else {
        return Err(Failure::input_msg(format!(
            "{}: a `{}` model has no quantum state",
            path.display(),
            file.name
        )));
    };
    let (Some(v), Some(p)) = (a.voltage, a.intensity) else {
        return Err(Failure::input_msg("--model needs --voltage and --intensity"));
    };
    let enc = model
        .encoder
        .as_ref()
        .ok_or_else(|| Failure::input_msg("QNN model has no fitted encoder"))?;
    let input = enc.encode_pair(v, p);
    let space = model.space()?;
    let psi = output_state(model, &space, &encode_state(&space, &input))?;
    let info = json!({
        "model": path.display().to_string(),
        "voltage": v,
        "intensity": p,
        "encoded": { "alpha": input.alpha, "r": input.r, "extrapolated": input.extrapolated },
        "trace": psi.norm_squared(),
        "x_expectation": x_expectation(&psi),
    });
    Ok((FockState::from_amplitudes(psi.iter().copied().collect())?, info))
}

/// First `(row, col)` whose value beats every other under `better`.
fn arg_extreme(m: &nalgebra::DMatrix<f64>, better: impl Fn(f64, f64) -> bool) -> (usize, usize) {
    let mut best = (0, 0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if better(m[(i, j)], m[best]) {
                best = (i, j);
            }
        }
    }
    best
}

pub fn run(cli: &Cli, a: &WignerArgs) -> CmdResult {
    let start = Instant::now();
    if !(a.extent > 0.0 && a.extent.is_finite()) || a.points < 2 {
        return Err(Failure::input_msg("grid needs a positive extent and at least 2 points"));
    }
    let (state, source) = match &a.model {
        Some(p) => qnn_state(a, p)?,
        None => {
            let space = FockSpace::new(a.cutoff)?;
            let alpha = Complex64::new(a.alpha, a.alpha_im);
            let s = space.prepare_displaced_squeezed(alpha, a.r, a.theta)?;
            let info = json!({
                "alpha": [a.alpha, a.alpha_im],
                "r": a.r,
                "theta": a.theta,
                "cutoff": a.cutoff,
            });
            (s, info)
        }
    };
    let axis = linspace(-a.extent, a.extent, a.points);
    let grid = wigner(&state, &axis, &axis);
    let (imax, jmax) = arg_extreme(&grid.values, |a, b| a > b);
    let (imin, jmin) = arg_extreme(&grid.values, |a, b| a < b);

    let out = OutDir::create(&cli.out)?;
    out.write_with("wigner.csv", |b| write_wigner_csv(&grid, b))?;
    if cli.format == Format::Svg {
        out.write("wigner.svg", wigner_svg(&grid, a.cell))?;
    }
    let report = with_metadata(
        json!({
            "command": "wigner",
            "state": source,
            "grid": { "extent": a.extent, "points": a.points },
            "max": { "value": grid.values[(imax, jmax)], "x": grid.x[imax], "p": grid.p[jmax] },
            "min": { "value": grid.values[(imin, jmin)], "x": grid.x[imin], "p": grid.p[jmin] },
            "integral": grid.integral(),
        }),
        metadata(start, cli.seed),
    )?;
    out.write_json("report.json", &report)?;
    println!(
        "max W = {:.4e} at (x, p) = ({:.3}, {:.3}); min W = {:.4e}",
        grid.values[(imax, jmax)],
        grid.x[imax],
        grid.p[jmax],
        grid.values[(imin, jmin)]
    );
    Ok(())
}
