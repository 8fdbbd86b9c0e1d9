use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use diodeq::dataset::IvDataset;
use diodeq::physics::{extract, DeviceConstants, DiodeReport, Spectrum, TransientTrace};
use serde_json::json;

use crate::failure::{CmdResult, Failure};
use crate::io::{metadata, read_json, with_metadata, OutDir, Table};
use crate::Cli;

#[derive(Debug, Args)]
pub struct PhysicsArgs {
    /// Dark I-V curve.
    #[arg(long)]
    pub input: PathBuf,
    /// Illuminated I-V curves; may be repeated.
    #[arg(long, num_args = 1..)]
    pub illuminated: Vec<PathBuf>,
    /// Device constants JSON; missing fields take their defaults.
    #[arg(long)]
    pub constants: Option<PathBuf>,
    /// Transient trace CSV with columns time, current.
    #[arg(long)]
    pub transient: Option<PathBuf>,
    /// Absorbance CSV with columns wavelength_nm, absorbance.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
}

fn two_columns(path: &Path) -> CmdResult<(Vec<f64>, Vec<f64>)> {
    let t = Table::load(path)?;
    t.require_columns(2, path)?;
    Ok((t.column(0), t.column(1)))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn curve_csv(r: &DiodeReport) -> String {
    let mut s = String::from("intensity_mW_cm2,ideality,saturation_current_A,barrier_height_eV,norde_series_resistance_ohm,norde_barrier_eV\n");
    for c in &r.curves {
        let fit = c.ideality.value();
        let norde = c.norde.value();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.intensity,
            opt(fit.map(|f| f.ideality)),
            opt(fit.map(|f| f.saturation_current)),
            opt(c.barrier_height_ev.value().copied()),
            opt(norde.map(|n| n.series_resistance)),
            opt(norde.map(|n| n.barrier_height_ev)),
        );
    }
    s
}

fn merit_csv(r: &DiodeReport) -> Option<String> {
    let curves = r.figures_of_merit.value()?;
    let mut s = String::from(
        "intensity_mW_cm2,voltage_V,responsivity_A_W,detectivity_jones,eqe_percent,nep_W_Hz\n",
    );
    for c in curves {
        for p in &c.points {
            let m = &p.merit;
            let _ = writeln!(
                s,
                "{},{},{:e},{},{:e},{}",
                c.intensity,
                p.voltage,
                m.responsivity,
                opt(m.detectivity),
                m.eqe_percent,
                opt(m.nep)
            );
        }
    }
    Some(s)
}

pub fn run(cli: &Cli, a: &PhysicsArgs) -> CmdResult {
    let start = Instant::now();
    let dark = IvDataset::load_csv(&a.input)?;
    let illuminated = if a.illuminated.is_empty() {
        None
    } else {
        let mut samples = Vec::new();
        for p in &a.illuminated {
            samples.extend_from_slice(IvDataset::load_csv(p)?.samples());
        }
        Some(IvDataset::new(samples, "illuminated")?)
    };
    let constants: DeviceConstants = match &a.constants {
        Some(p) => read_json(p)?,
        None => DeviceConstants::default(),
    };
    let transient = a
        .transient
        .as_ref()
        .map(|p| two_columns(p).map(|(time, current)| TransientTrace { time, current }))
        .transpose()?;
    let spectrum = a
        .spectrum
        .as_ref()
        .map(|p| {
            two_columns(p).map(|(wavelength_nm, absorbance)| Spectrum {
                wavelength_nm,
                absorbance,
            })
        })
        .transpose()?;

    let report = extract(
        &dark,
        illuminated.as_ref(),
        &constants,
        transient.as_ref(),
        spectrum.as_ref(),
    );
    let failures = report.failures();
    let ok = report.any_success();

    let out = OutDir::create(&cli.out)?;
    out.write("curves.csv", curve_csv(&report))?;
    if let Some(m) = merit_csv(&report) {
        out.write("merit.csv", m)?;
    }
    let body = with_metadata(
        json!({
            "command": "physics",
            "status": if ok { "ok" } else { "failed" },
            "failures": failures,
            "report": report,
        }),
        metadata(start, cli.seed),
    )?;
    out.write_json("report.json", &body)?;
    for c in &report.curves {
        if let Some(f) = c.ideality.value() {
            println!("P = {} mW/cm2: n = {:.3}, I0 = {:.3e} A", c.intensity, f.ideality, f.saturation_current);
        }
    }
    if !failures.is_empty() {
        eprintln!("failed stages: {}", failures.join(", "));
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::compute(anyhow::anyhow!("every extraction stage failed")))
    }
}
