use std::path::Path;
use std::time::Instant;

use diodeq::dataset::{summary_stats, ColumnStats, IvDataset};
use serde_json::json;

use crate::failure::CmdResult;
use crate::io::{metadata, with_metadata, OutDir};
use crate::{Cli, Format};

const ROWS: [&str; 8] = ["count", "mean", "std", "min", "25%", "50%", "75%", "max"];

fn cells(c: &ColumnStats) -> [String; 8] {
    [
        c.count.to_string(),
        format!("{:.6e}", c.mean),
        format!("{:.6e}", c.std),
        format!("{:.6e}", c.min),
        format!("{:.6e}", c.q25),
        format!("{:.6e}", c.median),
        format!("{:.6e}", c.q75),
        format!("{:.6e}", c.max),
    ]
}

pub fn run(cli: &Cli, input: &Path) -> CmdResult {
    let start = Instant::now();
    let ds = IvDataset::load_csv(input)?;
    let stats = summary_stats(&ds)?;
    let out = OutDir::create(&cli.out)?;
    let cols = [
        ("voltage_V", cells(&stats.voltage)),
        ("intensity_mW_cm2", cells(&stats.intensity)),
        ("current_A", cells(&stats.current)),
    ];

    let mut csv = String::from("statistic");
    for (name, _) in &cols {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for (r, label) in ROWS.iter().enumerate() {
        csv.push_str(label);
        for (_, c) in &cols {
            csv.push(',');
            csv.push_str(&c[r]);
        }
        csv.push('\n');
    }

    let report = with_metadata(
        json!({
            "command": "stats",
            "input": input.display().to_string(),
            "samples": ds.len(),
            "stats": stats,
        }),
        metadata(start, cli.seed),
    )?;
    out.write_json("report.json", &report)?;
    match cli.format {
        Format::Csv => {
            out.write("stats.csv", &csv)?;
            print!("{csv}");
        }
        _ => {
            println!("{:<10}{:>18}{:>18}{:>18}", "", cols[0].0, cols[1].0, cols[2].0);
            for (r, label) in ROWS.iter().enumerate() {
                println!(
                    "{:<10}{:>18}{:>18}{:>18}",
                    label, cols[0].1[r], cols[1].1[r], cols[2].1[r]
                );
            }
        }
    }
    Ok(())
}
