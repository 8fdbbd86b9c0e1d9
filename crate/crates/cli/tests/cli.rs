use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use diodeq::dataset::{linspace, synthesize_diode, IvDataset, SyntheticDiodeParams};
use diodeq::qnn::{Encoder, QnnConfig, QnnModel};
use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn diodeq(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_diodeq"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_ds(ds: &IvDataset, path: &Path) {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    fs::write(path, buf).unwrap();
}

/// 200 samples: 40 voltages at five intensities.
fn corpus(dir: &Path) -> PathBuf {
    let params = SyntheticDiodeParams {
        ideality: 2.0,
        series_resistance: 3000.0,
        ..Default::default()
    };
    let ds = synthesize_diode(&params, &linspace(-3.5, 3.4, 40), &[0.0, 20.0, 35.0, 65.0, 80.0])
        .unwrap();
    let p = dir.join("corpus.csv");
    write_ds(&ds, &p);
    p
}

fn json_at(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_ok(r: &Run) {
    assert_eq!(r.code, 0, "stdout: {}\nstderr: {}", r.stdout, r.stderr);
}

#[test]
fn stats_writes_quartile_report() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let out = dir.path().join("out");
    let r = diodeq(&["stats", "--input", s(&data), "--out", s(&out)]);
    assert_ok(&r);
    let rep = json_at(&out.join("report.json"));
    assert_eq!(rep["samples"], 200);
    assert_eq!(rep["stats"]["intensity"]["50%"], 35.0);
    assert_eq!(rep["stats"]["voltage"]["count"], 200);
    assert!(rep["metadata"]["timestamp"].is_string());
    assert!(r.stdout.contains("25%"));

    let r = diodeq(&["stats", "--input", s(&data), "--out", s(&out), "--format", "csv"]);
    assert_ok(&r);
    assert!(fs::read_to_string(out.join("stats.csv"))
        .unwrap()
        .starts_with("statistic,voltage_V,intensity_mW_cm2,current_A\n"));
}

#[test]
fn stats_input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("no_such_file.csv");
    let r = diodeq(&["stats", "--input", s(&missing), "--out", s(&out)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("no_such_file.csv"), "{}", r.stderr);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "voltage_V,intensity_mW_cm2,current_A\n").unwrap();
    let r = diodeq(&["stats", "--input", s(&empty), "--out", s(&out)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("empty"), "{}", r.stderr);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "v,i\n1,2\n").unwrap();
    assert_eq!(diodeq(&["stats", "--input", s(&bad), "--out", s(&out)]).code, 2);

    assert_eq!(diodeq(&["stats", "--out", s(&out)]).code, 2);
}

#[test]
fn every_model_kind_shares_the_seeded_split() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_ok(&diodeq(&["train", "knn", "--input", s(&data), "--out", s(&a), "--seed", "7"]));
    assert_ok(&diodeq(&[
        "train", "--model", "mlp", "--input", s(&data), "--out", s(&b), "--seed", "7", "--epochs", "3",
    ]));
    assert_ok(&diodeq(&["train", "fig5", "--input", s(&data), "--out", s(&c), "--seed", "8"]));
    let ma = json_at(&a.join("split_manifest.json"));
    let mb = json_at(&b.join("split_manifest.json"));
    let mc = json_at(&c.join("split_manifest.json"));
    assert_eq!(ma["split"], mb["split"]);
    assert_ne!(ma["split"]["test"], mc["split"]["test"]);
    assert_eq!(ma["split"]["test"].as_array().unwrap().len(), 30);
    assert_eq!(ma["split"]["train"].as_array().unwrap().len(), 170);
}

#[test]
fn knn_flags_reach_the_model() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let out = dir.path().join("out");
    let r = diodeq(&["train", "knn", "--k", "3", "--p", "2", "--input", s(&data), "--out", s(&out)]);
    assert_ok(&r);
    let rep = json_at(&out.join("report.json"));
    let h = &rep["report"]["hyperparameters"]["model"];
    assert_eq!(h["k"], 3);
    assert_eq!(h["metric"]["p"], 2.0);
    assert_eq!(rep["report"]["train_mse"], 0.0);
    assert!(rep["report"]["test_mse"].as_f64().unwrap() >= 0.0);
    assert!(rep["metadata"]["fit_seconds"].is_number());
    assert!(rep["report"].get("wall_time_seconds").is_none());
    let m = json_at(&out.join("model.json"));
    assert_eq!(m["model"]["kind"], "knn");
    assert_eq!(m["n_features"], 2);
}

#[test]
fn train_argument_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let out = dir.path().join("out");
    let d = s(&data);
    let o = s(&out);
    assert_eq!(diodeq(&["train", "knn", "--epochs", "3", "--input", d, "--out", o]).code, 2);
    assert_eq!(diodeq(&["train", "knn", "--config", "{\"k\": 0}", "--input", d, "--out", o]).code, 2);
    assert_eq!(diodeq(&["train", "mlp", "--config", "{\"epochs\": \"x\"}", "--input", d, "--out", o]).code, 2);
    assert_eq!(diodeq(&["train", "--input", d, "--out", o]).code, 2);
    assert_eq!(diodeq(&["train", "knn", "--model", "mlp", "--input", d, "--out", o]).code, 2);
    assert_eq!(diodeq(&["train", "svm", "--input", d, "--out", o]).code, 2);
}

#[test]
fn qnn_zero_epochs_persists_initial_model() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let out = dir.path().join("out");
    let r = diodeq(&["train", "qnn", "--epochs", "0", "--input", s(&data), "--out", s(&out)]);
    assert_ok(&r);
    assert_eq!(
        fs::read_to_string(out.join("history.csv")).unwrap(),
        "epoch,train_loss,test_loss,min_trace\n"
    );
    let m = json_at(&out.join("model.json"));
    assert_eq!(m["model"]["kind"], "qnn");
    assert_eq!(m["model"]["model"]["layers"].as_array().unwrap().len(), 8);
    assert!(m["model"]["model"]["encoder"].is_object());
    let rep = json_at(&out.join("report.json"));
    assert_eq!(rep["details"]["epochs_run"], 0);
    assert!(rep["details"]["min_trace"].as_f64().unwrap() > 0.99);
}

#[test]
fn qnn_training_failure_exits_3_with_history() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let out = dir.path().join("out");
    // Three levels cannot hold the encoded states.
    let cfg = r#"{"cutoff": 3, "layers": 1, "trace_floor": 0.999}"#;
    let r = diodeq(&["train", "qnn", "--config", cfg, "--epochs", "2", "--input", s(&data), "--out", s(&out)]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let rep = json_at(&out.join("report.json"));
    assert_eq!(rep["status"], "failed");
    assert!(rep["error"].as_str().unwrap().contains("trace"));
    assert!(rep["history"].is_array());
    assert!(fs::read_to_string(out.join("history.csv"))
        .unwrap()
        .starts_with("epoch,train_loss"));
}

#[test]
fn compare_tabulates_models_in_order() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = dir.path().join("cmp");
    assert_ok(&diodeq(&["train", "fig5", "--input", s(&data), "--out", s(&a)]));
    assert_ok(&diodeq(&["train", "knn", "--input", s(&data), "--out", s(&b)]));
    let (ma, mb) = (a.join("model.json"), b.join("model.json"));
    let r = diodeq(&[
        "compare", "--model", s(&ma), s(&mb), "--input", s(&data), "--validation", s(&data), "--out", s(&out),
    ]);
    assert_ok(&r);
    let rep = json_at(&out.join("report.json"));
    let rows = rep["models"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["model"], "fig5");
    assert_eq!(rows[1]["model"], "knn");
    // Same seed and data: compare reproduces the training report.
    let trained = json_at(&a.join("report.json"));
    assert_eq!(rows[0]["test_mse"], trained["report"]["test_mse"]);
    assert_eq!(rows[0]["train_mse"], trained["report"]["train_mse"]);
    assert!(rows[1]["validation_mse"].is_number());

    let table = fs::read_to_string(out.join("compare.txt")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("fig5") && lines[2].starts_with("knn"));
    assert!(lines.iter().all(|l| l.len() == lines[0].len()));

    let r = diodeq(&["compare", "--model", s(&mb), "--input", s(&data), "--out", s(&out)]);
    assert_ok(&r);
    assert_eq!(json_at(&out.join("report.json"))["models"].as_array().unwrap().len(), 1);
}

#[test]
fn compare_input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let data = corpus(dir.path());
    let a = dir.path().join("a");
    let out = dir.path().join("cmp");
    assert_ok(&diodeq(&["train", "knn", "--input", s(&data), "--out", s(&a)]));
    let model = a.join("model.json");

    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "a,b,c,y\n1,2,3,4\n2,3,4,5\n3,4,5,6\n4,5,6,7\n5,6,7,8\n6,7,8,9\n7,8,9,1\n").unwrap();
    let r = diodeq(&["compare", "--model", s(&model), "--input", s(&wide), "--out", s(&out)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("dimension"), "{}", r.stderr);

    let mut m = json_at(&model);
    m["schema"] = json!("something-else/9");
    let bad = dir.path().join("bad.json");
    fs::write(&bad, m.to_string()).unwrap();
    assert_eq!(diodeq(&["compare", "--model", s(&bad), "--input", s(&data), "--out", s(&out)]).code, 2);

    let mut m = json_at(&model);
    m["model"]["kind"] = json!("svm");
    fs::write(&bad, m.to_string()).unwrap();
    assert_eq!(diodeq(&["compare", "--model", s(&bad), "--input", s(&data), "--out", s(&out)]).code, 2);
}

fn physics_curves(dir: &Path) -> (PathBuf, PathBuf) {
    let params = SyntheticDiodeParams::default();
    let v = linspace(-3.0, 3.0, 601);
    let dark = synthesize_diode(&params, &v, &[0.0]).unwrap();
    let light = synthesize_diode(&params, &v, &[20.0, 65.0]).unwrap();
    let (pd, pl) = (dir.join("dark.csv"), dir.join("light.csv"));
    write_ds(&dark, &pd);
    write_ds(&light, &pl);
    (pd, pl)
}

#[test]
fn physics_dark_only_marks_photo_stages_skipped() {
    let dir = TempDir::new().unwrap();
    let (dark, _) = physics_curves(dir.path());
    let out = dir.path().join("out");
    let r = diodeq(&["physics", "--input", s(&dark), "--out", s(&out)]);
    assert_ok(&r);
    let rep = json_at(&out.join("report.json"));
    for stage in ["figures_of_merit", "transient", "band_gap"] {
        assert_eq!(rep["report"][stage]["status"], "skipped", "{stage}");
    }
    let n = rep["report"]["curves"][0]["ideality"]["value"]["ideality"].as_f64().unwrap();
    assert!((n - 3.0).abs() < 0.06, "n = {n}");
    assert!(!out.join("merit.csv").exists());
    assert!(out.join("curves.csv").exists());
}

#[test]
fn physics_with_light_and_constants() {
    let dir = TempDir::new().unwrap();
    let (dark, light) = physics_curves(dir.path());
    let consts = dir.path().join("constants.json");
    fs::write(&consts, r#"{"wavelength_nm": 254.0}"#).unwrap();
    let trace = dir.path().join("trace.csv");
    let mut t = String::from("time_s,current_A\n");
    for k in 0..400 {
        let time = k as f64 * 0.01;
        let phase = time % 2.0;
        let i = if phase < 1.0 { 1.0 - (-phase / 0.2f64).exp() } else { (-(phase - 1.0) / 0.2f64).exp() };
        t.push_str(&format!("{time},{}\n", 1e-6 * i));
    }
    fs::write(&trace, t).unwrap();
    let out = dir.path().join("out");
    let r = diodeq(&[
        "physics", "--input", s(&dark), "--illuminated", s(&light), "--constants", s(&consts),
        "--transient", s(&trace), "--out", s(&out),
    ]);
    assert_ok(&r);
    let rep = json_at(&out.join("report.json"));
    assert_eq!(rep["report"]["constants"]["wavelength_nm"], 254.0);
    assert_eq!(rep["report"]["figures_of_merit"]["status"], "ok");
    assert_eq!(rep["report"]["transient"]["status"], "ok");
    assert_eq!(rep["report"]["band_gap"]["status"], "skipped");
    assert_eq!(rep["report"]["curves"].as_array().unwrap().len(), 3);
    let merit = fs::read_to_string(out.join("merit.csv")).unwrap();
    assert_eq!(merit.lines().count(), 1 + 2 * 601);

    fs::write(&consts, r#"{"temperature_k": "hot"}"#).unwrap();
    let r = diodeq(&["physics", "--input", s(&dark), "--constants", s(&consts), "--out", s(&out)]);
    assert_eq!(r.code, 2);
}

fn wigner_report(args: &[&str], out: &Path) -> Value {
    let mut full = vec!["wigner", "--out", s(out)];
    full.extend_from_slice(args);
    assert_ok(&diodeq(&full));
    json_at(&out.join("report.json"))
}

#[test]
fn wigner_encoded_state_peaks_at_negative_x() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w");
    let rep = wigner_report(&["--alpha", "-1", "--r", "0.8", "--points", "41", "--format", "svg"], &out);
    assert!(rep["max"]["x"].as_f64().unwrap() < 0.0);
    assert!((rep["max"]["x"].as_f64().unwrap() + 2.0).abs() < 0.26);
    let csv = fs::read_to_string(out.join("wigner.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 41 * 41);
    assert!(fs::read_to_string(out.join("wigner.svg")).unwrap().contains("<svg"));
}

#[test]
fn wigner_vacuum_is_a_positive_gaussian() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w");
    let rep = wigner_report(&["--points", "101"], &out);
    let peak = rep["max"]["value"].as_f64().unwrap();
    assert!((peak - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    assert_eq!(rep["max"]["x"], 0.0);
    assert_eq!(rep["max"]["p"], 0.0);
    assert!(rep["min"]["value"].as_f64().unwrap() >= 0.0);
    assert!((rep["integral"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(!out.join("wigner.svg").exists());
}

#[test]
fn wigner_truncation_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w");
    let r = diodeq(&["wigner", "--alpha", "3", "--cutoff", "6", "--out", s(&out)]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("truncation"), "{}", r.stderr);
}

fn kerr_model_file(dir: &Path, kappa: f64) -> PathBuf {
    let mut m = QnnModel::zeros(QnnConfig {
        layers: 1,
        cutoff: 40,
        ..Default::default()
    });
    m.layers[0].kappa = kappa;
    m.encoder = Some(Encoder::fit(&[(-1.0, 0.0), (1.0, 10.0)], Default::default()).unwrap());
    let file = json!({
        "schema": "diodeq-model/1",
        "name": "qnn",
        "n_features": 2,
        "seed": 0,
        "model": { "kind": "qnn", "model": m },
    });
    let p = dir.join(format!("kerr{kappa}.json"));
    fs::write(&p, file.to_string()).unwrap();
    p
}

#[test]
fn wigner_of_kerr_circuit_output_goes_negative() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w");
    let args = |m: &Path| -> Value {
        wigner_report(
            &["--model", s(m), "--voltage", "1", "--intensity", "0", "--points", "61"],
            &out,
        )
    };
    let plain = args(&kerr_model_file(dir.path(), 0.0));
    assert!(plain["min"]["value"].as_f64().unwrap() > -1e-6);
    let kerr = args(&kerr_model_file(dir.path(), 1.0));
    assert!(kerr["min"]["value"].as_f64().unwrap() < -1e-3);
    assert!((kerr["state"]["trace"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let r = diodeq(&["wigner", "--model", s(&kerr_model_file(dir.path(), 1.0)), "--out", s(&out)]);
    assert_eq!(r.code, 2);
    let knn = dir.path().join("k");
    let data = corpus(dir.path());
    assert_ok(&diodeq(&["train", "knn", "--input", s(&data), "--out", s(&knn)]));
    let r = diodeq(&[
        "wigner", "--model", s(&knn.join("model.json")), "--voltage", "1", "--intensity", "0", "--out", s(&out),
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn unwritable_output_exits_2() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let r = diodeq(&["wigner", "--out", s(&blocker.join("sub"))]);
    assert_eq!(r.code, 2);
}
