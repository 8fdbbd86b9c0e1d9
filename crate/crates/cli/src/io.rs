use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::failure::{io_at, CmdResult, Failure};

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> CmdResult<Self> {
        io_at(fs::create_dir_all(path), path)?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> CmdResult<PathBuf> {
        let p = self.path(name);
        io_at(fs::write(&p, contents), &p)?;
        Ok(p)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> CmdResult<PathBuf> {
        let mut s = serde_json::to_string_pretty(value).map_err(Failure::compute)?;
        s.push('\n');
        self.write(name, s)
    }

    /// Writes through a buffer-filling closure, e.g. the core CSV writers.
    pub fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> CmdResult<PathBuf> {
        let mut buf = Vec::new();
        let p = self.path(name);
        io_at(f(&mut buf), &p)?;
        self.write(name, buf)
    }
}

/// Volatile fields, kept apart so reruns can be compared without them.
pub fn metadata(start: Instant, seed: u64) -> Value {
    json!({
        "timestamp": Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

/// Turns a serializable report into an object and attaches `metadata`.
pub fn with_metadata(body: impl Serialize, meta: Value) -> CmdResult<Value> {
    let mut v = serde_json::to_value(body).map_err(Failure::compute)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Failure::compute(anyhow::anyhow!("report is not a JSON object")))?;
    obj.insert("metadata".into(), meta);
    Ok(v)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = io_at(fs::read_to_string(path), path)?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::input(anyhow::anyhow!("{}: {e}", path.display())))
}

/// `--config` accepts inline JSON or a path to a JSON file.
pub fn parse_config(arg: Option<&str>) -> CmdResult<Value> {
    let Some(a) = arg else {
        return Ok(Value::Object(Map::new()));
    };
    let text = if a.trim_start().starts_with('{') {
        a.to_string()
    } else {
        io_at(fs::read_to_string(a), Path::new(a))?
    };
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::input(anyhow::anyhow!("--config: {e}")))?;
    if !v.is_object() {
        return Err(Failure::input_msg("--config must be a JSON object"));
    }
    Ok(v)
}

/// Overlays `patch` onto the serialized defaults, recursing into objects.
pub fn merge_config<T: Serialize + DeserializeOwned>(defaults: &T, patch: &Value) -> CmdResult<T> {
    fn merge(base: &mut Value, patch: &Value) {
        match (base, patch) {
            (Value::Object(b), Value::Object(p)) => {
                for (k, v) in p {
                    match b.get_mut(k) {
                        Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                        _ => {
                            b.insert(k.clone(), v.clone());
                        }
                    }
                }
            }
            (b, p) => *b = p.clone(),
        }
    }
    let mut base = serde_json::to_value(defaults).map_err(Failure::compute)?;
    merge(&mut base, patch);
    serde_json::from_value(base).map_err(|e| Failure::input(anyhow::anyhow!("--config: {e}")))
}

/// Numeric CSV with a header row.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn load(path: &Path) -> CmdResult<Self> {
        let file = io_at(fs::File::open(path), path)?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let bad = |m: String| Failure::input(anyhow::anyhow!("{}: {m}", path.display()));
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let row = rec
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| bad(format!("row {}: `{c}` is not a number", i + 1)))
                })
                .collect::<CmdResult<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Failure::input(anyhow::anyhow!(
                "{}: {}",
                path.display(),
                diodeq::Error::EmptyDataset
            )));
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn require_columns(&self, n: usize, path: &Path) -> CmdResult<()> {
        if self.header.len() != n {
            return Err(Failure::input(anyhow::anyhow!(
                "{}: expected {n} columns, found {}",
                path.display(),
                self.header.len()
            )));
        }
        Ok(())
    }
}
