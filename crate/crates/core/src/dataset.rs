//! I–V–illumination datasets: CSV ingestion, descriptive statistics,
//! train/test splits, k-fold indices and synthetic diode curves.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::DiodeModel;
use crate::seeded_rng;

/// CSV header expected by [`IvDataset::load_csv`].
pub const CSV_HEADER: [&str; 3] = ["voltage_V", "intensity_mW_cm2", "current_A"];

/// One measurement: bias voltage (V), illumination intensity (mW/cm²) and
/// current (A).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvSample {
    pub voltage: f64,
    pub intensity: f64,
    pub current: f64,
}

impl IvSample {
    pub fn new(voltage: f64, intensity: f64, current: f64) -> Self {
        Self {
            voltage,
            intensity,
            current,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.voltage.is_finite() && self.intensity.is_finite() && self.current.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.intensity < 0.0 {
            return Err(format!("negative intensity {}", self.intensity));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvDataset {
    samples: Vec<IvSample>,
    pub provenance: String,
}

impl IvDataset {
    pub fn new(samples: Vec<IvSample>, provenance: impl Into<String>) -> Result<Self> {
        for (k, s) in samples.iter().enumerate() {
            s.check().map_err(|message| Error::Parse { row: k + 1, message })?;
        }
        Ok(Self {
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file, path.display().to_string())
    }

    /// Parses the CSV body. Row numbers in errors count data rows from 1.
    pub fn from_reader(reader: impl Read, provenance: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
            .clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::Schema(format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            let row = k + 1;
            let record = record.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if record.len() != CSV_HEADER.len() {
                return Err(Error::Schema(format!(
                    "row {row} has {} column(s), expected {}",
                    record.len(),
                    CSV_HEADER.len()
                )));
            }
            let mut vals = [0.0; 3];
            for (j, cell) in record.iter().enumerate() {
                vals[j] = cell.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("`{cell}` in column {} is not a number", CSV_HEADER[j]),
                })?;
            }
            let s = IvSample::new(vals[0], vals[1], vals[2]);
            s.check().map_err(|message| Error::Parse { row, message })?;
            samples.push(s);
        }
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            samples,
            provenance: provenance.into(),
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Schema(e.to_string());
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for s in &self.samples {
            w.write_record(&[
                s.voltage.to_string(),
                s.intensity.to_string(),
                s.current.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })
    }

    pub fn samples(&self) -> &[IvSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Subset in the order of `indices`.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Feature matrix with columns (voltage, intensity).
    pub fn features(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), 2, |r, c| {
            let s = &self.samples[r];
            if c == 0 {
                s.voltage
            } else {
                s.intensity
            }
        })
    }

    pub fn targets(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.samples.iter().map(|s| s.current))
    }

    pub fn column(&self, col: Column) -> Vec<f64> {
        self.samples.iter().map(|s| col.get(s)).collect()
    }

    /// (voltage, current) pairs of samples taken at `intensity`.
    pub fn curve_at(&self, intensity: f64) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter(|s| s.intensity == intensity)
            .map(|s| (s.voltage, s.current))
            .collect()
    }

    /// Distinct intensities in first-seen order.
    pub fn intensities(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in &self.samples {
            if !out.contains(&s.intensity) {
                out.push(s.intensity);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Voltage,
    Intensity,
    Current,
}

impl Column {
    pub const ALL: [Column; 3] = [Column::Voltage, Column::Intensity, Column::Current];

    fn get(self, s: &IvSample) -> f64 {
        match self {
            Column::Voltage => s.voltage,
            Column::Intensity => s.intensity,
            Column::Current => s.current,
        }
    }
}

/// Descriptive statistics of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single value.
    pub std: f64,
    pub min: f64,
    #[serde(rename = "25%")]
    pub q25: f64,
    #[serde(rename = "50%")]
    pub median: f64,
    #[serde(rename = "75%")]
    pub q75: f64,
    pub max: f64,
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            count: n,
            mean,
            std,
            min: sorted[0],
            q25: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            max: sorted[n - 1],
        })
    }
}

/// Linear interpolation between order statistics (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub voltage: ColumnStats,
    pub intensity: ColumnStats,
    pub current: ColumnStats,
}

pub fn summary_stats(ds: &IvDataset) -> Result<SummaryStats> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(SummaryStats {
        voltage: ColumnStats::of(&ds.column(Column::Voltage))?,
        intensity: ColumnStats::of(&ds.column(Column::Intensity))?,
        current: ColumnStats::of(&ds.column(Column::Current))?,
    })
}

/// Index partition produced by [`split_train_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub test_fraction: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle; the first `floor(N·fraction)` shuffled indices form the
/// test set. Both index lists are returned in ascending order.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n_test = (n as f64 * test_fraction).floor() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} of {n} samples leaves an empty partition"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(seed));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split {
        seed,
        test_fraction,
        train,
        test,
    })
}

pub fn split_train_test(
    ds: &IvDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(IvDataset, IvDataset)> {
    let split = split_indices(ds.len(), test_fraction, seed)?;
    Ok((ds.select(&split.train), ds.select(&split.test)))
}

/// `k` disjoint validation folds covering `0..n`. The first `n % k` folds
/// hold one extra index.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k-fold needs 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Generating parameters for synthetic photodiode curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDiodeParams {
    pub ideality: f64,
    pub saturation_current: f64,
    pub series_resistance: f64,
    pub temperature: f64,
    /// Photocurrent per (mW/cm²)^γ, A.
    pub photo_coeff: f64,
    pub photo_exponent: f64,
}

impl Default for SyntheticDiodeParams {
    fn default() -> Self {
        Self {
            ideality: 3.0,
            saturation_current: 1e-9,
            series_resistance: 1e3,
            temperature: 300.0,
            photo_coeff: 1e-6,
            photo_exponent: 1.4,
        }
    }
}

impl SyntheticDiodeParams {
    pub fn diode(&self) -> DiodeModel {
        DiodeModel {
            ideality: self.ideality,
            saturation_current: self.saturation_current,
            series_resistance: self.series_resistance,
            temperature: self.temperature,
        }
    }

    fn validate(&self) -> Result<()> {
        self.diode().validate()?;
        if !(self.ideality > 1.0 && self.photo_coeff >= 0.0 && self.photo_exponent > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid synthetic diode parameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// Dark thermionic current plus a photocurrent `photo_coeff·P^γ` flowing in
/// the reverse (negative) direction. One sample per (intensity, voltage)
/// pair, grouped by intensity in the order given.
pub fn synthesize_diode(
    params: &SyntheticDiodeParams,
    voltages: &[f64],
    intensities: &[f64],
) -> Result<IvDataset> {
    params.validate()?;
    let diode = params.diode();
    let mut samples = Vec::with_capacity(voltages.len() * intensities.len());
    for &p in intensities {
        if !(p >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative intensity {p}")));
        }
        let photo = params.photo_coeff * p.powf(params.photo_exponent);
        for &v in voltages {
            let dark = diode.current(v)?;
            samples.push(IvSample::new(v, p, dark - photo));
        }
    }
    IvDataset::new(samples, "synthetic thermionic diode")
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}
