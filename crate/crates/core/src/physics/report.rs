//! Full extraction chain over dark and illuminated curves.

use serde::{Deserialize, Serialize};

use super::asf::{asf_band_gap, AsfResult, Spectrum};
use super::diode::{
    barrier_height, ideality_factor, norde_series_resistance, IdealityFit, NordeResult,
    DEFAULT_IDEALITY_WINDOW,
};
use super::merit::{figures_of_merit, FiguresOfMerit};
use super::transient::{transient_metrics, TransientMetrics};
use super::transport::{field_emission_beta, transport_regions, ReverseAnalysis, TransportAnalysis};
use super::{DEFAULT_AREA_CM2, DEFAULT_DIELECTRIC, DEFAULT_FILM_THICKNESS_M, DEFAULT_RICHARDSON};
use crate::dataset::IvDataset;
use crate::error::Result;

/// Device and measurement constants. Area and Richardson constant default
/// to generic p-Si values, not measured ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConstants {
    pub temperature_k: f64,
    pub area_cm2: f64,
    /// A/(cm²·K²)
    pub richardson: f64,
    pub dielectric: f64,
    pub film_thickness_m: f64,
    pub wavelength_nm: f64,
    pub ideality_window: (f64, f64),
    /// Bias at which the summary figures of merit are quoted.
    pub operating_voltage: f64,
    pub asf_window_nm: Option<(f64, f64)>,
}

impl Default for DeviceConstants {
    fn default() -> Self {
        Self {
            temperature_k: 300.0,
            area_cm2: DEFAULT_AREA_CM2,
            richardson: DEFAULT_RICHARDSON,
            dielectric: DEFAULT_DIELECTRIC,
            film_thickness_m: DEFAULT_FILM_THICKNESS_M,
            wavelength_nm: 194.0,
            ideality_window: DEFAULT_IDEALITY_WINDOW,
            operating_voltage: -3.0,
            asf_window_nm: None,
        }
    }
}

/// Outcome of one extraction stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Stage<T> {
    Ok { value: T },
    Failed { error: String },
    Skipped { reason: String },
}

impl<T> Stage<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(value) => Stage::Ok { value },
            Err(e) => Stage::Failed {
                error: e.to_string(),
            },
        }
    }

    fn skipped(reason: &str) -> Self {
        Stage::Skipped {
            reason: reason.into(),
        }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Stage::Ok { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Stage::Ok { .. })
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, Stage::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    /// mW/cm²
    pub intensity: f64,
    pub ideality: Stage<IdealityFit>,
    pub barrier_height_ev: Stage<f64>,
    pub norde: Stage<NordeResult>,
    pub forward_transport: Stage<TransportAnalysis>,
    pub reverse_emission: Stage<ReverseAnalysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritPoint {
    pub voltage: f64,
    pub merit: FiguresOfMerit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritCurve {
    pub intensity: f64,
    pub points: Vec<MeritPoint>,
    /// Figures of merit at the operating voltage, if it was measured.
    pub at_operating_voltage: Option<FiguresOfMerit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiodeReport {
    pub constants: DeviceConstants,
    pub curves: Vec<CurveReport>,
    pub figures_of_merit: Stage<Vec<MeritCurve>>,
    pub transient: Stage<TransientMetrics>,
    pub band_gap: Stage<AsfResult>,
}

impl DiodeReport {
    /// True when at least one stage produced a value.
    pub fn any_success(&self) -> bool {
        self.curves.iter().any(|c| {
            c.ideality.is_ok()
                || c.norde.is_ok()
                || c.forward_transport.is_ok()
                || c.reverse_emission.is_ok()
        }) || self.figures_of_merit.is_ok()
            || self.transient.is_ok()
            || self.band_gap.is_ok()
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |name: String, failed: bool| {
            if failed {
                out.push(name)
            }
        };
        for c in &self.curves {
            let p = c.intensity;
            push(format!("ideality@{p}"), c.ideality.is_failed());
            push(format!("barrier@{p}"), c.barrier_height_ev.is_failed());
            push(format!("norde@{p}"), c.norde.is_failed());
            push(format!("forward-transport@{p}"), c.forward_transport.is_failed());
            push(format!("reverse-emission@{p}"), c.reverse_emission.is_failed());
        }
        push("figures-of-merit".into(), self.figures_of_merit.is_failed());
        push("transient".into(), self.transient.is_failed());
        push("band-gap".into(), self.band_gap.is_failed());
        out
    }
}

/// Transient trace: sample times and currents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientTrace {
    pub time: Vec<f64>,
    pub current: Vec<f64>,
}

fn analyse_curve(curve: &[(f64, f64)], intensity: f64, k: &DeviceConstants) -> CurveReport {
    let t = k.temperature_k;
    let ideality = Stage::from_result(ideality_factor(curve, k.ideality_window, t));
    let (barrier_height_ev, norde) = match ideality.value() {
        Some(fit) => (
            Stage::from_result(barrier_height(
                fit.saturation_current,
                k.area_cm2,
                k.richardson,
                t,
            )),
            Stage::from_result(norde_series_resistance(
                curve,
                fit.ideality,
                t,
                k.area_cm2,
                k.richardson,
            )),
        ),
        None => (
            Stage::skipped("ideality fit failed"),
            Stage::skipped("ideality fit failed"),
        ),
    };
    CurveReport {
        intensity,
        ideality,
        barrier_height_ev,
        norde,
        forward_transport: Stage::from_result(transport_regions(curve)),
        reverse_emission: Stage::from_result(field_emission_beta(
            curve,
            k.dielectric,
            k.film_thickness_m,
            t,
        )),
    }
}

const VOLTAGE_MATCH_TOL: f64 = 1e-6;

fn merit_curves(
    dark: &[(f64, f64)],
    illuminated: &IvDataset,
    k: &DeviceConstants,
) -> Result<Vec<MeritCurve>> {
    let mut curves = Vec::new();
    for p in illuminated.intensities() {
        if p <= 0.0 {
            continue;
        }
        let power_w_cm2 = p * 1e-3;
        let mut points = Vec::new();
        for (v, i_light) in illuminated.curve_at(p) {
            let Some(&(_, i_dark)) = dark.iter().find(|d| (d.0 - v).abs() <= VOLTAGE_MATCH_TOL)
            else {
                continue;
            };
            let j_dark = i_dark / k.area_cm2;
            let j_ph = (i_light - i_dark) / k.area_cm2;
            let merit = figures_of_merit(j_ph, j_dark, power_w_cm2, k.wavelength_nm * 1e-9, k.area_cm2)?;
            points.push(MeritPoint { voltage: v, merit });
        }
        let at_operating_voltage = points
            .iter()
            .find(|m| (m.voltage - k.operating_voltage).abs() <= VOLTAGE_MATCH_TOL)
            .map(|m| m.merit);
        curves.push(MeritCurve {
            intensity: p,
            points,
            at_operating_voltage,
        });
    }
    Ok(curves)
}

/// Runs every stage that its inputs allow. Failures are recorded per stage
/// and never abort the remaining stages.
pub fn extract(
    dark: &IvDataset,
    illuminated: Option<&IvDataset>,
    constants: &DeviceConstants,
    transient: Option<&TransientTrace>,
    spectrum: Option<&Spectrum>,
) -> DiodeReport {
    let dark_curve: Vec<(f64, f64)> = dark
        .samples()
        .iter()
        .map(|s| (s.voltage, s.current))
        .collect();
    let mut curves = vec![analyse_curve(&dark_curve, 0.0, constants)];
    if let Some(ill) = illuminated {
        for p in ill.intensities() {
            curves.push(analyse_curve(&ill.curve_at(p), p, constants));
        }
    }
    let figures_of_merit = match illuminated {
        Some(ill) => Stage::from_result(merit_curves(&dark_curve, ill, constants)),
        None => Stage::skipped("no illuminated data"),
    };
    let transient = match transient {
        Some(tr) => Stage::from_result(transient_metrics(&tr.time, &tr.current)),
        None => Stage::skipped("no transient trace"),
    };
    let band_gap = match (spectrum, constants.asf_window_nm) {
        (Some(s), Some(w)) => Stage::from_result(asf_band_gap(s, w)),
        (Some(_), None) => Stage::skipped("no absorption-edge window configured"),
        (None, _) => Stage::skipped("no absorption spectrum"),
    };
    DiodeReport {
        constants: constants.clone(),
        curves,
        figures_of_merit,
        transient,
        band_gap,
    }
}
