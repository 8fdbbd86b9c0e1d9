use serde::{Deserialize, Serialize};

use super::constants::{thermal_voltage, EPS_0, Q};
use super::fit::{two_segment_fit, LineFit, TwoSegmentFit};
use crate::error::{Error, Result};

const MIN_SEGMENT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConductionLabel {
    /// log-log slope close to one.
    Ohmic,
    /// Space-charge-limited conduction, log-log slope above two.
    Sclc,
    Intermediate,
}

impl ConductionLabel {
    pub fn from_slope(slope: f64) -> Self {
        if (slope - 1.0).abs() <= 0.25 {
            Self::Ohmic
        } else if slope > 2.0 {
            Self::Sclc
        } else {
            Self::Intermediate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardRegion {
    pub v_range: (f64, f64),
    pub slope: f64,
    pub label: ConductionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportAnalysis {
    /// One region when the data follow a single power law, otherwise two.
    pub regions: Vec<ForwardRegion>,
    /// Index of the first sample of the second region.
    pub breakpoint: Option<usize>,
    pub breakpoint_voltage: Option<f64>,
    /// Both candidate segments had the same slope.
    pub degenerate: bool,
}

/// Two-regime power-law analysis of the forward branch: `ln I` versus `ln V`
/// is fitted by two lines with an exhaustively scanned breakpoint.
pub fn transport_regions(samples: &[(f64, f64)]) -> Result<TransportAnalysis> {
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(v, i)| v > 0.0 && i > 0.0)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fit = two_segment_fit(&x, &y, MIN_SEGMENT_POINTS)?;
    let region = |line: &LineFit, a: usize, b: usize| ForwardRegion {
        v_range: (pts[a].0, pts[b].0),
        slope: line.slope,
        label: ConductionLabel::from_slope(line.slope),
    };
    let last = pts.len() - 1;
    if fit.degenerate {
        return Ok(TransportAnalysis {
            regions: vec![region(&fit.single, 0, last)],
            breakpoint: None,
            breakpoint_voltage: None,
            degenerate: true,
        });
    }
    Ok(TransportAnalysis {
        regions: vec![
            region(&fit.left, 0, fit.breakpoint - 1),
            region(&fit.right, fit.breakpoint, last),
        ],
        breakpoint: Some(fit.breakpoint),
        breakpoint_voltage: Some(pts[fit.breakpoint].0),
        degenerate: false,
    })
}

/// Field-lowering coefficient `√(q³ / (b·π·ε·ε₀))` in eV·m^½·V^-½.
///
/// `b = 1` gives the Poole–Frenkel value, `b = 4` the Schottky value.
pub fn beta_theory(dielectric: f64, b: f64) -> Result<f64> {
    if !(dielectric > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(
            "dielectric constant and b must be positive".into(),
        ));
    }
    // dividing the J-valued coefficient by q converts to eV
    Ok((Q.powi(3) / (b * std::f64::consts::PI * dielectric * EPS_0)).sqrt() / Q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionMechanism {
    PooleFrenkel,
    Schottky,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaRegion {
    /// Reverse-voltage magnitudes covered, V.
    pub v_range: (f64, f64),
    /// Experimental β, eV·m^½·V^-½.
    pub beta: f64,
    pub mechanism: EmissionMechanism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseAnalysis {
    pub beta_poole_frenkel: f64,
    pub beta_schottky: f64,
    pub regions: Vec<BetaRegion>,
    pub degenerate: bool,
}

/// Reverse-bias field-emission analysis.
///
/// The field is `E = |V| / spacing`; β is the slope of `ln|I|` against
/// `E^½` multiplied by `kT/q`. Each region is assigned to whichever
/// theoretical β it is closest to.
pub fn field_emission_beta(
    samples: &[(f64, f64)],
    dielectric: f64,
    spacing_m: f64,
    temperature: f64,
) -> Result<ReverseAnalysis> {
    if !(spacing_m > 0.0 && temperature > 0.0) {
        return Err(Error::InvalidArgument(
            "electrode spacing and temperature must be positive".into(),
        ));
    }
    let beta_pf = beta_theory(dielectric, 1.0)?;
    let beta_sc = beta_theory(dielectric, 4.0)?;
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(v, i)| v < 0.0 && i != 0.0)
        .map(|&(v, i)| (v.abs(), i.abs()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x: Vec<f64> = pts.iter().map(|p| (p.0 / spacing_m).sqrt()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let vt = thermal_voltage(temperature);

    let classify = |beta: f64| {
        if (beta - beta_pf).abs() <= (beta - beta_sc).abs() {
            EmissionMechanism::PooleFrenkel
        } else {
            EmissionMechanism::Schottky
        }
    };
    let region = |line: &LineFit, a: usize, b: usize| {
        let beta = line.slope * vt;
        BetaRegion {
            v_range: (pts[a].0, pts[b].0),
            beta,
            mechanism: classify(beta),
        }
    };

    let fit: Option<TwoSegmentFit> = if pts.len() >= 2 * MIN_SEGMENT_POINTS {
        Some(two_segment_fit(&x, &y, MIN_SEGMENT_POINTS)?)
    } else {
        None
    };
    let last = pts.len().saturating_sub(1);
    let (regions, degenerate) = match fit {
        Some(f) if !f.degenerate => (
            vec![
                region(&f.left, 0, f.breakpoint - 1),
                region(&f.right, f.breakpoint, last),
            ],
            false,
        ),
        Some(f) => (vec![region(&f.single, 0, last)], true),
        None => {
            if pts.len() < MIN_SEGMENT_POINTS {
                return Err(Error::DegenerateFit(format!(
                    "{} reverse sample(s); need at least {MIN_SEGMENT_POINTS}",
                    pts.len()
                )));
            }
            let line = super::fit::linear_fit(&x, &y)?;
            (vec![region(&line, 0, last)], true)
        }
    };
    if regions.iter().any(|r| !(r.beta > 0.0)) {
        return Err(Error::DegenerateFit(
            "reverse current does not grow with field".into(),
        ));
    }
    Ok(ReverseAnalysis {
        beta_poole_frenkel: beta_pf,
        beta_schottky: beta_sc,
        regions,
        degenerate,
    })
}
