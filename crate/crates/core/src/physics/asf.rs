use serde::{Deserialize, Serialize};

use super::constants::HC_OVER_Q_EV_NM;
use super::fit::linear_fit;
use crate::error::{Error, Result};

/// Absorbance spectrum sampled at wavelengths in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub wavelength_nm: Vec<f64>,
    pub absorbance: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsfResult {
    pub band_gap_ev: f64,
    /// Absorption edge wavelength, nm.
    pub edge_nm: f64,
    /// Slope of (Abs/λ)^½ against 1/λ.
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Absorption-spectrum-fitting band gap.
///
/// `(Abs/λ)^½` is fitted linearly against `1/λ` over the wavelength window;
/// the x-intercept is `1/λ_g` and `E_g = hc/(q·λ_g)`.
pub fn asf_band_gap(spectrum: &Spectrum, window_nm: (f64, f64)) -> Result<AsfResult> {
    if spectrum.wavelength_nm.len() != spectrum.absorbance.len() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.wavelength_nm.len(),
            got: spectrum.absorbance.len(),
        });
    }
    let (lo, hi) = (window_nm.0.min(window_nm.1), window_nm.0.max(window_nm.1));
    let (x, y): (Vec<f64>, Vec<f64>) = spectrum
        .wavelength_nm
        .iter()
        .zip(&spectrum.absorbance)
        .filter(|&(&l, &a)| l >= lo && l <= hi && l > 0.0 && a > 0.0)
        .map(|(&l, &a)| (1.0 / l, (a / l).sqrt()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::Window(format!(
            "{} positive-absorbance point(s) in window; need at least 3",
            x.len()
        )));
    }
    let line = linear_fit(&x, &y)?;
    let spread = x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().copied().fold(f64::INFINITY, f64::min);
    let level = y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
    if (line.slope * spread).abs() <= 1e-9 * level {
        return Err(Error::DegenerateFit(
            "flat window: no x-intercept for the absorption edge".into(),
        ));
    }
    let inv_edge = -line.intercept / line.slope;
    if !(inv_edge > 0.0 && inv_edge.is_finite()) {
        return Err(Error::DegenerateFit(format!(
            "non-positive x-intercept {inv_edge} for the absorption edge"
        )));
    }
    let edge_nm = 1.0 / inv_edge;
    Ok(AsfResult {
        band_gap_ev: HC_OVER_Q_EV_NM / edge_nm,
        edge_nm,
        slope: line.slope,
        intercept: line.intercept,
        points: line.points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_window_has_no_edge() {
        let wavelength_nm: Vec<f64> = (0..10).map(|k| 300.0 + 10.0 * k as f64).collect();
        // (Abs/λ)^½ constant: zero slope
        let absorbance = wavelength_nm.iter().map(|l| 0.04 * l).collect();
        let s = Spectrum {
            wavelength_nm,
            absorbance,
        };
        assert!(asf_band_gap(&s, (300.0, 400.0)).is_err());
    }
}
