use serde::{Deserialize, Serialize};

use super::constants::{C, H, Q};
use crate::error::{Error, Result};

/// Photodetector figures of merit at one operating point.
///
/// Detectivity, noise current and NEP are `None` when the dark current
/// density is zero: shot-noise-limited detectivity is undefined there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiguresOfMerit {
    /// Responsivity, A/W.
    pub responsivity: f64,
    /// Specific detectivity, Jones (cm·Hz^½/W).
    pub detectivity: Option<f64>,
    /// External quantum efficiency, %.
    pub eqe_percent: f64,
    /// Noise current, A/Hz^½.
    pub noise_current: Option<f64>,
    /// Noise-equivalent power, W/Hz^½.
    pub nep: Option<f64>,
    pub area_cm2: f64,
    pub wavelength_m: f64,
    pub j_dark: f64,
    pub j_ph: f64,
}

impl FiguresOfMerit {
    pub fn detectivity_undefined(&self) -> bool {
        self.detectivity.is_none()
    }
}

/// Responsivity, detectivity, EQE, noise current and NEP.
///
/// Current densities in A/cm² (magnitudes are used, so reverse-bias
/// photocurrents may be passed with their sign), optical power density in
/// W/cm², wavelength in metres, area in cm².
pub fn figures_of_merit(
    j_ph: f64,
    j_dark: f64,
    power_w_cm2: f64,
    wavelength_m: f64,
    area_cm2: f64,
) -> Result<FiguresOfMerit> {
    if !(power_w_cm2 > 0.0) {
        return Err(Error::InvalidArgument(
            "optical power density must be positive".into(),
        ));
    }
    if !(wavelength_m > 0.0 && area_cm2 > 0.0) {
        return Err(Error::InvalidArgument(
            "wavelength and area must be positive".into(),
        ));
    }
    if !(j_ph.is_finite() && j_dark.is_finite()) {
        return Err(Error::InvalidArgument("current densities must be finite".into()));
    }
    let j_ph = j_ph.abs();
    let j_dark = j_dark.abs();
    let responsivity = j_ph / power_w_cm2;
    let eqe_percent = H * C / (wavelength_m * Q) * responsivity * 100.0;
    let (detectivity, noise_current, nep) = if j_dark > 0.0 {
        let d = responsivity / (2.0 * Q * j_dark).sqrt();
        let i_n = responsivity * area_cm2.sqrt() / d;
        let nep = if responsivity > 0.0 {
            Some(i_n / responsivity)
        } else {
            None
        };
        (Some(d), Some(i_n), nep)
    } else {
        (None, None, None)
    };
    Ok(FiguresOfMerit {
        responsivity,
        detectivity,
        eqe_percent,
        noise_current,
        nep,
        area_cm2,
        wavelength_m,
        j_dark,
        j_ph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_responsivity() {
        let f = figures_of_merit(0.065, 1e-6, 0.065, 194e-9, 0.01).unwrap();
        assert!((f.responsivity - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_power_is_an_error() {
        assert!(figures_of_merit(1e-3, 1e-6, 0.0, 194e-9, 0.01).is_err());
    }

    #[test]
    fn zero_dark_current_flags_detectivity() {
        let f = figures_of_merit(1e-3, 0.0, 0.065, 194e-9, 0.01).unwrap();
        assert!(f.detectivity_undefined());
        assert!(f.noise_current.is_none());
    }

    #[test]
    fn noise_relations_hold() {
        let f = figures_of_merit(1.2e-3, 5e-4, 0.065, 194e-9, 0.01).unwrap();
        let d = f.detectivity.unwrap();
        let i_n = f.noise_current.unwrap();
        let nep = f.nep.unwrap();
        assert!((i_n - nep * f.responsivity).abs() <= 1e-12 * i_n);
        assert!((d - f.area_cm2.sqrt() * f.responsivity / i_n).abs() <= 1e-12 * d);
    }
}
