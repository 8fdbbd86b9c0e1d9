//! Diode physics extraction: thermionic emission fits, Norde series
//! resistance, conduction-mechanism analysis, photodetector figures of
//! merit, transient response and optical band gap.
//!
//! Units follow device-characterisation practice: volts, amperes, kelvin,
//! areas in cm², current densities in A/cm², optical power in W/cm².

mod asf;
mod diode;
mod fit;
mod merit;
mod report;
mod transient;
mod transport;

pub use asf::{asf_band_gap, AsfResult, Spectrum};
pub use diode::{
    barrier_height, ideality_factor, norde_series_resistance, thermionic_current, DiodeFitResult,
    DiodeModel, IdealityFit, NordeResult, DEFAULT_IDEALITY_WINDOW,
};
pub use fit::{linear_fit, two_segment_fit, LineFit, TwoSegmentFit};
pub use merit::{figures_of_merit, FiguresOfMerit};
pub use report::{
    extract, CurveReport, DeviceConstants, DiodeReport, MeritCurve, MeritPoint, Stage, TransientTrace,
};
pub use transient::{transient_metrics, CycleMetrics, TransientMetrics};
pub use transport::{
    beta_theory, field_emission_beta, transport_regions, BetaRegion, ConductionLabel,
    EmissionMechanism, ForwardRegion, ReverseAnalysis, TransportAnalysis,
};

/// Fixed CODATA 2018 constants (SI).
pub mod constants {
    /// Elementary charge, C.
    pub const Q: f64 = 1.602_176_634e-19;
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380_649e-23;
    /// Planck constant, J·s.
    pub const H: f64 = 6.626_070_15e-34;
    /// Speed of light, m/s.
    pub const C: f64 = 2.997_924_58e8;
    /// Vacuum permittivity, F/m.
    pub const EPS_0: f64 = 8.854_187_812_8e-12;

    /// hc/q expressed in eV·nm (photon energy of a 1 nm photon).
    pub const HC_OVER_Q_EV_NM: f64 = H * C / Q * 1e9;

    /// Thermal voltage k_B·T/q in volts.
    pub fn thermal_voltage(temperature: f64) -> f64 {
        K_B * temperature / Q
    }
}

/// Richardson constant default for p-Si, A/(cm²·K²). Not a measured value.
pub const DEFAULT_RICHARDSON: f64 = 32.0;
/// Active area default, cm². Not a measured value.
pub const DEFAULT_AREA_CM2: f64 = 0.01;
/// Film thickness used to convert reverse voltage into field, m.
pub const DEFAULT_FILM_THICKNESS_M: f64 = 150e-9;
/// Relative dielectric constant of NTCDA.
pub const DEFAULT_DIELECTRIC: f64 = 2.89;
