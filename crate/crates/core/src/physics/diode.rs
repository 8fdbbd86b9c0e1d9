//! Thermionic-emission diode law and the parameter extractions built on it.
//!
//! The forward law is
//!
//! ```text
//! I = I0 · exp(q(V − I·Rs) / n·kT) · [1 − exp(−q(V − I·Rs) / kT)]
//! ```
//!
//! which is implicit in `I` whenever `Rs > 0`.

use serde::{Deserialize, Serialize};

use super::constants::thermal_voltage;
use super::fit::linear_fit;
use crate::error::{Error, Result};

/// Default low-voltage window for the ideality fit, volts.
pub const DEFAULT_IDEALITY_WINDOW: (f64, f64) = (0.05, 0.15);

const MAX_NEWTON_ITERS: usize = 100;

/// Forward model parameters of a thermionic-emission diode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeModel {
    pub ideality: f64,
    /// Reverse saturation current, A.
    pub saturation_current: f64,
    /// Series resistance, Ω.
    pub series_resistance: f64,
    /// Temperature, K.
    pub temperature: f64,
}

impl DiodeModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ideality > 0.0
            && self.saturation_current > 0.0
            && self.series_resistance >= 0.0
            && self.temperature > 0.0
            && self.ideality.is_finite()
            && self.saturation_current.is_finite()
            && self.series_resistance.is_finite()
            && self.temperature.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid diode parameters {self:?}")))
        }
    }

    /// Junction current for a junction voltage `u` (the voltage left after the
    /// series-resistance drop).
    pub fn junction_current(&self, u: f64) -> f64 {
        let vt = thermal_voltage(self.temperature);
        // 1 - exp(-u/vt) == -expm1(-u/vt), accurate near zero bias
        self.saturation_current * (u / (self.ideality * vt)).exp() * -(-u / vt).exp_m1()
    }

    fn junction_slope(&self, u: f64) -> f64 {
        let vt = thermal_voltage(self.temperature);
        let a = 1.0 / (self.ideality * vt);
        let ea = (a * u).exp();
        self.saturation_current * (a * ea * -(-u / vt).exp_m1() + ea * (-u / vt).exp() / vt)
    }

    /// Terminal current at applied voltage `v`.
    ///
    /// For `Rs > 0` the implicit law is solved for the junction voltage
    /// `u ∈ [min(0,V), max(0,V)]` with Newton steps safeguarded by bisection.
    /// The residual function is strictly increasing there, so the root is
    /// unique.
    pub fn current(&self, v: f64) -> Result<f64> {
        self.validate()?;
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("voltage {v} is not finite")));
        }
        let rs = self.series_resistance;
        if rs == 0.0 || v == 0.0 {
            return Ok(self.junction_current(v));
        }
        // h(u) = Rs·f(u) − (V − u); h(lo) <= 0 <= h(hi)
        let h = |u: f64| rs * self.junction_current(u) - (v - u);
        let (mut lo, mut hi) = if v > 0.0 { (0.0, v) } else { (v, 0.0) };
        // start at u = V: Newton is monotone from that side for both branches
        let mut u = v;
        for _ in 0..MAX_NEWTON_ITERS {
            let hu = h(u);
            let current = (v - u) / rs;
            let scale = current.abs().max(self.saturation_current);
            if (hu / rs).abs() <= 1e-15 * scale {
                return Ok(current);
            }
            let slope = rs * self.junction_slope(u) + 1.0;
            // residual no larger than one rounding step of u can produce
            if hu.abs() <= 4.0 * f64::EPSILON * u.abs().max(f64::MIN_POSITIVE) * slope {
                return Ok(current);
            }
            if hu > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let mut next = u - hu / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(f64::MIN_POSITIVE)
                || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs())
            {
                return Ok((v - next) / rs);
            }
            u = next;
        }
        Err(Error::NonConvergence { voltage: v })
    }
}

/// Extracted diode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeFitResult {
    pub ideality: f64,
    pub saturation_current: f64,
    /// Zero-bias barrier height, eV.
    pub barrier_height_ev: f64,
    pub series_resistance: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
}

/// Current predicted by an extracted parameter set.
pub fn thermionic_current(v: f64, fit: &DiodeFitResult, temperature: f64) -> Result<f64> {
    DiodeModel {
        ideality: fit.ideality,
        saturation_current: fit.saturation_current,
        series_resistance: fit.series_resistance,
        temperature,
    }
    .current(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealityFit {
    pub ideality: f64,
    pub saturation_current: f64,
    pub window: (f64, f64),
    /// RMS residual of the ln-current fit.
    pub residual_rms: f64,
    pub points: usize,
}

/// Ideality factor and saturation current from the low-voltage forward
/// region, neglecting series resistance there.
///
/// The fitted quantity is `ln(I / (1 − exp(−qV/kT)))`, which is exactly
/// linear in `V` with slope `q/(n·kT)` for the thermionic law at `Rs = 0`.
pub fn ideality_factor(
    samples: &[(f64, f64)],
    window: (f64, f64),
    temperature: f64,
) -> Result<IdealityFit> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument("temperature must be positive".into()));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Window(format!(
            "ideality window ({lo}, {hi}) must be a forward-bias interval"
        )));
    }
    let vt = thermal_voltage(temperature);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(v, i) in samples.iter().filter(|(v, _)| *v >= lo && *v <= hi) {
        if !(i > 0.0) {
            return Err(Error::DegenerateFit(format!(
                "non-positive current {i} A at {v} V inside the ideality window"
            )));
        }
        xs.push(v);
        ys.push((i / -(-v / vt).exp_m1()).ln());
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} sample(s) inside the ideality window; need at least 3",
            xs.len()
        )));
    }
    let line = linear_fit(&xs, &ys)?;
    if !(line.slope > 0.0) {
        return Err(Error::DegenerateFit("ln I does not increase with V".into()));
    }
    Ok(IdealityFit {
        ideality: 1.0 / (vt * line.slope),
        saturation_current: line.intercept.exp(),
        window,
        residual_rms: line.rms,
        points: line.points,
    })
}

/// Zero-bias barrier height in eV from the saturation current.
///
/// `area_cm2` in cm², `richardson` in A/(cm²·K²).
pub fn barrier_height(
    saturation_current: f64,
    area_cm2: f64,
    richardson: f64,
    temperature: f64,
) -> Result<f64> {
    if !(saturation_current > 0.0 && area_cm2 > 0.0 && richardson > 0.0 && temperature > 0.0) {
        return Err(Error::InvalidArgument(
            "barrier height needs positive I0, area, Richardson constant and temperature".into(),
        ));
    }
    let vt = thermal_voltage(temperature);
    Ok(vt * (area_cm2 * richardson * temperature * temperature / saturation_current).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NordeResult {
    /// Series resistance, Ω. Zero when the minimum is not resolved.
    pub series_resistance: f64,
    /// Barrier height, eV.
    pub barrier_height_ev: f64,
    pub gamma: f64,
    pub v_min: f64,
    pub i_min: f64,
    pub f_min: f64,
    /// False when F(V) keeps decreasing to the last sample; the series
    /// resistance is then below what the sampled range can resolve.
    pub resolved: bool,
    /// Largest series resistance consistent with an unresolved minimum, Ω.
    pub resolution_limit: f64,
}

/// Norde auxiliary-function method, generalised to `n > 1` by taking γ as
/// the smallest integer above `n`:
///
/// ```text
/// F(V) = V/γ − (kT/q)·ln(I / (A·A*·T²))
/// Rs   = kT·(γ − n) / (q·I_min)
/// Φ_B  = F(V_min) + V_min/γ − kT/q
/// ```
///
/// The discrete minimum is refined with a parabola through its neighbours
/// and `I_min` is interpolated log-linearly.
pub fn norde_series_resistance(
    samples: &[(f64, f64)],
    ideality: f64,
    temperature: f64,
    area_cm2: f64,
    richardson: f64,
) -> Result<NordeResult> {
    if !(ideality > 0.0 && temperature > 0.0 && area_cm2 > 0.0 && richardson > 0.0) {
        return Err(Error::InvalidArgument("Norde inputs must be positive".into()));
    }
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(v, i)| v > 0.0 && i > 0.0)
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 3 {
        return Err(Error::Window(format!(
            "{} forward sample(s) with positive current; need at least 3",
            pts.len()
        )));
    }
    let vt = thermal_voltage(temperature);
    let gamma = ideality.floor() + 1.0;
    let denom = area_cm2 * richardson * temperature * temperature;
    let f: Vec<f64> = pts.iter().map(|&(v, i)| v / gamma - vt * (i / denom).ln()).collect();

    let (k, _) = f
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if k == 0 {
        return Err(Error::Window(
            "Norde function increases from the first sample; no interior minimum".into(),
        ));
    }
    let last = pts.len() - 1;
    if k == last {
        let (v, i) = pts[last];
        return Ok(NordeResult {
            series_resistance: 0.0,
            barrier_height_ev: f[last] + v / gamma - vt,
            gamma,
            v_min: v,
            i_min: i,
            f_min: f[last],
            resolved: false,
            resolution_limit: vt * (gamma - ideality) / i,
        });
    }

    let (x0, x1, x2) = (pts[k - 1].0, pts[k].0, pts[k + 1].0);
    let (y0, y1, y2) = (f[k - 1], f[k], f[k + 1]);
    let (v_min, f_min) = parabola_vertex((x0, y0), (x1, y1), (x2, y2)).unwrap_or((x1, y1));
    let i_min = log_interp(&pts, v_min);
    Ok(NordeResult {
        series_resistance: vt * (gamma - ideality) / i_min,
        barrier_height_ev: f_min + v_min / gamma - vt,
        gamma,
        v_min,
        i_min,
        f_min,
        resolved: true,
        resolution_limit: 0.0,
    })
}

fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<(f64, f64)> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a > 0.0) {
        return None;
    }
    let b = d01 - a * (x0 + x1);
    let xv = -b / (2.0 * a);
    if !(xv >= x0 && xv <= x2) {
        return None;
    }
    let yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
    Some((xv, yv))
}

fn log_interp(pts: &[(f64, f64)], v: f64) -> f64 {
    let j = pts.partition_point(|p| p.0 <= v).clamp(1, pts.len() - 1);
    let (va, ia) = pts[j - 1];
    let (vb, ib) = pts[j];
    let t = (v - va) / (vb - va);
    (ia.ln() + t * (ib.ln() - ia.ln())).exp()
}
