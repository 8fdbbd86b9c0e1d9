//! Closed-form overlap of displaced squeezed states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|α, z⟩ = D(α)S(z)|0⟩` with squeezing `z = r·e^{iθ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacedSqueezedParams {
    pub alpha: Complex64,
    pub r: f64,
    pub theta: f64,
}

impl DisplacedSqueezedParams {
    pub fn new(alpha: Complex64, r: f64, theta: f64) -> Self {
        Self { alpha, r, theta }
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Self::new(alpha, 0.0, 0.0)
    }

    /// Squeezing parameter in the bounded convention of the closed form,
    /// `e^{iθ}·tanh r`.
    pub fn bounded_z(&self) -> Result<Complex64> {
        if !(self.r >= 0.0 && self.r.is_finite() && self.theta.is_finite()) {
            return Err(Error::Domain(format!(
                "squeezing magnitude {} must be finite and non-negative",
                self.r
            )));
        }
        Ok(Complex64::from_polar(self.r.tanh(), self.theta))
    }
}

/// The closed-form overlap `⟨α₁, z₁|α₂, z₂⟩` with `z` in the bounded
/// (`|z| < 1`) convention.
pub fn overlap_eq12(a1: Complex64, z1: Complex64, a2: Complex64, z2: Complex64) -> Result<Complex64> {
    if !(z1.norm() < 1.0 && z2.norm() < 1.0) {
        return Err(Error::Domain(format!(
            "|z| must be below 1 (got {} and {})",
            z1.norm(),
            z2.norm()
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let w = one - z2 * z1.conj();
    let pref = (((1.0 - z2.norm_sqr()) * (1.0 - z1.norm_sqr())) / (w * w)).powf(0.25);
    let t1 = (a2 + z2 * a2.conj()) * (a2.conj() + z1.conj() * a2);
    let t2 = (a2 + z2 * a2.conj()) * (a1.conj() + z1.conj() * a1) * 2.0;
    let t3 = (a1 + z2 * a1.conj()) * (a1.conj() + z1.conj() * a1);
    let expo = -(t1 - t2 + t3) / (w * 2.0);
    Ok(pref * expo.exp())
}

/// Closed-form overlap for states given with the gate's squeezing
/// parameter `z = r·e^{iθ}`.
pub fn overlap_analytic(
    a: &DisplacedSqueezedParams,
    b: &DisplacedSqueezedParams,
) -> Result<Complex64> {
    overlap_eq12(a.alpha, a.bounded_z()?, b.alpha, b.bounded_z()?)
}

/// `√(2(1 − |⟨a|b⟩|²))`
pub fn kernel_distance(a: &DisplacedSqueezedParams, b: &DisplacedSqueezedParams) -> Result<f64> {
    let o = overlap_analytic(a, b)?.norm_sqr();
    Ok((2.0 * (1.0 - o)).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_overlap_is_one() {
        let p = DisplacedSqueezedParams::new(Complex64::new(0.7, -0.3), 0.6, 1.1);
        assert!((overlap_analytic(&p, &p).unwrap().norm() - 1.0).abs() < 1e-12);
        assert!(kernel_distance(&p, &p).unwrap() < 1e-6);
    }

    #[test]
    fn coherent_rbf() {
        let a = Complex64::new(0.3, 0.4);
        let b = Complex64::new(-0.5, 0.1);
        let o = overlap_analytic(
            &DisplacedSqueezedParams::coherent(a),
            &DisplacedSqueezedParams::coherent(b),
        )
        .unwrap();
        assert!((o.norm_sqr() - (-(a - b).norm_sqr()).exp()).abs() < 1e-14);
    }

    #[test]
    fn bounded_domain() {
        let z = Complex64::new(1.0, 0.0);
        assert!(overlap_eq12(z, z, z, Complex64::new(0.2, 0.0)).is_err());
        let p = DisplacedSqueezedParams::new(z, -0.1, 0.0);
        assert!(overlap_analytic(&p, &p).is_err());
    }
}
