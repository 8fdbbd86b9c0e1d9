//! Single-mode continuous-variable simulator on a truncated Fock basis.
//!
//! Quadratures use ℏ = 2: `x̂ = â + â†`, `p̂ = i(â† − â)`, so the vacuum has
//! unit quadrature variance.

mod expm;
mod overlap;
mod wigner;

use log::info;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use expm::{expm, EXPM_TOLERANCE};
pub use overlap::{kernel_distance, overlap_analytic, overlap_eq12, DisplacedSqueezedParams};
pub use wigner::{displacement_elements, wigner, write_wigner_csv, wigner_svg, WignerGrid};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const DEFAULT_CUTOFF: usize = 18;
pub const DEFAULT_LEAK_TOLERANCE: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ladder and quadrature operators on a `D`-dimensional truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub a: CMatrix,
    pub ad: CMatrix,
    pub n: CMatrix,
    pub x: CMatrix,
    pub p: CMatrix,
}

pub fn ladder_matrices(d: usize) -> Result<Ladder> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("cutoff {d} must be at least 2")));
    }
    let a = CMatrix::from_fn(d, d, |r, col| {
        if col == r + 1 {
            c((col as f64).sqrt())
        } else {
            c(0.0)
        }
    });
    let ad = a.adjoint();
    let n = CMatrix::from_diagonal(&CVector::from_fn(d, |k, _| c(k as f64)));
    let x = &a + &ad;
    let p = (&ad - &a) * I;
    Ok(Ladder { a, ad, n, x, p })
}

/// A single-mode gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "kebab-case")]
pub enum Gate {
    /// `exp(iφ n̂)`
    Rotation { phi: f64 },
    /// `exp(½(z*â² − z â†²))`, `z = r·e^{iθ}`
    Squeeze { r: f64, theta: f64 },
    /// `exp(α â† − α* â)`
    Displace { re: f64, im: f64 },
    /// `exp(iκ n̂²)`
    Kerr { kappa: f64 },
    /// `exp(iγ/6 · x̂³)`
    Cubic { gamma: f64 },
}

/// A gate as a concrete operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOp {
    Diagonal(CVector),
    Dense(CMatrix),
}

impl GateOp {
    pub fn apply(&self, psi: &CVector) -> CVector {
        match self {
            GateOp::Diagonal(d) => psi.component_mul(d),
            GateOp::Dense(m) => m * psi,
        }
    }

    /// Writes `op·psi` into `out` without allocating.
    pub fn apply_into(&self, psi: &CVector, out: &mut CVector) {
        match self {
            GateOp::Diagonal(d) => {
                for ((o, p), g) in out.iter_mut().zip(psi.iter()).zip(d.iter()) {
                    *o = p * g;
                }
            }
            GateOp::Dense(m) => m.mul_to(psi, out),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            GateOp::Diagonal(d) => CMatrix::from_diagonal(d),
            GateOp::Dense(m) => m.clone(),
        }
    }
}

/// Truncated Fock space of dimension `dim` with cached operators.
///
/// Non-diagonal gates are exponentiated on a larger working space of
/// `dim + padding` levels and then cut back to `dim`, so amplitude pushed
/// past the cutoff shows up as a norm leak instead of being reflected
/// back into the kept levels.
#[derive(Debug, Clone)]
pub struct FockSpace {
    dim: usize,
    padding: usize,
    leak_tolerance: f64,
    ops: Ladder,
    work: Ladder,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_padding(dim, dim)
    }

    pub fn with_padding(dim: usize, padding: usize) -> Result<Self> {
        Ok(Self {
            dim,
            padding,
            leak_tolerance: DEFAULT_LEAK_TOLERANCE,
            ops: ladder_matrices(dim)?,
            work: ladder_matrices(dim + padding)?,
        })
    }

    pub fn with_leak_tolerance(mut self, tol: f64) -> Self {
        self.leak_tolerance = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn leak_tolerance(&self) -> f64 {
        self.leak_tolerance
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ops
    }

    pub fn vacuum(&self) -> FockState {
        FockState::vacuum(self.dim)
    }

    fn truncated_expm(&self, generator: CMatrix) -> CMatrix {
        expm(&generator).view((0, 0), (self.dim, self.dim)).into_owned()
    }

    pub fn displacement_matrix(&self, alpha: Complex64) -> CMatrix {
        let w = &self.work;
        self.truncated_expm(&w.ad * alpha - &w.a * alpha.conj())
    }

    pub fn squeezing_matrix(&self, r: f64, theta: f64) -> CMatrix {
        let z = Complex64::from_polar(r, theta);
        let w = &self.work;
        let a2 = &w.a * &w.a;
        let ad2 = &w.ad * &w.ad;
        self.truncated_expm((a2 * z.conj() - ad2 * z) * c(0.5))
    }

    pub fn cubic_matrix(&self, gamma: f64) -> CMatrix {
        let x = &self.work.x;
        let x3 = x * x * x;
        self.truncated_expm(x3 * (I * (gamma / 6.0)))
    }

    pub fn rotation_phases(&self, phi: f64) -> CVector {
        CVector::from_fn(self.dim, |n, _| Complex64::from_polar(1.0, phi * n as f64))
    }

    pub fn kerr_phases(&self, kappa: f64) -> CVector {
        CVector::from_fn(self.dim, |n, _| {
            let n = n as f64;
            Complex64::from_polar(1.0, kappa * n * n)
        })
    }

    pub fn gate_op(&self, gate: &Gate) -> Result<GateOp> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match *gate {
            Gate::Rotation { phi } => finite(&[phi]),
            Gate::Squeeze { r, theta } => finite(&[r, theta]) && r >= 0.0,
            Gate::Displace { re, im } => finite(&[re, im]),
            Gate::Kerr { kappa } => finite(&[kappa]),
            Gate::Cubic { gamma } => finite(&[gamma]),
        };
        if !ok {
            return Err(Error::Domain(format!("invalid gate parameters {gate:?}")));
        }
        Ok(match *gate {
            Gate::Rotation { phi } => GateOp::Diagonal(self.rotation_phases(phi)),
            Gate::Kerr { kappa } => GateOp::Diagonal(self.kerr_phases(kappa)),
            Gate::Squeeze { r, theta } => GateOp::Dense(self.squeezing_matrix(r, theta)),
            Gate::Displace { re, im } => {
                GateOp::Dense(self.displacement_matrix(Complex64::new(re, im)))
            }
            Gate::Cubic { gamma } => GateOp::Dense(self.cubic_matrix(gamma)),
        })
    }

    /// Applies `gate`, failing if more than the leak tolerance of the norm
    /// is lost past the cutoff.
    pub fn apply(&self, state: &FockState, gate: &Gate) -> Result<FockState> {
        let (out, leak) = self.apply_with_leak(state, gate)?;
        if leak > self.leak_tolerance {
            return Err(Error::Truncation {
                leak,
                tolerance: self.leak_tolerance,
            });
        }
        Ok(out)
    }

    /// Applies `gate` and reports the norm lost, `‖ψ‖² − ‖ψ′‖²`.
    pub fn apply_with_leak(&self, state: &FockState, gate: &Gate) -> Result<(FockState, f64)> {
        self.check_dim(state)?;
        let op = self.gate_op(gate)?;
        let out = FockState {
            amplitudes: op.apply(&state.amplitudes),
        };
        let leak = state.norm_sqr() - out.norm_sqr();
        Ok((out, leak))
    }

    pub fn apply_rotation(&self, s: &FockState, phi: f64) -> Result<FockState> {
        self.apply(s, &Gate::Rotation { phi })
    }

    pub fn apply_kerr(&self, s: &FockState, kappa: f64) -> Result<FockState> {
        self.apply(s, &Gate::Kerr { kappa })
    }

    pub fn apply_cubic(&self, s: &FockState, gamma: f64) -> Result<FockState> {
        self.apply(s, &Gate::Cubic { gamma })
    }

    pub fn apply_displacement(&self, s: &FockState, alpha: Complex64) -> Result<FockState> {
        self.apply(
            s,
            &Gate::Displace {
                re: alpha.re,
                im: alpha.im,
            },
        )
    }

    /// Squeezing by `z = r·e^{iθ}`.
    pub fn apply_squeezing(&self, s: &FockState, r: f64, theta: f64) -> Result<FockState> {
        self.apply(s, &Gate::Squeeze { r, theta })
    }

    /// `D(α)·S(z)|0⟩`.
    pub fn prepare_displaced_squeezed(&self, alpha: Complex64, r: f64, theta: f64) -> Result<FockState> {
        let s = self.apply_squeezing(&self.vacuum(), r, theta)?;
        self.apply_displacement(&s, alpha)
    }

    fn check_dim(&self, state: &FockState) -> Result<()> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: state.dim(),
            });
        }
        Ok(())
    }

    fn observable_matrix(&self, o: Observable) -> Option<&CMatrix> {
        match o {
            Observable::X => Some(&self.ops.x),
            Observable::P => Some(&self.ops.p),
            Observable::N => Some(&self.ops.n),
            Observable::Identity => None,
        }
    }

    /// Raw `⟨ψ|Ô|ψ⟩` (no renormalisation).
    pub fn expectation(&self, state: &FockState, o: Observable) -> Result<f64> {
        self.check_dim(state)?;
        Ok(match self.observable_matrix(o) {
            None => state.norm_sqr(),
            Some(m) => state.amplitudes.dotc(&(m * &state.amplitudes)).re,
        })
    }

    /// `⟨Ô²⟩ − ⟨Ô⟩²` for a normalised state.
    pub fn variance(&self, state: &FockState, o: Observable) -> Result<f64> {
        self.check_dim(state)?;
        let Some(m) = self.observable_matrix(o) else {
            return Ok(0.0);
        };
        let v = m * &state.amplitudes;
        let mean = state.amplitudes.dotc(&v).re;
        Ok(v.norm_squared() - mean * mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    X,
    P,
    N,
    Identity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FockStateJson {
    cutoff: usize,
    amplitudes: Vec<[f64; 2]>,
}

/// Amplitudes over photon numbers `0..D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FockStateJson", try_from = "FockStateJson")]
pub struct FockState {
    pub amplitudes: CVector,
}

impl From<FockState> for FockStateJson {
    fn from(s: FockState) -> Self {
        Self {
            cutoff: s.dim(),
            amplitudes: s.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<FockStateJson> for FockState {
    type Error = String;
    fn try_from(j: FockStateJson) -> std::result::Result<Self, String> {
        if j.cutoff != j.amplitudes.len() || j.cutoff < 2 {
            return Err(format!(
                "cutoff {} does not match {} amplitudes",
                j.cutoff,
                j.amplitudes.len()
            ));
        }
        Ok(Self {
            amplitudes: CVector::from_iterator(
                j.cutoff,
                j.amplitudes.iter().map(|[re, im]| Complex64::new(*re, *im)),
            ),
        })
    }
}

impl FockState {
    pub fn vacuum(dim: usize) -> Self {
        let mut amplitudes = CVector::zeros(dim);
        amplitudes[0] = c(1.0);
        Self { amplitudes }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidArgument("a state needs at least two levels".into()));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if !(norm <= 1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!("state norm² {norm} exceeds 1")));
        }
        Ok(Self {
            amplitudes: CVector::from_vec(amplitudes),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨ψ|ψ⟩`, the trace of the (possibly leaky) state.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &FockState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn photon_distribution(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Rescales to unit norm. This hides truncation loss, so it is logged.
    pub fn renormalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n == 0.0 {
            return Err(Error::Domain("cannot renormalise a zero state".into()));
        }
        info!("renormalising Fock state with norm² {n:.9}");
        Ok(Self {
            amplitudes: &self.amplitudes / c(n.sqrt()),
        })
    }
}
