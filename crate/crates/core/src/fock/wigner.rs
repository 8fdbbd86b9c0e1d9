//! Wigner function by displaced parity.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{CMatrix, FockState};

/// `⟨m|D(γ)|n⟩` for `m < rows`, `n < cols`, from the closed form
///
/// ```text
/// ⟨m|D(γ)|n⟩ = √(n!/m!) · γ^(m−n) · e^{−|γ|²/2} · L_n^(m−n)(|γ|²)    m ≥ n
/// ⟨m|D(γ)|n⟩ = √(m!/n!) · (−γ*)^(n−m) · e^{−|γ|²/2} · L_m^(n−m)(|γ|²)  m < n
/// ```
///
/// with the generalised Laguerre polynomials run upward in degree. A
/// recurrence across columns loses all precision once |γ| reaches ~5.
pub fn displacement_elements(gamma: Complex64, rows: usize, cols: usize) -> CMatrix {
    let mut d = CMatrix::zeros(rows, cols);
    let x = gamma.norm_sqr();
    let g0 = (-0.5 * x).exp();
    let gc = -gamma.conj();
    let mut lag = Vec::new();
    // offset a = |m − n|; the lower index k = min(m, n) runs along the diagonal
    for a in 0..rows.max(cols) {
        let below = if a < rows { (rows - a).min(cols) } else { 0 };
        let above = if a < cols { (cols - a).min(rows) } else { 0 };
        let len = below.max(above);
        if len == 0 {
            continue;
        }
        laguerre(len, a as f64, x, &mut lag);
        // pref = √(k!/(k+a)!) · g^a · e^{−x/2}, updated along k
        let mut pow_lo = Complex64::new(g0, 0.0);
        let mut pow_hi = Complex64::new(g0, 0.0);
        for j in 1..=a {
            let s = (j as f64).sqrt();
            pow_lo *= gamma / s;
            pow_hi *= gc / s;
        }
        for (k, l) in lag.iter().enumerate().take(len) {
            if k > 0 {
                let s = (k as f64 / (k + a) as f64).sqrt();
                pow_lo *= s;
                pow_hi *= s;
            }
            let (m, n) = (k + a, k);
            if m < rows && n < cols {
                d[(m, n)] = pow_lo * *l;
            }
            if a > 0 && n < rows && m < cols {
                d[(n, m)] = pow_hi * *l;
            }
        }
    }
    d
}

/// `L_k^(a)(x)` for `k < len`.
fn laguerre(len: usize, a: f64, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if len > 1 {
        out.push(1.0 + a - x);
    }
    for k in 1..len.saturating_sub(1) {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

fn parity_rows(dim: usize, beta: Complex64) -> usize {
    let b = beta.norm();
    dim + (b * b + 10.0 * b + 20.0).ceil() as usize
}

/// `W(x, p) = (1/2π) Σₙ (−1)ⁿ |⟨n|D(−β)|ψ⟩|²` with `β = (x + ip)/2`.
pub fn wigner_point(state: &FockState, x: f64, p: f64) -> f64 {
    let beta = Complex64::new(x, p) * 0.5;
    let rows = parity_rows(state.dim(), beta);
    let d = displacement_elements(-beta, rows, state.dim());
    let shifted = d * &state.amplitudes;
    let s: f64 = shifted
        .iter()
        .enumerate()
        .map(|(n, a)| if n % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum();
    s / (2.0 * std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `values[(i, j)] = W(x[i], p[j])`
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// Riemann sum assuming uniform spacing on both axes.
    pub fn integral(&self) -> f64 {
        let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1.0 };
        self.values.sum() * step(&self.x) * step(&self.p)
    }

    /// Variance of the x-marginal (quadrature over p).
    pub fn x_variance(&self) -> f64 {
        let w: Vec<f64> = self.values.row_iter().map(|r| r.sum()).collect();
        weighted_variance(&self.x, &w)
    }

    pub fn p_variance(&self) -> f64 {
        let w: Vec<f64> = self.values.column_iter().map(|c| c.sum()).collect();
        weighted_variance(&self.p, &w)
    }
}

fn weighted_variance(v: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let mean = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    v.iter().zip(w).map(|(a, b)| (a - mean).powi(2) * b).sum::<f64>() / total
}

/// Wigner function sampled on the Cartesian product of the two grids.
pub fn wigner(state: &FockState, xs: &[f64], ps: &[f64]) -> WignerGrid {
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| ps.iter().map(|&p| wigner_point(state, x, p)).collect())
        .collect();
    WignerGrid {
        x: xs.to_vec(),
        p: ps.to_vec(),
        values: DMatrix::from_fn(xs.len(), ps.len(), |i, j| rows[i][j]),
    }
}

pub fn write_wigner_csv(grid: &WignerGrid, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "x,p,W")?;
    for (i, x) in grid.x.iter().enumerate() {
        for (j, p) in grid.p.iter().enumerate() {
            writeln!(w, "{x},{p},{:e}", grid.values[(i, j)])?;
        }
    }
    Ok(())
}

/// Heatmap with x horizontal and p vertical; red positive, blue negative.
pub fn wigner_svg(grid: &WignerGrid, cell: usize) -> String {
    let (nx, np) = (grid.x.len(), grid.p.len());
    let scale = grid.max().abs().max(grid.min().abs()).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" shape-rendering="crispEdges">"#,
        nx * cell,
        np * cell
    );
    for i in 0..nx {
        for j in 0..np {
            let v = grid.values[(i, j)] / scale;
            let fade = (255.0 * (1.0 - v.abs())).round().clamp(0.0, 255.0) as u8;
            let (r, g, b) = if v >= 0.0 {
                (255, fade, fade)
            } else {
                (fade, fade, 255)
            };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({r},{g},{b})"/>"#,
                i * cell,
                (np - 1 - j) * cell
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
