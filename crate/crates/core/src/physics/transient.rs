//! Rise/fall times and ON/OFF ratio from a square-wave photocurrent trace.
//!
//! Edges are located where the trace crosses the midpoint between its
//! extremes. Each edge is measured between the plateau levels on either
//! side (median of the samples between crossings), from 10% to 90% of the
//! step, with linear interpolation between samples. Magnitudes of the
//! current are used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    pub rise_time: f64,
    pub fall_time: f64,
    pub on_level: f64,
    pub off_level: f64,
    pub on_off_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientMetrics {
    /// Mean 10%→90% rise time, in the trace's time unit.
    pub rise_time: f64,
    /// Mean 90%→10% fall time.
    pub fall_time: f64,
    pub on_off_ratio: f64,
    /// Mean OFF plateau current.
    pub residual_off_current: f64,
    pub cycles: Vec<CycleMetrics>,
}

pub fn transient_metrics(times: &[f64], current: &[f64]) -> Result<TransientMetrics> {
    if times.len() != current.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: current.len(),
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "trace times must be strictly increasing".into(),
        ));
    }
    let y: Vec<f64> = current.iter().map(|c| c.abs()).collect();
    if y.len() < 4 || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoCycles);
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::NoCycles);
    }
    let mid = 0.5 * (lo + hi);

    // edges: (index of first sample past the crossing, rising?)
    let mut edges = Vec::new();
    for k in 1..y.len() {
        if y[k - 1] < mid && y[k] >= mid {
            edges.push((k, true));
        } else if y[k - 1] >= mid && y[k] < mid {
            edges.push((k, false));
        }
    }

    // median of the samples between two crossings; the segment also holds
    // the tail of one transition and the head of the next
    let plateau = |a: usize, b: usize| -> f64 {
        let mut seg = y[a..b].to_vec();
        seg.sort_by(f64::total_cmp);
        let m = seg.len() / 2;
        if seg.len() % 2 == 1 {
            seg[m]
        } else {
            0.5 * (seg[m - 1] + seg[m])
        }
    };

    let mut cycles = Vec::new();
    for w in 0..edges.len() {
        let (r, rising) = edges[w];
        if !rising || w + 1 >= edges.len() {
            continue;
        }
        let (f, falling) = edges[w + 1];
        if falling {
            continue;
        }
        // OFF plateau before the rise and after the fall
        let off_start = if w == 0 { 0 } else { edges[w - 1].0 };
        let off_end = edges.get(w + 2).map_or(y.len(), |e| e.0);
        if r - off_start < 2 || off_end - f < 2 {
            continue;
        }
        let off_before = plateau(off_start, r);
        let on = plateau(r, f);
        let off_after = plateau(f, off_end);

        let rise = edge_time(times, &y, r, off_before, on);
        let fall = edge_time(times, &y, f, on, off_after);
        let (Some(rise), Some(fall)) = (rise, fall) else {
            continue;
        };
        let off = 0.5 * (off_before + off_after);
        cycles.push(CycleMetrics {
            rise_time: rise,
            fall_time: fall,
            on_level: on,
            off_level: off,
            on_off_ratio: on / off,
        });
    }
    if cycles.is_empty() {
        return Err(Error::NoCycles);
    }
    let m = cycles.len() as f64;
    let mean = |g: fn(&CycleMetrics) -> f64| cycles.iter().map(g).sum::<f64>() / m;
    Ok(TransientMetrics {
        rise_time: mean(|c| c.rise_time),
        fall_time: mean(|c| c.fall_time),
        on_off_ratio: mean(|c| c.on_off_ratio),
        residual_off_current: mean(|c| c.off_level),
        cycles,
    })
}

/// Time for the trace to go from 10% to 90% of the way from `from` to `to`
/// around the crossing at index `k`.
fn edge_time(times: &[f64], y: &[f64], k: usize, from: f64, to: f64) -> Option<f64> {
    let step = to - from;
    if step == 0.0 {
        return None;
    }
    // progress along the step: 0 at `from`, 1 at `to`
    let s = |i: usize| (y[i] - from) / step;
    let mut j = k - 1;
    while j > 0 && s(j) > 0.1 {
        j -= 1;
    }
    let t10 = cross(times, j, s(j), s(j + 1), 0.1)?;
    let mut i = k;
    while i + 1 < y.len() && s(i) < 0.9 {
        i += 1;
    }
    if s(i) < 0.9 {
        return None;
    }
    let t90 = cross(times, i - 1, s(i - 1), s(i), 0.9)?;
    Some(t90 - t10)
}

fn cross(times: &[f64], j: usize, a: f64, b: f64, level: f64) -> Option<f64> {
    if a == b {
        return Some(times[j]);
    }
    let t = ((level - a) / (b - a)).clamp(0.0, 1.0);
    Some(times[j] + t * (times[j + 1] - times[j]))
}
