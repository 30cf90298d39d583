//! Network-construction sweeps and power-law fits.

use serde::Serialize;

use crate::circuit::{make_layout, DepthReport, EncoderMode};
use crate::comm::{run_schedule, CommSession, Schedule};
use crate::error::Result;
use crate::source::Source;
use crate::storage::{build_parallel_encoder, default_delta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleRow {
    pub n: usize,
    pub idealized_depth: usize,
    pub strict_depth: usize,
    pub gate_count: usize,
    pub sequential_gates: usize,
}

impl ScaleRow {
    fn new(n: usize, d: DepthReport) -> Self {
        Self {
            n,
            idealized_depth: d.idealized_depth,
            strict_depth: d.strict_depth,
            gate_count: d.gate_count,
            sequential_gates: d.sequential_gates(),
        }
    }
}

/// Merge-tree encoder cost for a block of `n` signals.
pub fn storage_row(src: &Source, n: usize) -> Result<ScaleRow> {
    let layout = make_layout(n, src.code(), EncoderMode::Parallel)?;
    Ok(ScaleRow::new(n, build_parallel_encoder(&layout)?.depth_metrics()))
}

/// Cost of a full streamed session (flush after every signal, then decode).
pub fn comm_row(src: &Source, n: usize) -> Result<ScaleRow> {
    let mut s = CommSession::construction_only(src, n, default_delta(src, n))?;
    run_schedule(&mut s, &Schedule::default())?;
    Ok(ScaleRow::new(n, s.depth_metrics()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
}

/// Least squares for `y = c + a·x`; `None` with fewer than two distinct x.
fn linear(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    let c = my - a * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - c - a * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(Fit {
        exponent: a,
        coefficient: c,
        r_squared,
    })
}

/// `y ≈ c·(log2 N)^a`, fitted in log-log space. Points with `N < 2` or `y = 0` are skipped.
pub fn fit_log_power(ns: &[usize], ys: &[f64]) -> Option<Fit> {
    let (xs, ls): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(ys)
        .filter(|(&n, &y)| n >= 2 && y > 0.0)
        .map(|(&n, &y)| ((n as f64).log2().ln(), y.ln()))
        .unzip();
    linear(&xs, &ls).map(|f| Fit { coefficient: f.coefficient.exp(), ..f })
}

/// `y ≈ c·N^a`, fitted in log-log space.
pub fn fit_power(ns: &[usize], ys: &[f64]) -> Option<Fit> {
    let (xs, ls): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(ys)
        .filter(|(&n, &y)| n >= 1 && y > 0.0)
        .map(|(&n, &y)| ((n as f64).ln(), y.ln()))
        .unzip();
    linear(&xs, &ls).map(|f| Fit { coefficient: f.coefficient.exp(), ..f })
}
