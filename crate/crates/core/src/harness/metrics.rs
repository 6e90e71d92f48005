//! Summary statistics of a trace.

use serde::Serialize;

use super::trace::SimTrace;
use crate::error::{MfacError, Result};

/// Default static-error window length.
pub const STATIC_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub rows: usize,
    pub window: usize,
    /// RMS of `e` over the last `window` rows.
    pub rms_error: f64,
    /// Mean of `e` over the last `window` rows.
    pub static_error: f64,
    pub max_abs_u: f64,
    /// Rows whose input lies outside the run's input box.
    pub constraint_violations: usize,
    /// Set when the trace stopped early.
    pub partial: bool,
}

/// `STATIC_WINDOW` rows, or fewer when the trace is too short to discard a
/// 10% transient first.
pub fn default_window(len: usize) -> usize {
    STATIC_WINDOW.min(len - len / 10).max(1)
}

pub fn compute_metrics(trace: &SimTrace, window: usize) -> Result<Metrics> {
    if trace.is_empty() {
        return Err(MfacError::Window("empty trace".into()));
    }
    if window == 0 || window > trace.len() {
        return Err(MfacError::Window(format!(
            "metrics window {window} outside 1..={}",
            trace.len()
        )));
    }
    let tail = &trace.rows()[trace.len() - window..];
    let n = window as f64;
    let violations = match trace.input_bounds {
        Some((lo, hi)) => trace.rows().iter().filter(|r| r.u < lo || r.u > hi).count(),
        None => 0,
    };
    Ok(Metrics {
        rows: trace.len(),
        window,
        rms_error: (tail.iter().map(|r| r.e * r.e).sum::<f64>() / n).sqrt(),
        static_error: tail.iter().map(|r| r.e).sum::<f64>() / n,
        max_abs_u: trace.rows().iter().fold(0.0, |m, r| m.max(r.u.abs())),
        constraint_violations: violations,
        partial: !trace.completed(),
    })
}

/// RMS of `e` over rows with `k_from ≤ k ≤ k_to`.
pub fn rms_between(trace: &SimTrace, k_from: i64, k_to: i64) -> Result<f64> {
    let (sum, n) = trace
        .rows()
        .iter()
        .filter(|r| r.k >= k_from && r.k <= k_to)
        .fold((0.0, 0usize), |(s, n), r| (s + r.e * r.e, n + 1));
    if n == 0 {
        return Err(MfacError::Window(format!(
            "no rows with {k_from} <= k <= {k_to}"
        )));
    }
    Ok((sum / n as f64).sqrt())
}
