//! Frozen-coefficient closed-loop analysis of the one-step law.
//!
//! Substituting the regularized law into the incremental model gives the
//! closed-loop pole polynomial
//!
//! ```text
//! T(z⁻¹) = λ(1 - z⁻¹)[1 - z⁻¹φ_Ly(z⁻¹)] + φ_{Ly+1}·φ_Lu(z⁻¹)
//! ```
//!
//! Everything here treats the pseudo-gradient as constant. That is exact for
//! linear plants; for time-varying estimates it is a per-step snapshot.

pub mod polynomial;

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::edlm::PgVector;
use crate::error::{MfacError, Result};
use crate::harness::trace::format_float;

pub use polynomial::Polynomial;

/// Width of the band around `|z| = 1` reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-3;

/// `T(z⁻¹)` by ascending powers of `z⁻¹`, trailing zeros dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopPolynomial {
    coefficients: Vec<f64>,
    lambda: f64,
    pg: PgVector,
}

impl ClosedLoopPolynomial {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pg(&self) -> &PgVector {
        &self.pg
    }

    /// Degree in `z⁻¹`.
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// `z^d·T(z⁻¹)` as an ordinary polynomial in `z`.
    pub fn in_z(&self) -> Polynomial {
        Polynomial::new(self.coefficients.iter().rev().copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl Verdict {
    pub fn from_radius(radius: f64, band: f64) -> Self {
        if radius < 1.0 - band {
            Verdict::Stable
        } else if radius > 1.0 + band {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Finite closed-loop poles as `(re, im)`.
    pub roots: Vec<(f64, f64)>,
    /// Poles at infinity, present when the `z⁰` coefficient vanishes.
    pub infinite_roots: usize,
    pub spectral_radius: f64,
    pub verdict: Verdict,
    pub band: f64,
    /// Largest `|z^d T(z⁻¹)|` over the reported roots.
    pub max_residual: f64,
}

/// Expands `T(z⁻¹)` for a frozen pseudo-gradient.
pub fn build_t(pg: &PgVector, lambda: f64) -> ClosedLoopPolynomial {
    let ly = pg.orders().ly();
    // 1 - z⁻¹φ_Ly(z⁻¹)
    let mut a = vec![1.0];
    a.extend(pg.output_block().iter().map(|p| -p));
    let regularized = Polynomial::new(vec![1.0, -1.0])
        .mul(&Polynomial::new(a))
        .scale(lambda);
    let gain = pg.leading_input();
    let input = Polynomial::new(pg.input_block().to_vec()).scale(gain);
    let mut coefficients = regularized.add(&input).coeffs().to_vec();
    while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
        coefficients.pop();
    }
    debug_assert!(coefficients.len() <= (ly + 2).max(pg.orders().lu()));
    ClosedLoopPolynomial {
        coefficients,
        lambda,
        pg: pg.clone(),
    }
}

/// Closed-loop poles and a stability verdict with the default marginal band.
pub fn poles(t: &ClosedLoopPolynomial) -> Result<StabilityReport> {
    poles_with_band(t, MARGINAL_BAND)
}

pub fn poles_with_band(t: &ClosedLoopPolynomial, band: f64) -> Result<StabilityReport> {
    let zpoly = t.in_z();
    if zpoly.is_zero() {
        return Err(MfacError::config(
            "closed-loop polynomial is identically zero",
        ));
    }
    let finite_degree = zpoly.degree().unwrap_or(0);
    let infinite_roots = t.degree() - finite_degree;
    let roots: Vec<Complex64> = zpoly.trimmed().roots()?;
    let max_residual = roots
        .iter()
        .map(|&z| zpoly.eval_complex(z).norm())
        .fold(0.0, f64::max);
    let spectral_radius = if infinite_roots > 0 {
        f64::INFINITY
    } else {
        roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    Ok(StabilityReport {
        roots: roots.iter().map(|z| (z.re, z.im)).collect(),
        infinite_roots,
        spectral_radius,
        verdict: Verdict::from_radius(spectral_radius, band),
        band,
        max_residual,
    })
}

fn ramp_denominator(pg: &PgVector) -> Result<f64> {
    let gain = pg.leading_input();
    let sum: f64 = pg.input_block().iter().sum();
    let scale: f64 = gain.abs() * pg.input_block().iter().map(|v| v.abs()).sum::<f64>();
    let den = gain * sum;
    if den == 0.0 || den.abs() <= f64::EPSILON * scale {
        return Err(MfacError::DegeneratePlant(format!(
            "φ_(Ly+1)·Σφ_u = {den:e} vanishes; ramp error undefined"
        )));
    }
    Ok(den)
}

/// Steady tracking error under the reference `y*(k+1) = Ts·k`:
/// `λ·Ts·(1 - Σφ_y) / (φ_{Ly+1}·Σφ_u)`.
pub fn static_error_ramp(pg: &PgVector, lambda: f64, ts: f64) -> Result<f64> {
    let den = ramp_denominator(pg)?;
    let output_sum: f64 = pg.output_block().iter().sum();
    Ok(lambda * ts * (1.0 - output_sum) / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StaticErrorLimit {
    Finite(f64),
    /// No finite limit: the error grows without bound.
    Divergent,
}

/// Limit of the tracking error for the reference `y*(k+1) = kⁿ`.
///
/// Zero for `λ = 0` at any `n`, the ramp value for `n = 1`, divergent for
/// `n ≥ 2` with `λ > 0`. The divergent case assumes the plant has no
/// integrator of its own (`Σφ_y ≠ 1`).
pub fn static_error_power(pg: &PgVector, n: u32, lambda: f64) -> Result<StaticErrorLimit> {
    if n == 0 {
        return Err(MfacError::config(
            "power reference order must be at least 1",
        ));
    }
    if lambda == 0.0 {
        return Ok(StaticErrorLimit::Finite(0.0));
    }
    if n == 1 {
        return static_error_ramp(pg, lambda, 1.0).map(StaticErrorLimit::Finite);
    }
    Ok(StaticErrorLimit::Divergent)
}

/// One λ of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub spectral_radius: f64,
    pub verdict: Verdict,
    /// `None` when the ramp-error denominator is degenerate.
    pub ramp_error: Option<f64>,
}

impl SweepRow {
    pub fn degenerate(&self) -> bool {
        self.ramp_error.is_none()
    }
}

pub fn analyze_lambda(pg: &PgVector, lambda: f64, ts: f64) -> Result<SweepRow> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(MfacError::config(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let report = poles(&build_t(pg, lambda))?;
    Ok(SweepRow {
        lambda,
        spectral_radius: report.spectral_radius,
        verdict: report.verdict,
        ramp_error: static_error_ramp(pg, lambda, ts).ok(),
    })
}

/// Spectral radius, verdict, and predicted ramp error for every λ in the grid.
/// Rows are independent of each other.
pub fn lambda_sweep(pg: &PgVector, grid: &[f64], ts: f64) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(MfacError::config("lambda grid is empty"));
    }
    grid.iter().map(|&l| analyze_lambda(pg, l, ts)).collect()
}

pub const SWEEP_HEADER: &str = "lambda,spectral_radius,verdict,ramp_error";

/// Writes sweep rows as CSV. Degenerate ramp errors are left empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        let err = row.ramp_error.map(format_float).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            format_float(row.lambda),
            format_float(row.spectral_radius),
            row.verdict,
            err
        )?;
    }
    Ok(())
}

/// Parses a λ grid: `start:step:stop` (inclusive), `logspace:lo:hi:n`, or a
/// comma-separated list.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| MfacError::config(format!("invalid lambda grid '{spec}': {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        ["logspace", lo, hi, n] => {
            let n: usize = n.trim().parse().map_err(|_| bad("count"))?;
            log_grid(num(lo)?, num(hi)?, n)?
        }
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(bad("need step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + step * i as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("unrecognized form")),
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    Ok(grid)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(MfacError::config("log grid needs 0 < lo < hi and n >= 2"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}
