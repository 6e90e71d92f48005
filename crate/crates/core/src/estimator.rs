//! Projection-algorithm estimate of the pseudo-gradient.
//!
//! ```text
//! φ̂(k) = φ̂(k-1) + η·ΔH(k-1)·(Δy(k) - φ̂(k-1)ᵀΔH(k-1)) / (μ + ‖ΔH(k-1)‖²)
//! ```
//!
//! No sign reset is applied to `φ̂_{Ly+1}`: the estimate is free to change
//! sign when the plant's input gain does.

use serde::{Deserialize, Serialize};

use crate::edlm::{predict_increment, IncrementWindow, PgVector};
use crate::error::{MfacError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResetPolicy {
    #[default]
    None,
    /// Return to the initial estimate when `‖ΔH(k-1)‖ ≤ eps_h` or
    /// `‖φ̂(k)‖ ≤ eps_phi`.
    NormThreshold { eps_h: f64, eps_phi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub eta: f64,
    pub mu: f64,
    pub reset_policy: ResetPolicy,
    pub initial_pg: PgVector,
}

impl EstimatorConfig {
    pub fn new(eta: f64, mu: f64, initial_pg: PgVector) -> Result<Self> {
        let cfg = Self {
            eta,
            mu,
            reset_policy: ResetPolicy::None,
            initial_pg,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_reset(mut self, policy: ResetPolicy) -> Self {
        self.reset_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(MfacError::config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(MfacError::config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.eta > 2.0 {
            log::warn!(
                "eta = {} is outside (0, 2]; the estimation error is not guaranteed to contract",
                self.eta
            );
        }
        if let ResetPolicy::NormThreshold { eps_h, eps_phi } = self.reset_policy {
            if !(eps_h >= 0.0) || !(eps_phi >= 0.0) {
                return Err(MfacError::config("reset thresholds must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    estimate: PgVector,
    last_window: Option<IncrementWindow>,
    last_error: f64,
    resets: usize,
}

impl EstimatorState {
    pub fn new(cfg: &EstimatorConfig) -> Self {
        Self {
            estimate: cfg.initial_pg.clone(),
            last_window: None,
            last_error: 0.0,
            resets: 0,
        }
    }

    pub fn estimate(&self) -> &PgVector {
        &self.estimate
    }

    pub fn last_window(&self) -> Option<&IncrementWindow> {
        self.last_window.as_ref()
    }

    /// A-priori prediction error of the most recent update.
    pub fn last_error(&self) -> f64 {
        self.last_error
    }

    pub fn resets(&self) -> usize {
        self.resets
    }
}

/// One projection step. `window` is `ΔH(k-1)` and `observed_dy` is the
/// `Δy(k)` it produced.
pub fn update(
    state: &EstimatorState,
    observed_dy: f64,
    window: &IncrementWindow,
    cfg: &EstimatorConfig,
) -> Result<EstimatorState> {
    if !(cfg.mu > 0.0) {
        return Err(MfacError::config(format!(
            "mu must be positive, got {}",
            cfg.mu
        )));
    }
    if !observed_dy.is_finite() || window.iter().any(|v| !v.is_finite()) {
        return Err(MfacError::numeric("non-finite estimator input"));
    }
    let prev = &state.estimate;
    let error = observed_dy - predict_increment(prev, window)?;
    let gain = cfg.eta * error / (cfg.mu + window.norm_sq());
    let phi: Vec<f64> = prev
        .as_slice()
        .iter()
        .zip(window.iter())
        .map(|(p, h)| p + gain * h)
        .collect();
    let mut estimate = PgVector::new(prev.orders(), phi, prev.k() + 1)?;
    let mut resets = state.resets;
    if let ResetPolicy::NormThreshold { eps_h, eps_phi } = cfg.reset_policy {
        if window.norm_sq().sqrt() <= eps_h || estimate.norm() <= eps_phi {
            estimate = cfg.initial_pg.clone().with_k(estimate.k());
            resets += 1;
        }
    }
    Ok(EstimatorState {
        estimate,
        last_window: Some(window.clone()),
        last_error: error,
        resets,
    })
}
