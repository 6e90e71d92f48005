//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "example2"
//! horizon = 700               # last step k simulated
//!
//! [plant]
//! kind = "example2"
//!
//! [trajectory]
//! kind = "power"
//! n = 1
//!
//! [controller]
//! lambda = 0.2
//! ly = 1
//! lu = 2
//! pg_source = "known"         # estimated | known | taylor
//! known_pg = [-0.8, -0.5, -0.2]
//! law = { kind = "one_step" } # one_step | iterative | polynomial_cost | constrained
//!
//! [initial]
//! y = [0.0, 0.0]
//! u = []
//! ```
//!
//! The first simulated step is `k0 = len(initial.y) - 1`. `initial.u`
//! supplies `u(t)` for `t < k0`; it is zero-padded to that length and any
//! further entries are ignored.

use serde::{Deserialize, Serialize};

use crate::controller::{ControlMode, ControllerConfig, PgSource};
use crate::edlm::{PgVector, PseudoOrders, Truncation};
use crate::error::{MfacError, Result};
use crate::estimator::{EstimatorConfig, ResetPolicy};
use crate::plants::{Plant, PlantSpec, Trajectory};

/// What the harness does when the law reports a vanishing gain at `λ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateFallback {
    /// Keep `u(k) = u(k-1)`.
    #[default]
    Hold,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub lambda: f64,
    pub ly: usize,
    pub lu: usize,
    pub pg_source: PgSource,
    #[serde(default = "one_step")]
    pub law: ControlMode,
    #[serde(default = "default_guard")]
    pub denominator_guard: f64,
    #[serde(default)]
    pub on_degenerate_gain: DegenerateFallback,
    /// Fixed pseudo-gradient for `pg_source = "known"`; omitted means the
    /// plant's own gradient at each step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_pg: Option<Vec<f64>>,
    /// Taylor depth per argument for `pg_source = "taylor"`, in
    /// pseudo-gradient order; omitted means the plant default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Vec<usize>>,
}

fn one_step() -> ControlMode {
    ControlMode::OneStep
}

fn default_guard() -> f64 {
    ControllerConfig::DEFAULT_GUARD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub eta: f64,
    pub mu: f64,
    pub initial_pg: Vec<f64>,
    #[serde(default)]
    pub reset: ResetPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialHistory {
    pub y: Vec<f64>,
    #[serde(default)]
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub horizon: i64,
    pub plant: PlantSpec,
    pub trajectory: Trajectory,
    pub controller: ControllerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSection>,
    pub initial: InitialHistory,
    /// Only used by randomized experiments built on top of a scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// How the pseudo-gradient is obtained at each step.
#[derive(Debug, Clone, PartialEq)]
pub enum PgPlan {
    Estimated(EstimatorConfig),
    Fixed(PgVector),
    PlantGradient,
    Taylor(Truncation),
}

/// A validated scenario ready to run.
pub struct Prepared {
    pub plant: Box<dyn Plant>,
    pub controller: ControllerConfig,
    pub plan: PgPlan,
    pub fallback: DegenerateFallback,
    pub first_step: i64,
    pub y_init: Vec<f64>,
    pub u_init: Vec<f64>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| MfacError::Scenario(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MfacError::Scenario(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn first_step(&self) -> i64 {
        self.initial.y.len() as i64 - 1
    }

    /// Checks every setting and resolves the plant and pseudo-gradient plan.
    pub fn prepare(&self) -> Result<Prepared> {
        let c = &self.controller;
        let orders = PseudoOrders::new(c.ly, c.lu)?;
        let controller = ControllerConfig {
            lambda: c.lambda,
            orders,
            denominator_guard: c.denominator_guard,
            mode: c.law,
            pg_source: c.pg_source,
        };
        controller.validate()?;
        self.trajectory.validate()?;
        let plant = self.plant.build()?;

        if self.initial.y.is_empty() {
            return Err(MfacError::Scenario("initial.y needs at least y(0)".into()));
        }
        if self
            .initial
            .y
            .iter()
            .chain(&self.initial.u)
            .any(|v| !v.is_finite())
        {
            return Err(MfacError::Scenario("initial history must be finite".into()));
        }
        let first_step = self.first_step();
        if self.horizon < first_step.max(1) {
            return Err(MfacError::Scenario(format!(
                "horizon {} precedes the first step {first_step}",
                self.horizon
            )));
        }
        let mut u_init = self.initial.u.clone();
        if u_init.len() > first_step as usize {
            log::debug!(
                "{}: ignoring {} initial inputs at t >= {first_step}",
                self.name,
                u_init.len() - first_step as usize
            );
        }
        u_init.resize(first_step as usize, 0.0);

        let needs_plant_orders = || -> Result<()> {
            if plant.orders() != orders {
                return Err(MfacError::OrderMismatch {
                    expected_ly: plant.orders().ly(),
                    expected_lu: plant.orders().lu(),
                    got_ly: orders.ly(),
                    got_lu: orders.lu(),
                });
            }
            Ok(())
        };
        let plan = match c.pg_source {
            PgSource::Estimated => {
                let est = self.estimator.as_ref().ok_or_else(|| {
                    MfacError::Scenario(
                        "pg_source = \"estimated\" needs an [estimator] section".into(),
                    )
                })?;
                let initial = PgVector::new(orders, est.initial_pg.clone(), first_step)?;
                PgPlan::Estimated(
                    EstimatorConfig::new(est.eta, est.mu, initial)?.with_reset(est.reset),
                )
            }
            PgSource::Known => match &c.known_pg {
                Some(pg) => PgPlan::Fixed(PgVector::new(orders, pg.clone(), first_step)?),
                None => {
                    needs_plant_orders()?;
                    if plant.partials().is_none() {
                        return Err(MfacError::Scenario(format!(
                            "plant {} has no partial derivatives; give controller.known_pg",
                            plant.name()
                        )));
                    }
                    PgPlan::PlantGradient
                }
            },
            PgSource::Taylor => {
                needs_plant_orders()?;
                let table = plant.partials().ok_or_else(|| {
                    MfacError::Scenario(format!(
                        "plant {} has no partial derivatives",
                        plant.name()
                    ))
                })?;
                let truncation = match &c.truncation {
                    Some(flat) => Truncation::from_flat(orders, flat)?,
                    None => plant
                        .default_truncation()
                        .unwrap_or_else(|| Truncation::max_of(table)),
                };
                // surfaces bad depths before the first step
                crate::edlm::taylor_pg(
                    table,
                    &crate::edlm::Regressor::new(vec![0.0; orders.ly()], vec![0.0; orders.lu()]),
                    &crate::edlm::IncrementWindow::zeros(orders),
                    &truncation,
                    first_step,
                )?;
                PgPlan::Taylor(truncation)
            }
        };
        if c.pg_source != PgSource::Estimated && self.estimator.is_some() {
            log::warn!(
                "{}: [estimator] section ignored for a model-based source",
                self.name
            );
        }
        Ok(Prepared {
            plant,
            controller,
            plan,
            fallback: c.on_degenerate_gain,
            first_step,
            y_init: self.initial.y.clone(),
            u_init,
        })
    }
}

/// Scenarios shipped with the crate: `(name, toml)`.
pub const BUILTIN: [(&str, &str); 6] = [
    (
        "example1_case1",
        include_str!("../../../../scenarios/example1_case1.toml"),
    ),
    (
        "example1_case2",
        include_str!("../../../../scenarios/example1_case2.toml"),
    ),
    (
        "example2",
        include_str!("../../../../scenarios/example2.toml"),
    ),
    (
        "example3_mfac1",
        include_str!("../../../../scenarios/example3_mfac1.toml"),
    ),
    (
        "example3_mfac2",
        include_str!("../../../../scenarios/example3_mfac2.toml"),
    ),
    (
        "example3_mfac3",
        include_str!("../../../../scenarios/example3_mfac3.toml"),
    ),
];

pub fn builtin(name: &str) -> Result<Scenario> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| MfacError::Scenario(format!("no built-in scenario named {name:?}")))
        .and_then(|(_, text)| Scenario::from_toml(text))
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}
