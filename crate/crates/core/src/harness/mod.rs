//! Closed-loop simulation driver.

pub mod metrics;
pub mod scenario;
pub mod trace;

pub use metrics::{compute_metrics, default_window, rms_between, Metrics};
pub use scenario::{builtin, builtin_names, DegenerateFallback, PgPlan, Prepared, Scenario};
pub use trace::{export_csv, import_csv, SimTrace, Termination, TraceRow};

use crate::controller::{decide, ControlMode, LocalModel, StepInput, TaylorContext};
use crate::edlm::{gradient_pg, IncrementWindow, Regressor, SignalHistory};
use crate::error::{MfacError, Result};
use crate::estimator::{self, EstimatorState};

/// Outputs or inputs beyond this magnitude end the run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

fn admissible(v: f64) -> bool {
    v.is_finite() && v.abs() <= DIVERGENCE_LIMIT
}

/// Runs a scenario from its first step `k0` through `horizon`.
///
/// Configuration problems are returned as errors before any step runs.
/// Divergence ends the trace early with [`Termination::Diverged`].
pub fn run(scenario: &Scenario) -> Result<SimTrace> {
    run_prepared(&scenario.prepare()?, scenario)
}

pub fn run_prepared(p: &Prepared, scenario: &Scenario) -> Result<SimTrace> {
    let cfg = &p.controller;
    let orders = cfg.orders;
    let plant = p.plant.as_ref();
    let plant_orders = plant.orders();
    let mut hist = SignalHistory::new(p.y_init.clone(), p.u_init.clone());
    let mut trace = SimTrace::new(orders.len());
    if let ControlMode::Constrained { u_min, u_max } = cfg.mode {
        trace.input_bounds = Some((u_min, u_max));
    }
    let mut est = match &p.plan {
        PgPlan::Estimated(ec) => Some(EstimatorState::new(ec)),
        _ => None,
    };

    for k in p.first_step..=scenario.horizon {
        let y_now = hist.y(k)?;
        let u_prev = hist.u(k - 1)?;
        let previous_increment = hist.du(k - 1)?;
        let window = IncrementWindow::pending_input(&hist, k, orders)?;
        let op = Regressor::from_history(&hist, k - 1, plant_orders)?;
        let table = plant.partials();

        let model = match &p.plan {
            PgPlan::Estimated(ec) => {
                let state = est
                    .as_mut()
                    .expect("estimator state exists for estimated plan");
                let last = IncrementWindow::from_history(&hist, k - 1, orders)?;
                *state = estimator::update(state, hist.dy(k)?, &last, ec)?;
                LocalModel::frozen(state.estimate().clone().with_k(k))
            }
            PgPlan::Fixed(pg) => LocalModel::frozen(pg.clone().with_k(k)),
            PgPlan::PlantGradient => {
                LocalModel::frozen(gradient_pg(table.expect("checked in prepare"), &op, k)?)
            }
            PgPlan::Taylor(tr) => {
                LocalModel::taylor(table.expect("checked in prepare"), &op, &window, tr, k)?
            }
        };
        let taylor = match &p.plan {
            PgPlan::Taylor(tr) => Some(TaylorContext {
                table: table.expect("checked in prepare"),
                history: &hist,
                truncation: tr,
                k,
            }),
            _ => None,
        };
        let y_star_next = scenario.trajectory.eval(k);
        let input = StepInput {
            model: &model,
            window: &window,
            y_now,
            u_prev,
            previous_increment,
            y_star_next,
            taylor,
        };

        let (u, phi) = match decide(cfg, &input) {
            Ok(d) => {
                let phi = match cfg.mode {
                    ControlMode::OneStep => model.pg_with_gain(d.diagnostics.gain)?.into_vec(),
                    _ => model.pg.as_slice().to_vec(),
                };
                (d.u, phi)
            }
            Err(MfacError::DegenerateGain { gain, guard })
                if p.fallback == DegenerateFallback::Hold =>
            {
                log::debug!("k={k}: gain {gain:e} below {guard:e}, holding input");
                (u_prev, model.pg.as_slice().to_vec())
            }
            Err(MfacError::IterationDivergence { iteration, value }) => {
                log::warn!("k={k}: inner iteration {iteration} diverged ({value:e})");
                trace.status = Termination::Diverged { k };
                break;
            }
            Err(e) => return Err(e),
        };
        if !admissible(u) {
            trace.status = Termination::Diverged { k };
            break;
        }
        hist.set_u(k as usize, u);
        let y_next = plant.step(&Regressor::from_history(&hist, k, plant_orders)?, k);
        if !admissible(y_next) || phi.iter().any(|v| !v.is_finite()) {
            trace.status = Termination::Diverged { k };
            break;
        }
        hist.set_y((k + 1) as usize, y_next);
        trace.push(TraceRow {
            k,
            y_star: y_star_next,
            y: y_next,
            u,
            e: y_star_next - y_next,
            phi,
        })?;
    }
    Ok(trace)
}
