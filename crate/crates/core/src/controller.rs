//! Control laws on the incremental model.
//!
//! All laws act on the bracket
//!
//! ```text
//! B = y*(k+1) - y(k) - Σ_{i≤Ly} φ_i Δy(k-i+1) - Σ_{i≥Ly+2} φ_i Δu(k+Ly-i+1)
//! ```
//!
//! which is what the next output increment must still supply through the
//! current input move `Δu(k)`. The one-step law solves the quadratic cost
//! `|B - φ_{Ly+1}Δu|² + λ|Δu|²` in closed form. When the input gain itself
//! depends on `Δu(k)` (a known nonlinear plant) the cost becomes a polynomial
//! of degree `2n` and is minimized over its real stationary points.

use serde::{Deserialize, Serialize};

use crate::analysis::Polynomial;
use crate::edlm::{
    horner, taylor_coefficients, taylor_pg, Argument, IncrementWindow, PartialDerivativeTable,
    PgVector, PseudoOrders, Regressor, SignalHistory, Truncation,
};
use crate::error::{MfacError, Result};

/// Imaginary-part tolerance (relative) for accepting a stationary point as real.
pub const REAL_ROOT_TOL: f64 = 1e-8;

/// Inner rollouts beyond this magnitude count as divergent.
pub const ITERATION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlMode {
    OneStep,
    Iterative {
        #[serde(default = "default_iterations")]
        iterations: usize,
    },
    PolynomialCost,
    Constrained {
        u_min: f64,
        u_max: f64,
    },
}

fn default_iterations() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgSource {
    Estimated,
    Known,
    Taylor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub lambda: f64,
    pub orders: PseudoOrders,
    pub denominator_guard: f64,
    pub mode: ControlMode,
    pub pg_source: PgSource,
}

impl ControllerConfig {
    pub const DEFAULT_GUARD: f64 = 1e-10;

    pub fn new(
        lambda: f64,
        orders: PseudoOrders,
        mode: ControlMode,
        pg_source: PgSource,
    ) -> Result<Self> {
        let cfg = Self {
            lambda,
            orders,
            denominator_guard: Self::DEFAULT_GUARD,
            mode,
            pg_source,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(MfacError::config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.denominator_guard > 0.0) {
            return Err(MfacError::config("denominator guard must be positive"));
        }
        match self.mode {
            ControlMode::Constrained { u_min, u_max } if !(u_min < u_max) => Err(
                MfacError::config(format!("empty input box [{u_min}, {u_max}]")),
            ),
            ControlMode::Iterative { iterations: 0 } => Err(MfacError::config(
                "iterative law needs at least one iteration",
            )),
            ControlMode::Iterative { .. } if self.pg_source != PgSource::Taylor => Err(
                MfacError::config("iterative law needs plant partial derivatives (taylor source)"),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub bracket: f64,
    /// Input gain `φ_{Ly+1}` actually applied.
    pub gain: f64,
    /// `λ + gain²` for the closed-form laws.
    pub denominator: Option<f64>,
    /// Cost at the returned optimum for the minimizing laws.
    pub cost: Option<f64>,
    /// `|y*(k+1) - y(k+i|k)|` at the start of each inner iteration.
    pub iteration_residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub delta_u: f64,
    pub u: f64,
    pub predicted_next_y: f64,
    pub diagnostics: Diagnostics,
}

/// `y*(k+1) - y(k)` minus every model term that does not involve `Δu(k)`.
pub fn bracket(
    pg: &PgVector,
    window: &IncrementWindow,
    y_now: f64,
    y_star_next: f64,
) -> Result<f64> {
    let orders = pg.orders();
    if orders != window.orders() {
        return Err(MfacError::OrderMismatch {
            expected_ly: orders.ly(),
            expected_lu: orders.lu(),
            got_ly: window.orders().ly(),
            got_lu: window.orders().lu(),
        });
    }
    let outputs: f64 = pg
        .output_block()
        .iter()
        .zip(window.dy())
        .map(|(p, d)| p * d)
        .sum();
    let inputs: f64 = pg.input_block()[1..]
        .iter()
        .zip(&window.du()[1..])
        .map(|(p, d)| p * d)
        .sum();
    Ok(y_star_next - y_now - outputs - inputs)
}

fn gain_step(gain: f64, lambda: f64, guard: f64, residual: f64) -> Result<(f64, f64)> {
    if lambda == 0.0 && gain.abs() < guard {
        return Err(MfacError::DegenerateGain { gain, guard });
    }
    let denominator = lambda + gain * gain;
    Ok((gain / denominator * residual, denominator))
}

/// The regularized one-step law
/// `Δu(k) = φ_{Ly+1}/(λ + φ_{Ly+1}²)·B`.
///
/// With `λ = 0` this is the exact model inverse `B/φ_{Ly+1}`, which is
/// refused when `|φ_{Ly+1}|` is below the configured guard.
pub fn one_step_law(
    pg: &PgVector,
    window: &IncrementWindow,
    y_now: f64,
    u_prev: f64,
    y_star_next: f64,
    cfg: &ControllerConfig,
) -> Result<ControlDecision> {
    let b = bracket(pg, window, y_now, y_star_next)?;
    let gain = pg.leading_input();
    let (delta_u, denominator) = gain_step(gain, cfg.lambda, cfg.denominator_guard, b)?;
    Ok(ControlDecision {
        delta_u,
        u: u_prev + delta_u,
        predicted_next_y: y_star_next - (b - gain * delta_u),
        diagnostics: Diagnostics {
            bracket: b,
            gain,
            denominator: Some(denominator),
            cost: Some((b - gain * delta_u).powi(2) + cfg.lambda * delta_u * delta_u),
            iteration_residuals: Vec::new(),
        },
    })
}

/// `φ_{Ly+1}` as a polynomial in the current move: `Σ c_j Δu(k)^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPolynomial(Vec<f64>);

impl GainPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(MfacError::config(
                "gain polynomial needs finite coefficients",
            ));
        }
        Ok(Self(coefficients))
    }

    pub fn constant(gain: f64) -> Self {
        Self(vec![gain])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn eval(&self, delta_u: f64) -> f64 {
        horner(&self.0, delta_u)
    }

    /// The first-order partial.
    pub fn linear_gain(&self) -> f64 {
        self.0[0]
    }
}

/// Gain with the unknown `Δu(k)` replaced by the last applied move `Δu(k-1)`.
pub fn approximate_gain(gain: &GainPolynomial, previous_increment: f64) -> f64 {
    gain.eval(previous_increment)
}

/// `J(Δu) = (B - Δu·g(Δu))² + λΔu²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostProblem {
    pub bracket: f64,
    pub gain: GainPolynomial,
    pub lambda: f64,
}

impl CostProblem {
    pub fn residual(&self, delta_u: f64) -> f64 {
        self.bracket - delta_u * self.gain.eval(delta_u)
    }

    pub fn cost(&self, delta_u: f64) -> f64 {
        self.residual(delta_u).powi(2) + self.lambda * delta_u * delta_u
    }

    pub fn polynomial(&self) -> Polynomial {
        let mut r = vec![self.bracket];
        r.extend(self.gain.coefficients().iter().map(|c| -c));
        let r = Polynomial::new(r);
        r.mul(&r).add(&Polynomial::new(vec![0.0, 0.0, self.lambda]))
    }
}

/// Minimizer of a [`CostProblem`] over an interval (or the whole line).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostMinimum {
    pub delta_u: f64,
    pub cost: f64,
}

fn refine(dj: &Polynomial, ddj: &Polynomial, mut x: f64) -> f64 {
    for _ in 0..3 {
        let slope = ddj.eval(x);
        if slope == 0.0 {
            break;
        }
        let next = x - dj.eval(x) / slope;
        if !next.is_finite() || dj.eval(next).abs() >= dj.eval(x).abs() {
            break;
        }
        x = next;
    }
    x
}

fn stationary_points(problem: &CostProblem) -> Result<Vec<f64>> {
    let j = problem.polynomial();
    let dj = j.derivative();
    if dj.is_zero() {
        return Ok(Vec::new());
    }
    let ddj = dj.derivative();
    Ok(dj
        .trimmed()
        .real_roots(REAL_ROOT_TOL)?
        .into_iter()
        .map(|x| refine(&dj, &ddj, x))
        .collect())
}

fn pick(problem: &CostProblem, candidates: impl IntoIterator<Item = f64>) -> Option<CostMinimum> {
    let mut best: Option<CostMinimum> = None;
    for delta_u in candidates {
        let cost = problem.cost(delta_u);
        if !cost.is_finite() {
            continue;
        }
        best = match best {
            None => Some(CostMinimum { delta_u, cost }),
            Some(b) => {
                let tie = (cost - b.cost).abs() <= 1e-12 * b.cost.abs().max(1e-300);
                if cost < b.cost && !tie || tie && delta_u.abs() < b.delta_u.abs() {
                    Some(CostMinimum { delta_u, cost })
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Global minimizer of `J` over all real `Δu`: the argmin of `J` over the
/// real roots of `dJ/dΔu`. Ties go to the smaller `|Δu|`; a constant `J`
/// returns `Δu = 0`.
pub fn minimize_polynomial_cost(problem: &CostProblem) -> Result<CostMinimum> {
    let j = problem.polynomial();
    if let Some(d) = j.degree() {
        if d > 0 && !(j.coeffs()[d] > 0.0) {
            return Err(MfacError::Invariant(format!(
                "cost polynomial leading coefficient {} is not positive",
                j.coeffs()[d]
            )));
        }
    }
    let points = stationary_points(problem)?;
    if points.is_empty() {
        if j.degree().unwrap_or(0) == 0 {
            return Ok(CostMinimum {
                delta_u: 0.0,
                cost: problem.cost(0.0),
            });
        }
        return Err(MfacError::Invariant(
            "no real stationary point for a cost of positive degree".into(),
        ));
    }
    pick(problem, points)
        .ok_or_else(|| MfacError::Invariant("cost is not finite at any stationary point".into()))
}

/// Minimizer of `J` over `Δu ∈ [u_min - u_prev, u_max - u_prev]`. The
/// returned input lies inside `[u_min, u_max]` exactly.
pub fn minimize_constrained(
    problem: &CostProblem,
    u_prev: f64,
    u_min: f64,
    u_max: f64,
) -> Result<(CostMinimum, f64)> {
    if !(u_min < u_max) {
        return Err(MfacError::config(format!(
            "empty input box [{u_min}, {u_max}]"
        )));
    }
    let lo = u_min - u_prev;
    let hi = u_max - u_prev;
    let interior: Vec<f64> = stationary_points(problem)?
        .into_iter()
        .filter(|&d| d > lo && d < hi)
        .collect();
    let best = pick(problem, interior.into_iter().chain([lo, hi]))
        .ok_or_else(|| MfacError::Invariant("cost is not finite on the input box".into()))?;
    let u = if best.delta_u == lo {
        u_min
    } else if best.delta_u == hi {
        u_max
    } else {
        (u_prev + best.delta_u).clamp(u_min, u_max)
    };
    Ok((best, u))
}

fn decision_from_cost(
    problem: &CostProblem,
    min: CostMinimum,
    u: f64,
    u_prev: f64,
    y_star_next: f64,
) -> ControlDecision {
    let delta_u = u - u_prev;
    ControlDecision {
        delta_u,
        u,
        predicted_next_y: y_star_next - problem.residual(min.delta_u),
        diagnostics: Diagnostics {
            bracket: problem.bracket,
            gain: problem.gain.eval(min.delta_u),
            denominator: None,
            cost: Some(min.cost),
            iteration_residuals: Vec::new(),
        },
    }
}

/// Pseudo-gradient of a known plant, split into the `Δu(k)`-independent
/// entries and the input-gain polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    /// Pseudo-gradient whose input-gain slot holds the first-order partial.
    pub pg: PgVector,
    pub gain: GainPolynomial,
}

impl LocalModel {
    /// A model whose gain does not depend on the current move.
    pub fn frozen(pg: PgVector) -> Self {
        let gain = GainPolynomial::constant(pg.leading_input());
        Self { pg, gain }
    }

    /// Taylor model at `φ(k-1)`. `window` is the controller's view of
    /// `ΔH(k)` with `Δu(k)` pending.
    pub fn taylor(
        table: &dyn PartialDerivativeTable,
        operating_point: &Regressor,
        window: &IncrementWindow,
        truncation: &Truncation,
        k: i64,
    ) -> Result<Self> {
        let window = window.clone().with_current_input(0.0);
        let pg = taylor_pg(table, operating_point, &window, truncation, k)?;
        let gain = GainPolynomial::new(taylor_coefficients(
            table,
            Argument::Input(0),
            truncation.get(Argument::Input(0)),
            operating_point,
            k - 1,
        )?)?;
        Ok(Self { pg, gain })
    }

    /// The pseudo-gradient with `gain` placed in the input-gain slot.
    pub fn pg_with_gain(&self, gain: f64) -> Result<PgVector> {
        let mut phi = self.pg.as_slice().to_vec();
        phi[self.pg.orders().ly()] = gain;
        PgVector::new(self.pg.orders(), phi, self.pg.k())
    }
}

/// What the iterative law needs from a known plant.
pub struct TaylorContext<'a> {
    pub table: &'a dyn PartialDerivativeTable,
    /// Record holding `y` up to `y(k)` and `u` up to `u(k-1)`.
    pub history: &'a SignalHistory,
    pub truncation: &'a Truncation,
    pub k: i64,
}

/// Iterative law: the regularized one-step law run forward on the Taylor
/// model before anything is applied.
///
/// Iteration `i = 0, 1, …` works at virtual time `τ = k + i` on a copy of the
/// record: it linearizes at the predicted `φ(τ-1|k)`, computes `Δu(τ|k)` from
/// the bracket built on predicted increments with the target held at
/// `y*(k+1)`, and rolls the model forward to obtain `y(τ+1|k)`. The input
/// gain uses the previous virtual move in place of the pending one, so one
/// iteration is the one-step law with the lagged-gain approximation. The
/// input of the last iteration is the one applied at `k`.
pub fn iterative_law(
    ctx: &TaylorContext<'_>,
    y_star_next: f64,
    iterations: usize,
    cfg: &ControllerConfig,
) -> Result<ControlDecision> {
    if iterations == 0 {
        return Err(MfacError::config(
            "iterative law needs at least one iteration",
        ));
    }
    let orders = ctx.table.orders();
    if orders != cfg.orders {
        return Err(MfacError::OrderMismatch {
            expected_ly: orders.ly(),
            expected_lu: orders.lu(),
            got_ly: cfg.orders.ly(),
            got_lu: cfg.orders.lu(),
        });
    }
    let k = ctx.k;
    let mut h = ctx.history.clone();
    let u_prev = h.u(k - 1)?;
    let mut residuals = Vec::with_capacity(iterations);
    let mut first: Option<(LocalModel, f64)> = None;
    let mut last = (0.0, 0.0, 0.0);
    for i in 0..iterations {
        let tau = k + i as i64;
        let op = Regressor::from_history(&h, tau - 1, orders)?;
        let window = IncrementWindow::pending_input(&h, tau, orders)?;
        let model = LocalModel::taylor(ctx.table, &op, &window, ctx.truncation, tau)?;
        let gain = approximate_gain(&model.gain, h.du(tau - 1)?);
        let y_tau = h.y(tau)?;
        residuals.push((y_star_next - y_tau).abs());
        let b = bracket(&model.pg_with_gain(gain)?, &window, y_tau, y_star_next)?;
        let (step, denominator) = gain_step(gain, cfg.lambda, cfg.denominator_guard, b)?;
        let u = h.u(tau - 1)? + step;
        // exact Taylor prediction: the gain slot is evaluated at the move itself
        let rest = y_star_next - b - y_tau;
        let y_next = y_tau + rest + step * model.gain.eval(step);
        if !y_next.is_finite() || y_next.abs() > ITERATION_LIMIT || !u.is_finite() {
            return Err(MfacError::IterationDivergence {
                iteration: i + 1,
                value: y_next,
            });
        }
        h.set_u(tau as usize, u);
        h.set_y((tau + 1) as usize, y_next);
        if first.is_none() {
            let b0 = bracket(&model.pg, &window, y_tau, y_star_next)?;
            first = Some((model, b0));
        }
        last = (gain, denominator, u);
    }
    let (gain, denominator, u) = last;
    let (model, b0) = first.expect("at least one iteration ran");
    let delta_u = u - u_prev;
    Ok(ControlDecision {
        delta_u,
        u,
        predicted_next_y: y_star_next - b0 + delta_u * model.gain.eval(delta_u),
        diagnostics: Diagnostics {
            bracket: b0,
            gain,
            denominator: Some(denominator),
            cost: None,
            iteration_residuals: residuals,
        },
    })
}

/// Everything a law may need at one step.
pub struct StepInput<'a> {
    pub model: &'a LocalModel,
    /// `ΔH(k)` with `Δu(k)` pending.
    pub window: &'a IncrementWindow,
    pub y_now: f64,
    pub u_prev: f64,
    /// `Δu(k-1)`.
    pub previous_increment: f64,
    pub y_star_next: f64,
    pub taylor: Option<TaylorContext<'a>>,
}

/// Dispatches to the law selected by `cfg.mode`.
pub fn decide(cfg: &ControllerConfig, input: &StepInput<'_>) -> Result<ControlDecision> {
    let model = input.model;
    match cfg.mode {
        ControlMode::OneStep => {
            let gain = approximate_gain(&model.gain, input.previous_increment);
            let pg = model.pg_with_gain(gain)?;
            one_step_law(
                &pg,
                input.window,
                input.y_now,
                input.u_prev,
                input.y_star_next,
                cfg,
            )
        }
        ControlMode::PolynomialCost => {
            let problem = CostProblem {
                bracket: bracket(&model.pg, input.window, input.y_now, input.y_star_next)?,
                gain: model.gain.clone(),
                lambda: cfg.lambda,
            };
            let min = minimize_polynomial_cost(&problem)?;
            Ok(decision_from_cost(
                &problem,
                min,
                input.u_prev + min.delta_u,
                input.u_prev,
                input.y_star_next,
            ))
        }
        ControlMode::Constrained { u_min, u_max } => {
            let problem = CostProblem {
                bracket: bracket(&model.pg, input.window, input.y_now, input.y_star_next)?,
                gain: model.gain.clone(),
                lambda: cfg.lambda,
            };
            let (min, u) = minimize_constrained(&problem, input.u_prev, u_min, u_max)?;
            Ok(decision_from_cost(
                &problem,
                min,
                u,
                input.u_prev,
                input.y_star_next,
            ))
        }
        ControlMode::Iterative { iterations } => {
            let ctx = input.taylor.as_ref().ok_or_else(|| {
                MfacError::config("iterative law needs plant partial derivatives")
            })?;
            iterative_law(ctx, input.y_star_next, iterations, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::NonlinearPlant;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn orders() -> PseudoOrders {
        PseudoOrders::new(1, 2).unwrap()
    }

    fn cfg(lambda: f64) -> ControllerConfig {
        ControllerConfig::new(lambda, orders(), ControlMode::OneStep, PgSource::Known).unwrap()
    }

    fn example2_pg() -> PgVector {
        PgVector::new(orders(), vec![-0.8, -0.5, -0.2], 0).unwrap()
    }

    #[test]
    fn zero_bracket_no_move() {
        let w = IncrementWindow::zeros(orders());
        let d = one_step_law(&example2_pg(), &w, 0.7, 0.1, 0.7, &cfg(0.2)).unwrap();
        assert_eq!(d.delta_u, 0.0);
        assert_eq!(d.u, 0.1);
    }

    #[test]
    fn exact_inverse_at_lambda_zero() {
        let w = IncrementWindow::zeros(orders());
        let d = one_step_law(&example2_pg(), &w, 0.0, 0.0, 1.0, &cfg(0.0)).unwrap();
        assert_relative_eq!(d.delta_u, -2.0, epsilon = 1e-15);
        assert_relative_eq!(d.predicted_next_y, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn regularized_hand_value() {
        let w = IncrementWindow::zeros(orders());
        let d = one_step_law(&example2_pg(), &w, 0.0, 0.0, 1.0, &cfg(0.2)).unwrap();
        assert_relative_eq!(d.delta_u, -0.5 / 0.45, epsilon = 1e-15);
        assert_relative_eq!(d.diagnostics.denominator.unwrap(), 0.45, epsilon = 1e-15);
    }

    #[test]
    fn bracket_subtracts_history_terms() {
        let w = IncrementWindow::new(vec![0.5], vec![99.0, 2.0]).unwrap();
        // 1 - 0.2 - (-0.8·0.5) - (-0.2·2) ; Δu(k) slot is ignored
        let b = bracket(&example2_pg(), &w, 0.2, 1.0).unwrap();
        assert_relative_eq!(b, 1.0 - 0.2 + 0.4 + 0.4, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_gain_is_an_error() {
        let pg = PgVector::new(orders(), vec![0.1, 1e-12, 0.3], 0).unwrap();
        let w = IncrementWindow::zeros(orders());
        assert!(matches!(
            one_step_law(&pg, &w, 0.0, 0.0, 1.0, &cfg(0.0)),
            Err(MfacError::DegenerateGain { .. })
        ));
        assert!(one_step_law(&pg, &w, 0.0, 0.0, 1.0, &cfg(0.1)).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(
            ControllerConfig::new(-1.0, orders(), ControlMode::OneStep, PgSource::Known).is_err()
        );
        assert!(ControllerConfig::new(
            0.0,
            orders(),
            ControlMode::Constrained {
                u_min: 1.0,
                u_max: 1.0
            },
            PgSource::Known
        )
        .is_err());
        assert!(ControllerConfig::new(
            0.0,
            orders(),
            ControlMode::Iterative { iterations: 2 },
            PgSource::Estimated
        )
        .is_err());
        let mode: ControlMode = toml::from_str("kind = \"iterative\"").unwrap();
        assert_eq!(mode, ControlMode::Iterative { iterations: 3 });
    }

    /// Dense grid search, kept independent of the root-based minimizer.
    fn grid_min(problem: &CostProblem, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n)
            .map(|i| lo + step * i as f64)
            .map(|x| (x, problem.cost(x)))
            .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
    }

    #[test]
    fn quartic_hand_instance() {
        let problem = CostProblem {
            bracket: 1.0,
            gain: GainPolynomial::new(vec![2.0, 1.0]).unwrap(),
            lambda: 1.5,
        };
        let (x_grid, _) = grid_min(&problem, -5.0, 5.0, 1e-5);
        let min = minimize_polynomial_cost(&problem).unwrap();
        assert!((min.delta_u - x_grid).abs() < 1e-4);
        // frozen from the grid oracle
        assert!((min.delta_u - 0.3450).abs() < 1e-3, "{}", min.delta_u);
    }

    #[test]
    fn constant_gain_matches_one_step() {
        for lambda in [0.0, 0.3, 2.0] {
            let problem = CostProblem {
                bracket: 0.7,
                gain: GainPolynomial::constant(-0.5),
                lambda,
            };
            let min = minimize_polynomial_cost(&problem).unwrap();
            assert_relative_eq!(min.delta_u, -0.5 * 0.7 / (lambda + 0.25), epsilon = 1e-12);
        }
    }

    #[test]
    fn huge_lambda_freezes_input() {
        let problem = CostProblem {
            bracket: 1.0,
            gain: GainPolynomial::new(vec![2.0, 1.0]).unwrap(),
            lambda: 1e12,
        };
        assert!(minimize_polynomial_cost(&problem).unwrap().delta_u.abs() < 1e-10);
    }

    #[test]
    fn flat_cost_returns_zero_move() {
        let problem = CostProblem {
            bracket: 1.0,
            gain: GainPolynomial::constant(0.0),
            lambda: 0.0,
        };
        let min = minimize_polynomial_cost(&problem).unwrap();
        assert_eq!(min.delta_u, 0.0);
        assert_eq!(min.cost, 1.0);
    }

    #[test]
    fn tie_prefers_smaller_move() {
        // (1 - Δu²)²: minima at ±1, equal cost; the maximum at 0 is worse.
        let problem = CostProblem {
            bracket: 1.0,
            gain: GainPolynomial::new(vec![0.0, 1.0]).unwrap(),
            lambda: 0.0,
        };
        let min = minimize_polynomial_cost(&problem).unwrap();
        assert_relative_eq!(min.delta_u.abs(), 1.0, epsilon = 1e-9);
        let mirrored = pick(&problem, [1.0, -1.0, 0.5]).unwrap();
        assert_eq!(mirrored.delta_u, 1.0);
        let problem = CostProblem {
            bracket: 0.0,
            gain: GainPolynomial::constant(0.0),
            lambda: 0.0,
        };
        assert_eq!(pick(&problem, [3.0, -2.0, 0.5]).unwrap().delta_u, 0.5);
    }

    #[test]
    fn constrained_inactive_box_matches_free() {
        let problem = CostProblem {
            bracket: 1.0,
            gain: GainPolynomial::new(vec![2.0, 1.0]).unwrap(),
            lambda: 1.5,
        };
        let free = minimize_polynomial_cost(&problem).unwrap();
        let (boxed, u) = minimize_constrained(&problem, 0.0, -10.0, 10.0).unwrap();
        assert_relative_eq!(free.delta_u, boxed.delta_u, epsilon = 1e-12);
        assert_relative_eq!(u, free.delta_u, epsilon = 1e-12);
    }

    #[test]
    fn constrained_boundary_optimum() {
        // J = (1 + Δu)² + Δu² increases on [0, 1] for u_prev = 0.
        let problem = CostProblem {
            bracket: 1.0,
            gain: GainPolynomial::constant(-1.0),
            lambda: 1.0,
        };
        let (_, u) = minimize_constrained(&problem, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(u, 0.0);
        let (_, u) = minimize_constrained(&problem, 0.37, -0.6, -0.2).unwrap();
        assert!((-0.6..=-0.2).contains(&u));
        assert!(minimize_constrained(&problem, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn lagged_gain() {
        let g = GainPolynomial::new(vec![2.0, 1.0]).unwrap();
        assert_eq!(approximate_gain(&g, 0.0), 2.0);
        assert_eq!(approximate_gain(&g, 0.25), 2.25);
        assert_eq!(approximate_gain(&GainPolynomial::constant(-0.5), 3.0), -0.5);
    }

    fn example3_history() -> SignalHistory {
        // y(0..=10), u(0..=9)
        let y = vec![0.0, 0.1, 0.2, 0.25, 0.3, 0.32, 0.31, 0.3, 0.3, 0.33, 0.35];
        let u = vec![0.0, -0.1, -0.2, -0.3, -0.35, -0.38, -0.4, -0.2, -0.1, 0.1];
        SignalHistory::new(y, u)
    }

    fn example3_cfg(mode: ControlMode) -> ControllerConfig {
        ControllerConfig::new(
            1.5,
            PseudoOrders::new(1, 3).unwrap(),
            mode,
            PgSource::Taylor,
        )
        .unwrap()
    }

    #[test]
    fn single_iteration_equals_one_step() {
        let hist = example3_history();
        let trunc = crate::plants::Plant::default_truncation(&NonlinearPlant).unwrap();
        let k = 10;
        let orders = PseudoOrders::new(1, 3).unwrap();
        let op = Regressor::from_history(&hist, k - 1, orders).unwrap();
        let window = IncrementWindow::pending_input(&hist, k, orders).unwrap();
        let model = LocalModel::taylor(&NonlinearPlant, &op, &window, &trunc, k).unwrap();
        let input = StepInput {
            model: &model,
            window: &window,
            y_now: 0.35,
            u_prev: 0.1,
            previous_increment: 0.2,
            y_star_next: 0.8,
            taylor: None,
        };
        let a = decide(&example3_cfg(ControlMode::OneStep), &input).unwrap();
        let ctx = TaylorContext {
            table: &NonlinearPlant,
            history: &hist,
            truncation: &trunc,
            k,
        };
        let c = example3_cfg(ControlMode::Iterative { iterations: 1 });
        let b = iterative_law(&ctx, 0.8, 1, &c).unwrap();
        assert_relative_eq!(a.delta_u, b.delta_u, epsilon = 1e-14);
        // lagged gain 2 + 2u(k-1) + Δu(k-1)
        assert_relative_eq!(a.diagnostics.gain, 2.0 + 2.0 * 0.1 + 0.2, epsilon = 1e-14);
        assert_eq!(b.diagnostics.iteration_residuals.len(), 1);
    }

    #[test]
    fn iteration_at_rest_stays_at_rest() {
        // Constant record with y equal to the plant's output for the held input.
        let u0 = -0.4;
        let y0 = {
            let mut y = 0.0;
            for _ in 0..200 {
                y = crate::plants::Plant::step(
                    &NonlinearPlant,
                    &Regressor::new(vec![y], vec![u0; 3]),
                    0,
                );
            }
            y
        };
        let hist = SignalHistory::new(vec![y0; 11], vec![u0; 10]);
        let trunc = crate::plants::Plant::default_truncation(&NonlinearPlant).unwrap();
        let ctx = TaylorContext {
            table: &NonlinearPlant,
            history: &hist,
            truncation: &trunc,
            k: 10,
        };
        let c = example3_cfg(ControlMode::Iterative { iterations: 5 });
        let d = iterative_law(&ctx, y0, 5, &c).unwrap();
        assert!(d.delta_u.abs() < 1e-12, "{}", d.delta_u);
        assert!(d.diagnostics.iteration_residuals.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn iterative_law_checks_orders() {
        let hist = example3_history();
        let trunc = crate::plants::Plant::default_truncation(&NonlinearPlant).unwrap();
        let ctx = TaylorContext {
            table: &NonlinearPlant,
            history: &hist,
            truncation: &trunc,
            k: 10,
        };
        let c = ControllerConfig::new(
            1.5,
            PseudoOrders::new(1, 2).unwrap(),
            ControlMode::Iterative { iterations: 2 },
            PgSource::Taylor,
        )
        .unwrap();
        assert!(matches!(
            iterative_law(&ctx, 0.0, 2, &c),
            Err(MfacError::OrderMismatch { .. })
        ));
        assert!(iterative_law(&ctx, 0.0, 0, &c).is_err());
    }

    proptest! {
        #[test]
        fn lambda_zero_is_exact_inverse(
            phi in prop::collection::vec(-2.0f64..2.0, 3),
            dy in -1.0f64..1.0, du1 in -1.0f64..1.0,
            y in -1.0f64..1.0, ys in -1.0f64..1.0,
        ) {
            prop_assume!(phi[1].abs() >= 1e-3);
            let pg = PgVector::new(orders(), phi.clone(), 0).unwrap();
            let w = IncrementWindow::new(vec![dy], vec![0.0, du1]).unwrap();
            let d = one_step_law(&pg, &w, y, 0.0, ys, &cfg(0.0)).unwrap();
            let inverse = (ys - y - phi[0] * dy - phi[2] * du1) / phi[1];
            prop_assert!((d.delta_u - inverse).abs() <= 1e-12 * inverse.abs().max(1.0));
        }

        #[test]
        fn move_shrinks_with_lambda(
            gain in -3.0f64..3.0, b in -2.0f64..2.0,
            l1 in 0.0f64..5.0, dl in 0.0f64..5.0,
        ) {
            let pg = PgVector::new(orders(), vec![0.0, gain, 0.0], 0).unwrap();
            let w = IncrementWindow::zeros(orders());
            let guard = ControllerConfig::DEFAULT_GUARD;
            prop_assume!(l1 > 0.0 || gain.abs() >= guard);
            let a = one_step_law(&pg, &w, 0.0, 0.0, b, &cfg(l1)).unwrap();
            let c = one_step_law(&pg, &w, 0.0, 0.0, b, &cfg(l1 + dl)).unwrap();
            prop_assert!(c.delta_u.abs() <= a.delta_u.abs() + 1e-15);
        }

        #[test]
        fn constrained_input_always_in_box(
            b in -5.0f64..5.0, c0 in -3.0f64..3.0, c1 in -3.0f64..3.0,
            lambda in 0.0f64..3.0, u_prev in -2.0f64..2.0,
            lo in -1.0f64..0.0, width in 1e-6f64..1.0,
        ) {
            let problem = CostProblem {
                bracket: b,
                gain: GainPolynomial::new(vec![c0, c1]).unwrap(),
                lambda,
            };
            let (_, u) = minimize_constrained(&problem, u_prev, lo, lo + width).unwrap();
            prop_assert!(u >= lo && u <= lo + width);
        }
    }
}
