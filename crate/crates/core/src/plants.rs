//! Discrete-time SISO plants and reference trajectories.

use serde::{Deserialize, Serialize};

use crate::edlm::{Argument, PartialDerivativeTable, PseudoOrders, Regressor, Truncation};
use crate::error::{MfacError, Result};

/// Derivative depth advertised by plants whose partials are exact at any order.
const EXACT_DEPTH: usize = 16;

/// `y(k+1) = f(φ(k), k)`.
pub trait Plant: Send + Sync {
    fn name(&self) -> &str;

    /// True orders `(n_y+1, n_u+1)`; `step` reads exactly these regressor slots.
    fn orders(&self) -> PseudoOrders;

    fn step(&self, regressor: &Regressor, k: i64) -> f64;

    fn partials(&self) -> Option<&dyn PartialDerivativeTable> {
        None
    }

    /// Taylor depth per argument used when the plant drives a known-model controller.
    fn default_truncation(&self) -> Option<Truncation> {
        None
    }
}

/// `d/dx^order` of `Σ c_i x^i` at `x`.
fn poly_derivative(coefficients: &[f64], order: usize, x: f64) -> f64 {
    coefficients
        .iter()
        .enumerate()
        .skip(order)
        .map(|(i, &c)| {
            let falling: f64 = ((i - order + 1)..=i).map(|m| m as f64).product();
            c * falling * x.powi((i - order) as i32)
        })
        .sum()
}

/// Structure-varying linear plant with constant disturbances:
///
/// ```text
/// y(k+1) = -0.4y(k) - 0.5u(k) - 0.6u(k-1) + d1,   k ≤ 350
/// y(k+1) =  0.4y(k) + 0.5u(k) + 0.6u(k-1) + d2,   k ≥ 351
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingPlant {
    pub d1: f64,
    pub d2: f64,
}

impl SwitchingPlant {
    pub const SWITCH_K: i64 = 350;

    fn sign(k: i64) -> f64 {
        if k <= Self::SWITCH_K {
            -1.0
        } else {
            1.0
        }
    }

    fn coefficients(k: i64) -> [f64; 3] {
        let s = Self::sign(k);
        [0.4 * s, 0.5 * s, 0.6 * s]
    }
}

impl Plant for SwitchingPlant {
    fn name(&self) -> &str {
        "example1"
    }

    fn orders(&self) -> PseudoOrders {
        PseudoOrders::new(1, 2).unwrap()
    }

    fn step(&self, r: &Regressor, k: i64) -> f64 {
        let [a, b0, b1] = Self::coefficients(k);
        let d = if k <= Self::SWITCH_K {
            self.d1
        } else {
            self.d2
        };
        a * r.y[0] + b0 * r.u[0] + b1 * r.u[1] + d
    }

    fn partials(&self) -> Option<&dyn PartialDerivativeTable> {
        Some(self)
    }

    fn default_truncation(&self) -> Option<Truncation> {
        Some(Truncation::uniform(Plant::orders(self), 1))
    }
}

impl PartialDerivativeTable for SwitchingPlant {
    fn orders(&self) -> PseudoOrders {
        Plant::orders(self)
    }

    fn max_order(&self, _arg: Argument) -> usize {
        EXACT_DEPTH
    }

    fn partial(&self, arg: Argument, order: usize, _p: &Regressor, k: i64) -> f64 {
        if order != 1 {
            return 0.0;
        }
        Self::coefficients(k)[arg.pg_index(Plant::orders(self))]
    }
}

/// `y(k+1) = Σ a_i y(k-i) + Σ b_j u(k-j) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    name: String,
    a: Vec<f64>,
    b: Vec<f64>,
    offset: f64,
}

impl LinearPlant {
    pub fn new(a: Vec<f64>, b: Vec<f64>, offset: f64) -> Result<Self> {
        if b.is_empty() {
            return Err(MfacError::config(
                "linear plant needs at least one input coefficient",
            ));
        }
        if a.iter()
            .chain(b.iter())
            .chain([offset].iter())
            .any(|v| !v.is_finite())
        {
            return Err(MfacError::config(
                "linear plant coefficients must be finite",
            ));
        }
        Ok(Self {
            name: "linear".into(),
            a,
            b,
            offset,
        })
    }

    /// `y(k+1) = -0.8y(k) - 0.5u(k) - 0.2u(k-1)`; its pseudo-gradient is
    /// `[-0.8, -0.5, -0.2]` everywhere.
    pub fn example2() -> Self {
        Self {
            name: "example2".into(),
            a: vec![-0.8],
            b: vec![-0.5, -0.2],
            offset: 0.0,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    /// The constant pseudo-gradient `[a…, b…]`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.a.iter().chain(self.b.iter()).copied().collect()
    }
}

impl Plant for LinearPlant {
    fn name(&self) -> &str {
        &self.name
    }

    fn orders(&self) -> PseudoOrders {
        PseudoOrders::new(self.a.len(), self.b.len()).unwrap()
    }

    fn step(&self, r: &Regressor, _k: i64) -> f64 {
        let ya: f64 = self.a.iter().zip(&r.y).map(|(c, v)| c * v).sum();
        let ub: f64 = self.b.iter().zip(&r.u).map(|(c, v)| c * v).sum();
        ya + ub + self.offset
    }

    fn partials(&self) -> Option<&dyn PartialDerivativeTable> {
        Some(self)
    }

    fn default_truncation(&self) -> Option<Truncation> {
        Some(Truncation::uniform(Plant::orders(self), 1))
    }
}

impl PartialDerivativeTable for LinearPlant {
    fn orders(&self) -> PseudoOrders {
        Plant::orders(self)
    }

    fn max_order(&self, _arg: Argument) -> usize {
        EXACT_DEPTH
    }

    fn partial(&self, arg: Argument, order: usize, _p: &Regressor, _k: i64) -> f64 {
        if order != 1 {
            return 0.0;
        }
        match arg {
            Argument::Output(i) => self.a[i],
            Argument::Input(j) => self.b[j],
        }
    }
}

/// `y(k+1) = 0.2y²(k) + 2u(k) + u²(k) + 2u⁵(k-1) + cos(u(k-1)) + u⁶(k-2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NonlinearPlant;

impl NonlinearPlant {
    const Y0: [f64; 3] = [0.0, 0.0, 0.2];
    const U0: [f64; 3] = [0.0, 2.0, 1.0];
    const U1_POLY: [f64; 6] = [0.0, 0.0, 0.0, 0.0, 0.0, 2.0];
    const U2: [f64; 7] = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
}

/// n-th derivative of cos at x.
fn cos_derivative(order: usize, x: f64) -> f64 {
    match order % 4 {
        0 => x.cos(),
        1 => -x.sin(),
        2 => -x.cos(),
        _ => x.sin(),
    }
}

impl Plant for NonlinearPlant {
    fn name(&self) -> &str {
        "example3"
    }

    fn orders(&self) -> PseudoOrders {
        PseudoOrders::new(1, 3).unwrap()
    }

    fn step(&self, r: &Regressor, _k: i64) -> f64 {
        let (y, u0, u1, u2) = (r.y[0], r.u[0], r.u[1], r.u[2]);
        0.2 * y * y + 2.0 * u0 + u0 * u0 + 2.0 * u1.powi(5) + u1.cos() + u2.powi(6)
    }

    fn partials(&self) -> Option<&dyn PartialDerivativeTable> {
        Some(self)
    }

    /// Two terms for the output and `u(k)` slots, five for `u(k-1)`, six for `u(k-2)`.
    fn default_truncation(&self) -> Option<Truncation> {
        Some(Truncation {
            output: vec![2],
            input: vec![2, 5, 6],
        })
    }
}

impl PartialDerivativeTable for NonlinearPlant {
    fn orders(&self) -> PseudoOrders {
        Plant::orders(self)
    }

    fn max_order(&self, _arg: Argument) -> usize {
        EXACT_DEPTH
    }

    fn partial(&self, arg: Argument, order: usize, p: &Regressor, _k: i64) -> f64 {
        match arg {
            Argument::Output(0) => poly_derivative(&Self::Y0, order, p.y[0]),
            Argument::Input(0) => poly_derivative(&Self::U0, order, p.u[0]),
            Argument::Input(1) => {
                poly_derivative(&Self::U1_POLY, order, p.u[1]) + cos_derivative(order, p.u[1])
            }
            Argument::Input(2) => poly_derivative(&Self::U2, order, p.u[2]),
            _ => 0.0,
        }
    }
}

/// `y(k+1) = Σ p_i(y(k-i)) + Σ q_j(u(k-j))` with each `p_i`, `q_j` a
/// polynomial given by ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePolynomialPlant {
    output_terms: Vec<Vec<f64>>,
    input_terms: Vec<Vec<f64>>,
}

impl SeparablePolynomialPlant {
    pub fn new(output_terms: Vec<Vec<f64>>, input_terms: Vec<Vec<f64>>) -> Result<Self> {
        if input_terms.is_empty() {
            return Err(MfacError::config(
                "polynomial plant needs at least one input term",
            ));
        }
        Ok(Self {
            output_terms,
            input_terms,
        })
    }

    fn term(&self, arg: Argument) -> &[f64] {
        match arg {
            Argument::Output(i) => &self.output_terms[i],
            Argument::Input(j) => &self.input_terms[j],
        }
    }
}

fn eval_poly(c: &[f64], x: f64) -> f64 {
    crate::edlm::horner(c, x)
}

impl Plant for SeparablePolynomialPlant {
    fn name(&self) -> &str {
        "polynomial"
    }

    fn orders(&self) -> PseudoOrders {
        PseudoOrders::new(self.output_terms.len(), self.input_terms.len()).unwrap()
    }

    fn step(&self, r: &Regressor, _k: i64) -> f64 {
        let ys: f64 = self
            .output_terms
            .iter()
            .zip(&r.y)
            .map(|(c, &v)| eval_poly(c, v))
            .sum();
        let us: f64 = self
            .input_terms
            .iter()
            .zip(&r.u)
            .map(|(c, &v)| eval_poly(c, v))
            .sum();
        ys + us
    }

    fn partials(&self) -> Option<&dyn PartialDerivativeTable> {
        Some(self)
    }

    /// Degree of each term, which makes the Taylor pseudo-gradient exact.
    fn default_truncation(&self) -> Option<Truncation> {
        let degree = |c: &Vec<f64>| c.len().saturating_sub(1).max(1);
        Some(Truncation {
            output: self.output_terms.iter().map(degree).collect(),
            input: self.input_terms.iter().map(degree).collect(),
        })
    }
}

impl PartialDerivativeTable for SeparablePolynomialPlant {
    fn orders(&self) -> PseudoOrders {
        Plant::orders(self)
    }

    fn max_order(&self, _arg: Argument) -> usize {
        EXACT_DEPTH
    }

    fn partial(&self, arg: Argument, order: usize, p: &Regressor, _k: i64) -> f64 {
        poly_derivative(self.term(arg), order, p.get(arg))
    }
}

/// Plant selection as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    Example1 {
        #[serde(default)]
        d1: f64,
        #[serde(default)]
        d2: f64,
    },
    Example2,
    Example3,
    Linear {
        a: Vec<f64>,
        b: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    Polynomial {
        output_terms: Vec<Vec<f64>>,
        input_terms: Vec<Vec<f64>>,
    },
}

impl PlantSpec {
    pub fn build(&self) -> Result<Box<dyn Plant>> {
        Ok(match self {
            PlantSpec::Example1 { d1, d2 } => Box::new(SwitchingPlant { d1: *d1, d2: *d2 }),
            PlantSpec::Example2 => Box::new(LinearPlant::example2()),
            PlantSpec::Example3 => Box::new(NonlinearPlant),
            PlantSpec::Linear { a, b, offset } => {
                Box::new(LinearPlant::new(a.clone(), b.clone(), *offset)?)
            }
            PlantSpec::Polynomial {
                output_terms,
                input_terms,
            } => Box::new(SeparablePolynomialPlant::new(
                output_terms.clone(),
                input_terms.clone(),
            )?),
        })
    }
}

/// Desired output generators. [`Trajectory::eval`] at step `k` returns
/// `y*(k+1)`. `round` is half-away-from-zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// `0.4^round(k/50)` for `k ≤ 490`, then `0.1 + 0.1·(-1)^round(k/50)`.
    StaircaseExample1,
    /// Like the staircase but `0.4·(-1)^round(k/50)` on the first segment.
    StaircaseAlternating,
    /// `scale·k^n`; `n = 1` is a ramp with slope `scale`.
    Power {
        n: u32,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `0.5 sin(k/50) + 0.5 cos(k/3) + 0.5 sin(k/10)` for `k ≤ 350`, then
    /// `0.3 + 0.3·(-1)^round(k/50)`.
    CompositeExample3,
    /// `offset + amplitude·(-1)^floor(k/half_period)`.
    SquareWave {
        amplitude: f64,
        offset: f64,
        half_period: u32,
    },
    Constant {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn alternating(k: i64) -> f64 {
    let r = (k as f64 / 50.0).round() as i64;
    if r.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        match self {
            Trajectory::SquareWave { half_period: 0, .. } => Err(MfacError::config(
                "square wave half period must be positive",
            )),
            Trajectory::Power { scale, .. } if !scale.is_finite() => {
                Err(MfacError::config("power trajectory scale must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, k: i64) -> f64 {
        let kf = k as f64;
        match self {
            Trajectory::StaircaseExample1 => {
                if k <= 490 {
                    0.4f64.powf((kf / 50.0).round())
                } else {
                    0.1 + 0.1 * alternating(k)
                }
            }
            Trajectory::StaircaseAlternating => {
                if k <= 490 {
                    0.4 * alternating(k)
                } else {
                    0.1 + 0.1 * alternating(k)
                }
            }
            Trajectory::Power { n, scale } => scale * kf.powi(*n as i32),
            Trajectory::CompositeExample3 => {
                if k <= 350 {
                    0.5 * (kf / 50.0).sin() + 0.5 * (kf / 3.0).cos() + 0.5 * (kf / 10.0).sin()
                } else {
                    0.3 + 0.3 * alternating(k)
                }
            }
            Trajectory::SquareWave {
                amplitude,
                offset,
                half_period,
            } => {
                let phase = k.div_euclid(*half_period as i64);
                let sign = if phase.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                offset + amplitude * sign
            }
            Trajectory::Constant { value } => *value,
        }
    }
}
