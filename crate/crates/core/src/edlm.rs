//! Equivalent dynamic linearization.
//!
//! The plant `y(k+1) = f(y(k), …, y(k-n_y), u(k), …, u(k-n_u))` is described
//! along its trajectory by the incremental model
//!
//! ```text
//! Δy(k+1) = φ_L(k)ᵀ ΔH(k),   ΔH(k) = [Δy(k), …, Δy(k-Ly+1), Δu(k), …, Δu(k-Lu+1)]ᵀ
//! ```
//!
//! where the pseudo-gradient `φ_L(k)` is time varying. For plants whose
//! partial derivatives are known, the pseudo-gradient is built slot by slot
//! from a truncated Taylor series around the previous operating point
//! `φ(k-1)`; see [`taylor_pg`].

use crate::error::{MfacError, Result};

/// Lengths of the output- and input-increment windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PseudoOrders {
    ly: usize,
    lu: usize,
}

impl PseudoOrders {
    /// `ly` may be zero; `lu` must be at least one.
    pub fn new(ly: usize, lu: usize) -> Result<Self> {
        if lu == 0 {
            return Err(MfacError::config("pseudo order lu must be at least 1"));
        }
        Ok(Self { ly, lu })
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn lu(&self) -> usize {
        self.lu
    }

    /// `ly + lu`, the length of the pseudo-gradient.
    pub fn len(&self) -> usize {
        self.ly + self.lu
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, other: &PseudoOrders) -> Result<()> {
        if self != other {
            return Err(MfacError::OrderMismatch {
                expected_ly: self.ly,
                expected_lu: self.lu,
                got_ly: other.ly,
                got_lu: other.lu,
            });
        }
        Ok(())
    }
}

/// One regressor slot of the plant function, addressed by lag.
///
/// `Output(i)` is `y(k-i)` and `Input(j)` is `u(k-j)` relative to the
/// regressor's own time index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Argument {
    Output(usize),
    Input(usize),
}

impl Argument {
    /// Position of this slot inside a pseudo-gradient with the given orders.
    pub fn pg_index(&self, orders: PseudoOrders) -> usize {
        match *self {
            Argument::Output(i) => i,
            Argument::Input(j) => orders.ly + j,
        }
    }

    /// Every argument of a function with the given orders, outputs first.
    pub fn all(orders: PseudoOrders) -> impl Iterator<Item = Argument> {
        (0..orders.ly)
            .map(Argument::Output)
            .chain((0..orders.lu).map(Argument::Input))
    }
}

/// The pseudo-gradient `φ_L(k)`: `ly` output coefficients followed by `lu`
/// input coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PgVector {
    orders: PseudoOrders,
    phi: Vec<f64>,
    k: i64,
}

impl PgVector {
    pub fn new(orders: PseudoOrders, phi: Vec<f64>, k: i64) -> Result<Self> {
        if phi.len() != orders.len() {
            return Err(MfacError::config(format!(
                "pseudo-gradient has {} entries, orders require {}",
                phi.len(),
                orders.len()
            )));
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(MfacError::numeric(format!(
                "pseudo-gradient entry {} is not finite",
                i + 1
            )));
        }
        Ok(Self { orders, phi, k })
    }

    pub fn orders(&self) -> PseudoOrders {
        self.orders
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phi
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.phi
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn with_k(mut self, k: i64) -> Self {
        self.k = k;
        self
    }

    /// Coefficients of `φ_Ly(z⁻¹)`.
    pub fn output_block(&self) -> &[f64] {
        &self.phi[..self.orders.ly]
    }

    /// Coefficients of `φ_Lu(z⁻¹)`.
    pub fn input_block(&self) -> &[f64] {
        &self.phi[self.orders.ly..]
    }

    /// `φ_{Ly+1}(k)`, the instantaneous control gain.
    pub fn leading_input(&self) -> f64 {
        self.phi[self.orders.ly]
    }

    pub fn get(&self, arg: Argument) -> f64 {
        self.phi[arg.pg_index(self.orders)]
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.orders,
            self.phi.iter().map(|v| v * alpha).collect(),
            self.k,
        )
    }

    pub fn norm(&self) -> f64 {
        self.phi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `ΔH(k)`: output increments `[Δy(k), …, Δy(k-Ly+1)]` and input increments
/// `[Δu(k), …, Δu(k-Lu+1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementWindow {
    dy: Vec<f64>,
    du: Vec<f64>,
}

impl IncrementWindow {
    pub fn new(dy: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        if du.is_empty() {
            return Err(MfacError::config(
                "increment window needs at least one input increment",
            ));
        }
        Ok(Self { dy, du })
    }

    pub fn zeros(orders: PseudoOrders) -> Self {
        Self {
            dy: vec![0.0; orders.ly],
            du: vec![0.0; orders.lu],
        }
    }

    /// `ΔH(k)` read from a recorded history. Requires `u(k)` to be known.
    pub fn from_history(history: &SignalHistory, k: i64, orders: PseudoOrders) -> Result<Self> {
        let dy = (0..orders.ly as i64)
            .map(|i| history.dy(k - i))
            .collect::<Result<Vec<_>>>()?;
        let du = (0..orders.lu as i64)
            .map(|j| history.du(k - j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dy, du })
    }

    /// `ΔH(k)` as seen by the controller at step `k`: `Δu(k)` is still
    /// unknown and held at zero, every other entry comes from the history.
    pub fn pending_input(history: &SignalHistory, k: i64, orders: PseudoOrders) -> Result<Self> {
        let dy = (0..orders.ly as i64)
            .map(|i| history.dy(k - i))
            .collect::<Result<Vec<_>>>()?;
        let mut du = vec![0.0; orders.lu];
        for (j, slot) in du.iter_mut().enumerate().skip(1) {
            *slot = history.du(k - j as i64)?;
        }
        Ok(Self { dy, du })
    }

    pub fn orders(&self) -> PseudoOrders {
        PseudoOrders {
            ly: self.dy.len(),
            lu: self.du.len(),
        }
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn du(&self) -> &[f64] {
        &self.du
    }

    pub fn get(&self, arg: Argument) -> f64 {
        match arg {
            Argument::Output(i) => self.dy[i],
            Argument::Input(j) => self.du[j],
        }
    }

    /// Replaces `Δu(k)`.
    pub fn with_current_input(mut self, du: f64) -> Self {
        self.du[0] = du;
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.dy.iter().chain(self.du.iter()).copied()
    }

    pub fn norm_sq(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }

    /// The linearization theorem only holds for a nonzero window; startup
    /// windows usually are zero.
    pub fn is_nonzero(&self) -> bool {
        self.norm_sq() > 0.0
    }
}

/// The regressor `φ(k) = [y(k), …, y(k-Ly+1), u(k), …, u(k-Lu+1)]`, i.e. the
/// arguments of the plant function. Also serves as an operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
}

impl Regressor {
    pub fn new(y: Vec<f64>, u: Vec<f64>) -> Self {
        Self { y, u }
    }

    pub fn from_history(history: &SignalHistory, k: i64, orders: PseudoOrders) -> Result<Self> {
        let y = (0..orders.ly as i64)
            .map(|i| history.y(k - i))
            .collect::<Result<Vec<_>>>()?;
        let u = (0..orders.lu as i64)
            .map(|j| history.u(k - j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { y, u })
    }

    pub fn orders(&self) -> Result<PseudoOrders> {
        PseudoOrders::new(self.y.len(), self.u.len())
    }

    pub fn get(&self, arg: Argument) -> f64 {
        match arg {
            Argument::Output(i) => self.y[i],
            Argument::Input(j) => self.u[j],
        }
    }

    pub fn with(&self, arg: Argument, value: f64) -> Self {
        let mut out = self.clone();
        match arg {
            Argument::Output(i) => out.y[i] = value,
            Argument::Input(j) => out.u[j] = value,
        }
        out
    }
}

/// Output and input sequences indexed by absolute time. Times before zero
/// read as zero, so increments at the start of a record are zero-filled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalHistory {
    y: Vec<f64>,
    u: Vec<f64>,
}

impl SignalHistory {
    pub fn new(y: Vec<f64>, u: Vec<f64>) -> Self {
        Self { y, u }
    }

    pub fn y_len(&self) -> usize {
        self.y.len()
    }

    pub fn u_len(&self) -> usize {
        self.u.len()
    }

    pub fn outputs(&self) -> &[f64] {
        &self.y
    }

    pub fn inputs(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self, t: i64) -> Result<f64> {
        read(&self.y, t, "y")
    }

    pub fn u(&self, t: i64) -> Result<f64> {
        read(&self.u, t, "u")
    }

    pub fn dy(&self, t: i64) -> Result<f64> {
        Ok(self.y(t)? - self.y(t - 1)?)
    }

    pub fn du(&self, t: i64) -> Result<f64> {
        Ok(self.u(t)? - self.u(t - 1)?)
    }

    /// Writes `y(t)`, growing the record with zeros if needed.
    pub fn set_y(&mut self, t: usize, value: f64) {
        if self.y.len() <= t {
            self.y.resize(t + 1, 0.0);
        }
        self.y[t] = value;
    }

    pub fn set_u(&mut self, t: usize, value: f64) {
        if self.u.len() <= t {
            self.u.resize(t + 1, 0.0);
        }
        self.u[t] = value;
    }
}

fn read(v: &[f64], t: i64, name: &str) -> Result<f64> {
    if t < 0 {
        return Ok(0.0);
    }
    v.get(t as usize).copied().ok_or_else(|| {
        MfacError::Window(format!(
            "{name}({t}) not recorded (record length {})",
            v.len()
        ))
    })
}

/// Pure partial derivatives `∂ⁱf/∂argⁱ` of a plant function.
pub trait PartialDerivativeTable {
    /// True orders `(n_y+1, n_u+1)` of the function.
    fn orders(&self) -> PseudoOrders;

    /// Highest derivative order available for `arg`; at least 1.
    fn max_order(&self, arg: Argument) -> usize;

    /// `∂ⁱf/∂argⁱ` at `point`, for the function applied at time index `k`.
    /// Callers must respect [`max_order`](Self::max_order).
    fn partial(&self, arg: Argument, order: usize, point: &Regressor, k: i64) -> f64;
}

/// Per-argument number of Taylor terms.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Truncation {
    pub output: Vec<usize>,
    pub input: Vec<usize>,
}

impl Truncation {
    pub fn uniform(orders: PseudoOrders, n: usize) -> Self {
        Self {
            output: vec![n; orders.ly],
            input: vec![n; orders.lu],
        }
    }

    /// The deepest truncation a table supports.
    pub fn max_of(table: &dyn PartialDerivativeTable) -> Self {
        let orders = table.orders();
        Self {
            output: (0..orders.ly)
                .map(|i| table.max_order(Argument::Output(i)))
                .collect(),
            input: (0..orders.lu)
                .map(|j| table.max_order(Argument::Input(j)))
                .collect(),
        }
    }

    /// Flattened in pseudo-gradient order.
    pub fn from_flat(orders: PseudoOrders, flat: &[usize]) -> Result<Self> {
        if flat.len() != orders.len() {
            return Err(MfacError::config(format!(
                "truncation lists {} orders, expected {}",
                flat.len(),
                orders.len()
            )));
        }
        Ok(Self {
            output: flat[..orders.ly].to_vec(),
            input: flat[orders.ly..].to_vec(),
        })
    }

    pub fn get(&self, arg: Argument) -> usize {
        match arg {
            Argument::Output(i) => self.output[i],
            Argument::Input(j) => self.input[j],
        }
    }

    fn check(&self, table: &dyn PartialDerivativeTable) -> Result<()> {
        let orders = table.orders();
        if self.output.len() != orders.ly || self.input.len() != orders.lu {
            return Err(MfacError::config(format!(
                "truncation shape ({}, {}) does not match plant orders ({}, {})",
                self.output.len(),
                self.input.len(),
                orders.ly,
                orders.lu
            )));
        }
        for arg in Argument::all(orders) {
            let n = self.get(arg);
            if n == 0 {
                return Err(MfacError::config(format!(
                    "truncation order for {arg:?} must be at least 1"
                )));
            }
            if n > table.max_order(arg) {
                return Err(MfacError::config(format!(
                    "truncation order {n} for {arg:?} exceeds available derivative order {}",
                    table.max_order(arg)
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients `c_j = (1/(j+1)!)·∂^{j+1}f/∂arg^{j+1}`, `j = 0..n`, so that the
/// Taylor slot value for an increment `d` is `Σ c_j d^j`.
pub fn taylor_coefficients(
    table: &dyn PartialDerivativeTable,
    arg: Argument,
    n: usize,
    point: &Regressor,
    k: i64,
) -> Result<Vec<f64>> {
    if n == 0 || n > table.max_order(arg) {
        return Err(MfacError::config(format!(
            "derivative order {n} unavailable for {arg:?} (max {})",
            table.max_order(arg)
        )));
    }
    let mut factorial = 1.0;
    Ok((1..=n)
        .map(|i| {
            factorial *= i as f64;
            table.partial(arg, i, point, k) / factorial
        })
        .collect())
}

/// Evaluates `Σ c_j d^j`.
pub fn horner(coefficients: &[f64], d: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * d + c)
}

/// Pseudo-gradient at step `k` from truncated Taylor series.
///
/// `operating_point` is `φ(k-1)`; partials are taken of the function applied
/// at time `k-1`. Entry for each argument is
/// `Σ_{i=1..N} (1/i!)·∂ⁱf/∂argⁱ · Δarg^{i-1}` with `Δarg` read from
/// `increments`. With a zero window this is the plain gradient.
pub fn taylor_pg(
    table: &dyn PartialDerivativeTable,
    operating_point: &Regressor,
    increments: &IncrementWindow,
    truncation: &Truncation,
    k: i64,
) -> Result<PgVector> {
    let orders = table.orders();
    orders.check(&increments.orders())?;
    orders.check(&operating_point.orders()?)?;
    truncation.check(table)?;
    let phi = Argument::all(orders)
        .map(|arg| {
            let c = taylor_coefficients(table, arg, truncation.get(arg), operating_point, k - 1)?;
            Ok(horner(&c, increments.get(arg)))
        })
        .collect::<Result<Vec<_>>>()?;
    PgVector::new(orders, phi, k)
}

/// First-order pseudo-gradient `∇f(φ(k-1))`.
pub fn gradient_pg(
    table: &dyn PartialDerivativeTable,
    operating_point: &Regressor,
    k: i64,
) -> Result<PgVector> {
    let orders = table.orders();
    taylor_pg(
        table,
        operating_point,
        &IncrementWindow::zeros(orders),
        &Truncation::uniform(orders, 1),
        k,
    )
}

/// `φ_L(k)ᵀ ΔH(k)`, the predicted `Δy(k+1)`.
pub fn predict_increment(pg: &PgVector, h: &IncrementWindow) -> Result<f64> {
    pg.orders().check(&h.orders())?;
    Ok(pg.as_slice().iter().zip(h.iter()).map(|(p, d)| p * d).sum())
}

/// Unmodeled dynamics `v(k)` around the operating point `φ(k-1)`:
///
/// ```text
/// v(k) = y(k+1) - Σ ∂f/∂y(k-1-i)·y(k-i) - Σ ∂f/∂u(k-1-j)·u(k-j) - γ(k)
/// ```
///
/// with all partials at `φ(k-1)` and `γ(k)` the higher-order Taylor residue
/// `Σ (φ_taylor - ∂f)·Δ` at the table's full derivative depth. The history
/// must contain `y(k+1)` and every sample back to `k - max(Ly, Lu)`.
pub fn unmodeled_dynamics(
    table: &dyn PartialDerivativeTable,
    history: &SignalHistory,
    k: i64,
) -> Result<f64> {
    let orders = table.orders();
    let depth = orders.ly.max(orders.lu) as i64;
    if k < depth {
        return Err(MfacError::Window(format!(
            "unmodeled dynamics at k={k} needs k >= {depth}"
        )));
    }
    if history.y_len() < (k + 2) as usize || history.u_len() < (k + 1) as usize {
        return Err(MfacError::Window(format!(
            "unmodeled dynamics at k={k} needs y up to {} and u up to {k}",
            k + 1
        )));
    }
    let op = Regressor::from_history(history, k - 1, orders)?;
    let current = Regressor::from_history(history, k, orders)?;
    let window = IncrementWindow::from_history(history, k, orders)?;
    let truncation = Truncation::max_of(table);
    let gradient = gradient_pg(table, &op, k)?;
    let full = taylor_pg(table, &op, &window, &truncation, k)?;

    let mut v = history.y(k + 1)?;
    let mut gamma = 0.0;
    for arg in Argument::all(orders) {
        let g = gradient.get(arg);
        v -= g * current.get(arg);
        gamma += (full.get(arg) - g) * window.get(arg);
    }
    Ok(v - gamma)
}

/// Central-difference partials (first and second order, one Richardson
/// extrapolation) of an arbitrary step function. Intended as a check on
/// analytic tables.
pub struct FiniteDifferenceTable<F> {
    orders: PseudoOrders,
    step: f64,
    f: F,
}

impl<F> FiniteDifferenceTable<F>
where
    F: Fn(&Regressor, i64) -> f64,
{
    pub fn new(orders: PseudoOrders, f: F) -> Self {
        Self {
            orders,
            step: 1e-6,
            f,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    fn central(&self, arg: Argument, order: usize, point: &Regressor, k: i64, h: f64) -> f64 {
        let x = point.get(arg);
        let at = |v: f64| (self.f)(&point.with(arg, v), k);
        match order {
            1 => (at(x + h) - at(x - h)) / (2.0 * h),
            2 => (at(x + h) - 2.0 * at(x) + at(x - h)) / (h * h),
            _ => f64::NAN,
        }
    }
}

impl<F> PartialDerivativeTable for FiniteDifferenceTable<F>
where
    F: Fn(&Regressor, i64) -> f64,
{
    fn orders(&self) -> PseudoOrders {
        self.orders
    }

    fn max_order(&self, _arg: Argument) -> usize {
        2
    }

    fn partial(&self, arg: Argument, order: usize, point: &Regressor, k: i64) -> f64 {
        // Second differences need a wider step to stay above round-off.
        let h = if order == 1 {
            self.step
        } else {
            self.step.sqrt()
        };
        let coarse = self.central(arg, order, point, k, h);
        let fine = self.central(arg, order, point, k, h / 2.0);
        (4.0 * fine - coarse) / 3.0
    }
}
