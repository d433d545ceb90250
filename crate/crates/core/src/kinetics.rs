//! Degradation models, their exact solutions, and a fixed-step integrator.
//!
//! Two models of cellulose chain scission:
//!
//! - second-order kinetics with a constant Arrhenius rate,
//!   dDP/dt = -k DP^2 with k = A exp(-E/(R T)), whose exact integral is
//!   1/DP(t) = 1/DP0 + k t;
//! - the decaying-rate variant, dDP/dt = -k1 DP^2, dk1/dt = -k2 k1, with
//!   k1(t) = k1_0 exp(-k2 t) and 1/DP(t) = 1/DP0 + (k1_0/k2)(1 - exp(-k2 t)).
//!
//! The closed forms are the canonical data generators; RK4 exists for
//! generality and cross-checking (its error against the closed forms bounds
//! the integrator directly). Time is in hours everywhere; 1 year = 8760 h.

use crate::data::{Provenance, TimeSeries, Units};
use crate::error::{Error, Result};

/// Gas constant [J K^-1 mol^-1].
pub const GAS_CONSTANT: f64 = 8.314;

/// DP level conventionally treated as insulation end-of-life.
pub const EOL_THRESHOLD_DP: f64 = 200.0;

pub const HOURS_PER_YEAR: f64 = 24.0 * 365.0;

/// Arrhenius rate parameters at a fixed absolute temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusParams {
    /// Pre-exponential factor [1/h]; grows with contamination (moisture,
    /// oxygen, acids).
    pub pre_exponential: f64,
    /// Activation energy [J/mol].
    pub activation_energy: f64,
    /// Absolute temperature [K].
    pub temperature: f64,
}

impl ArrheniusParams {
    pub fn new(pre_exponential: f64, activation_energy: f64, temperature: f64) -> Result<Self> {
        let p = ArrheniusParams {
            pre_exponential,
            activation_energy,
            temperature,
        };
        if !(pre_exponential > 0.0 && activation_energy > 0.0 && temperature > 0.0)
            || !p.ln_a().is_finite()
            || !p.e_over_rt().is_finite()
        {
            return Err(Error::invalid(format!(
                "arrhenius parameters out of range: A={pre_exponential}, E={activation_energy}, T={temperature}"
            )));
        }
        Ok(p)
    }

    pub fn ln_a(&self) -> f64 {
        self.pre_exponential.ln()
    }

    pub fn e_over_rt(&self) -> f64 {
        self.activation_energy / (GAS_CONSTANT * self.temperature)
    }

    /// k = A exp(-E/(R T)) [1/h].
    pub fn rate(&self) -> f64 {
        self.pre_exponential * (-self.e_over_rt()).exp()
    }
}

/// Second-order scission model with constant rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkenstamModel {
    pub params: ArrheniusParams,
    /// Initial degree of polymerization (typically 1000-1200 for new paper).
    pub dp0: f64,
}

impl EkenstamModel {
    pub fn new(params: ArrheniusParams, dp0: f64) -> Result<Self> {
        if !(dp0 > 0.0) {
            return Err(Error::invalid(format!("dp0 must be positive, got {dp0}")));
        }
        Ok(EkenstamModel { params, dp0 })
    }

    /// Exact solution DP(t) = 1 / (1/DP0 + k t), strictly decreasing for k>0.
    pub fn dp_at(&self, t_hours: f64) -> f64 {
        1.0 / (1.0 / self.dp0 + self.params.rate() * t_hours)
    }

    /// Analytic dDP/dt of the exact solution.
    pub fn dp_rate_at(&self, t_hours: f64) -> f64 {
        let dp = self.dp_at(t_hours);
        -self.params.rate() * dp * dp
    }

    /// Right-hand side for the integrator.
    pub fn rhs(&self) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        let k = self.params.rate();
        move |_t, y, dy| {
            dy[0] = -k * y[0] * y[0];
        }
    }
}

/// Decaying-rate model: the reaction rate k1 itself decays first-order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmsleyParams {
    pub dp0: f64,
    /// Initial reaction rate [1/h].
    pub k1_0: f64,
    /// Decay rate of k1 [1/h]. Zero is accepted and reduces the model to the
    /// constant-rate case (used by the consistency checks).
    pub k2: f64,
}

impl EmsleyParams {
    pub fn new(dp0: f64, k1_0: f64, k2: f64) -> Result<Self> {
        if !(dp0 > 0.0 && k1_0 > 0.0 && k2 >= 0.0) {
            return Err(Error::invalid(format!(
                "emsley parameters out of range: dp0={dp0}, k1_0={k1_0}, k2={k2}"
            )));
        }
        Ok(EmsleyParams { dp0, k1_0, k2 })
    }

    /// Exact solution (DP(t), k1(t)).
    pub fn at(&self, t_hours: f64) -> (f64, f64) {
        let k1 = self.k1_0 * (-self.k2 * t_hours).exp();
        // (k1_0/k2)(1 - exp(-k2 t)) via exp_m1 for small k2*t, with the k2=0
        // limit k1_0 * t handled exactly.
        let accumulated = if self.k2 == 0.0 {
            self.k1_0 * t_hours
        } else {
            self.k1_0 / self.k2 * -(-self.k2 * t_hours).exp_m1()
        };
        let dp = 1.0 / (1.0 / self.dp0 + accumulated);
        (dp, k1)
    }

    /// DP floor as t -> infinity (for k2 > 0).
    pub fn dp_asymptote(&self) -> f64 {
        1.0 / (1.0 / self.dp0 + self.k1_0 / self.k2)
    }

    /// Analytic d/dt of the exact solution.
    pub fn rates_at(&self, t_hours: f64) -> (f64, f64) {
        let (dp, k1) = self.at(t_hours);
        (-k1 * dp * dp, -self.k2 * k1)
    }

    /// Right-hand side for the integrator; state is [DP, k1].
    pub fn rhs(&self) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        let k2 = self.k2;
        move |_t, y, dy| {
            dy[0] = -y[1] * y[0] * y[0];
            dy[1] = -k2 * y[1];
        }
    }
}

/// Reference parameter sets used by the bundled experiment configs.
pub mod presets {
    use super::*;

    /// Arrhenius constants for the synthetic constant-rate experiments:
    /// A = 3.42e8 /h, E = 1.1e5 J/mol, T = 352 K.
    pub fn synthetic_arrhenius() -> ArrheniusParams {
        ArrheniusParams::new(3.42e8, 1.1e5, 352.0).expect("preset is valid")
    }

    /// The synthetic constant-rate model with DP0 = 1100.
    pub fn synthetic_ekenstam() -> EkenstamModel {
        EkenstamModel::new(synthetic_arrhenius(), 1100.0).expect("preset is valid")
    }

    /// Decaying-rate constants at 65 C: DP0 = 1190, k1_0 = 1.6e-7 /h,
    /// k2 = 4.2e-4 /h.
    pub fn emsley_65c() -> EmsleyParams {
        EmsleyParams::new(1190.0, 1.6e-7, 4.2e-4).expect("preset is valid")
    }
}

/// Classic fixed-step RK4 over `[t0, t1]` with `n_steps` steps; the returned
/// series includes both endpoints. State dimension 1 maps to DP, dimension 2
/// to (DP, k1).
pub fn integrate(
    rhs: impl Fn(f64, &[f64], &mut [f64]),
    state0: &[f64],
    t_span: [f64; 2],
    n_steps: usize,
) -> Result<TimeSeries> {
    if n_steps == 0 {
        return Err(Error::contract("n_steps must be >= 1"));
    }
    let dim = state0.len();
    if dim == 0 || dim > 2 {
        return Err(Error::contract(format!(
            "integrate supports state dimension 1 or 2, got {dim}"
        )));
    }
    let [t0, t1] = t_span;
    let h = (t1 - t0) / n_steps as f64;
    let mut y = state0.to_vec();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut trajectory = vec![Vec::with_capacity(n_steps + 1); dim];

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];

    let record = |times: &mut Vec<f64>, trajectory: &mut Vec<Vec<f64>>, t: f64, y: &[f64]| {
        times.push(t);
        for (row, &v) in trajectory.iter_mut().zip(y) {
            row.push(v);
        }
    };
    record(&mut times, &mut trajectory, t0, &y);

    for step in 0..n_steps {
        let t = t0 + step as f64 * h;
        rhs(t, &y, &mut k1);
        for i in 0..dim {
            scratch[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &scratch, &mut k2);
        for i in 0..dim {
            scratch[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &scratch, &mut k3);
        for i in 0..dim {
            scratch[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &scratch, &mut k4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step });
        }
        record(&mut times, &mut trajectory, t0 + (step + 1) as f64 * h, &y);
    }

    let k1_col = if dim == 2 {
        Some(trajectory.pop().unwrap())
    } else {
        None
    };
    TimeSeries::new(
        times,
        trajectory.pop().unwrap(),
        k1_col,
        Units::Physical,
        Provenance::Exact,
    )
}

/// Linear-interpolated first time at which DP crosses below `threshold`;
/// `None` when the series never crosses.
pub fn end_of_life(series: &TimeSeries, threshold: f64) -> Result<Option<f64>> {
    if series.times.is_empty() {
        return Err(Error::contract("end_of_life on an empty series"));
    }
    if series.dp[0] <= threshold {
        return Ok(Some(series.times[0]));
    }
    for i in 1..series.times.len() {
        let (d0, d1) = (series.dp[i - 1], series.dp[i]);
        if d1 <= threshold {
            let (t0, t1) = (series.times[i - 1], series.times[i]);
            let frac = (d0 - threshold) / (d0 - d1);
            return Ok(Some(t0 + frac * (t1 - t0)));
        }
    }
    Ok(None)
}
