//! Inverse problem for the constant-rate model: one network fits DP(t) in
//! scaled units while the two scaled rate parameters ln(A) and E/RT are
//! trained jointly through a logarithmic ODE residual.
//!
//! The residual comes in two forms. `LogExact` is the logarithm of the
//! governing equation itself, f = ln A - E/RT + 2 ln DP - ln(-dDP/dt) + C,
//! which vanishes identically on the true solution with the true parameters.
//! `LogLiteral` replaces the first term with d(ln DP)/dt, a variant that
//! mixes a derivative with log terms additively and is not zero on the true
//! solution; it is kept selectable for comparison. `C` collects the constant
//! logs of the time/DP scale factors and is included by default.

use crate::autodiff::{Adam, Mlp, Tape, TapeParams, Var};
use crate::data::{self, ScalingSpec, TimeSeries, Units};
use crate::error::{Error, Result};
use crate::kinetics::{EkenstamModel, GAS_CONSTANT};
use crate::rng;

/// Positivity guard inside the logarithms.
pub const GUARD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualForm {
    /// Exact log-transform of the ODE; zero on the truth.
    LogExact,
    /// d(ln DP)/dt + ln A - E/RT + 2 ln DP + C, taken verbatim.
    LogLiteral,
}

/// Residual definition: form, scaling, and whether the additive scale
/// constant is included.
#[derive(Debug, Clone, Copy)]
pub struct ResidualSpec {
    pub form: ResidualForm,
    pub scaling: ScalingSpec,
    pub include_scale_constant: bool,
}

impl ResidualSpec {
    pub fn new(form: ResidualForm, scaling: ScalingSpec) -> Self {
        ResidualSpec {
            form,
            scaling,
            include_scale_constant: true,
        }
    }

    /// Additive constant from scaling the ODE: multiplying the equation by
    /// the DP and time factors becomes `ln(dp_scale) + ln(time_scale)` under
    /// the logarithm.
    pub fn scale_constant(&self) -> f64 {
        if self.include_scale_constant {
            self.scaling.dp_scale.ln() + self.scaling.time_scale.ln()
        } else {
            0.0
        }
    }

    /// Evaluate the residual at one state (scaled units). Returns the value
    /// and whether a positivity guard clamped.
    pub fn eval(&self, dp: f64, ddp_dt: f64, ln_a: f64, e_over_rt: f64) -> (f64, bool) {
        let c = self.scale_constant();
        let dp_guarded = dp.max(GUARD_EPS);
        let mut tripped = dp <= GUARD_EPS;
        let f = match self.form {
            ResidualForm::LogExact => {
                let decay = (-ddp_dt).max(GUARD_EPS);
                tripped |= -ddp_dt <= GUARD_EPS;
                ln_a - e_over_rt + 2.0 * dp_guarded.ln() - decay.ln() + c
            }
            ResidualForm::LogLiteral => {
                ddp_dt / dp_guarded + ln_a - e_over_rt + 2.0 * dp_guarded.ln() + c
            }
        };
        (f, tripped)
    }

    /// Tape version of [`ResidualSpec::eval`] (identical arithmetic, recorded
    /// for the reverse pass).
    fn eval_on_tape(
        &self,
        tape: &mut Tape,
        dp: Var,
        ddp_dt: Var,
        ln_a: Var,
        e_over_rt: Var,
    ) -> (Var, bool) {
        let c = self.scale_constant();
        let tripped;
        let dp_guarded = tape.max_const(dp, GUARD_EPS);
        let ln_dp = tape.ln(dp_guarded);
        let base = tape.sub(ln_a, e_over_rt);
        let two_ln_dp = tape.mul_const(ln_dp, 2.0);
        let with_dp = tape.add(base, two_ln_dp);
        let f = match self.form {
            ResidualForm::LogExact => {
                let neg = tape.neg(ddp_dt);
                tripped = tape.value(neg) <= GUARD_EPS || tape.value(dp) <= GUARD_EPS;
                let guarded = tape.max_const(neg, GUARD_EPS);
                let ln_decay = tape.ln(guarded);
                let diff = tape.sub(with_dp, ln_decay);
                tape.add_const(diff, c)
            }
            ResidualForm::LogLiteral => {
                tripped = tape.value(dp) <= GUARD_EPS;
                let dlog = tape.div(ddp_dt, dp_guarded);
                let s = tape.add(with_dp, dlog);
                tape.add_const(s, c)
            }
        };
        (f, tripped)
    }
}

/// Residual of the governing equation at one network state. Public plain
/// evaluation; training records the same arithmetic on a tape.
pub fn residual(dp: f64, ddp_dt: f64, ln_a: f64, e_over_rt: f64, spec: &ResidualSpec) -> f64 {
    spec.eval(dp, ddp_dt, ln_a, e_over_rt).0
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EkenstamInverseConfig {
    /// Layer widths including input and output (default 1-50-50-50-1).
    pub widths: Vec<usize>,
    pub activation: crate::autodiff::Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub init_ln_a: f64,
    pub init_e_over_rt: f64,
    pub residual_form: ResidualForm,
    pub include_scale_constant: bool,
    pub scaling: ScalingSpec,
    /// Absolute temperature used to unscale E/RT back to E [K].
    pub temperature: f64,
    pub seed: u64,
}

impl EkenstamInverseConfig {
    /// Training setup for the synthetic experiments: 3 hidden layers of 50
    /// sigmoid units, Adam at 1e-3 for 50000 epochs, initial guesses
    /// ln(A)=19 and E/RT=38.
    pub fn defaults(scaling: ScalingSpec, seed: u64) -> Self {
        EkenstamInverseConfig {
            widths: vec![1, 50, 50, 50, 1],
            activation: crate::autodiff::Activation::Sigmoid,
            epochs: 50_000,
            learning_rate: 1e-3,
            init_ln_a: 19.0,
            init_e_over_rt: 38.0,
            residual_form: ResidualForm::LogExact,
            include_scale_constant: true,
            scaling,
            temperature: 352.0,
            seed,
        }
    }

    /// Measured-data variant (longer budget).
    pub fn measured_defaults(scaling: ScalingSpec, seed: u64) -> Self {
        EkenstamInverseConfig {
            epochs: 60_000,
            ..Self::defaults(scaling, seed)
        }
    }

    pub fn residual_spec(&self) -> ResidualSpec {
        ResidualSpec {
            form: self.residual_form,
            scaling: self.scaling,
            include_scale_constant: self.include_scale_constant,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if self.widths.first() != Some(&1) || self.widths.last() != Some(&1) {
            return Err(Error::invalid("network must map 1 input to 1 output"));
        }
        self.scaling.validate()
    }
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct EkenstamFit {
    pub ln_a_hat: f64,
    pub e_over_rt_hat: f64,
    /// exp(ln_a_hat).
    pub a_hat: f64,
    /// e_over_rt_hat * R * T.
    pub e_hat: f64,
    /// Per-epoch (MSE_data, MSE_ode).
    pub loss_history: Vec<(f64, f64)>,
    /// Per-epoch (ln A, E/RT) after each update.
    pub param_trajectory: Vec<(f64, f64)>,
    /// Per-epoch count of positivity-guard clamps in the residual.
    pub guard_hits: Vec<u32>,
    /// Network prediction on the training grid, physical units.
    pub dp_prediction: TimeSeries,
    /// Final network (scaled inputs/outputs).
    pub network: Mlp,
}

struct LossGraph {
    mse_data: Var,
    mse_ode: Var,
    total: Var,
    guard_hits: u32,
}

fn build_loss_graph(
    tape: &mut Tape,
    mlp: &Mlp,
    params: &TapeParams,
    ln_a: Var,
    e_over_rt: Var,
    scaled_times: &[f64],
    scaled_dp: &[f64],
    rspec: &ResidualSpec,
) -> Result<LossGraph> {
    let mut data_errs = Vec::with_capacity(scaled_times.len());
    let mut residuals = Vec::with_capacity(scaled_times.len());
    let mut guard_hits = 0u32;
    for (&t, &dp_obs) in scaled_times.iter().zip(scaled_dp) {
        let t_var = tape.leaf(t);
        let (out, tan) = mlp.forward_with_tangent(tape, params, &[t_var], 0)?;
        data_errs.push(tape.add_const(out[0], -dp_obs));
        let (f, tripped) = rspec.eval_on_tape(tape, out[0], tan[0], ln_a, e_over_rt);
        if tripped {
            guard_hits += 1;
        }
        residuals.push(f);
    }
    let mse_data = tape.mean_sq(&data_errs);
    let mse_ode = tape.mean_sq(&residuals);
    let total = tape.add(mse_data, mse_ode);
    Ok(LossGraph {
        mse_data,
        mse_ode,
        total,
        guard_hits,
    })
}

/// Loss terms at a given model state, on an already-scaled batch. The ODE
/// residual is collocated at the data points themselves.
pub fn loss(
    scaled: &TimeSeries,
    mlp: &Mlp,
    ln_a: f64,
    e_over_rt: f64,
    rspec: &ResidualSpec,
) -> Result<(f64, f64, f64)> {
    if scaled.units != Units::EkenstamScaled {
        return Err(Error::contract("loss expects a scaled batch"));
    }
    let mut tape = Tape::new();
    let params = mlp.bind_params(&mut tape);
    let ln_a_var = tape.leaf(ln_a);
    let eort_var = tape.leaf(e_over_rt);
    let graph = build_loss_graph(
        &mut tape,
        mlp,
        &params,
        ln_a_var,
        eort_var,
        &scaled.times,
        &scaled.dp,
        rspec,
    )?;
    Ok((
        tape.value(graph.mse_data),
        tape.value(graph.mse_ode),
        tape.value(graph.total),
    ))
}

/// Full-batch Adam over the network weights and the two scalar parameters.
/// Deterministic per seed.
pub fn train(series: &TimeSeries, cfg: &EkenstamInverseConfig) -> Result<EkenstamFit> {
    cfg.validate()?;
    if series.len() < 2 {
        return Err(Error::contract("need at least 2 training points"));
    }
    if series.units != Units::Physical {
        return Err(Error::contract("train expects a physical-units series"));
    }
    let scaled = data::scale(series, &cfg.scaling)?;
    let rspec = cfg.residual_spec();

    let mut stream = rng::from_seed(cfg.seed);
    let mut mlp = Mlp::xavier(&cfg.widths, cfg.activation, &mut stream)?;
    let n_net = mlp.param_count();
    let mut theta = mlp.flatten();
    theta.push(cfg.init_ln_a);
    theta.push(cfg.init_e_over_rt);

    let mut adam = Adam::new(cfg.learning_rate, theta.len());
    let mut tape = Tape::with_capacity(64 * 1024);
    let mut adjoints: Vec<f64> = Vec::new();
    let mut grads = vec![0.0; theta.len()];

    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut param_trajectory = Vec::with_capacity(cfg.epochs);
    let mut guard_hits = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        tape.clear();
        mlp.set_from_flat(&theta[..n_net])?;
        let params = mlp.bind_params(&mut tape);
        let ln_a = tape.leaf(theta[n_net]);
        let eort = tape.leaf(theta[n_net + 1]);
        let graph = build_loss_graph(
            &mut tape,
            &mlp,
            &params,
            ln_a,
            eort,
            &scaled.times,
            &scaled.dp,
            &rspec,
        )?;
        let (md, mo) = (tape.value(graph.mse_data), tape.value(graph.mse_ode));
        if !md.is_finite() || !mo.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                detail: format!(
                    "loss became non-finite (data {md}, ode {mo}); last ln A = {}, E/RT = {}",
                    theta[n_net],
                    theta[n_net + 1]
                ),
            });
        }
        tape.backward_into(graph.total, &mut adjoints);
        for (g, var) in grads[..n_net].iter_mut().zip(&params.flat) {
            *g = adjoints[var.index()];
        }
        grads[n_net] = adjoints[ln_a.index()];
        grads[n_net + 1] = adjoints[eort.index()];
        adam.step(&mut theta, &grads)?;

        loss_history.push((md, mo));
        param_trajectory.push((theta[n_net], theta[n_net + 1]));
        guard_hits.push(graph.guard_hits);
    }

    mlp.set_from_flat(&theta[..n_net])?;
    let ln_a_hat = theta[n_net];
    let e_over_rt_hat = theta[n_net + 1];

    let mut dp_pred = Vec::with_capacity(scaled.len());
    for &t in &scaled.times {
        dp_pred.push(mlp.forward_plain(&[t])?[0] * cfg.scaling.dp_scale);
    }
    let dp_prediction = TimeSeries::new(
        series.times.clone(),
        dp_pred,
        None,
        Units::Physical,
        data::Provenance::Exact,
    )?;

    Ok(EkenstamFit {
        ln_a_hat,
        e_over_rt_hat,
        a_hat: ln_a_hat.exp(),
        e_hat: e_over_rt_hat * GAS_CONSTANT * cfg.temperature,
        loss_history,
        param_trajectory,
        guard_hits,
        dp_prediction,
        network: mlp,
    })
}

/// Fit-quality report. Parameter errors are absent when no ground truth
/// exists (measured-data runs).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EkenstamMetrics {
    /// ||DP_hat - DP|| / ||DP|| on the training grid, against the exact
    /// solution when truth is available, otherwise against the data.
    pub rel_l2_dp: f64,
    pub pct_err_ln_a: Option<f64>,
    pub pct_err_e_over_rt: Option<f64>,
}

pub fn metrics(
    fit: &EkenstamFit,
    data: &TimeSeries,
    truth: Option<&EkenstamModel>,
) -> EkenstamMetrics {
    let reference: Vec<f64> = match truth {
        Some(model) => fit
            .dp_prediction
            .times
            .iter()
            .map(|&t| model.dp_at(t))
            .collect(),
        None => data.dp.clone(),
    };
    let rel_l2_dp = rel_l2(&fit.dp_prediction.dp, &reference);
    let (pct_err_ln_a, pct_err_e_over_rt) = match truth {
        Some(model) => (
            Some(100.0 * (fit.ln_a_hat - model.params.ln_a()).abs() / model.params.ln_a().abs()),
            Some(
                100.0 * (fit.e_over_rt_hat - model.params.e_over_rt()).abs()
                    / model.params.e_over_rt().abs(),
            ),
        ),
        None => (None, None),
    };
    EkenstamMetrics {
        rel_l2_dp,
        pct_err_ln_a,
        pct_err_e_over_rt,
    }
}

/// ||a - b||_2 / ||b||_2.
pub fn rel_l2(prediction: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = prediction
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    let den: f64 = reference.iter().map(|r| r * r).sum();
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;
    use crate::data::make_ekenstam_dataset;
    use crate::kinetics::{presets, HOURS_PER_YEAR};

    fn synthetic_scaling() -> ScalingSpec {
        ScalingSpec::ekenstam(40.0 * HOURS_PER_YEAR)
    }

    /// Scaled state (dp, ddp/dt) of the exact solution at scaled time tau.
    fn exact_scaled_state(tau: f64, spec: &ScalingSpec) -> (f64, f64) {
        let m = presets::synthetic_ekenstam();
        let t = tau * spec.time_scale;
        let dp = m.dp_at(t) / spec.dp_scale;
        let ddp = m.dp_rate_at(t) * spec.time_scale / spec.dp_scale;
        (dp, ddp)
    }

    #[test]
    fn residual_zero_on_truth_log_exact() {
        let scaling = synthetic_scaling();
        let rspec = ResidualSpec::new(ResidualForm::LogExact, scaling);
        let m = presets::synthetic_ekenstam();
        let (ln_a, eort) = (m.params.ln_a(), m.params.e_over_rt());
        let mut stream = rng::from_seed(1);
        for _ in 0..1000 {
            let tau = rng::uniform01(&mut stream);
            let (dp, ddp) = exact_scaled_state(tau, &scaling);
            let (f, tripped) = rspec.eval(dp, ddp, ln_a, eort);
            assert!(!tripped);
            assert!(f.abs() < 1e-9, "residual {f} at tau={tau}");
        }
    }

    #[test]
    fn residual_additive_structure() {
        let scaling = synthetic_scaling();
        let rspec = ResidualSpec::new(ResidualForm::LogExact, scaling);
        let m = presets::synthetic_ekenstam();
        let (ln_a, eort) = (m.params.ln_a(), m.params.e_over_rt());
        let (dp, ddp) = exact_scaled_state(0.4, &scaling);
        let (f0, _) = rspec.eval(dp, ddp, ln_a, eort);
        let (f_a, _) = rspec.eval(dp, ddp, ln_a + 1.0, eort);
        let (f_e, _) = rspec.eval(dp, ddp, ln_a, eort + 1.0);
        assert!((f_a - (f0 + 1.0)).abs() < 1e-12);
        assert!((f_e - (f0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn taped_residual_matches_plain() {
        let scaling = synthetic_scaling();
        for form in [ResidualForm::LogExact, ResidualForm::LogLiteral] {
            let rspec = ResidualSpec::new(form, scaling);
            let (dp, ddp) = exact_scaled_state(0.7, &scaling);
            let (plain, _) = rspec.eval(dp, ddp, 19.0, 38.0);
            let mut tape = Tape::new();
            let dp_v = tape.leaf(dp);
            let ddp_v = tape.leaf(ddp);
            let a_v = tape.leaf(19.0);
            let e_v = tape.leaf(38.0);
            let (f, _) = rspec.eval_on_tape(&mut tape, dp_v, ddp_v, a_v, e_v);
            assert!((tape.value(f) - plain).abs() < 1e-15);
        }
    }

    #[test]
    fn guard_counts_nonmonotone_states() {
        let scaling = synthetic_scaling();
        let rspec = ResidualSpec::new(ResidualForm::LogExact, scaling);
        // Positive slope: the decay guard trips but the value stays finite.
        let (f, tripped) = rspec.eval(5.0, 0.3, 19.0, 38.0);
        assert!(tripped);
        assert!(f.is_finite());
    }

    #[test]
    fn loss_on_constant_network() {
        // Zero net with output bias c: MSE_data = mean((c - dp_i)^2), and
        // duplicating every point leaves both terms unchanged.
        let scaling = synthetic_scaling();
        let m = presets::synthetic_ekenstam();
        let series = make_ekenstam_dataset(&m, 12, 40.0).unwrap();
        let scaled = data::scale(&series, &scaling).unwrap();
        let mut net = Mlp::zeros(&[1, 4, 1], Activation::Sigmoid).unwrap();
        let c = 3.0;
        net.biases[1][0] = c;
        let rspec = ResidualSpec::new(ResidualForm::LogExact, scaling);
        let (md, mo, total) = loss(&scaled, &net, 19.0, 38.0, &rspec).unwrap();
        let expected: f64 =
            scaled.dp.iter().map(|d| (c - d) * (c - d)).sum::<f64>() / scaled.len() as f64;
        assert!((md - expected).abs() < 1e-12);
        assert!((total - (md + mo)).abs() < 1e-15);

        let mut times2 = Vec::new();
        let mut dp2 = Vec::new();
        for i in 0..scaled.len() {
            times2.push(scaled.times[i]);
            times2.push(scaled.times[i] + 1e-9);
            dp2.push(scaled.dp[i]);
            dp2.push(scaled.dp[i]);
        }
        let doubled = TimeSeries {
            times: times2,
            dp: dp2,
            k1: None,
            units: Units::EkenstamScaled,
            provenance: data::Provenance::Exact,
            warnings: Vec::new(),
        };
        let (md2, mo2, _) = loss(&doubled, &net, 19.0, 38.0, &rspec).unwrap();
        assert!((md2 - md).abs() < 1e-9);
        assert!((mo2 - mo).abs() < 1e-6);
    }

    #[test]
    fn identifiability_valley_is_a_line() {
        // With the exact solution substituted for the network, MSE_ode
        // depends on (ln A, E/RT) only through their difference: constant
        // along the diagonal, growing quadratically off it.
        let scaling = synthetic_scaling();
        let rspec = ResidualSpec::new(ResidualForm::LogExact, scaling);
        let m = presets::synthetic_ekenstam();
        let (ln_a_true, eort_true) = (m.params.ln_a(), m.params.e_over_rt());
        let mse = |ln_a: f64, eort: f64| -> f64 {
            let n = 64;
            let mut acc = 0.0;
            for i in 0..n {
                let tau = i as f64 / (n - 1) as f64;
                let (dp, ddp) = exact_scaled_state(tau, &scaling);
                let (f, _) = rspec.eval(dp, ddp, ln_a, eort);
                acc += f * f;
            }
            acc / n as f64
        };
        let floor = mse(ln_a_true, eort_true);
        assert!(floor < 1e-18);
        for d in [-1.0, -0.3, 0.5, 2.0] {
            let along = mse(ln_a_true + d, eort_true + d);
            assert!((along - floor).abs() < 1e-12, "valley breaks at d={d}");
            let off = mse(ln_a_true + d, eort_true);
            assert!(off > d * d * 0.99, "off-valley should grow quadratically");
        }
    }

    #[test]
    fn frozen_interpolant_descent_reaches_the_valley() {
        // Freeze the network at the exact interpolant and optimize only the
        // two scalars from the standard initial guesses: the identifiable
        // combination ln A - E/RT converges to ln k within 0.1% well inside
        // 20000 Adam steps, while the +/- symmetry of the residual keeps
        // ln A + E/RT frozen at its initial value.
        let scaling = synthetic_scaling();
        let rspec = ResidualSpec::new(ResidualForm::LogExact, scaling);
        let m = presets::synthetic_ekenstam();
        let states: Vec<(f64, f64)> = (0..24)
            .map(|i| exact_scaled_state(i as f64 / 23.0, &scaling))
            .collect();
        let mut theta = vec![19.0, 38.0];
        let sum0 = theta[0] + theta[1];
        let mut adam = Adam::new(1e-3, 2);
        for _ in 0..20_000 {
            let mut g = [0.0, 0.0];
            for &(dp, ddp) in &states {
                let (f, _) = rspec.eval(dp, ddp, theta[0], theta[1]);
                g[0] += 2.0 * f / states.len() as f64;
                g[1] -= 2.0 * f / states.len() as f64;
            }
            adam.step(&mut theta, &g).unwrap();
        }
        let target = m.params.ln_a() - m.params.e_over_rt();
        let got = theta[0] - theta[1];
        assert!(
            ((got - target) / target).abs() < 1e-3,
            "difference {got} vs {target}"
        );
        assert!(
            (theta[0] + theta[1] - sum0).abs() < 1e-9,
            "mirror symmetry violated: {}",
            theta[0] + theta[1]
        );
    }

    #[test]
    fn metrics_reference_cases() {
        let m = presets::synthetic_ekenstam();
        let series = make_ekenstam_dataset(&m, 8, 40.0).unwrap();
        let fit = EkenstamFit {
            ln_a_hat: m.params.ln_a(),
            e_over_rt_hat: m.params.e_over_rt(),
            a_hat: m.params.pre_exponential,
            e_hat: m.params.activation_energy,
            loss_history: vec![],
            param_trajectory: vec![],
            guard_hits: vec![],
            dp_prediction: series.clone(),
            network: Mlp::zeros(&[1, 2, 1], Activation::Sigmoid).unwrap(),
        };
        // Perfect prediction: all zeros.
        let perfect = metrics(&fit, &series, Some(&m));
        assert_eq!(perfect.rel_l2_dp, 0.0);
        assert_eq!(perfect.pct_err_ln_a, Some(0.0));

        // Uniform +1% prediction: rel L2 exactly 0.01 by homogeneity.
        let mut inflated = fit.clone();
        inflated.dp_prediction.dp.iter_mut().for_each(|v| *v *= 1.01);
        let inf = metrics(&inflated, &series, Some(&m));
        assert!((inf.rel_l2_dp - 0.01).abs() < 1e-12);

        // No truth: parameter errors are absent.
        let na = metrics(&fit, &series, None);
        assert!(na.pct_err_ln_a.is_none() && na.pct_err_e_over_rt.is_none());
    }

    #[test]
    fn short_training_run_descends_and_is_deterministic() {
        let m = presets::synthetic_ekenstam();
        let series = make_ekenstam_dataset(&m, 12, 40.0).unwrap();
        let cfg = EkenstamInverseConfig {
            widths: vec![1, 12, 12, 1],
            epochs: 400,
            ..EkenstamInverseConfig::defaults(synthetic_scaling(), 3)
        };
        let fit = train(&series, &cfg).unwrap();
        let fit2 = train(&series, &cfg).unwrap();
        assert_eq!(fit.ln_a_hat, fit2.ln_a_hat);
        assert_eq!(fit.loss_history, fit2.loss_history);
        let first = fit.loss_history[0].0 + fit.loss_history[0].1;
        let last = fit.loss_history.last().unwrap();
        assert!(last.0 + last.1 < first, "loss should decrease");
        assert_eq!(fit.param_trajectory.len(), cfg.epochs);
        let expected_e = fit.e_over_rt_hat * GAS_CONSTANT * cfg.temperature;
        assert_eq!(fit.e_hat, expected_e);
    }

    #[test]
    fn rate_shift_moves_the_identified_difference() {
        // Generating data with a 10x larger rate shifts the recovered
        // ln A - E/RT by about ln 10.
        let base = presets::synthetic_arrhenius();
        let fast = crate::kinetics::ArrheniusParams::new(
            base.pre_exponential * 10.0,
            base.activation_energy,
            base.temperature,
        )
        .unwrap();
        let cfg = EkenstamInverseConfig {
            widths: vec![1, 16, 16, 1],
            epochs: 6000,
            ..EkenstamInverseConfig::defaults(synthetic_scaling(), 5)
        };
        let run = |params: crate::kinetics::ArrheniusParams| -> f64 {
            let model = EkenstamModel::new(params, 1100.0).unwrap();
            let series = make_ekenstam_dataset(&model, 24, 40.0).unwrap();
            let fit = train(&series, &cfg).unwrap();
            fit.ln_a_hat - fit.e_over_rt_hat
        };
        let shift = run(fast) - run(base);
        assert!(
            (shift - 10.0f64.ln()).abs() < 0.25,
            "shift {shift} vs ln10 {}",
            10.0f64.ln()
        );
    }
}
