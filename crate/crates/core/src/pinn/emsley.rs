//! Joint discovery of an unknown right-hand side and a rate constant for the
//! decaying-rate model.
//!
//! One network maps scaled time to the scaled pair (DP, k1); a second network
//! takes the first network's outputs plus time and approximates the unknown
//! right-hand side h(DP, k1, t) of the DP equation. The scalar k2 (scaled) is
//! trained alongside both networks through the residuals
//!
//!   g1 = dDP/dtau - h,      g2 = dk1/dtau + k2 * k1,
//!
//! and a three-term loss (data misfit over both solution components, an
//! initial-condition term, and the residual misfit over collocation points).
//!
//! Everything runs in nondimensional units: time in [0, 10], DP / 1000,
//! k1 / 1e-7. Under that map the true system is du/dtau = -0.035 v u^2,
//! dv/dtau = -k2s v with k2s = 350 k2; the -0.035 coefficient is the derived
//! ground truth for h in scaled space.

use ndarray::{s, Array2};

use crate::autodiff::batch::{column, ones_column};
use crate::autodiff::{Activation, Adam, BatchNet, Mlp};
use crate::data::{Provenance, ScalingSpec, TimeSeries, Units};
use crate::error::{Error, Result};
use crate::kinetics::EmsleyParams;
use crate::rng;

/// The decaying-rate system mapped to nondimensional units.
#[derive(Debug, Clone, Copy)]
pub struct ScaledEmsley {
    pub params: EmsleyParams,
    pub scaling: ScalingSpec,
    /// Scaled initial DP.
    pub u0: f64,
    /// Scaled initial rate.
    pub v0: f64,
    /// Scaled decay constant (time_scale * k2).
    pub k2_scaled: f64,
    /// Coefficient of the scaled rhs: du/dtau = -rhs_coeff * v * u^2.
    pub rhs_coeff: f64,
}

impl ScaledEmsley {
    pub fn new(params: EmsleyParams, scaling: ScalingSpec) -> Result<Self> {
        let k1_scale = scaling
            .k1_scale
            .ok_or_else(|| Error::contract("scaling spec lacks a k1 factor"))?;
        scaling.validate()?;
        Ok(ScaledEmsley {
            params,
            scaling,
            u0: params.dp0 / scaling.dp_scale,
            v0: params.k1_0 / k1_scale,
            k2_scaled: scaling.time_scale * params.k2,
            rhs_coeff: scaling.time_scale * k1_scale * scaling.dp_scale,
        })
    }

    /// Exact scaled state (u, v) at scaled time tau.
    pub fn state_at(&self, tau: f64) -> (f64, f64) {
        let (dp, k1) = self.params.at(tau * self.scaling.time_scale);
        (
            dp / self.scaling.dp_scale,
            k1 / self.scaling.k1_scale.unwrap(),
        )
    }

    /// Exact scaled derivatives (du/dtau, dv/dtau) at scaled time tau.
    pub fn rates_at(&self, tau: f64) -> (f64, f64) {
        let (ddp, dk1) = self.params.rates_at(tau * self.scaling.time_scale);
        let ts = self.scaling.time_scale;
        (
            ddp * ts / self.scaling.dp_scale,
            dk1 * ts / self.scaling.k1_scale.unwrap(),
        )
    }

    /// The true scaled rhs, -rhs_coeff * v * u^2.
    pub fn h_true(&self, u: f64, v: f64) -> f64 {
        -self.rhs_coeff * v * u * u
    }

    /// |h(u0, v0)| — the magnitude the symbolic-regression target is
    /// normalized by.
    pub fn h_norm_scale(&self) -> f64 {
        self.h_true(self.u0, self.v0).abs()
    }
}

/// Residuals of the scaled system at one state.
pub fn residuals(
    ddp_dtau: f64,
    dk1_dtau: f64,
    h_hat: f64,
    k1_scaled: f64,
    k2_scaled: f64,
) -> (f64, f64) {
    (ddp_dtau - h_hat, dk1_dtau + k2_scaled * k1_scaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollocationScheme {
    /// Drawn uniformly at random in scaled time from the seeded stream.
    UniformRandom,
    Equispaced,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EmsleyInverseConfig {
    /// Solution network widths (default 1, 13 x 35, 2).
    pub solution_widths: Vec<usize>,
    /// Function network widths (default 3, 12 x 53, 1).
    pub function_widths: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub init_k2_scaled: f64,
    pub n_train: usize,
    pub n_collocation: usize,
    pub n_test: usize,
    pub collocation: CollocationScheme,
    pub scaling: ScalingSpec,
    /// Physical horizon [h] mapped onto the scaled time range.
    pub horizon_hours: f64,
    pub seed: u64,
}

impl EmsleyInverseConfig {
    /// Reference setup: 13 hidden layers of 35 tanh units for the solution,
    /// 12 of 53 for the function, Adam at 1e-3 for 2000 epochs, 1000 training
    /// and 10000 collocation points over 3500 h, initial scaled k2 guess 2.
    pub fn defaults(seed: u64) -> Self {
        let mut solution_widths = vec![1];
        solution_widths.extend(std::iter::repeat(35).take(13));
        solution_widths.push(2);
        let mut function_widths = vec![3];
        function_widths.extend(std::iter::repeat(53).take(12));
        function_widths.push(1);
        EmsleyInverseConfig {
            solution_widths,
            function_widths,
            activation: Activation::Tanh,
            epochs: 2000,
            learning_rate: 1e-3,
            init_k2_scaled: 2.0,
            n_train: 1000,
            n_collocation: 10_000,
            n_test: 100,
            collocation: CollocationScheme::UniformRandom,
            scaling: ScalingSpec::emsley(),
            horizon_hours: 3500.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.solution_widths.first() != Some(&1) || self.solution_widths.last() != Some(&2) {
            return Err(Error::invalid("solution network must map 1 -> 2"));
        }
        if self.function_widths.first() != Some(&3) || self.function_widths.last() != Some(&1) {
            return Err(Error::invalid("function network must map 3 -> 1"));
        }
        if self.epochs == 0 || self.n_train < 2 || self.n_collocation == 0 || self.n_test < 2 {
            return Err(Error::invalid("epochs and point counts must be positive"));
        }
        self.scaling.validate()
    }

    fn tau_max(&self) -> f64 {
        self.horizon_hours / self.scaling.time_scale
    }
}

/// One row of the table handed to symbolic regression (scaled units).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct HSample {
    pub dp_scaled: f64,
    pub k1_scaled: f64,
    pub t_scaled: f64,
    pub h_pred: f64,
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct EmsleyFit {
    pub k2_scaled_hat: f64,
    /// Physical units: k2_scaled_hat / time_scale, exactly.
    pub k2_hat: f64,
    /// Predictions on the test grid, physical units (k1 column included).
    pub prediction: TimeSeries,
    /// (DP, k1, t, h) rows on the test grid — the symbolic-regression input.
    pub h_samples: Vec<HSample>,
    /// Per-epoch (MSE_data, MSE_ic, MSE_ode).
    pub loss_history: Vec<(f64, f64, f64)>,
    /// Scaled k2 after each epoch.
    pub k2_trajectory: Vec<f64>,
    pub solution_network: Mlp,
    pub function_network: Mlp,
}

/// Table of (DP, k1, t, h) rows on the test grid — the contract consumed by
/// symbolic regression.
pub fn extract_h_samples(fit: &EmsleyFit) -> &[HSample] {
    &fit.h_samples
}

struct Batches {
    x_train: Array2<f64>,
    y_train: Array2<f64>,
    x_ic: Array2<f64>,
    y_ic: Array2<f64>,
    x_col: Array2<f64>,
    xdot_col: Array2<f64>,
}

struct Passes<'a> {
    sol: &'a BatchNet,
    func: &'a BatchNet,
}

impl Passes<'_> {
    /// Loss terms at `theta`; when `grads` is given, accumulates d(total)/d
    /// theta into it. The single implementation keeps reported losses and
    /// training losses identical by construction.
    fn run(
        &self,
        theta: &[f64],
        batches: &Batches,
        mut grads: Option<&mut [f64]>,
    ) -> (f64, f64, f64) {
        let n_sol = self.sol.param_count();
        let n_func = self.func.param_count();
        let (sol_p, rest) = theta.split_at(n_sol);
        let (func_p, k2_slice) = rest.split_at(n_func);
        let k2 = k2_slice[0];

        // Data misfit over both solution components (mean over 2N entries).
        let n_u = batches.x_train.nrows() as f64;
        let cache_d = self.sol.forward(sol_p, &batches.x_train);
        let r = cache_d.output() - &batches.y_train;
        let mse_data = r.mapv(|v| v * v).sum() / (2.0 * n_u);

        // Initial-condition misfit (mean over the 2 entries at tau = 0).
        let cache_0 = self.sol.forward(sol_p, &batches.x_ic);
        let r0 = cache_0.output() - &batches.y_ic;
        let mse_ic = r0.mapv(|v| v * v).sum() / 2.0;

        // Residual misfit over collocation points (mean over 2 N_g entries).
        let n_g = batches.x_col.nrows() as f64;
        let cache_c = self
            .sol
            .forward_with_tangent(sol_p, &batches.x_col, &batches.xdot_col);
        let uv = cache_c.output().clone();
        let uv_dot = cache_c.output_tangent().unwrap().clone();
        let mut x_func = Array2::zeros((batches.x_col.nrows(), 3));
        x_func.slice_mut(s![.., 0..2]).assign(&uv);
        x_func.slice_mut(s![.., 2..3]).assign(&batches.x_col);
        let cache_f = self.func.forward(func_p, &x_func);
        let h = cache_f.output();

        let g1 = &uv_dot.slice(s![.., 0..1]).to_owned() - h;
        let g2 = &uv_dot.slice(s![.., 1..2]) + &(uv.slice(s![.., 1..2]).mapv(|v| k2 * v));
        let mse_ode = (g1.mapv(|v| v * v).sum() + g2.mapv(|v| v * v).sum()) / (2.0 * n_g);

        if let Some(grads) = grads.as_deref_mut() {
            let (sol_g, rest_g) = grads.split_at_mut(n_sol);
            let (func_g, k2_g) = rest_g.split_at_mut(n_func);

            // d mse_data / d output = r / N.
            self.sol
                .backward(sol_p, &cache_d, r.mapv(|v| v / n_u), None, sol_g);
            // d mse_ic / d output = r0.
            self.sol.backward(sol_p, &cache_0, r0, None, sol_g);

            // Function net: d mse_ode / d h = -g1 / N_g.
            let gh = g1.mapv(|v| -v / n_g);
            let (gx_func, _) = self.func.backward(func_p, &cache_f, gh, None, func_g);

            // Solution net at collocation points: the function net's input
            // gradient flows back into (u, v); g2 adds its direct k2*v term.
            let mut ga = gx_func.slice(s![.., 0..2]).to_owned();
            {
                let mut ga_v = ga.slice_mut(s![.., 1..2]);
                ga_v += &g2.mapv(|v| v * k2 / n_g);
            }
            let mut gadot = Array2::zeros(uv_dot.raw_dim());
            gadot.slice_mut(s![.., 0..1]).assign(&g1.mapv(|v| v / n_g));
            gadot.slice_mut(s![.., 1..2]).assign(&g2.mapv(|v| v / n_g));
            self.sol.backward(sol_p, &cache_c, ga, Some(gadot), sol_g);

            // d mse_ode / d k2 = sum(g2 * v) / N_g.
            k2_g[0] += (&g2 * &uv.slice(s![.., 1..2])).sum() / n_g;
        }

        (mse_data, mse_ic, mse_ode)
    }
}

/// Loss terms at a given model state. The training batch must carry both
/// solution components (missing k1 column is a contract error).
pub fn loss(
    train_scaled: &TimeSeries,
    collocation_tau: &[f64],
    solution_net: &Mlp,
    function_net: &Mlp,
    k2_scaled: f64,
    ic: (f64, f64),
) -> Result<(f64, f64, f64, f64)> {
    if train_scaled.units != Units::EmsleyScaled {
        return Err(Error::contract("loss expects an emsley-scaled batch"));
    }
    let k1 = train_scaled
        .k1
        .as_ref()
        .ok_or_else(|| Error::contract("training batch lacks the k1 column"))?;
    let sol = BatchNet::new(&solution_net.widths, solution_net.activation);
    let func = BatchNet::new(&function_net.widths, function_net.activation);
    let mut theta = solution_net.flatten();
    theta.extend(function_net.flatten());
    theta.push(k2_scaled);

    let n = train_scaled.len();
    let mut y_train = Array2::zeros((n, 2));
    for i in 0..n {
        y_train[[i, 0]] = train_scaled.dp[i];
        y_train[[i, 1]] = k1[i];
    }
    let batches = Batches {
        x_train: column(&train_scaled.times),
        y_train,
        x_ic: column(&[0.0]),
        y_ic: Array2::from_shape_vec((1, 2), vec![ic.0, ic.1]).unwrap(),
        x_col: column(collocation_tau),
        xdot_col: ones_column(collocation_tau.len()),
    };
    let passes = Passes {
        sol: &sol,
        func: &func,
    };
    let (md, mic, mode) = passes.run(&theta, &batches, None);
    Ok((md, mic, mode, md + mic + mode))
}

/// Train both networks and the scaled k2 jointly. Deterministic per seed.
pub fn train(cfg: &EmsleyInverseConfig, params: &EmsleyParams) -> Result<EmsleyFit> {
    cfg.validate()?;
    let system = ScaledEmsley::new(*params, cfg.scaling)?;
    let tau_max = cfg.tau_max();

    // Equispaced training samples of the closed form, in scaled units.
    let train_tau: Vec<f64> = (0..cfg.n_train)
        .map(|i| tau_max * i as f64 / (cfg.n_train - 1) as f64)
        .collect();
    let mut y_train = Array2::zeros((cfg.n_train, 2));
    for (i, &tau) in train_tau.iter().enumerate() {
        let (u, v) = system.state_at(tau);
        y_train[[i, 0]] = u;
        y_train[[i, 1]] = v;
    }

    let mut stream = rng::from_seed(cfg.seed);
    let mut sol_mlp = Mlp::xavier(&cfg.solution_widths, cfg.activation, &mut stream)?;
    let mut func_mlp = Mlp::xavier(&cfg.function_widths, cfg.activation, &mut stream)?;

    let col_tau: Vec<f64> = match cfg.collocation {
        CollocationScheme::UniformRandom => (0..cfg.n_collocation)
            .map(|_| rng::uniform(&mut stream, 0.0, tau_max))
            .collect(),
        CollocationScheme::Equispaced => (0..cfg.n_collocation)
            .map(|i| tau_max * i as f64 / (cfg.n_collocation - 1).max(1) as f64)
            .collect(),
    };

    let sol = BatchNet::new(&cfg.solution_widths, cfg.activation);
    let func = BatchNet::new(&cfg.function_widths, cfg.activation);
    let n_sol = sol.param_count();
    let n_func = func.param_count();

    let mut theta = sol_mlp.flatten();
    theta.extend(func_mlp.flatten());
    theta.push(cfg.init_k2_scaled);

    let batches = Batches {
        x_train: column(&train_tau),
        y_train,
        x_ic: column(&[0.0]),
        y_ic: Array2::from_shape_vec((1, 2), vec![system.u0, system.v0]).unwrap(),
        x_col: column(&col_tau),
        xdot_col: ones_column(col_tau.len()),
    };
    let passes = Passes {
        sol: &sol,
        func: &func,
    };

    let mut adam = Adam::new(cfg.learning_rate, theta.len());
    let mut grads = vec![0.0; theta.len()];
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut k2_trajectory = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let (md, mic, mode) = passes.run(&theta, &batches, Some(&mut grads));
        if !(md.is_finite() && mic.is_finite() && mode.is_finite()) {
            return Err(Error::TrainingDiverged {
                epoch,
                detail: format!("loss became non-finite (data {md}, ic {mic}, ode {mode})"),
            });
        }
        adam.step(&mut theta, &grads)?;
        loss_history.push((md, mic, mode));
        k2_trajectory.push(theta[n_sol + n_func]);
    }

    let k2_scaled_hat = theta[n_sol + n_func];
    sol_mlp.set_from_flat(&theta[..n_sol])?;
    func_mlp.set_from_flat(&theta[n_sol..n_sol + n_func])?;

    // Evaluate on the equispaced test grid.
    let test_tau: Vec<f64> = (0..cfg.n_test)
        .map(|i| tau_max * i as f64 / (cfg.n_test - 1) as f64)
        .collect();
    let cache_t = sol.forward(&theta[..n_sol], &column(&test_tau));
    let uv = cache_t.output();
    let mut x_func = Array2::zeros((cfg.n_test, 3));
    x_func.slice_mut(s![.., 0..2]).assign(uv);
    x_func.slice_mut(s![.., 2..3]).assign(&column(&test_tau));
    let cache_h = func.forward(&theta[n_sol..n_sol + n_func], &x_func);
    let h = cache_h.output();

    let mut h_samples = Vec::with_capacity(cfg.n_test);
    for i in 0..cfg.n_test {
        h_samples.push(HSample {
            dp_scaled: uv[[i, 0]],
            k1_scaled: uv[[i, 1]],
            t_scaled: test_tau[i],
            h_pred: h[[i, 0]],
        });
    }

    let k1_scale = cfg.scaling.k1_scale.expect("validated above");
    let prediction = TimeSeries::new(
        test_tau
            .iter()
            .map(|&tau| tau * cfg.scaling.time_scale)
            .collect(),
        (0..cfg.n_test)
            .map(|i| uv[[i, 0]] * cfg.scaling.dp_scale)
            .collect(),
        Some(
            (0..cfg.n_test)
                .map(|i| uv[[i, 1]] * k1_scale)
                .collect(),
        ),
        Units::Physical,
        Provenance::Exact,
    )?;

    Ok(EmsleyFit {
        k2_scaled_hat,
        k2_hat: k2_scaled_hat / cfg.scaling.time_scale,
        prediction,
        h_samples,
        loss_history,
        k2_trajectory,
        solution_network: sol_mlp,
        function_network: func_mlp,
    })
}
