//! Classical baselines (SGDM, NAG), ensembles over random starts, and the
//! continuous Hamiltonian flow integrator with its high-resolution-ODE
//! residual diagnostic.

use crate::analysis::{MetricsRecord, MetricsSeries};
use crate::objectives::ObjectiveSpec;
use crate::{par, Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

/// Stochastic gradient descent with momentum.
///
/// `v_k = eta_k v_{k-1} - (1 - eta_k) s_k g_k`, `x_k = x_{k-1} + v_k`,
/// with `eta_k = 0.5 + 0.4 k / K`, `s_k = s0 / k`, and
/// `g_k = grad f(x_{k-1}) + N(0, noise_std^2 I)`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SgdmConfig {
    pub s0: f64,
    pub steps: usize,
    pub noise_std: f64,
}

impl Default for SgdmConfig {
    fn default() -> Self {
        Self {
            s0: 0.01,
            steps: 1000,
            noise_std: 1.0,
        }
    }
}

/// Nesterov's accelerated gradient descent.
///
/// `x_k = y_{k-1} - s grad f(y_{k-1})`,
/// `y_k = x_k + ((k-1)/(k+2)) (x_k - x_{k-1})`, with `y_0 = x_0` by
/// default; `y0_zero` selects the literal `y_0 = 0` initialization.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct NagConfig {
    pub s: f64,
    pub steps: usize,
    #[serde(default)]
    pub y0_zero: bool,
}

impl Default for NagConfig {
    fn default() -> Self {
        Self {
            s: 0.01,
            steps: 1000,
            y0_zero: false,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalMethod {
    Sgdm(SgdmConfig),
    Nag(NagConfig),
}

impl ClassicalMethod {
    pub fn steps(&self) -> usize {
        match self {
            ClassicalMethod::Sgdm(c) => c.steps,
            ClassicalMethod::Nag(c) => c.steps,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassicalMethod::Sgdm(_) => "sgdm",
            ClassicalMethod::Nag(_) => "nag",
        }
    }
}

/// One trajectory: `iterates[k]` and `f_values[k]` for `k = 0..=steps`.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub iterates: Vec<Vec<f64>>,
    pub f_values: Vec<f64>,
}

impl RunRecord {
    fn push(&mut self, obj: &ObjectiveSpec, x: &[f64]) {
        self.f_values.push(obj.f(x));
        self.iterates.push(x.to_vec());
    }

    /// True if any iterate or value left the finite range.
    pub fn diverged(&self) -> bool {
        self.f_values.iter().any(|v| !v.is_finite())
            || self
                .iterates
                .iter()
                .any(|x| x.iter().any(|v| !v.is_finite()))
    }
}

pub fn sgdm_run(
    obj: &ObjectiveSpec,
    x0: &[f64],
    cfg: &SgdmConfig,
    rng: &mut ChaCha12Rng,
) -> Result<RunRecord> {
    check_start(obj, x0, cfg.steps, cfg.s0)?;
    if cfg.noise_std < 0.0 {
        return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
    }
    let normal = Normal::new(0.0, cfg.noise_std)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let kk = cfg.steps as f64;
    let mut rec = RunRecord {
        iterates: Vec::with_capacity(cfg.steps + 1),
        f_values: Vec::with_capacity(cfg.steps + 1),
    };
    let mut x = x0.to_vec();
    let mut v = vec![0.0; x.len()];
    rec.push(obj, &x);
    for k in 1..=cfg.steps {
        let eta = 0.5 + 0.4 * k as f64 / kk;
        let sk = cfg.s0 / k as f64;
        let g = obj.grad(&x);
        for i in 0..x.len() {
            let gi = g[i] + normal.sample(rng);
            v[i] = eta * v[i] - (1.0 - eta) * sk * gi;
            x[i] += v[i];
        }
        rec.push(obj, &x);
    }
    Ok(rec)
}

pub fn nag_run(obj: &ObjectiveSpec, x0: &[f64], cfg: &NagConfig) -> Result<RunRecord> {
    check_start(obj, x0, cfg.steps, cfg.s)?;
    let mut rec = RunRecord {
        iterates: Vec::with_capacity(cfg.steps + 1),
        f_values: Vec::with_capacity(cfg.steps + 1),
    };
    let mut x_prev = x0.to_vec();
    let mut y = if cfg.y0_zero {
        vec![0.0; x0.len()]
    } else {
        x0.to_vec()
    };
    rec.push(obj, &x_prev);
    for k in 1..=cfg.steps {
        let g = obj.grad(&y);
        let x: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - cfg.s * gi).collect();
        let momentum = (k as f64 - 1.0) / (k as f64 + 2.0);
        y = x
            .iter()
            .zip(&x_prev)
            .map(|(xi, xp)| xi + momentum * (xi - xp))
            .collect();
        rec.push(obj, &x);
        x_prev = x;
    }
    Ok(rec)
}

fn check_start(obj: &ObjectiveSpec, x0: &[f64], steps: usize, step_size: f64) -> Result<()> {
    if x0.len() != obj.dim {
        return Err(Error::DimensionMismatch {
            expected: obj.dim,
            got: x0.len(),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    if !(step_size > 0.0) {
        return Err(Error::InvalidParameter("step size must be > 0".into()));
    }
    Ok(())
}

/// Run `n_runs` independent trajectories from uniform starts in the
/// objective's box and reduce to per-iteration ensemble means.
///
/// Run `r` uses RNG stream `r` of `ChaCha12(master_seed)`, so results are
/// bit-identical regardless of scheduling. Diverged runs are excluded from
/// the means and counted in `failed_runs`.
pub fn ensemble(
    obj: &ObjectiveSpec,
    method: &ClassicalMethod,
    n_runs: usize,
    master_seed: u64,
    delta: f64,
) -> Result<MetricsSeries> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter("n_runs must be >= 1".into()));
    }
    let steps = method.steps();
    let runs: Vec<Result<RunRecord>> = par::map_collect(n_runs, |r| {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(r as u64);
        let x0: Vec<f64> = (0..obj.dim)
            .map(|i| rng.random_range(obj.domain.lo()[i]..obj.domain.hi()[i]))
            .collect();
        match method {
            ClassicalMethod::Sgdm(cfg) => sgdm_run(obj, &x0, cfg, &mut rng),
            ClassicalMethod::Nag(cfg) => nag_run(obj, &x0, cfg),
        }
    });
    let mut kept: Vec<RunRecord> = Vec::with_capacity(n_runs);
    let mut failed_runs = 0usize;
    for run in runs {
        let run = run?;
        if run.diverged() {
            failed_runs += 1;
        } else {
            kept.push(run);
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "all {n_runs} runs diverged"
        )));
    }
    let m = kept.len() as f64;
    let mut records = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let mut sum_f = 0.0;
        let mut sum_g = 0.0;
        let mut hits = 0usize;
        for run in &kept {
            sum_f += run.f_values[k];
            sum_g += obj.gradnorm_sq(&run.iterates[k]);
            if run.f_values[k] - obj.f_min <= delta {
                hits += 1;
            }
        }
        records.push(MetricsRecord {
            k,
            t: k as f64,
            exp_f: sum_f / m,
            exp_gradnorm_sq: sum_g / m,
            success_prob: hits as f64 / m,
            norm_drift: 0.0,
            lyapunov: None,
        });
    }
    Ok(MetricsSeries {
        records,
        delta,
        f_min: obj.f_min,
        failed_runs,
        max_norm_drift: 0.0,
    })
}

/// Which form of the position equation the flow integrates.
///
/// `Printed` is `Xdot = P/(2 t^3) + alpha grad f`; `Legendre` doubles the
/// momentum coefficient to `P/t^3`, the form consistent with the
/// Hamiltonian's Legendre transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowForm {
    Printed,
    Legendre,
}

/// Phase-space sample of the classical flow at time `t`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

fn flow_rhs(
    obj: &ObjectiveSpec,
    alpha: f64,
    beta: f64,
    gamma: f64,
    form: FlowForm,
    t: f64,
    x: &[f64],
    p: &[f64],
    dx: &mut [f64],
    dp: &mut [f64],
) {
    let d = x.len();
    let g = obj.grad(x);
    let hess = obj.hess(x);
    let t3 = t * t * t;
    let c = match form {
        FlowForm::Printed => 1.0 / (2.0 * t3),
        FlowForm::Legendre => 1.0 / t3,
    };
    for i in 0..d {
        dx[i] = c * p[i] + alpha * g[i];
    }
    let pot = t3 + gamma * t * t;
    let mix = (alpha * alpha + beta) * t3;
    for i in 0..d {
        let mut hv = 0.0;
        for j in 0..d {
            hv += hess[i * d + j] * (alpha * p[j] + mix * g[j]);
        }
        dp[i] = -hv - pot * g[i];
    }
}

/// Classic fourth-order Runge-Kutta integration of the Hamiltonian flow
/// from `t0` to `t0 + n_steps * dt`, sampling every step.
#[allow(clippy::too_many_arguments)]
pub fn ham_flow_rk4(
    obj: &ObjectiveSpec,
    alpha: f64,
    beta: f64,
    gamma: f64,
    form: FlowForm,
    x0: &[f64],
    p0: &[f64],
    t0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<FlowState>> {
    if x0.len() != obj.dim || p0.len() != obj.dim {
        return Err(Error::DimensionMismatch {
            expected: obj.dim,
            got: x0.len().max(p0.len()),
        });
    }
    if !(t0 > 0.0) {
        return Err(Error::NonPositiveTime(t0));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let d = obj.dim;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut x = x0.to_vec();
    let mut p = p0.to_vec();
    out.push(FlowState {
        t: t0,
        x: x.clone(),
        p: p.clone(),
    });
    let mut kx = vec![vec![0.0; d]; 4];
    let mut kp = vec![vec![0.0; d]; 4];
    let mut xs = vec![0.0; d];
    let mut ps = vec![0.0; d];
    let mut dx = vec![0.0; d];
    let mut dp = vec![0.0; d];
    for step in 0..n_steps {
        let t = t0 + step as f64 * dt;
        let stage_times = [t, t + 0.5 * dt, t + 0.5 * dt, t + dt];
        let stage_coef = [0.0, 0.5, 0.5, 1.0];
        for s in 0..4 {
            for i in 0..d {
                let (px, pp) = if s == 0 {
                    (0.0, 0.0)
                } else {
                    (kx[s - 1][i], kp[s - 1][i])
                };
                xs[i] = x[i] + stage_coef[s] * dt * px;
                ps[i] = p[i] + stage_coef[s] * dt * pp;
            }
            flow_rhs(
                obj,
                alpha,
                beta,
                gamma,
                form,
                stage_times[s],
                &xs,
                &ps,
                &mut dx,
                &mut dp,
            );
            kx[s].copy_from_slice(&dx);
            kp[s].copy_from_slice(&dp);
        }
        for i in 0..d {
            x[i] += dt / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            p[i] += dt / 6.0 * (kp[0][i] + 2.0 * kp[1][i] + 2.0 * kp[2][i] + kp[3][i]);
        }
        if x.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("classical flow diverged".into()));
        }
        out.push(FlowState {
            t: t0 + (step + 1) as f64 * dt,
            x: x.clone(),
            p: p.clone(),
        });
    }
    Ok(out)
}

/// Which coefficient multiplies the `grad^2 f(X) P` forcing term when
/// checking the high-resolution ODE against a flow trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualCoefficient {
    /// `sqrt(s) / (2 t^3)` as printed.
    Printed,
    /// `sqrt(s) / t^3`, consistent with the Legendre-form position equation.
    Consistent,
}

/// Max-norm residual of the high-resolution ODE
/// `Xdd + (3/t) Xd + sqrt(s) H Xd + (1 + 3 sqrt(s)/(2t)) grad f = c H P`
/// along a trajectory, with `Xd`/`Xdd` from central differences. For a
/// trajectory that genuinely follows the ODE the residual decays O(dt^2);
/// otherwise it converges to the (nonzero) model mismatch.
pub fn highres_residual(
    obj: &ObjectiveSpec,
    traj: &[FlowState],
    s: f64,
    coeff: ResidualCoefficient,
) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::SeriesTooShort {
            need: 3,
            got: traj.len(),
        });
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter("s must be >= 0".into()));
    }
    let d = obj.dim;
    let sqrt_s = s.sqrt();
    let mut worst: f64 = 0.0;
    for w in traj.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let dt = b.t - a.t;
        let t = b.t;
        let g = obj.grad(&b.x);
        let hess = obj.hess(&b.x);
        let cf = match coeff {
            ResidualCoefficient::Printed => sqrt_s / (2.0 * t * t * t),
            ResidualCoefficient::Consistent => sqrt_s / (t * t * t),
        };
        for i in 0..d {
            let xd = (c.x[i] - a.x[i]) / (2.0 * dt);
            let xdd = (c.x[i] - 2.0 * b.x[i] + a.x[i]) / (dt * dt);
            let mut h_xd = 0.0;
            let mut h_p = 0.0;
            for j in 0..d {
                let xdj = (c.x[j] - a.x[j]) / (2.0 * dt);
                h_xd += hess[i * d + j] * xdj;
                h_p += hess[i * d + j] * b.p[j];
            }
            let lhs = xdd + 3.0 / t * xd + sqrt_s * h_xd + (1.0 + 1.5 * sqrt_s / t) * g[i];
            worst = worst.max((lhs - cf * h_p).abs());
        }
    }
    Ok(worst)
}
