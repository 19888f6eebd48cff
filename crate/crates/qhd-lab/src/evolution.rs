//! Discrete-time gradient-based QHD propagator plus small-grid dense oracles.
//!
//! The time-dependent Hamiltonian is
//! `H(t) = |k|^2/(2 t^3) + (alpha/2) sum_j {p_j, v_j}
//!        + ((alpha^2 + beta)/2) t^3 G + (t^3 + gamma t^2) f`
//! with `v_j = d_j f` and `G = |grad f|^2`. Two propagators are provided:
//!
//! - [`Splitting::ThreeFactor`]: the product formula splitting into
//!   potential, mixed (Krylov/Lanczos), and kinetic factors, applied
//!   rightmost-first; local error O(h^2).
//! - [`Splitting::Gauged`]: because `v = grad f`, the mixed and
//!   squared-gradient terms together are the kinetic operator conjugated by
//!   the diagonal gauge `exp(i alpha t^3 f)`:
//!   `(1/2) sum_j A_j^2 = e^{-i a f} (-Lap/(2 t^3)) e^{+i a f}`, `a = alpha t^3`.
//!   The step then needs only two factors, both exactly unitary, and treats
//!   the full `A^2` block without splitting error between its parts. This is
//!   markedly more accurate at large `|alpha| t^3 h` and is the default for
//!   the benchmark presets.

use crate::analysis::{self, LyapunovKind, MetricsRecord, MetricsSeries};
use crate::objectives::{ObjectiveFields, ObjectiveSpec};
use crate::spectral_mesh::{
    apply_phase_raw, momentum_apply_raw, Grid, ScalarField, WaveFunction,
};
use crate::{par, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;
use std::time::Instant;

/// Dynamics parameters `(alpha, beta, gamma, t0, h, K)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HamiltonianParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub t0: f64,
    pub h: f64,
    pub steps: usize,
}

impl HamiltonianParams {
    /// Plain QHD: `alpha = beta = gamma = 0`.
    pub fn qhd(t0: f64, h: f64, steps: usize) -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            t0,
            h,
            steps,
        }
    }

    /// Derived `omega = gamma - 3 alpha`, always recomputed.
    pub fn omega(&self) -> f64 {
        self.gamma - 3.0 * self.alpha
    }

    pub fn t_k(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidParameter(format!("h = {} must be > 0", self.h)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        if !(self.t0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t0 = {} must be >= 0",
                self.t0
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Which propagator factorization to use per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    ThreeFactor,
    Gauged,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub k: usize,
    pub t_k: f64,
    pub norm_drift: f64,
    pub lanczos_dim: usize,
    pub wall_ns: u128,
}

const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_CAP: usize = 48;

/// One three-factor step at frozen time `t_k`, rightmost factor first:
/// potential phase, mixed Lanczos step, kinetic Fourier phase.
pub fn step(
    wf: &mut WaveFunction,
    params: &HamiltonianParams,
    fields: &ObjectiveFields,
    t_k: f64,
) -> Result<StepReport> {
    if !(t_k > 0.0) {
        return Err(Error::NonPositiveTime(t_k));
    }
    wf.check_normalized(1e-8)?;
    let start = Instant::now();
    let h = params.h;
    let t3 = t_k.powi(3);
    let c_g = 0.5 * (params.alpha * params.alpha + params.beta) * t3;
    let c_f = t3 + params.gamma * t_k * t_k;
    let pot = combine(fields.gradnorm_sq.values(), c_g, fields.f.values(), c_f);
    apply_phase_raw(wf.amplitudes_mut(), &pot, h);
    let lanczos_dim = if params.alpha != 0.0 {
        mixed_step_lanczos(wf, h * params.alpha, &fields.grad, LANCZOS_TOL)?
    } else {
        0
    };
    let kin = kinetic_field(wf.grid());
    wf.apply_spectral_phase_field(&kin, h / (2.0 * t3));
    let norm_drift = (wf.norm_sq() - 1.0).abs();
    Ok(StepReport {
        k: 0,
        t_k,
        norm_drift,
        lanczos_dim,
        wall_ns: start.elapsed().as_nanos(),
    })
}

/// One gauged two-factor step at frozen time `t_k`: potential phase (without
/// the `alpha^2` term, which lives inside the gauged kinetic factor), then
/// the gauge-conjugated kinetic phase.
pub fn step_gauged(
    wf: &mut WaveFunction,
    params: &HamiltonianParams,
    fields: &ObjectiveFields,
    t_k: f64,
) -> Result<StepReport> {
    if !(t_k > 0.0) {
        return Err(Error::NonPositiveTime(t_k));
    }
    wf.check_normalized(1e-8)?;
    let start = Instant::now();
    let h = params.h;
    let t3 = t_k.powi(3);
    let c_g = 0.5 * params.beta * t3;
    let c_f = t3 + params.gamma * t_k * t_k;
    let pot = combine(fields.gradnorm_sq.values(), c_g, fields.f.values(), c_f);
    apply_phase_raw(wf.amplitudes_mut(), &pot, h);
    let gauge = params.alpha * t3;
    if gauge != 0.0 {
        apply_phase_raw(wf.amplitudes_mut(), fields.f.values(), -gauge);
    }
    let kin = kinetic_field(wf.grid());
    wf.apply_spectral_phase_field(&kin, h / (2.0 * t3));
    if gauge != 0.0 {
        apply_phase_raw(wf.amplitudes_mut(), fields.f.values(), gauge);
    }
    let norm_drift = (wf.norm_sq() - 1.0).abs();
    Ok(StepReport {
        k: 0,
        t_k,
        norm_drift,
        lanczos_dim: 0,
        wall_ns: start.elapsed().as_nanos(),
    })
}

fn combine(a: &[f64], ca: f64, b: &[f64], cb: f64) -> Vec<f64> {
    par::map_collect(a.len(), |i| ca * a[i] + cb * b[i])
}

fn kinetic_field(grid: &Arc<Grid>) -> Vec<f64> {
    grid.evaluate_spectral(|k| k.iter().map(|v| v * v).sum())
}

/// Approximate `exp(-i h_eff M) wf` for the Hermitian mixed operator
/// `M = (1/2) sum_j (p_j v_j + v_j p_j)` by Lanczos iteration with full
/// reorthogonalization. Iterates until the Krylov residual estimate drops
/// below `tol` or the dimension cap (48) is reached; at the cap the step is
/// split exactly into two half-steps (M is time-independent, so the
/// exponentials compose exactly). Returns the largest Krylov dimension used.
pub fn mixed_step_lanczos(
    wf: &mut WaveFunction,
    h_eff: f64,
    grad_fields: &[ScalarField],
    tol: f64,
) -> Result<usize> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("lanczos tol must be > 0".into()));
    }
    for g in grad_fields {
        if g.grid().as_ref() != wf.grid().as_ref() {
            return Err(Error::GridMismatch);
        }
    }
    if h_eff == 0.0 {
        return Ok(0);
    }
    let grid = Arc::clone(wf.grid());
    let grads: Vec<&[f64]> = grad_fields.iter().map(|g| g.values()).collect();
    let matvec = |v: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for (axis, gj) in grads.iter().enumerate() {
            // p_j (v_j psi)
            let mut a: Vec<Complex64> = v
                .iter()
                .zip(gj.iter())
                .map(|(c, &g)| c * g)
                .collect();
            momentum_apply_raw(&grid, &mut a, axis);
            // v_j (p_j psi)
            let mut b = v.to_vec();
            momentum_apply_raw(&grid, &mut b, axis);
            for ((o, av), (bv, &g)) in out
                .iter_mut()
                .zip(&a)
                .zip(b.iter().zip(gj.iter()))
            {
                *o += 0.5 * (av + bv * g);
            }
        }
        out
    };
    let mut dim_used = 0;
    let amp = wf.amplitudes_mut();
    let result = lanczos_exp(&matvec, amp, h_eff, tol, LANCZOS_CAP, 0, &mut dim_used)?;
    amp.copy_from_slice(&result);
    // exactly-unitary-in-subspace: renormalize only if the drift is real
    let n2: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
    let target: f64 = 1.0; // callers hold normalized states
    if (n2 - target).abs() > 1e-12 {
        let s = (target / n2).sqrt();
        for a in amp.iter_mut() {
            *a *= s;
        }
    }
    Ok(dim_used)
}

fn lanczos_exp(
    matvec: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    v0: &[Complex64],
    h_eff: f64,
    tol: f64,
    cap: usize,
    depth: usize,
    dim_used: &mut usize,
) -> Result<Vec<Complex64>> {
    let nv = v0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if nv == 0.0 {
        return Ok(v0.to_vec());
    }
    let mut basis: Vec<Vec<Complex64>> = vec![v0.iter().map(|a| a / nv).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = matvec(&basis[0]);
    let a0 = vdot(&basis[0], &w).re;
    alphas.push(a0);
    axpy(&mut w, -Complex64::new(a0, 0.0), &basis[0]);
    let mut last_residual = f64::INFINITY;
    for _m in 1..=cap {
        let b = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let u = tridiag_exp_col0(&alphas, &betas, h_eff);
        last_residual = (b * u[u.len() - 1].norm() * h_eff).abs();
        if b < 1e-14 || last_residual < tol {
            *dim_used = (*dim_used).max(basis.len());
            let mut y = vec![Complex64::new(0.0, 0.0); v0.len()];
            for (ui, q) in u.iter().zip(&basis) {
                axpy(&mut y, ui * nv, q);
            }
            return Ok(y);
        }
        betas.push(b);
        basis.push(w.iter().map(|a| a / b).collect());
        w = matvec(basis.last().unwrap());
        let a = vdot(basis.last().unwrap(), &w).re;
        alphas.push(a);
        let m = basis.len();
        axpy(&mut w, -Complex64::new(a, 0.0), &basis[m - 1]);
        axpy(&mut w, -Complex64::new(b, 0.0), &basis[m - 2]);
        // full reorthogonalization keeps the basis numerically orthonormal
        for q in &basis {
            let c = vdot(q, &w);
            axpy(&mut w, -c, q);
        }
    }
    if depth >= 16 {
        return Err(Error::LanczosNoConvergence {
            residual: last_residual,
            tol,
            cap,
        });
    }
    // cap reached: split the (time-independent) exponential exactly
    let half = lanczos_exp(matvec, v0, h_eff / 2.0, tol, cap, depth + 1, dim_used)?;
    lanczos_exp(matvec, &half, h_eff / 2.0, tol, cap, depth + 1, dim_used)
}

/// First column of `exp(-i h T)` for the real symmetric tridiagonal `T`.
fn tridiag_exp_col0(alphas: &[f64], betas: &[f64], h: f64) -> Vec<Complex64> {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in betas.iter().enumerate() {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    let eig = t.symmetric_eigen();
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        let phase = Complex64::from_polar(1.0, -h * eig.eigenvalues[j]);
        let q0 = eig.eigenvectors[(0, j)];
        for (i, o) in out.iter_mut().enumerate() {
            *o += eig.eigenvectors[(i, j)] * phase * q0;
        }
    }
    out
}

fn vdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Evolution driver options.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub observe_every: usize,
    pub delta: f64,
    pub splitting: Splitting,
    pub lyapunov: Option<LyapunovKind>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            observe_every: 1,
            delta: 1.0,
            splitting: Splitting::ThreeFactor,
            lyapunov: None,
        }
    }
}

/// Run `K` steps with `t_k = t0 + k h`, recording observables every
/// `observe_every` steps and at the final step.
pub fn evolve(
    wf0: &WaveFunction,
    params: &HamiltonianParams,
    obj: &ObjectiveSpec,
    opts: &EvolveOptions,
) -> Result<(WaveFunction, MetricsSeries)> {
    params.validate()?;
    if opts.observe_every < 1 {
        return Err(Error::InvalidParameter("observe_every must be >= 1".into()));
    }
    wf0.check_normalized(1e-8)?;
    let grid = Arc::clone(wf0.grid());
    let fields = obj.eval_fields(&grid)?;
    let kin = kinetic_field(&grid);
    let mut wf = wf0.clone();
    let mut records = Vec::new();
    let mut max_drift: f64 = 0.0;
    for k in 1..=params.steps {
        let t_k = params.t_k(k);
        if !(t_k > 0.0) {
            return Err(Error::NonPositiveTime(t_k));
        }
        let h = params.h;
        let t3 = t_k.powi(3);
        match opts.splitting {
            Splitting::ThreeFactor => {
                let c_g = 0.5 * (params.alpha * params.alpha + params.beta) * t3;
                let c_f = t3 + params.gamma * t_k * t_k;
                let pot = combine(fields.gradnorm_sq.values(), c_g, fields.f.values(), c_f);
                apply_phase_raw(wf.amplitudes_mut(), &pot, h);
                if params.alpha != 0.0 {
                    mixed_step_lanczos(&mut wf, h * params.alpha, &fields.grad, LANCZOS_TOL)?;
                }
                wf.apply_spectral_phase_field(&kin, h / (2.0 * t3));
            }
            Splitting::Gauged => {
                let c_g = 0.5 * params.beta * t3;
                let c_f = t3 + params.gamma * t_k * t_k;
                let pot = combine(fields.gradnorm_sq.values(), c_g, fields.f.values(), c_f);
                apply_phase_raw(wf.amplitudes_mut(), &pot, h);
                let gauge = params.alpha * t3;
                if gauge != 0.0 {
                    apply_phase_raw(wf.amplitudes_mut(), fields.f.values(), -gauge);
                }
                wf.apply_spectral_phase_field(&kin, h / (2.0 * t3));
                if gauge != 0.0 {
                    apply_phase_raw(wf.amplitudes_mut(), fields.f.values(), gauge);
                }
            }
        }
        let drift = (wf.norm_sq() - 1.0).abs();
        max_drift = max_drift.max(drift);
        if k % opts.observe_every == 0 || k == params.steps {
            let obs = analysis::observables_from_fields(&wf, &fields, obj.f_min, opts.delta)?;
            let lyapunov = match opts.lyapunov {
                Some(kind) => Some(analysis::lyapunov_value(
                    kind, &wf, obj, &fields, params, t_k,
                )?),
                None => None,
            };
            records.push(MetricsRecord {
                k,
                t: t_k,
                exp_f: obs.exp_f,
                exp_gradnorm_sq: obs.exp_gradnorm_sq,
                success_prob: obs.success_prob,
                norm_drift: drift,
                lyapunov,
            });
        }
    }
    let series = MetricsSeries {
        records,
        delta: opts.delta,
        f_min: obj.f_min,
        failed_runs: 0,
        max_norm_drift: max_drift,
    };
    Ok((wf, series))
}

/// Dense 1D Hamiltonian matrix
/// `P^2/(2 t^3) + (alpha/2)(P V + V P) + ((alpha^2+beta)/2) t^3 diag(G)
///  + (t^3 + gamma t^2) diag(f)`
/// with `P` the Nyquist-zeroed spectral differentiation matrix times `-i`.
pub fn dense_hamiltonian(
    grid: &Arc<Grid>,
    obj: &ObjectiveSpec,
    params: &HamiltonianParams,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: grid.dim(),
        });
    }
    let n = grid.n_per_dim();
    if n > 256 {
        return Err(Error::DenseSizeGuard(n));
    }
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let p = momentum_matrix(grid);
    // kinetic uses the full |k|^2 spectrum (even order: Nyquist kept)
    let k2 = {
        let dft = dft_matrix(n, true);
        let idft = dft_matrix(n, false);
        let mut diag = DMatrix::<Complex64>::zeros(n, n);
        for (i, &k) in grid.wavenumbers(0).iter().enumerate() {
            diag[(i, i)] = Complex64::new(k * k, 0.0);
        }
        &idft * diag * &dft
    };
    let x = grid.coords(0);
    let t3 = t.powi(3);
    let mut h = k2 * Complex64::new(1.0 / (2.0 * t3), 0.0);
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    for (i, &xi) in x.iter().enumerate() {
        v[(i, i)] = Complex64::new(obj.grad(&[xi])[0], 0.0);
    }
    let mixed = (&p * &v + &v * &p) * Complex64::new(params.alpha / 2.0, 0.0);
    h += mixed;
    for (i, &xi) in x.iter().enumerate() {
        let g = obj.gradnorm_sq(&[xi]);
        let f = obj.f(&[xi]);
        h[(i, i)] += Complex64::new(
            0.5 * (params.alpha * params.alpha + params.beta) * t3 * g
                + (t3 + params.gamma * t * t) * f,
            0.0,
        );
    }
    Ok(h)
}

/// Apply the exact dense unitary `exp(-i h H(t))` (oracle for splitting-error
/// tests).
pub fn reference_step_dense(
    wf: &WaveFunction,
    obj: &ObjectiveSpec,
    params: &HamiltonianParams,
    t: f64,
    h: f64,
) -> Result<WaveFunction> {
    let ham = dense_hamiltonian(wf.grid(), obj, params, t)?;
    let psi = DVector::from_column_slice(wf.amplitudes());
    let out = hermitian_exp_apply(&ham, &psi, h);
    WaveFunction::new(Arc::clone(wf.grid()), out.iter().cloned().collect())
}

/// `exp(-i h M) v` for Hermitian `M` via full eigendecomposition.
pub fn hermitian_exp_apply(
    m: &DMatrix<Complex64>,
    v: &DVector<Complex64>,
    h: f64,
) -> DVector<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let coeffs = eig.eigenvectors.adjoint() * v;
    let mut scaled = coeffs;
    for (i, c) in scaled.iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, -h * eig.eigenvalues[i]);
    }
    &eig.eigenvectors * scaled
}

/// Spectral differentiation matrix times `-i` (momentum operator), with the
/// Nyquist mode zeroed.
pub fn momentum_matrix(grid: &Arc<Grid>) -> DMatrix<Complex64> {
    let n = grid.n_per_dim();
    let dft = dft_matrix(n, true);
    let idft = dft_matrix(n, false);
    let mut diag = DMatrix::<Complex64>::zeros(n, n);
    for (i, &k) in grid.deriv_wavenumbers(0).iter().enumerate() {
        diag[(i, i)] = Complex64::new(k, 0.0);
    }
    &idft * diag * &dft
}

/// Dense DFT matrix matching the FFT convention (forward unscaled, inverse
/// scaled by 1/n).
pub fn dft_matrix(n: usize, forward: bool) -> DMatrix<Complex64> {
    let sign = if forward { -1.0 } else { 1.0 };
    let scale = if forward { 1.0 } else { 1.0 / n as f64 };
    DMatrix::from_fn(n, n, |r, c| {
        Complex64::from_polar(
            scale,
            sign * 2.0 * std::f64::consts::PI * (r * c % n) as f64 / n as f64,
        )
    })
}
