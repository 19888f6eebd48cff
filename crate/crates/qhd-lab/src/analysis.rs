//! Observables, success probability, Lyapunov functionals E(t)/F(t),
//! theorem-bound constants, commutation-relation verification, and
//! convergence-rate fitting.

use crate::evolution::{dft_matrix, momentum_matrix, HamiltonianParams};
use crate::objectives::{ObjectiveFields, ObjectiveSpec};
use crate::spectral_mesh::{expectation_raw, Grid, WaveFunction};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;

/// Per-observation record of an evolution or ensemble.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MetricsRecord {
    pub k: usize,
    pub t: f64,
    pub exp_f: f64,
    pub exp_gradnorm_sq: f64,
    pub success_prob: f64,
    pub norm_drift: f64,
    pub lyapunov: Option<f64>,
}

/// Ordered series of records with the success threshold they were computed
/// against.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricsSeries {
    pub records: Vec<MetricsRecord>,
    pub delta: f64,
    pub f_min: f64,
    /// Diverged classical runs excluded from the means (always 0 for quantum
    /// runs).
    pub failed_runs: usize,
    /// Max `| ||psi||^2 - 1 |` seen over the whole run (0 for classical).
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ObsRecord {
    pub exp_f: f64,
    pub exp_gradnorm_sq: f64,
    pub success_prob: f64,
}

/// Which Lyapunov functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    E,
    F,
}

/// `E[f]`, `E[|grad f|^2]`, and the success probability
/// `P[f - f_min <= delta]` of a normalized state.
pub fn observables(wf: &WaveFunction, obj: &ObjectiveSpec, delta: f64) -> Result<ObsRecord> {
    let fields = obj.eval_fields(wf.grid())?;
    observables_from_fields(wf, &fields, obj.f_min, delta)
}

/// Same as [`observables`] with precomputed fields (hot path).
pub fn observables_from_fields(
    wf: &WaveFunction,
    fields: &ObjectiveFields,
    f_min: f64,
    delta: f64,
) -> Result<ObsRecord> {
    wf.check_normalized(1e-8)?;
    let amp = wf.amplitudes();
    let exp_f = expectation_raw(amp, fields.f.values());
    let exp_gradnorm_sq = expectation_raw(amp, fields.gradnorm_sq.values());
    let success_prob = amp
        .iter()
        .zip(fields.f.values())
        .filter(|(_, &f)| f - f_min <= delta)
        .map(|(a, _)| a.norm_sqr())
        .sum();
    Ok(ObsRecord {
        exp_f,
        exp_gradnorm_sq,
        success_prob,
    })
}

pub fn lyapunov_value(
    kind: LyapunovKind,
    wf: &WaveFunction,
    obj: &ObjectiveSpec,
    fields: &ObjectiveFields,
    params: &HamiltonianParams,
    t: f64,
) -> Result<f64> {
    match kind {
        LyapunovKind::E => lyapunov_e(wf, obj, fields, params, t),
        LyapunovKind::F => lyapunov_f(wf, obj, fields, params, t),
    }
}

/// `E(t) = (1/2) sum_j || t^-2 p_j psi + alpha t v_j psi + 2 x_j psi ||^2
///        + (t^2 + omega t) <f>` for a centered objective.
pub fn lyapunov_e(
    wf: &WaveFunction,
    obj: &ObjectiveSpec,
    fields: &ObjectiveFields,
    params: &HamiltonianParams,
    t: f64,
) -> Result<f64> {
    if obj.f_min.abs() > 1e-9 {
        return Err(Error::NotCentered(obj.f_min));
    }
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    wf.check_normalized(1e-8)?;
    let grid = wf.grid();
    let amp = wf.amplitudes();
    let inv_t2 = t.powi(-2);
    let at = params.alpha * t;
    let mut square_sum = 0.0;
    for axis in 0..grid.dim() {
        let p = wf.partial_derivative(axis)?;
        let vj = fields.grad[axis].values();
        let n = grid.n_per_dim();
        let inner = n.pow((grid.dim() - 1 - axis) as u32);
        let coords = grid.coords(axis);
        let mut acc = 0.0;
        for (flat, (pa, a)) in p.amplitudes().iter().zip(amp).enumerate() {
            let x = coords[(flat / inner) % n];
            let b = inv_t2 * pa + (at * vj[flat] + 2.0 * x) * a;
            acc += b.norm_sqr();
        }
        square_sum += acc;
    }
    let exp_f = expectation_raw(amp, fields.f.values());
    Ok(0.5 * square_sum + (t * t + params.omega() * t) * exp_f)
}

/// `F(t) = E(t) + (beta/2) t^2 <G>`.
pub fn lyapunov_f(
    wf: &WaveFunction,
    obj: &ObjectiveSpec,
    fields: &ObjectiveFields,
    params: &HamiltonianParams,
    t: f64,
) -> Result<f64> {
    let e = lyapunov_e(wf, obj, fields, params, t)?;
    let exp_g = expectation_raw(wf.amplitudes(), fields.gradnorm_sq.values());
    Ok(e + 0.5 * params.beta * t * t * exp_g)
}

/// Theorem constants computed at the initial time `T0`.
#[derive(Debug, Clone, Copy)]
pub struct BoundConstants {
    /// `K0 = T0^-4 sum_j || p_j psi0 ||^2` (rescaled initial kinetic energy).
    pub k0: f64,
    /// `D0 = E[ |grad f|^2 + 4 |x|^2 + (T0^2 + omega T0) f ]`.
    pub d0: f64,
    /// `D0' = D0 + E[ |grad f|^2 ]` (coefficient-2 gradient term).
    pub d0prime: f64,
}

pub fn bound_constants(
    wf0: &WaveFunction,
    obj: &ObjectiveSpec,
    fields: &ObjectiveFields,
    params: &HamiltonianParams,
    t0: f64,
) -> Result<BoundConstants> {
    if obj.f_min.abs() > 1e-9 {
        return Err(Error::NotCentered(obj.f_min));
    }
    if !(t0 > 0.0) {
        return Err(Error::NonPositiveTime(t0));
    }
    wf0.check_normalized(1e-8)?;
    let grid = wf0.grid();
    let mut kinetic = 0.0;
    for axis in 0..grid.dim() {
        kinetic += wf0.partial_derivative(axis)?.norm_sq();
    }
    let k0 = kinetic / t0.powi(4);
    let amp = wf0.amplitudes();
    let exp_g = expectation_raw(amp, fields.gradnorm_sq.values());
    let exp_f = expectation_raw(amp, fields.f.values());
    let x2 = grid.evaluate(|x| x.iter().map(|v| v * v).sum());
    let exp_x2 = expectation_raw(amp, &x2);
    let d0 = exp_g + 4.0 * exp_x2 + (t0 * t0 + params.omega() * t0) * exp_f;
    Ok(BoundConstants {
        k0,
        d0,
        d0prime: d0 + exp_g,
    })
}

/// Flag every consecutive pair where `v_{k+1} > v_k (1 + rel_tol) + 1e-9`
/// (absolute floor for near-zero values). Returns `(index, relative
/// increase)` pairs.
pub fn monotonicity_check(series: &[(f64, f64)], rel_tol: f64) -> Vec<(usize, f64)> {
    series
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let (prev, next) = (w[0].1, w[1].1);
            if next > prev * (1.0 + rel_tol) + 1e-9 {
                Some((i + 1, (next - prev) / prev.abs().max(1e-300)))
            } else {
                None
            }
        })
        .collect()
}

/// Least-squares slope of `log(value)` vs `log(t)` over a window.
pub fn rate_fit(series: &[(f64, f64)], t_window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= t_window.0 && *t <= t_window.1)
        .cloned()
        .collect();
    if pts.len() < 5 {
        return Err(Error::SeriesTooShort {
            need: 5,
            got: pts.len(),
        });
    }
    if pts.iter().any(|(t, v)| *v <= 0.0 || *t <= 0.0) {
        return Err(Error::BadRateWindow);
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (t, v) in &pts {
        let x = t.ln();
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Max of `G(x) - x . grad G(x)` over the grid nodes, with
/// `grad G = 2 H_f grad f`. Nonpositivity is the hypothesis (Eq. 16 regime)
/// under which F-monotonicity is a theorem validation.
pub fn eq16_max(obj: &ObjectiveSpec, grid: &Arc<Grid>) -> Result<f64> {
    if grid.dim() != obj.dim {
        return Err(Error::DimensionMismatch {
            expected: obj.dim,
            got: grid.dim(),
        });
    }
    let d = obj.dim;
    let vals = grid.evaluate(|x| {
        let g = obj.grad(x);
        let h = obj.hess(x);
        let big_g: f64 = g.iter().map(|v| v * v).sum();
        let mut dot = 0.0;
        for i in 0..d {
            let mut gg_i = 0.0;
            for j in 0..d {
                gg_i += 2.0 * h[i * d + j] * g[j];
            }
            dot += x[i] * gg_i;
        }
        big_g - dot
    });
    Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Residuals of the operator identities underlying the Lyapunov derivative
/// computations, verified on dense 1D spectral matrices.
///
/// Identities involving the position operator (relations 2-4) cannot hold as
/// full-matrix identities on a torus (the spectral momentum sees the
/// sawtooth's jump), so they are verified applied to interior-localized
/// Gaussian test vectors. Full-matrix relations (1, 5, C.1, C.2) are checked
/// after projecting out the top 4 aliased Fourier modes of the residual,
/// which the discrete product of multiplication operators pollutes at O(1).
#[derive(Debug, Clone, Copy)]
pub struct CommutatorReport {
    pub rel1: f64,
    pub rel2: f64,
    pub rel3: f64,
    pub rel4: f64,
    pub rel5: f64,
    pub c1: f64,
    pub c2: f64,
}

pub const FULL_MATRIX_TOL: f64 = 1e-8;
pub const TEST_VECTOR_TOL: f64 = 1e-6;

impl CommutatorReport {
    /// `(name, residual, tolerance)` rows in report order.
    pub fn entries(&self) -> [(&'static str, f64, f64); 7] {
        [
            ("lemma4.3 rel1 (full matrix)", self.rel1, FULL_MATRIX_TOL),
            ("lemma4.3 rel2 (test vectors)", self.rel2, TEST_VECTOR_TOL),
            ("lemma4.3 rel3 (test vectors)", self.rel3, TEST_VECTOR_TOL),
            ("lemma4.3 rel4 (test vectors)", self.rel4, TEST_VECTOR_TOL),
            ("lemma4.3 rel5 (full matrix)", self.rel5, FULL_MATRIX_TOL),
            ("lemma C.1 (full matrix)", self.c1, FULL_MATRIX_TOL),
            ("lemma C.2 (full matrix)", self.c2, FULL_MATRIX_TOL),
        ]
    }

    pub fn pass(&self) -> bool {
        self.entries().iter().all(|(_, r, tol)| r <= tol)
    }
}

/// Verify the commutation identities on an `n`-point 1D mesh over the
/// objective's box (`f_choice` must be smooth and periodic on it, e.g.
/// `sin` on `[0, 2 pi]`).
pub fn commutator_verify(
    n: usize,
    f_choice: &ObjectiveSpec,
    alpha: f64,
    t: f64,
) -> Result<CommutatorReport> {
    if f_choice.dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: f_choice.dim,
        });
    }
    if n > 128 {
        return Err(Error::DenseSizeGuard(n));
    }
    let grid = Arc::new(crate::spectral_mesh::make_grid(f_choice.domain.clone(), n)?);
    let x = grid.coords(0).to_vec();
    let p = momentum_matrix(&grid);
    let diag = |vals: &dyn Fn(f64) -> f64| -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(vals(x[r]), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let fm = diag(&|u| f_choice.f(&[u]));
    let vm = diag(&|u| f_choice.grad(&[u])[0]);
    let xm = diag(&|u| u);
    let tm32 = t.powf(-1.5);
    let tp32 = t.powf(1.5);
    let a = &p * Complex64::new(tm32, 0.0) + &vm * Complex64::new(alpha * tp32, 0.0);
    let a2 = &a * &a;
    let i = Complex64::new(0.0, 1.0);
    let com = |l: &DMatrix<Complex64>, r: &DMatrix<Complex64>| l * r - r * l;
    let acom = |l: &DMatrix<Complex64>, r: &DMatrix<Complex64>| l * r + r * l;

    // dealias projector: keep modes |m| <= n/2 - 4
    let q = {
        let dft = dft_matrix(n, true);
        let idft = dft_matrix(n, false);
        let mut mask = DMatrix::<Complex64>::zeros(n, n);
        for idx in 0..n {
            let m = if idx < n / 2 {
                idx as i64
            } else {
                idx as i64 - n as i64
            };
            if m.unsigned_abs() as usize <= n / 2 - 4 {
                mask[(idx, idx)] = Complex64::new(1.0, 0.0);
            }
        }
        idft * mask * dft
    };
    let projected = |l: DMatrix<Complex64>, r: DMatrix<Complex64>| -> f64 {
        let num = (&q * (l.clone() - r) * &q).norm();
        let den = (&q * l * &q).norm().max(1e-300);
        num / den
    };

    // rel 1: i[A^2, f] = t^-3 {P, V} + 2 alpha V^2
    let rel1 = projected(
        com(&a2, &fm) * i,
        acom(&p, &vm) * Complex64::new(t.powi(-3), 0.0)
            + &vm * &vm * Complex64::new(2.0 * alpha, 0.0),
    );
    // rel 5 (j = k, 1D): i[V^2, {A, X}] = -4 t^-3/2 diag(f'' x f')
    let v2 = &vm * &vm;
    let rel5 = projected(
        com(&v2, &acom(&a, &xm)) * i,
        diag(&|u| {
            -4.0 * tm32 * f_choice.hess(&[u])[0] * u * f_choice.grad(&[u])[0]
        }),
    );
    // C.1: i[P^2, g] = {P, diag(g')} with g = f
    let c1 = projected(com(&(&p * &p), &fm) * i, acom(&p, &vm));
    // C.2: i[{P, h}, g] = diag(2 h g') with h = f', g = f
    let c2 = projected(
        com(&acom(&p, &vm), &fm) * i,
        diag(&|u| {
            let fp = f_choice.grad(&[u])[0];
            2.0 * fp * fp
        }),
    );

    // interior-localized Gaussian test battery for the position relations
    let center = 0.5 * (grid.domain().lo()[0] + grid.domain().hi()[0]);
    let sigma = 0.3 * grid.domain().width(0) / (2.0 * std::f64::consts::PI);
    let mut battery: Vec<DVector<Complex64>> = Vec::new();
    let gauss = |u: f64| (-(u - center) * (u - center) / (4.0 * sigma * sigma)).exp();
    for &qwave in &[1.0, 2.0, -1.0, 3.0] {
        battery.push(DVector::from_fn(n, |r, _| {
            Complex64::from_polar(gauss(x[r]), qwave * x[r])
        }));
    }
    battery.push(DVector::from_fn(n, |r, _| {
        Complex64::new(gauss(x[r]) * (x[r] - center), 0.0)
    }));
    battery.push(DVector::from_fn(n, |r, _| {
        Complex64::new(gauss(x[r]) * (x[r] - center) * (x[r] - center), 0.0)
    }));
    for v in &mut battery {
        let nv = v.norm();
        *v /= Complex64::new(nv, 0.0);
    }
    let vec_residual = |l: &DMatrix<Complex64>,
                        r: &DMatrix<Complex64>,
                        den: &DMatrix<Complex64>|
     -> f64 {
        battery
            .iter()
            .map(|psi| ((l - r) * psi).norm() / (den * psi).norm().max(1e-300))
            .fold(0.0, f64::max)
    };
    // rel 2: i[f, {A, X}] = -2 t^-3/2 diag(x f')
    let r2 = diag(&|u| -2.0 * tm32 * u * f_choice.grad(&[u])[0]);
    let l2 = com(&fm, &acom(&a, &xm)) * i;
    let rel2 = vec_residual(&l2, &r2, &r2);
    // rel 3 (j = k): i[A^2, X^2] = (2/t^3) {P, X} + 4 alpha diag(x f')
    let r3 = acom(&p, &xm) * Complex64::new(2.0 * t.powi(-3), 0.0)
        + diag(&|u| 4.0 * alpha * u * f_choice.grad(&[u])[0]);
    let l3 = com(&a2, &(&xm * &xm)) * i;
    let rel3 = vec_residual(&l3, &r3, &r3);
    // rel 4 (j = k): i[A^2, {A, X}] = 4 t^-3/2 A^2
    let r4 = &a2 * Complex64::new(4.0 * tm32, 0.0);
    let l4 = com(&a2, &acom(&a, &xm)) * i;
    let rel4 = vec_residual(&l4, &r4, &a2);

    Ok(CommutatorReport {
        rel1,
        rel2,
        rel3,
        rel4,
        rel5,
        c1,
        c2,
    })
}
