//! `verify` subcommand: self-check suites printing pass/fail tables.

use crate::analysis::{self, LyapunovKind};
use crate::evolution::{evolve, reference_step_dense, step, EvolveOptions, HamiltonianParams, Splitting};
use crate::objectives;
use crate::spectral_mesh::{gaussian_state, make_grid, uniform_state};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Commutators,
    Lyapunov,
    Splitting,
    Gradients,
}

/// Run a verification suite, printing one row per check. Returns whether all
/// checks passed.
pub fn cmd_verify(suite: Suite) -> Result<bool> {
    match suite {
        Suite::Commutators => verify_commutators(),
        Suite::Lyapunov => verify_lyapunov(),
        Suite::Splitting => verify_splitting(),
        Suite::Gradients => verify_gradients(),
    }
}

fn report(name: &str, value: f64, tol: f64, le: bool) -> bool {
    let ok = if le { value <= tol } else { value >= tol };
    println!(
        "{} {name}: {value:.3e} ({} {tol:.1e})",
        if ok { "PASS" } else { "FAIL" },
        if le { "<=" } else { ">=" },
    );
    ok
}

fn verify_commutators() -> Result<bool> {
    let sine = objectives::sine_1d();
    let rep = analysis::commutator_verify(64, &sine, 0.1, 1.0)?;
    let mut all = true;
    for (name, value, tol) in rep.entries() {
        all &= report(name, value, tol, true);
    }
    Ok(all)
}

fn verify_gradients() -> Result<bool> {
    let mut all = true;
    for name in objectives::BUILTIN_NAMES {
        let obj = objectives::get(name)?;
        let rep = obj.check_gradient(200, 1234);
        all &= report(
            &format!("gradient fd check ({name})"),
            rep.max_grad_deviation,
            1e-6,
            true,
        );
        all &= report(
            &format!("hessian fd check ({name})"),
            rep.max_hess_deviation,
            1e-4,
            true,
        );
    }
    Ok(all)
}

fn verify_splitting() -> Result<bool> {
    // single-step error vs the dense exp(-i h H(t)) oracle on 1D N=32 sine
    let obj = objectives::sine_1d();
    let grid = Arc::new(make_grid(obj.domain.clone(), 32)?);
    let fields = obj.eval_fields(&grid)?;
    let wf0 = gaussian_state(Arc::clone(&grid), &[PI], 0.8)?;
    let t = 1.0;
    let err_at = |h: f64| -> Result<f64> {
        let params = HamiltonianParams {
            alpha: 0.1,
            beta: 0.05,
            gamma: 0.2,
            t0: t,
            h,
            steps: 1,
        };
        let mut wf = wf0.clone();
        step(&mut wf, &params, &fields, t)?;
        let oracle = reference_step_dense(&wf0, &obj, &params, t, h)?;
        Ok(wf
            .amplitudes()
            .iter()
            .zip(oracle.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    };
    let mut all = true;
    let mut errs = Vec::new();
    for &h in &[1e-2, 5e-3, 2.5e-3, 1.25e-3] {
        errs.push(err_at(h)?);
    }
    for i in 0..3 {
        let ratio = errs[i] / errs[i + 1];
        let ok = (3.5..=4.5).contains(&ratio);
        println!(
            "{} richardson ratio h={:.2e}: {ratio:.3} (in [3.5, 4.5])",
            if ok { "PASS" } else { "FAIL" },
            [1e-2, 5e-3, 2.5e-3][i],
        );
        all &= ok;
    }
    all &= report("single-step error at h=1e-3", err_at(1e-3)?, 5e-6, true);
    Ok(all)
}

fn verify_lyapunov() -> Result<bool> {
    // Lemma 4.2 regime: centered convex quartic, alpha = 0.05, gamma = 0.2
    let obj = objectives::get("convex_quartic")?;
    let grid = Arc::new(make_grid(obj.domain.clone(), 256)?);
    let wf0 = uniform_state(Arc::clone(&grid));
    let mut all = true;
    for (beta, kind) in [(0.0, LyapunovKind::E), (0.05, LyapunovKind::F)] {
        let params = HamiltonianParams {
            alpha: 0.05,
            beta,
            gamma: 0.2,
            t0: 1.0,
            h: 0.01,
            steps: 500,
        };
        if kind == LyapunovKind::F {
            // Theorem hypothesis (the Eq. 16-type condition) checked on nodes
            let max = analysis::eq16_max(&obj, &grid)?;
            all &= report("eq16 grid max (G - x . grad G)", max, 1e-12, true);
        }
        let opts = EvolveOptions {
            observe_every: 5,
            delta: 1.0,
            splitting: Splitting::Gauged,
            lyapunov: Some(kind),
        };
        let (_, series) = evolve(&wf0, &params, &obj, &opts)?;
        let pts: Vec<(f64, f64)> = series
            .records
            .iter()
            .map(|r| (r.t, r.lyapunov.ok_or_else(|| Error::Cli("missing lyapunov".into()))))
            .map(|(t, v)| v.map(|v| (t, v)))
            .collect::<Result<_>>()?;
        let violations = analysis::monotonicity_check(&pts, 1e-3);
        all &= report(
            &format!("{kind:?}(t) monotonicity violations (beta={beta})"),
            violations.len() as f64,
            0.0,
            true,
        );
        let bound_ok = series
            .records
            .iter()
            .all(|r| r.exp_f <= r.lyapunov.unwrap() / (r.t * r.t) + 1e-9);
        println!(
            "{} exp_f <= {kind:?}(t)/t^2 at every observation (beta={beta})",
            if bound_ok { "PASS" } else { "FAIL" },
        );
        all &= bound_ok;
        if kind == LyapunovKind::E {
            let f_pts: Vec<(f64, f64)> = series.records.iter().map(|r| (r.t, r.exp_f)).collect();
            let slope = analysis::rate_fit(&f_pts, (2.0, 5.0))?;
            all &= report("log-log slope of E[f] over t in [2,5]", slope, -1.5, true);
        }
    }
    Ok(all)
}
