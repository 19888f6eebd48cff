//! Acceptance gate: one test per criterion, each printing a single
//! `PASS criterion N: ...` line (visible with `--nocapture`; assertions make
//! failures loud either way).

use qhd_lab::analysis::{
    self, commutator_verify, eq16_max, monotonicity_check, rate_fit, LyapunovKind, MetricsSeries,
};
use qhd_lab::classical_opt::{
    ensemble, ham_flow_rk4, highres_residual, nag_run, ClassicalMethod, FlowForm, NagConfig,
    ResidualCoefficient, SgdmConfig,
};
use qhd_lab::cli::config::parse_config;
use qhd_lab::cli::run::resolve_objective;
use qhd_lab::evolution::{
    evolve, hermitian_exp_apply, mixed_step_lanczos, momentum_matrix,
    reference_step_dense, step, EvolveOptions, HamiltonianParams, Splitting,
};
use qhd_lab::objectives::{self, ObjectiveSpec};
use qhd_lab::spectral_mesh::{gaussian_state, make_grid, uniform_state, Grid};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(name)
}

fn evolve_quantum(
    obj: &ObjectiveSpec,
    grid_n: usize,
    params: &HamiltonianParams,
    observe_every: usize,
    lyapunov: Option<LyapunovKind>,
) -> MetricsSeries {
    let grid = Arc::new(make_grid(obj.domain.clone(), grid_n).unwrap());
    let wf0 = uniform_state(Arc::clone(&grid));
    let opts = EvolveOptions {
        observe_every,
        delta: 1.0,
        splitting: Splitting::Gauged,
        lyapunov,
    };
    let (_, series) = evolve(&wf0, params, obj, &opts).unwrap();
    series
}

#[test]
fn criterion_01_unitarity_styblinski_preset() {
    let cfg = parse_config(&preset("styblinski_gradqhd.toml")).unwrap();
    let obj = resolve_objective(&cfg).unwrap();
    let ham = cfg.hamiltonian.as_ref().unwrap();
    assert_eq!(cfg.experiment.grid_n, 128);
    assert_eq!((ham.alpha, ham.gamma, ham.h, ham.steps), (-0.05, 5.0, 0.01, 1000));
    let start = Instant::now();
    let series = evolve_quantum(&obj, cfg.experiment.grid_n, &ham.params(), 50, None);
    let elapsed = start.elapsed();
    assert!(
        series.max_norm_drift <= 1e-8,
        "norm drift {:.3e}",
        series.max_norm_drift
    );
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}");
    println!(
        "PASS criterion 1: unitarity drift {:.3e} <= 1e-8 in {elapsed:?}",
        series.max_norm_drift
    );
}

#[test]
fn criterion_02_commutator_suite() {
    let rep = commutator_verify(64, &objectives::sine_1d(), 0.1, 1.0).unwrap();
    assert!(rep.pass(), "{rep:?}");
    let worst_full = rep.rel1.max(rep.rel5).max(rep.c1).max(rep.c2);
    let worst_vec = rep.rel2.max(rep.rel3).max(rep.rel4);
    println!(
        "PASS criterion 2: commutators full-matrix {worst_full:.3e} <= 1e-8, test-vector {worst_vec:.3e} <= 1e-6"
    );
}

#[test]
fn criterion_03_splitting_oracle() {
    let obj = objectives::sine_1d();
    let grid = Arc::new(make_grid(obj.domain.clone(), 32).unwrap());
    let fields = obj.eval_fields(&grid).unwrap();
    let wf0 = gaussian_state(Arc::clone(&grid), &[PI], 0.8).unwrap();
    let err_at = |h: f64| {
        let params = HamiltonianParams {
            alpha: 0.1,
            beta: 0.05,
            gamma: 0.2,
            t0: 1.0,
            h,
            steps: 1,
        };
        let mut wf = wf0.clone();
        step(&mut wf, &params, &fields, 1.0).unwrap();
        let oracle = reference_step_dense(&wf0, &obj, &params, 1.0, h).unwrap();
        wf.amplitudes()
            .iter()
            .zip(oracle.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3, 1.25e-3].iter().map(|&h| err_at(h)).collect();
    let mut ratios = Vec::new();
    for i in 0..3 {
        let r = errs[i] / errs[i + 1];
        assert!((3.5..=4.5).contains(&r), "ratio {r} at level {i}: {errs:?}");
        ratios.push(r);
    }
    let abs = err_at(1e-3);
    assert!(abs <= 5e-6, "abs err {abs:.3e}");
    println!("PASS criterion 3: Richardson ratios {ratios:.3?} in [3.5,4.5]; |err(1e-3)| = {abs:.3e} <= 5e-6");
}

#[test]
fn criterion_04_lanczos_vs_dense_mixed_exponential() {
    let obj = objectives::sine_1d();
    let grid = Arc::new(make_grid(obj.domain.clone(), 32).unwrap());
    let fields = obj.eval_fields(&grid).unwrap();
    let mut wf = gaussian_state(Arc::clone(&grid), &[PI], 0.8).unwrap();
    let wf0 = wf.clone();
    let h_eff = 0.05;
    mixed_step_lanczos(&mut wf, h_eff, &fields.grad, 1e-10).unwrap();
    // dense (1/2){P, V}
    let p = momentum_matrix(&grid);
    let mut v = nalgebra::DMatrix::<num_complex::Complex64>::zeros(32, 32);
    for (i, &x) in grid.coords(0).iter().enumerate() {
        v[(i, i)] = num_complex::Complex64::new(obj.grad(&[x])[0], 0.0);
    }
    let m = (&p * &v + &v * &p) * num_complex::Complex64::new(0.5, 0.0);
    let psi0 = nalgebra::DVector::from_column_slice(wf0.amplitudes());
    let oracle = hermitian_exp_apply(&m, &psi0, h_eff);
    let err: f64 = wf
        .amplitudes()
        .iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-8, "err {err:.3e}");
    println!("PASS criterion 4: Lanczos vs dense exp(-ih(1/2){{P,V}}) err {err:.3e} <= 1e-8");
}

#[test]
fn criteria_05_06_lyapunov_monotonicity_and_rate() {
    let obj = objectives::get("convex_quartic").unwrap();
    let grid: Arc<Grid> = Arc::new(make_grid(obj.domain.clone(), 256).unwrap());
    let mut slope_printed = None;
    for (beta, kind) in [(0.0, LyapunovKind::E), (0.05, LyapunovKind::F)] {
        if kind == LyapunovKind::F {
            let max = eq16_max(&obj, &grid).unwrap();
            assert!(max <= 1e-12, "eq16 max {max:.3e}");
        }
        let params = HamiltonianParams {
            alpha: 0.05,
            beta,
            gamma: 0.2,
            t0: 1.0,
            h: 0.01,
            steps: 500,
        };
        let series = evolve_quantum(&obj, 256, &params, 5, Some(kind));
        let pts: Vec<(f64, f64)> = series
            .records
            .iter()
            .map(|r| (r.t, r.lyapunov.unwrap()))
            .collect();
        let violations = monotonicity_check(&pts, 1e-3);
        assert!(
            violations.is_empty(),
            "{kind:?} violations (beta={beta}): {violations:?}"
        );
        for r in &series.records {
            assert!(
                r.exp_f <= r.lyapunov.unwrap() / (r.t * r.t) + 1e-9,
                "exp_f bound broken at k={}",
                r.k
            );
        }
        if kind == LyapunovKind::E {
            let f_pts: Vec<(f64, f64)> = series.records.iter().map(|r| (r.t, r.exp_f)).collect();
            let slope = rate_fit(&f_pts, (2.0, 5.0)).unwrap();
            assert!(slope <= -1.5, "slope {slope:.3}");
            slope_printed = Some(slope);
        }
        println!(
            "PASS criterion 5 ({kind:?}, beta={beta}): zero monotonicity violations, exp_f <= {kind:?}/t^2 throughout"
        );
    }
    println!(
        "PASS criterion 6: log-log E[f] slope {:.3} <= -1.5 over t in [2,5]",
        slope_printed.unwrap()
    );
}

#[test]
fn criterion_07_convex_experiment_ordering() {
    let cfg = parse_config(&preset("convex_gradqhd.toml")).unwrap();
    let obj = resolve_objective(&cfg).unwrap();
    assert_eq!(obj.domain.lo(), &[-2.0, -2.0][..]);
    let grad = evolve_quantum(&obj, 128, &cfg.hamiltonian.as_ref().unwrap().params(), 1, None);
    let qhd = evolve_quantum(&obj, 128, &HamiltonianParams::qhd(1.0, 0.2, 25), 1, None);
    let nag = ensemble(
        &obj,
        &ClassicalMethod::Nag(NagConfig {
            s: 0.01,
            steps: 25,
            y0_zero: false,
        }),
        1000,
        42,
        1.0,
    )
    .unwrap();
    let sgdm = ensemble(
        &obj,
        &ClassicalMethod::Sgdm(SgdmConfig {
            s0: 0.01,
            steps: 25,
            noise_std: 1.0,
        }),
        1000,
        42,
        1.0,
    )
    .unwrap();
    let final_f = |s: &MetricsSeries| s.records.last().unwrap().exp_f;
    let (g, q, n, m) = (final_f(&grad), final_f(&qhd), final_f(&nag), final_f(&sgdm));
    assert!(g < q, "grad {g:.4e} !< qhd {q:.4e}");
    assert!(g < n, "grad {g:.4e} !< nag {n:.4e}");
    assert!(g < m, "grad {g:.4e} !< sgdm {m:.4e}");
    // grad-QHD curve decreases monotonically over the 25 iterations
    let curve: Vec<(f64, f64)> = grad.records.iter().map(|r| (r.t, r.exp_f)).collect();
    let ups = monotonicity_check(&curve, 0.0);
    assert!(ups.is_empty(), "grad-QHD curve increases: {ups:?}");
    println!(
        "PASS criterion 7: E[f(X_25)] grad {g:.4e} < qhd {q:.4e}, nag {n:.4e}, sgdm {m:.4e}; grad curve monotone"
    );
}

#[test]
fn criterion_08_nonconvex_ordering() {
    // Cube-Wave energies
    let cw = objectives::get("cube_wave").unwrap();
    let grad_p = HamiltonianParams {
        alpha: -0.05,
        beta: 0.0,
        gamma: 5.0,
        t0: 0.0,
        h: 0.02,
        steps: 500,
    };
    let grad = evolve_quantum(&cw, 128, &grad_p, 25, None);
    let qhd = evolve_quantum(&cw, 128, &HamiltonianParams::qhd(0.0, 0.02, 500), 25, None);
    let nag = ensemble(
        &cw,
        &ClassicalMethod::Nag(NagConfig {
            s: 0.01,
            steps: 500,
            y0_zero: false,
        }),
        1000,
        42,
        1.0,
    )
    .unwrap();
    let sgdm = ensemble(
        &cw,
        &ClassicalMethod::Sgdm(SgdmConfig {
            s0: 0.01,
            steps: 500,
            noise_std: 1.0,
        }),
        1000,
        42,
        1.0,
    )
    .unwrap();
    let gap = |s: &MetricsSeries| s.records.last().unwrap().exp_f - cw.f_min;
    let (g, q, n, m) = (gap(&grad), gap(&qhd), gap(&nag), gap(&sgdm));
    assert!(g <= 0.5 * q, "grad {g:.4e} vs qhd {q:.4e}");
    assert!(g <= 0.1 * n, "grad {g:.4e} vs nag {n:.4e}");
    assert!(g <= 0.1 * m, "grad {g:.4e} vs sgdm {m:.4e}");

    // Styblinski-Tang success probabilities
    let st = objectives::get("styblinski_tang").unwrap();
    let grad_p = HamiltonianParams {
        alpha: -0.05,
        beta: 0.0,
        gamma: 5.0,
        t0: 0.0,
        h: 0.01,
        steps: 1000,
    };
    let st_grad = evolve_quantum(&st, 128, &grad_p, 100, None);
    let st_qhd = evolve_quantum(&st, 128, &HamiltonianParams::qhd(0.0, 0.01, 1000), 100, None);
    let sg = st_grad.records.last().unwrap().success_prob;
    let sq = st_qhd.records.last().unwrap().success_prob;
    assert!(sg >= sq, "grad success {sg:.4} < qhd {sq:.4}");
    println!(
        "PASS criterion 8: cube-wave gaps grad/qhd = {:.3}, grad/nag = {:.3}, grad/sgdm = {:.3}; ST success grad {sg:.3} >= qhd {sq:.3}",
        g / q,
        g / n,
        g / m
    );
}

#[test]
fn criterion_09_classical_baselines() {
    // NAG one-step on f = x^2/2
    let quad = objectives::quadratic(1);
    let rec = nag_run(
        &quad,
        &[1.0],
        &NagConfig {
            s: 0.01,
            steps: 1,
            y0_zero: false,
        },
    )
    .unwrap();
    assert_eq!(rec.iterates[1][0], 0.99);
    // SGDM schedule endpoints for K = 100
    let eta = |k: f64| 0.5 + 0.4 * k / 100.0;
    assert!((eta(1.0) - 0.504).abs() < 1e-15);
    assert!((eta(100.0) - 0.9).abs() < 1e-15);
    // 1000-run ensembles bit-reproducible
    let st = objectives::get("styblinski_tang").unwrap();
    let method = ClassicalMethod::Sgdm(SgdmConfig {
        s0: 0.01,
        steps: 100,
        noise_std: 1.0,
    });
    let a = ensemble(&st, &method, 1000, 7, 1.0).unwrap();
    let b = ensemble(&st, &method, 1000, 7, 1.0).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.exp_f.to_bits(), rb.exp_f.to_bits());
        assert_eq!(ra.exp_gradnorm_sq.to_bits(), rb.exp_gradnorm_sq.to_bits());
        assert_eq!(ra.success_prob.to_bits(), rb.success_prob.to_bits());
    }
    println!("PASS criterion 9: NAG x1 = 0.99 exact; SGDM eta_1 = 0.504, eta_K = 0.9; 1000-run ensemble bit-reproducible");
}

#[test]
fn criterion_10_flow_and_highres_residual() {
    // RK4 order: error ratio ~ 16 under dt halving on |x|^2/2
    let quad = objectives::quadratic(2);
    let (alpha, beta, gamma) = (0.05, 0.01, 0.2);
    let refine = ham_flow_rk4(
        &quad,
        alpha,
        beta,
        gamma,
        FlowForm::Legendre,
        &[1.0, -0.5],
        &[0.0, 0.0],
        1.0,
        1e-4,
        20000,
    )
    .unwrap();
    let x_ref = &refine.last().unwrap().x;
    let err = |dt: f64, n: usize| {
        let run = ham_flow_rk4(
            &quad,
            alpha,
            beta,
            gamma,
            FlowForm::Legendre,
            &[1.0, -0.5],
            &[0.0, 0.0],
            1.0,
            dt,
            n,
        )
        .unwrap();
        run.last()
            .unwrap()
            .x
            .iter()
            .zip(x_ref)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let ratio = err(0.02, 100) / err(0.01, 200);
    assert!((13.0..=20.0).contains(&ratio), "RK4 ratio {ratio:.2}");

    // matched parameters: residual of the high-resolution ODE decays with dt
    let quad1 = objectives::quadratic(1);
    let s: f64 = 0.01;
    let sqrt_s = s.sqrt();
    let a = 0.05;
    let matched = |dt: f64, n: usize, beta: f64, coeff: ResidualCoefficient| {
        let traj = ham_flow_rk4(
            &quad1,
            a,
            beta,
            3.0 * a + 1.5 * sqrt_s,
            FlowForm::Legendre,
            &[1.0],
            &[0.0],
            1.0,
            dt,
            n,
        )
        .unwrap();
        highres_residual(&quad1, &traj, s, coeff).unwrap()
    };
    let m1 = matched(0.02, 150, a * sqrt_s, ResidualCoefficient::Consistent);
    let m2 = matched(0.01, 300, a * sqrt_s, ResidualCoefficient::Consistent);
    let m3 = matched(0.005, 600, a * sqrt_s, ResidualCoefficient::Consistent);
    assert!(
        m1 / m2 > 3.0 && m2 / m3 > 3.0,
        "matched residuals do not converge: {m1:.3e} {m2:.3e} {m3:.3e}"
    );
    // negative controls: printed forcing coefficient, and mismatched beta
    let bad_coeff = matched(0.005, 600, a * sqrt_s, ResidualCoefficient::Printed);
    let bad_coeff_half = matched(0.0025, 1200, a * sqrt_s, ResidualCoefficient::Printed);
    assert!(
        bad_coeff / bad_coeff_half < 2.0 && bad_coeff > 20.0 * m3,
        "printed-coefficient control unexpectedly converges: {bad_coeff:.3e} -> {bad_coeff_half:.3e} (matched {m3:.3e})"
    );
    let bad_beta = matched(0.005, 600, 5.0 * a * sqrt_s, ResidualCoefficient::Consistent);
    let bad_beta_half = matched(0.0025, 1200, 5.0 * a * sqrt_s, ResidualCoefficient::Consistent);
    assert!(
        bad_beta / bad_beta_half < 2.0 && bad_beta > 20.0 * m3,
        "mismatched-beta control unexpectedly converges: {bad_beta:.3e} -> {bad_beta_half:.3e}"
    );
    println!(
        "PASS criterion 10: RK4 ratio {ratio:.2} ~ 16; matched residual {m1:.2e} -> {m2:.2e} -> {m3:.2e}; controls stall at {bad_coeff:.2e} / {bad_beta:.2e}"
    );
}

#[test]
fn criterion_11_quadrature_sanity() {
    // uniform-state Rastrigin expectation = 26
    let ras = objectives::get("rastrigin").unwrap();
    let grid = Arc::new(make_grid(ras.domain.clone(), 256).unwrap());
    let wf = uniform_state(Arc::clone(&grid));
    let rec = analysis::observables(&wf, &ras, 1.0).unwrap();
    assert!(
        (rec.exp_f - 26.0).abs() <= 1e-3,
        "rastrigin E[f] = {:.6}",
        rec.exp_f
    );

    // uniform-state success probabilities vs a 1024^2 indicator oracle
    let mut worst: f64 = 0.0;
    for name in objectives::BUILTIN_NAMES {
        let obj = objectives::get(name).unwrap();
        let g = Arc::new(make_grid(obj.domain.clone(), 256).unwrap());
        let wf = uniform_state(Arc::clone(&g));
        let got = analysis::observables(&wf, &obj, 1.0).unwrap().success_prob;
        let fine = Arc::new(make_grid(obj.domain.clone(), 1024).unwrap());
        let f_vals = fine.evaluate(|x| obj.f(x));
        let oracle = f_vals
            .iter()
            .filter(|&&f| f - obj.f_min <= 1.0)
            .count() as f64
            / f_vals.len() as f64;
        let err = (got - oracle).abs();
        assert!(err <= 1e-3, "{name}: success {got:.6} vs oracle {oracle:.6}");
        worst = worst.max(err);
    }
    println!(
        "PASS criterion 11: uniform rastrigin E[f] = {:.6} (= 26 +- 1e-3); success prob vs 1024^2 oracle worst |err| = {worst:.2e} <= 1e-3",
        rec.exp_f
    );
}
