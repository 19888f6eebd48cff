//! Randomized property tests for structural invariants.

use num_complex::Complex64;
use proptest::prelude::*;
use qhd_lab::classical_opt::{ensemble, ClassicalMethod, SgdmConfig};
use qhd_lab::evolution::{evolve, EvolveOptions, HamiltonianParams, Splitting};
use qhd_lab::objectives;
use qhd_lab::spectral_mesh::{gaussian_state, make_grid, uniform_state, BoxDomain, WaveFunction};
use std::sync::Arc;

fn grid_1d(n: usize) -> Arc<qhd_lab::spectral_mesh::Grid> {
    Arc::new(make_grid(BoxDomain::cube(0.0, 2.0 * std::f64::consts::PI, 1).unwrap(), n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every splitting step is unitary for any admissible parameters.
    #[test]
    fn step_preserves_norm(
        alpha in -0.2f64..0.2,
        beta in 0.0f64..0.2,
        gamma in 0.0f64..5.0,
        h in 1e-4f64..0.05,
        splitting in prop_oneof![Just(Splitting::ThreeFactor), Just(Splitting::Gauged)],
    ) {
        let obj = objectives::sine_1d();
        let grid = grid_1d(64);
        let wf0 = gaussian_state(Arc::clone(&grid), &[std::f64::consts::PI], 0.8).unwrap();
        let params = HamiltonianParams { alpha, beta, gamma, t0: 1.0, h, steps: 5 };
        let opts = EvolveOptions { observe_every: 1, delta: 1.0, splitting, lyapunov: None };
        let (wf, series) = evolve(&wf0, &params, &obj, &opts).unwrap();
        prop_assert!((wf.norm_sq() - 1.0).abs() <= 1e-9);
        prop_assert!(series.max_norm_drift <= 1e-9);
    }

    /// Parseval: the squared norm equals the mean squared spectrum.
    #[test]
    fn parseval_holds(phase in 0.0f64..6.28, sigma in 0.9f64..2.0) {
        let grid = grid_1d(64);
        let mut wf = gaussian_state(Arc::clone(&grid), &[std::f64::consts::PI], sigma).unwrap();
        // arbitrary global phase keeps the identity intact
        let amp: Vec<Complex64> = wf
            .amplitudes()
            .iter()
            .map(|a| a * Complex64::from_polar(1.0, phase))
            .collect();
        wf = WaveFunction::new(Arc::clone(&grid), amp).unwrap();
        let spec_sum: f64 = wf.spectrum().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((wf.norm_sq() - spec_sum / 64.0).abs() <= 1e-12);
    }

    /// The spectral derivative is linear.
    #[test]
    fn derivative_is_linear(a_re in -2.0f64..2.0, a_im in -2.0f64..2.0, sig in 0.9f64..1.6) {
        let grid = grid_1d(32);
        let f = gaussian_state(Arc::clone(&grid), &[2.5], sig).unwrap();
        let g = gaussian_state(Arc::clone(&grid), &[4.0], 1.0).unwrap();
        let a = Complex64::new(a_re, a_im);
        let combo: Vec<Complex64> = f
            .amplitudes()
            .iter()
            .zip(g.amplitudes())
            .map(|(x, y)| a * x + y)
            .collect();
        let combined = WaveFunction::new(Arc::clone(&grid), combo).unwrap();
        let lhs = combined.partial_derivative(0).unwrap();
        let df = f.partial_derivative(0).unwrap();
        let dg = g.partial_derivative(0).unwrap();
        for ((l, x), y) in lhs.amplitudes().iter().zip(df.amplitudes()).zip(dg.amplitudes()) {
            prop_assert!((l - (a * x + y)).norm() <= 1e-10);
        }
    }

    /// Built-in 2D objectives are symmetric under coordinate swap.
    #[test]
    fn objective_swap_symmetry(
        x in -2.0f64..2.0,
        y in -2.0f64..2.0,
        name in prop_oneof![
            Just("convex_quartic"),
            Just("styblinski_tang"),
            Just("cube_wave"),
            Just("rastrigin"),
        ],
    ) {
        let obj = objectives::get(name).unwrap();
        prop_assert!((obj.f(&[x, y]) - obj.f(&[y, x])).abs() <= 1e-12 * (1.0 + obj.f(&[x, y]).abs()));
        let g = obj.grad(&[x, y]);
        let gs = obj.grad(&[y, x]);
        prop_assert!((g[0] - gs[1]).abs() <= 1e-12 * (1.0 + g[0].abs()));
        prop_assert!((g[1] - gs[0]).abs() <= 1e-12 * (1.0 + g[1].abs()));
    }

    /// Success probability is within [0, 1] and monotone in delta.
    #[test]
    fn success_prob_monotone_in_delta(delta1 in 0.1f64..5.0, delta2 in 0.1f64..5.0) {
        let (lo, hi) = if delta1 <= delta2 { (delta1, delta2) } else { (delta2, delta1) };
        let obj = objectives::get("rastrigin").unwrap();
        let grid = Arc::new(make_grid(obj.domain.clone(), 32).unwrap());
        let wf = uniform_state(grid);
        let a = qhd_lab::analysis::observables(&wf, &obj, lo).unwrap().success_prob;
        let b = qhd_lab::analysis::observables(&wf, &obj, hi).unwrap().success_prob;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(a <= b + 1e-15);
    }

    /// Classical ensembles are deterministic in the master seed.
    #[test]
    fn ensemble_determinism(seed in any::<u64>()) {
        let obj = objectives::get("cube_wave").unwrap();
        let method = ClassicalMethod::Sgdm(SgdmConfig { s0: 0.01, steps: 12, noise_std: 1.0 });
        let a = ensemble(&obj, &method, 16, seed, 1.0).unwrap();
        let b = ensemble(&obj, &method, 16, seed, 1.0).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            prop_assert_eq!(ra.exp_f.to_bits(), rb.exp_f.to_bits());
            prop_assert_eq!(ra.success_prob.to_bits(), rb.success_prob.to_bits());
        }
    }
}
