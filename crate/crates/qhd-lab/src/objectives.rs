//! Registry of benchmark objective functions with value, gradient, Hessian,
//! search box, and known-optimum metadata.

use crate::spectral_mesh::{BoxDomain, Grid, ScalarField};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Refined Styblinski-Tang per-axis minimizer (root of 4u^3 - 32u + 5 = 0
/// near -2.9, computed once by damped Newton at extended precision).
pub const STYBLINSKI_TANG_XSTAR: f64 = -2.903534027771177;
/// Refined cube-wave per-axis minimizer magnitude (root of
/// -pi sin(2 pi y) + y^3 = 0 near 0.5; the printed 0.5 is rounded).
pub const CUBE_WAVE_XSTAR: f64 = 0.4938950679659781;
/// Refined Michalewicz minimizer; the second coordinate is exactly pi/2.
pub const MICHALEWICZ_XSTAR: [f64; 2] = [2.2029055201726093, std::f64::consts::FRAC_PI_2];

/// Pure evaluator backing an [`ObjectiveSpec`].
pub trait Kernel: Send + Sync {
    fn f(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64], out: &mut [f64]);
    /// Row-major d x d Hessian.
    fn hess(&self, x: &[f64], out: &mut [f64]);
}

/// A named objective with analytic evaluators and optimum metadata.
#[derive(Clone)]
pub struct ObjectiveSpec {
    pub name: String,
    pub dim: usize,
    pub domain: BoxDomain,
    pub minimizers: Vec<Vec<f64>>,
    pub f_min: f64,
    pub convex: bool,
    kernel: Arc<dyn Kernel>,
}

/// Names accepted by [`get`].
pub const BUILTIN_NAMES: [&str; 5] = [
    "convex_quartic",
    "styblinski_tang",
    "michalewicz",
    "cube_wave",
    "rastrigin",
];

/// Look up a built-in objective by name.
pub fn get(name: &str) -> Result<ObjectiveSpec> {
    let spec = match name {
        "convex_quartic" => ObjectiveSpec::build(
            name,
            BoxDomain::cube(-5.0, 5.0, 2)?,
            vec![vec![0.0, 0.0]],
            true,
            Arc::new(ConvexQuartic),
        ),
        "styblinski_tang" => {
            let m = STYBLINSKI_TANG_XSTAR;
            ObjectiveSpec::build(
                name,
                BoxDomain::cube(-5.0, 5.0, 2)?,
                vec![vec![m, m]],
                false,
                Arc::new(StyblinskiTang),
            )
        }
        "michalewicz" => ObjectiveSpec::build(
            name,
            BoxDomain::cube(0.0, PI, 2)?,
            vec![MICHALEWICZ_XSTAR.to_vec()],
            false,
            Arc::new(Michalewicz),
        ),
        "cube_wave" => {
            let m = CUBE_WAVE_XSTAR;
            ObjectiveSpec::build(
                name,
                BoxDomain::cube(-2.0, 2.0, 2)?,
                vec![
                    vec![m, m],
                    vec![m, -m],
                    vec![-m, m],
                    vec![-m, -m],
                ],
                false,
                Arc::new(CubeWave),
            )
        }
        "rastrigin" => ObjectiveSpec::build(
            name,
            BoxDomain::cube(-3.0, 3.0, 2)?,
            vec![vec![0.0, 0.0]],
            false,
            Arc::new(Rastrigin),
        ),
        other => return Err(Error::UnknownObjective(other.to_string())),
    };
    Ok(spec)
}

/// `f(x) = 0.5 ||x||^2` on `[-5,5]^d`; not part of the registry, used by
/// oracle tests and the classical-flow checks.
pub fn quadratic(dim: usize) -> ObjectiveSpec {
    ObjectiveSpec::build(
        "quadratic",
        BoxDomain::cube(-5.0, 5.0, dim).unwrap(),
        vec![vec![0.0; dim]],
        true,
        Arc::new(Quadratic),
    )
}

/// The convex quartic restricted to its x-axis: `f(x) = 3 x^4 / 256` on
/// `[-5, 5]` (1D dense-oracle instances).
pub fn convex_quartic_1d() -> ObjectiveSpec {
    ObjectiveSpec::build(
        "convex_quartic_1d",
        BoxDomain::cube(-5.0, 5.0, 1).unwrap(),
        vec![vec![0.0]],
        true,
        Arc::new(ConvexQuartic1d),
    )
}

/// `f(x) = sin(x)` on `[0, 2 pi]` (periodic 1D instance for operator
/// identity and splitting oracles).
pub fn sine_1d() -> ObjectiveSpec {
    ObjectiveSpec::build(
        "sine_1d",
        BoxDomain::cube(0.0, 2.0 * PI, 1).unwrap(),
        vec![vec![1.5 * PI]],
        false,
        Arc::new(Sine1d),
    )
}

impl ObjectiveSpec {
    fn build(
        name: &str,
        domain: BoxDomain,
        minimizers: Vec<Vec<f64>>,
        convex: bool,
        kernel: Arc<dyn Kernel>,
    ) -> Self {
        let f_min = kernel.f(&minimizers[0]);
        Self {
            name: name.to_string(),
            dim: domain.dim(),
            domain,
            minimizers,
            f_min,
            convex,
            kernel,
        }
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.kernel.f(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.kernel.grad(x, &mut g);
        g
    }

    pub fn hess(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim * self.dim];
        self.kernel.hess(x, &mut h);
        h
    }

    pub fn gradnorm_sq(&self, x: &[f64]) -> f64 {
        self.grad(x).iter().map(|g| g * g).sum()
    }

    /// Translated objective `f(x + x*) - f(x*)` with the chosen minimizer
    /// moved to the origin and the box shifted accordingly.
    pub fn center(&self, which_min: usize) -> Result<ObjectiveSpec> {
        let shift = self
            .minimizers
            .get(which_min)
            .ok_or(Error::MinimizerIndex {
                index: which_min,
                count: self.minimizers.len(),
            })?
            .clone();
        let offset = self.kernel.f(&shift);
        let minimizers = self
            .minimizers
            .iter()
            .map(|m| m.iter().zip(&shift).map(|(a, s)| a - s).collect())
            .collect();
        Ok(ObjectiveSpec {
            name: format!("{}_centered", self.name),
            dim: self.dim,
            domain: self.domain.shifted(&shift),
            minimizers,
            f_min: 0.0,
            convex: self.convex,
            kernel: Arc::new(Shifted {
                inner: Arc::clone(&self.kernel),
                shift,
                offset,
            }),
        })
    }

    /// Same objective restricted to a sub-box of the search region (the
    /// evaluators are global, only the sampling/meshing region changes).
    pub fn with_box(&self, domain: BoxDomain) -> Result<ObjectiveSpec> {
        if !self.domain.contains_box(&domain) {
            return Err(Error::BoxMismatch);
        }
        let minimizers: Vec<Vec<f64>> = self
            .minimizers
            .iter()
            .filter(|m| domain.contains(m))
            .cloned()
            .collect();
        Ok(ObjectiveSpec {
            domain,
            minimizers,
            ..self.clone()
        })
    }

    /// Node-wise evaluation of f, the gradient components, and `||grad f||^2`.
    pub fn eval_fields(&self, grid: &Arc<Grid>) -> Result<ObjectiveFields> {
        if grid.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: grid.dim(),
            });
        }
        if !self.domain.contains_box(grid.domain()) {
            return Err(Error::BoxMismatch);
        }
        let f = ScalarField::from_fn(Arc::clone(grid), |x| self.kernel.f(x));
        let mut grad_fields = Vec::with_capacity(self.dim);
        for axis in 0..self.dim {
            grad_fields.push(ScalarField::from_fn(Arc::clone(grid), |x| {
                let mut g = vec![0.0; self.dim];
                self.kernel.grad(x, &mut g);
                g[axis]
            }));
        }
        let gradnorm_sq = ScalarField::from_fn(Arc::clone(grid), |x| {
            let mut g = vec![0.0; self.dim];
            self.kernel.grad(x, &mut g);
            g.iter().map(|v| v * v).sum()
        });
        Ok(ObjectiveFields {
            f,
            grad: grad_fields,
            gradnorm_sq,
        })
    }

    /// Compare analytic gradient/Hessian against central finite differences
    /// at seeded uniform interior points (step `1e-5 * box width` per axis).
    pub fn check_gradient(&self, n_points: usize, seed: u64) -> GradientReport {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut max_grad = 0.0f64;
        let mut max_hess = 0.0f64;
        for _ in 0..n_points.max(1) {
            let x: Vec<f64> = (0..self.dim)
                .map(|j| rng.random_range(self.domain.lo()[j]..self.domain.hi()[j]))
                .collect();
            for j in 0..self.dim {
                let h = 1e-5 * self.domain.width(j);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (self.f(&xp) - self.f(&xm)) / (2.0 * h);
                let dev = (self.grad(&x)[j] - fd).abs() / fd.abs().max(1.0);
                max_grad = max_grad.max(dev);
                let gp = self.grad(&xp);
                let gm = self.grad(&xm);
                let hrow = self.hess(&x);
                for i in 0..self.dim {
                    let fdh = (gp[i] - gm[i]) / (2.0 * h);
                    let devh = (hrow[i * self.dim + j] - fdh).abs() / fdh.abs().max(1.0);
                    max_hess = max_hess.max(devh);
                }
            }
        }
        GradientReport {
            name: self.name.clone(),
            n_points,
            seed,
            max_grad_deviation: max_grad,
            max_hess_deviation: max_hess,
        }
    }
}

impl std::fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("f_min", &self.f_min)
            .field("convex", &self.convex)
            .finish()
    }
}

/// Grid evaluations of an objective used by the propagator and observables.
pub struct ObjectiveFields {
    pub f: ScalarField,
    pub grad: Vec<ScalarField>,
    pub gradnorm_sq: ScalarField,
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub name: String,
    pub n_points: usize,
    pub seed: u64,
    pub max_grad_deviation: f64,
    pub max_hess_deviation: f64,
}

struct Shifted {
    inner: Arc<dyn Kernel>,
    shift: Vec<f64>,
    offset: f64,
}

impl Kernel for Shifted {
    fn f(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.shift).map(|(a, s)| a + s).collect();
        self.inner.f(&y) - self.offset
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x.iter().zip(&self.shift).map(|(a, s)| a + s).collect();
        self.inner.grad(&y, out);
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x.iter().zip(&self.shift).map(|(a, s)| a + s).collect();
        self.inner.hess(&y, out);
    }
}

/// `f = (x+y)^4/256 + (x-y)^4/128`: convex with a singular Hessian at the
/// unique minimum (0,0).
struct ConvexQuartic;

impl Kernel for ConvexQuartic {
    fn f(&self, x: &[f64]) -> f64 {
        let u = x[0] + x[1];
        let v = x[0] - x[1];
        u.powi(4) / 256.0 + v.powi(4) / 128.0
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let u = x[0] + x[1];
        let v = x[0] - x[1];
        let du = u.powi(3) / 64.0;
        let dv = v.powi(3) / 32.0;
        out[0] = du + dv;
        out[1] = du - dv;
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let u = x[0] + x[1];
        let v = x[0] - x[1];
        let duu = 3.0 * u * u / 64.0;
        let dvv = 3.0 * v * v / 32.0;
        out[0] = duu + dvv;
        out[1] = duu - dvv;
        out[2] = duu - dvv;
        out[3] = duu + dvv;
    }
}

/// `f = 0.2 * sum(u^4 - 16 u^2 + 5 u)` (the u^2 power in the second term is
/// a corrected typo; only it reproduces the stated minimum near -31.33).
struct StyblinskiTang;

impl StyblinskiTang {
    fn g(u: f64) -> f64 {
        u.powi(4) - 16.0 * u * u + 5.0 * u
    }
    fn gp(u: f64) -> f64 {
        4.0 * u.powi(3) - 32.0 * u + 5.0
    }
    fn gpp(u: f64) -> f64 {
        12.0 * u * u - 32.0
    }
}

impl Kernel for StyblinskiTang {
    fn f(&self, x: &[f64]) -> f64 {
        0.2 * x.iter().map(|&u| Self::g(u)).sum::<f64>()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, &u) in out.iter_mut().zip(x) {
            *o = 0.2 * Self::gp(u);
        }
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (j, &u) in x.iter().enumerate() {
            out[j * d + j] = 0.2 * Self::gpp(u);
        }
    }
}

/// `f = -sum_j sin(x_j) sin(j x_j^2 / pi)^20` on `[0, pi]^2`.
struct Michalewicz;

impl Michalewicz {
    // per-axis term, first and second derivatives
    fn term(j: usize, u: f64) -> (f64, f64, f64) {
        let a = (j + 1) as f64 / PI;
        let (s, c) = u.sin_cos();
        let w = (a * u * u).sin();
        let cw = (a * u * u).cos();
        let b = 2.0 * a * u;
        let w18 = w.powi(18);
        let w19 = w18 * w;
        let w20 = w19 * w;
        let wp = cw * b;
        let wpp = -w * b * b + 2.0 * a * cw;
        let t = -s * w20;
        let tp = -(c * w20 + s * 20.0 * w19 * wp);
        let tpp = -(-s * w20
            + 40.0 * c * w19 * wp
            + s * (380.0 * w18 * wp * wp + 20.0 * w19 * wpp));
        (t, tp, tpp)
    }
}

impl Kernel for Michalewicz {
    fn f(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &u)| Self::term(j, u).0)
            .sum()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (j, (&u, o)) in x.iter().zip(out.iter_mut()).enumerate() {
            *o = Self::term(j, u).1;
        }
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (j, &u) in x.iter().enumerate() {
            out[j * d + j] = Self::term(j, u).2;
        }
    }
}

/// `f = sum(cos^2(pi u) + 0.25 u^4)` on `[-2, 2]^2`.
struct CubeWave;

impl CubeWave {
    fn q(u: f64) -> f64 {
        let c = (PI * u).cos();
        c * c + 0.25 * u.powi(4)
    }
    fn qp(u: f64) -> f64 {
        -PI * (2.0 * PI * u).sin() + u.powi(3)
    }
    fn qpp(u: f64) -> f64 {
        -2.0 * PI * PI * (2.0 * PI * u).cos() + 3.0 * u * u
    }
}

impl Kernel for CubeWave {
    fn f(&self, x: &[f64]) -> f64 {
        x.iter().map(|&u| Self::q(u)).sum()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, &u) in out.iter_mut().zip(x) {
            *o = Self::qp(u);
        }
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (j, &u) in x.iter().enumerate() {
            out[j * d + j] = Self::qpp(u);
        }
    }
}

/// `f = sum(u^2 - 10 cos(2 pi u) + 10)` on `[-3, 3]^2`.
struct Rastrigin;

impl Kernel for Rastrigin {
    fn f(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&u| u * u - 10.0 * (2.0 * PI * u).cos() + 10.0)
            .sum()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, &u) in out.iter_mut().zip(x) {
            *o = 2.0 * u + 20.0 * PI * (2.0 * PI * u).sin();
        }
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for (j, &u) in x.iter().enumerate() {
            out[j * d + j] = 2.0 + 40.0 * PI * PI * (2.0 * PI * u).cos();
        }
    }
}

struct Quadratic;

impl Kernel for Quadratic {
    fn f(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for j in 0..d {
            out[j * d + j] = 1.0;
        }
    }
}

struct ConvexQuartic1d;

impl Kernel for ConvexQuartic1d {
    fn f(&self, x: &[f64]) -> f64 {
        3.0 * x[0].powi(4) / 256.0
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 12.0 * x[0].powi(3) / 256.0;
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 36.0 * x[0] * x[0] / 256.0;
    }
}

struct Sine1d;

impl Kernel for Sine1d {
    fn f(&self, x: &[f64]) -> f64 {
        x[0].sin()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0].cos();
    }
    fn hess(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0].sin();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_mesh::{make_grid, uniform_state};
    use approx::assert_relative_eq;

    #[test]
    fn registry_names_and_unknown() {
        for name in BUILTIN_NAMES {
            assert!(get(name).is_ok());
        }
        assert!(get("no_such_objective").is_err());
    }

    #[test]
    fn minimizers_are_valid() {
        for name in BUILTIN_NAMES {
            let obj = get(name).unwrap();
            for m in &obj.minimizers {
                assert!(obj.domain.contains(m), "{name} minimizer outside box");
                assert!(
                    obj.f(m) - obj.f_min <= 1e-9 * (1.0 + obj.f_min.abs()),
                    "{name} minimizer not minimal"
                );
                let gn = obj.gradnorm_sq(m).sqrt();
                assert!(gn < 1e-8, "{name} gradient at minimizer = {gn}");
            }
        }
    }

    #[test]
    fn known_values() {
        let st = get("styblinski_tang").unwrap();
        assert_relative_eq!(st.f_min, -31.33293256301713, epsilon = 1e-11);
        assert_relative_eq!(st.minimizers[0][0], -2.903534027771177);

        let ra = get("rastrigin").unwrap();
        assert_eq!(ra.f(&[0.0, 0.0]), 0.0);

        let cw = get("cube_wave").unwrap();
        assert_relative_eq!(cw.f_min, 0.0304870867635678, epsilon = 1e-12);
        assert_eq!(cw.minimizers.len(), 4);

        let mi = get("michalewicz").unwrap();
        assert_relative_eq!(mi.f_min, -1.8013034100985525, epsilon = 1e-12);
        assert_relative_eq!(mi.f(&[2.20, 1.57]), -1.80, epsilon = 0.01);

        let cq = get("convex_quartic").unwrap();
        assert_eq!(cq.f(&[0.0, 0.0]), 0.0);
        // f(2,2) = 256/256 = 1, grad = (1,1), G = 2
        assert_relative_eq!(cq.f(&[2.0, 2.0]), 1.0);
        let g = cq.grad(&[2.0, 2.0]);
        assert_relative_eq!(g[0], 1.0);
        assert_relative_eq!(g[1], 1.0);
        assert_relative_eq!(cq.gradnorm_sq(&[2.0, 2.0]), 2.0);
    }

    #[test]
    fn gradient_checks_pass() {
        for name in BUILTIN_NAMES {
            let obj = get(name).unwrap();
            let rep = obj.check_gradient(100, 12345);
            assert!(
                rep.max_grad_deviation <= 1e-6,
                "{name}: grad dev {}",
                rep.max_grad_deviation
            );
        }
        let rep = quadratic(2).check_gradient(100, 1);
        assert!(rep.max_grad_deviation <= 1e-10);
    }

    #[test]
    fn rastrigin_hessian_at_origin() {
        let ra = get("rastrigin").unwrap();
        let h = ra.hess(&[0.0, 0.0]);
        let expect = 2.0 + 40.0 * PI * PI;
        assert_relative_eq!(h[0], expect, epsilon = 1e-12);
        assert_relative_eq!(h[3], expect, epsilon = 1e-12);
        assert_eq!(h[1], 0.0);
        // against central differences of the gradient
        let step = 1e-5 * 6.0;
        let fd = (ra.grad(&[step, 0.0])[0] - ra.grad(&[-step, 0.0])[0]) / (2.0 * step);
        assert_relative_eq!(h[0], fd, epsilon = 1e-4);
    }

    #[test]
    fn swap_symmetry() {
        for name in ["styblinski_tang", "cube_wave", "rastrigin", "convex_quartic"] {
            let obj = get(name).unwrap();
            for &(x, y) in &[(0.3, -1.7), (2.4, 0.9), (-1.1, -0.2)] {
                let a = obj.f(&[x, y]);
                let b = obj.f(&[y, x]);
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
                    "{name} not swap-symmetric"
                );
            }
        }
        // cube_wave is even in each coordinate independently
        let cw = get("cube_wave").unwrap();
        assert_relative_eq!(cw.f(&[0.7, -1.3]), cw.f(&[-0.7, -1.3]), epsilon = 1e-14);
        assert_relative_eq!(cw.f(&[0.7, -1.3]), cw.f(&[0.7, 1.3]), epsilon = 1e-14);
    }

    #[test]
    fn centering() {
        let st = get("styblinski_tang").unwrap();
        let c = st.center(0).unwrap();
        assert!(c.f(&[0.0, 0.0]).abs() <= 1e-9);
        assert_eq!(c.f_min, 0.0);
        let g = c.grad(&[0.0, 0.0]);
        assert!(g[0].abs() < 1e-9 && g[1].abs() < 1e-9);
        // rastrigin is already centered: identical values
        let ra = get("rastrigin").unwrap();
        let rc = ra.center(0).unwrap();
        for &(x, y) in &[(0.4, -0.9), (1.3, 2.2)] {
            assert_relative_eq!(ra.f(&[x, y]), rc.f(&[x, y]), epsilon = 1e-14);
        }
        assert!(st.center(5).is_err());
    }

    #[test]
    fn with_box_restriction() {
        let cq = get("convex_quartic").unwrap();
        let sub = cq
            .with_box(BoxDomain::cube(-2.0, 2.0, 2).unwrap())
            .unwrap();
        assert_eq!(sub.minimizers.len(), 1);
        assert_eq!(sub.f_min, 0.0);
        assert_relative_eq!(sub.f(&[2.0, 2.0]), 1.0);
        assert!(cq.with_box(BoxDomain::cube(-6.0, 6.0, 2).unwrap()).is_err());
    }

    #[test]
    fn eval_fields_consistency() {
        let cq = get("convex_quartic").unwrap();
        let grid = Arc::new(make_grid(cq.domain.clone(), 32).unwrap());
        let fields = cq.eval_fields(&grid).unwrap();
        for idx in [0, 17, 500, 1023] {
            let mut x = [0.0; 2];
            grid.node_position(idx, &mut x);
            assert_relative_eq!(fields.f.values()[idx], cq.f(&x), epsilon = 1e-14);
            let g = cq.grad(&x);
            assert_relative_eq!(fields.grad[0].values()[idx], g[0], epsilon = 1e-14);
            assert_relative_eq!(fields.grad[1].values()[idx], g[1], epsilon = 1e-14);
            assert_relative_eq!(
                fields.gradnorm_sq.values()[idx],
                g[0] * g[0] + g[1] * g[1],
                epsilon = 1e-13
            );
        }
        // grid on a sub-box is accepted
        let sub = Arc::new(make_grid(BoxDomain::cube(-2.0, 2.0, 2).unwrap(), 16).unwrap());
        assert!(cq.eval_fields(&sub).is_ok());
        // wrong dimension rejected
        let g1 = Arc::new(make_grid(BoxDomain::cube(-5.0, 5.0, 1).unwrap(), 16).unwrap());
        assert!(cq.eval_fields(&g1).is_err());
    }

    #[test]
    fn styblinski_grid_min_near_true_min() {
        let st = get("styblinski_tang").unwrap();
        let grid = Arc::new(make_grid(st.domain.clone(), 128).unwrap());
        let fields = st.eval_fields(&grid).unwrap();
        let min = fields.f.values().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - (-31.33)).abs() < 0.05, "grid min {min}");
    }

    #[test]
    fn uniform_rastrigin_expectation() {
        let ra = get("rastrigin").unwrap();
        let grid = Arc::new(make_grid(ra.domain.clone(), 128).unwrap());
        let fields = ra.eval_fields(&grid).unwrap();
        let wf = uniform_state(Arc::clone(&grid));
        let e = wf.expectation(&fields.f).unwrap();
        assert!((e - 26.0).abs() <= 1e-3, "E[f] = {e}");
    }
}
