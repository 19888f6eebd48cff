//! Periodic d-dimensional mesh, wave-function storage, spectral
//! derivative/phase machinery, and grid-based expectation values.
//!
//! Conventions:
//! - probability-per-node amplitudes: a normalized state satisfies
//!   `sum |amp_i|^2 = 1`; expectations are plain weighted sums.
//! - wavenumbers are `2*pi/(hi-lo) * m` with `m` in the standard DFT order
//!   `{0, 1, ..., N/2-1, -N/2, ..., -1}`; the unpaired Nyquist mode is
//!   assigned the negative frequency and its contribution to odd-order
//!   derivatives is zeroed so derivatives of real data stay
//!   Hermitian-symmetric.

use crate::par;
use crate::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len().max(1),
                got: hi.len(),
            });
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(h > l) || !l.is_finite() || !h.is_finite() {
                return Err(Error::DegenerateBox { axis, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&xi, (&l, &h))| xi >= l && xi <= h)
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        other.dim() == self.dim()
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(other.lo.iter().zip(&other.hi))
                .all(|((&l, &h), (&ol, &oh))| ol >= l && oh <= h)
    }

    /// Shift the box by `-shift` (used when centering an objective).
    pub fn shifted(&self, shift: &[f64]) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().zip(shift).map(|(l, s)| l - s).collect(),
            hi: self.hi.iter().zip(shift).map(|(h, s)| h - s).collect(),
        }
    }
}

/// Uniform periodic mesh with `N` points per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: BoxDomain,
    n_per_dim: usize,
    cell_volume: f64,
    coords: Vec<Vec<f64>>,
    freq: Vec<Vec<f64>>,
    deriv_freq: Vec<Vec<f64>>,
}

/// Build a grid. `n_per_dim` must be an even integer >= 8.
pub fn make_grid(domain: BoxDomain, n_per_dim: usize) -> Result<Grid> {
    if n_per_dim < 8 || n_per_dim % 2 != 0 {
        return Err(Error::BadGridSize(n_per_dim));
    }
    let d = domain.dim();
    let n = n_per_dim;
    let mut coords = Vec::with_capacity(d);
    let mut freq = Vec::with_capacity(d);
    let mut deriv_freq = Vec::with_capacity(d);
    let mut cell_volume = 1.0;
    for axis in 0..d {
        let w = domain.width(axis);
        cell_volume *= w / n as f64;
        coords.push(
            (0..n)
                .map(|i| domain.lo[axis] + w * i as f64 / n as f64)
                .collect(),
        );
        let base = 2.0 * std::f64::consts::PI / w;
        let k: Vec<f64> = (0..n)
            .map(|i| {
                let m = if i < n / 2 {
                    i as i64
                } else {
                    i as i64 - n as i64
                };
                base * m as f64
            })
            .collect();
        let mut kd = k.clone();
        kd[n / 2] = 0.0;
        freq.push(k);
        deriv_freq.push(kd);
    }
    Ok(Grid {
        domain,
        n_per_dim,
        cell_volume,
        coords,
        freq,
        deriv_freq,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    /// Total number of nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.n_per_dim.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// Node coordinates along one axis.
    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    /// Wavenumbers along one axis (Nyquist assigned to -N/2).
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.freq[axis]
    }

    /// Wavenumbers with the Nyquist mode zeroed, for odd-order derivatives.
    pub fn deriv_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.deriv_freq[axis]
    }

    /// Decode a flat row-major node index (axis 0 slowest) into per-axis
    /// indices.
    #[inline]
    pub fn decode(&self, flat: usize, idx: &mut [usize]) {
        let n = self.n_per_dim;
        let mut rem = flat;
        for j in (0..self.dim()).rev() {
            idx[j] = rem % n;
            rem /= n;
        }
    }

    /// Position of a node given its flat index.
    #[inline]
    pub fn node_position(&self, flat: usize, out: &mut [f64]) {
        let n = self.n_per_dim;
        let mut rem = flat;
        for j in (0..self.dim()).rev() {
            out[j] = self.coords[j][rem % n];
            rem /= n;
        }
    }

    /// Evaluate a function of position at every node.
    pub fn evaluate(&self, func: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        let d = self.dim();
        par::map_collect(self.len(), |flat| {
            let mut x = [0.0; 4];
            self.node_position(flat, &mut x[..d]);
            func(&x[..d])
        })
    }

    /// Evaluate a function of the wavevector at every spectral node.
    pub fn evaluate_spectral(&self, func: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        let d = self.dim();
        let n = self.n_per_dim;
        par::map_collect(self.len(), |flat| {
            let mut k = [0.0; 4];
            let mut rem = flat;
            for j in (0..d).rev() {
                k[j] = self.freq[j][rem % n];
                rem /= n;
            }
            func(&k[..d])
        })
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real scalar field sampled on the grid nodes (objective values, gradient
/// components, coordinates, ...).
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    val: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, val: Vec<f64>) -> Result<Self> {
        if val.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: val.len(),
            });
        }
        Ok(Self { grid, val })
    }

    pub fn from_fn(grid: Arc<Grid>, func: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let val = grid.evaluate(func);
        Self { grid, val }
    }

    /// Field of the coordinate `x_axis`.
    pub fn coordinate(grid: Arc<Grid>, axis: usize) -> Result<Self> {
        if axis >= grid.dim() {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: grid.dim(),
            });
        }
        Ok(Self::from_fn(grid, |x| x[axis]))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.val
    }
}

/// Complex amplitude field on the grid; `|amp_i|^2` is the probability mass
/// of node `i`.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: Arc<Grid>,
    amp: Vec<Complex64>,
}

/// Constant state with all amplitudes equal to `1/sqrt(N^d)`.
pub fn uniform_state(grid: Arc<Grid>) -> WaveFunction {
    let a = Complex64::new(1.0 / (grid.len() as f64).sqrt(), 0.0);
    let amp = vec![a; grid.len()];
    WaveFunction { grid, amp }
}

/// Normalized Gaussian `amp ~ exp(-|x - center|^2 / (4 sigma^2))`.
pub fn gaussian_state(grid: Arc<Grid>, center: &[f64], sigma: f64) -> Result<WaveFunction> {
    if center.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: center.len(),
        });
    }
    if !grid.domain().contains(center) {
        return Err(Error::OutsideBox(center.to_vec()));
    }
    for axis in 0..grid.dim() {
        let spacing = grid.domain().width(axis) / grid.n_per_dim() as f64;
        if sigma < 4.0 * spacing {
            return Err(Error::SigmaUndersampled {
                sigma,
                spacing,
                axis,
            });
        }
    }
    let center = center.to_vec();
    let amp: Vec<Complex64> = grid
        .evaluate(|x| {
            let r2: f64 = x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum();
            (-r2 / (4.0 * sigma * sigma)).exp()
        })
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    let mut wf = WaveFunction { grid, amp };
    wf.normalize();
    Ok(wf)
}

impl WaveFunction {
    pub fn new(grid: Arc<Grid>, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: amp.len(),
            });
        }
        Ok(Self { grid, amp })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sq().sqrt();
        for a in &mut self.amp {
            *a *= s;
        }
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let drift = (self.norm_sq() - 1.0).abs();
        if drift <= tol {
            Ok(())
        } else {
            Err(Error::Unnormalized(drift))
        }
    }

    /// `amp_i <- amp_i * exp(-i * theta * field_i)`.
    pub fn apply_diagonal_phase(&mut self, field: &ScalarField, theta: f64) -> Result<()> {
        self.grid.check_same(&field.grid)?;
        apply_phase_raw(&mut self.amp, &field.val, theta);
        Ok(())
    }

    /// Forward DFT, multiply the spectrum by `exp(-i * theta * mult(k))`,
    /// inverse DFT.
    pub fn apply_fourier_phase(
        &mut self,
        multiplier: impl Fn(&[f64]) -> f64 + Sync,
        theta: f64,
    ) -> Result<()> {
        let field = self.grid.evaluate_spectral(multiplier);
        for v in &field {
            if !v.is_finite() {
                return Err(Error::NonFinite("fourier multiplier".into()));
            }
        }
        self.apply_spectral_phase_field(&field, theta);
        Ok(())
    }

    /// Same as [`apply_fourier_phase`](Self::apply_fourier_phase) but with a
    /// precomputed multiplier field over spectral nodes (hot path).
    pub fn apply_spectral_phase_field(&mut self, mult: &[f64], theta: f64) {
        let shape = (self.grid.dim(), self.grid.n_per_dim());
        fft_all(&mut self.amp, shape.0, shape.1, true);
        apply_phase_raw(&mut self.amp, mult, theta);
        fft_all(&mut self.amp, shape.0, shape.1, false);
    }

    /// Momentum operator `p_axis = -i d/dx_axis`, computed spectrally.
    pub fn partial_derivative(&self, axis: usize) -> Result<WaveFunction> {
        if axis >= self.grid.dim() {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: self.grid.dim(),
            });
        }
        let mut amp = self.amp.clone();
        momentum_apply_raw(&self.grid, &mut amp, axis);
        Ok(WaveFunction {
            grid: Arc::clone(&self.grid),
            amp,
        })
    }

    /// `sum_i field_i |amp_i|^2`; requires a normalized state.
    pub fn expectation(&self, field: &ScalarField) -> Result<f64> {
        self.grid.check_same(&field.grid)?;
        self.check_normalized(1e-8)?;
        Ok(expectation_raw(&self.amp, &field.val))
    }

    /// Position-space spectrum (forward DFT of the amplitudes).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.amp.clone();
        fft_all(&mut s, self.grid.dim(), self.grid.n_per_dim(), true);
        s
    }
}

/// `sum_i field_i |amp_i|^2` without normalization checks.
pub(crate) fn expectation_raw(amp: &[Complex64], field: &[f64]) -> f64 {
    amp.iter()
        .zip(field)
        .map(|(a, &v)| v * a.norm_sqr())
        .sum()
}

pub(crate) fn apply_phase_raw(amp: &mut [Complex64], field: &[f64], theta: f64) {
    // chunked so the rayon path and the sequential path traverse identically
    par::for_each_chunk(amp, par::CHUNK, |start, chunk| {
        let vals = &field[start..start + chunk.len()];
        for (a, &v) in chunk.iter_mut().zip(vals) {
            *a *= Complex64::from_polar(1.0, -theta * v);
        }
    });
}

/// In-place momentum application on a raw amplitude buffer:
/// spectrum multiplied by the (Nyquist-zeroed) wavenumber.
pub(crate) fn momentum_apply_raw(grid: &Grid, amp: &mut [Complex64], axis: usize) {
    let d = grid.dim();
    let n = grid.n_per_dim();
    fft_axis(amp, d, n, axis, true);
    let kd = grid.deriv_wavenumbers(axis);
    let inner = n.pow((d - 1 - axis) as u32);
    par::for_each_chunk(amp, par::CHUNK, |start, chunk| {
        for (off, a) in chunk.iter_mut().enumerate() {
            let flat = start + off;
            let i = (flat / inner) % n;
            *a *= kd[i];
        }
    });
    fft_axis(amp, d, n, axis, false);
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    let cell = PLANNER.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cell.lock().unwrap();
    let (planner, cache) = &mut *guard;
    Arc::clone(cache.entry((n, forward)).or_insert_with(|| {
        let dir = if forward {
            FftDirection::Forward
        } else {
            FftDirection::Inverse
        };
        planner.plan_fft(n, dir)
    }))
}

/// DFT along one axis of a row-major `[n; d]` array (axis 0 slowest).
/// The inverse transform is scaled by `1/n` so forward+inverse is identity.
pub(crate) fn fft_axis(data: &mut [Complex64], d: usize, n: usize, axis: usize, forward: bool) {
    debug_assert_eq!(data.len(), n.pow(d as u32));
    let fft = plan(n, forward);
    let scale = if forward { 1.0 } else { 1.0 / n as f64 };
    let inner = n.pow((d - 1 - axis) as u32);
    if inner == 1 {
        par::for_each_chunk(data, n, |_, line| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(line, &mut scratch);
            if !forward {
                for v in line.iter_mut() {
                    *v *= scale;
                }
            }
        });
        return;
    }
    let block = n * inner;
    for blk in data.chunks_mut(block) {
        let mut buf = vec![Complex64::new(0.0, 0.0); block];
        {
            let src: &[Complex64] = blk;
            // gather line j (stride `inner`) into a contiguous row, transform
            par::for_each_chunk(&mut buf, n, |start, line| {
                let j = start / n;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = src[i * inner + j];
                }
                let mut scratch =
                    vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(line, &mut scratch);
            });
        }
        let buf_ref: &[Complex64] = &buf;
        par::for_each_chunk(blk, inner, |start, row| {
            let i = start / inner;
            for (j, v) in row.iter_mut().enumerate() {
                *v = buf_ref[j * n + i] * scale;
            }
        });
    }
}

/// Full d-dimensional DFT (all axes in sequence).
pub(crate) fn fft_all(data: &mut [Complex64], d: usize, n: usize, forward: bool) {
    for axis in 0..d {
        fft_axis(data, d, n, axis, forward);
    }
}
