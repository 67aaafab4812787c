//! Periodic grid, discrete Fourier transforms and the spectral operators built on them.
//!
//! Coefficients are stored in FFT order: storage index `k` holds mode
//! `l = k` for `k < M/2` and `l = k - M` otherwise, so the modes
//! `l = -M/2..M/2-1` are all present. Use [`SpectralField::mode`] and
//! [`GridSpec::mode_of_index`] to address them by `l`.
//!
//! The forward transform is normalized by `1/M`, i.e.
//! `c_l = (1/M) sum_j v_j exp(-i mu_l (x_j - a))`, and the inverse is the
//! plain trigonometric interpolant evaluated on the nodes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{KgeError, Result};

/// Uniform periodic grid on `[a, b]` with `M` intervals.
#[derive(Clone)]
pub struct GridSpec {
    a: f64,
    b: f64,
    m: usize,
    h: f64,
    mu: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("m", &self.m)
            .field("h", &self.h)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.m == other.m
    }
}

/// Builds the grid `x_j = a + j h`, `h = (b - a) / M`, with modes `mu_l = 2 pi l / (b - a)`.
pub fn build_grid(a: f64, b: f64, m: usize) -> Result<GridSpec> {
    GridSpec::new(a, b, m)
}

impl GridSpec {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(KgeError::InvalidGrid(format!("interval [{a}, {b}] must satisfy b > a")));
        }
        if m < 4 || !m.is_multiple_of(2) {
            return Err(KgeError::InvalidGrid(format!("M = {m} must be even and at least 4")));
        }
        let len = b - a;
        let mu: Arc<[f64]> = (0..m).map(|k| 2.0 * PI * Self::l_of(k, m) as f64 / len).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            a,
            b,
            m,
            h: len / m as f64,
            mu,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    /// Grid with mesh size closest to `h` on `[a, b]`; fails unless `(b - a)/h` is an even integer.
    pub fn with_mesh_size(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(KgeError::InvalidGrid(format!("mesh size {h} must be positive")));
        }
        let ratio = (b - a) / h;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * m.max(1.0) {
            return Err(KgeError::InvalidGrid(format!("(b - a)/h = {ratio} is not an integer")));
        }
        Self::new(a, b, m as usize)
    }

    fn l_of(k: usize, m: usize) -> i64 {
        if k < m / 2 {
            k as i64
        } else {
            k as i64 - m as i64
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn node(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h
    }

    /// All `M + 1` nodes `x_0 = a, ..., x_M = b`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|j| self.node(j)).collect()
    }

    /// Mode number `l` stored at FFT index `k`.
    pub fn mode_of_index(&self, k: usize) -> i64 {
        Self::l_of(k, self.m)
    }

    /// FFT index holding mode `l`, or `None` outside `-M/2..M/2-1`.
    pub fn index_of_mode(&self, l: i64) -> Option<usize> {
        let half = (self.m / 2) as i64;
        if l < -half || l >= half {
            None
        } else if l >= 0 {
            Some(l as usize)
        } else {
            Some((l + self.m as i64) as usize)
        }
    }

    /// Frequency `mu_l` for mode `l` (any integer, not only resolved ones).
    pub fn mu_of_mode(&self, l: i64) -> f64 {
        2.0 * PI * l as f64 / self.length()
    }

    /// Frequencies in FFT storage order.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn is_nyquist_index(&self, k: usize) -> bool {
        k == self.m / 2
    }

    /// Samples `f` at `x_0..x_{M-1}`.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField::new((0..self.m).map(|j| f(self.node(j))).collect())
    }

    pub fn zero_spectral(&self) -> SpectralField {
        SpectralField::zeros(self.m)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.m {
            return Err(KgeError::LengthMismatch {
                expected: self.m,
                found: len,
            });
        }
        Ok(())
    }

    pub(crate) fn fft_forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        let scale = 1.0 / self.m as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    pub(crate) fn fft_inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// Real grid values `v_0..v_{M-1}`; `v_M = v_0` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField(Vec<f64>);

impl RealField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl From<Vec<f64>> for RealField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Discrete Fourier coefficients of one field, in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField(Vec<Complex64>);

impl SpectralField {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// Coefficient of mode `l`, `l` in `-M/2..M/2-1`.
    pub fn mode(&self, l: i64) -> Complex64 {
        let m = self.0.len() as i64;
        assert!(l >= -m / 2 && l < m / 2, "mode {l} out of range for M = {m}");
        self.0[l.rem_euclid(m) as usize]
    }

    pub fn set_mode(&mut self, l: i64, value: Complex64) {
        let m = self.0.len() as i64;
        assert!(l >= -m / 2 && l < m / 2, "mode {l} out of range for M = {m}");
        self.0[l.rem_euclid(m) as usize] = value;
    }

    pub fn scale(&mut self, s: f64) {
        self.0.iter_mut().for_each(|c| *c *= s);
    }

    /// Largest deviation from `c_{-l} = conj(c_l)`, relative to the largest coefficient.
    /// Zero and Nyquist modes are checked for a vanishing imaginary part.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let m = self.0.len();
        let scale = self.0.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = self.0[0].im.abs().max(self.0[m / 2].im.abs());
        for k in 1..m / 2 {
            worst = worst.max((self.0[k] - self.0[m - k].conj()).norm());
        }
        worst / scale
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(x, y)| x - y).collect())
    }
}

impl From<Vec<Complex64>> for SpectralField {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

/// `c_l = (1/M) sum_j v_j exp(-i mu_l (x_j - a))`, computed with an FFT.
pub fn forward_dft(grid: &GridSpec, v: &RealField) -> Result<SpectralField> {
    grid.check_len(v.len())?;
    let mut buf: Vec<Complex64> = v.values().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    grid.fft_forward_in_place(&mut buf);
    Ok(SpectralField(buf))
}

/// Evaluates the interpolant `sum_l c_l psi_l(x_j)` on the nodes, keeping the real part.
pub fn inverse_dft(grid: &GridSpec, c: &SpectralField) -> Result<RealField> {
    let buf = inverse_dft_complex(grid, c)?;
    Ok(RealField(buf.into_iter().map(|z| z.re).collect()))
}

/// Same as [`inverse_dft`] but returns the complex node values.
pub fn inverse_dft_complex(grid: &GridSpec, c: &SpectralField) -> Result<Vec<Complex64>> {
    grid.check_len(c.len())?;
    let mut buf = c.0.clone();
    grid.fft_inverse_in_place(&mut buf);
    Ok(buf)
}

/// Transforms two real fields with one complex FFT of `x + i y`.
pub fn forward_dft_pair(grid: &GridSpec, x: &RealField, y: &RealField) -> Result<(SpectralField, SpectralField)> {
    grid.check_len(x.len())?;
    grid.check_len(y.len())?;
    let m = grid.m();
    let mut buf: Vec<Complex64> = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    grid.fft_forward_in_place(&mut buf);
    let mut cx = Vec::with_capacity(m);
    let mut cy = Vec::with_capacity(m);
    for k in 0..m {
        let z = buf[k];
        let w = buf[if k == 0 { 0 } else { m - k }].conj();
        cx.push(0.5 * (z + w));
        // (z - w) / 2i
        let d = 0.5 * (z - w);
        cy.push(Complex64::new(d.im, -d.re));
    }
    Ok((SpectralField(cx), SpectralField(cy)))
}

/// Inverse transforms two conjugate-symmetric fields with one complex FFT of `a + i b`.
pub fn inverse_dft_pair(grid: &GridSpec, a: &SpectralField, b: &SpectralField) -> Result<(RealField, RealField)> {
    grid.check_len(a.len())?;
    grid.check_len(b.len())?;
    let mut buf: Vec<Complex64> = a.0.iter().zip(&b.0).map(|(&p, &q)| p + Complex64::i() * q).collect();
    grid.fft_inverse_in_place(&mut buf);
    Ok((
        RealField(buf.iter().map(|z| z.re).collect()),
        RealField(buf.iter().map(|z| z.im).collect()),
    ))
}

/// Multiplies each coefficient by `(i mu_l)^order`.
///
/// For `order = 1` the Nyquist mode is zeroed so derivatives of real fields stay real;
/// for `order = 2` it is kept with factor `-mu_{-M/2}^2`.
pub fn spectral_derivative(grid: &GridSpec, c: &SpectralField, order: u32) -> Result<SpectralField> {
    grid.check_len(c.len())?;
    let mut out = c.clone();
    match order {
        1 => {
            for (k, (z, &mu)) in out.0.iter_mut().zip(grid.mu()).enumerate() {
                *z = if grid.is_nyquist_index(k) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(-mu * z.im, mu * z.re)
                };
            }
        }
        2 => {
            for (z, &mu) in out.0.iter_mut().zip(grid.mu()) {
                *z *= -mu * mu;
            }
        }
        other => return Err(KgeError::UnsupportedDerivativeOrder(other)),
    }
    Ok(out)
}

/// Discrete H^1 norm of the interpolant: `sqrt((b - a) sum_l (1 + mu_l^2) |c_l|^2)`.
pub fn h1_norm(grid: &GridSpec, c: &SpectralField) -> f64 {
    debug_assert_eq!(c.len(), grid.m());
    let sum: f64 =
        c.0.iter()
            .zip(grid.mu())
            .map(|(z, &mu)| (1.0 + mu * mu) * z.norm_sqr())
            .sum();
    (grid.length() * sum).sqrt()
}

/// Zero-pads the coefficients of a field on `coarse` into the modes of `fine`.
///
/// Both grids must share `[a, b]` and `fine` must have at least as many points.
/// The coarse Nyquist coefficient is split evenly between `±M/2` so the
/// embedded interpolant stays real.
pub fn embed(coarse: &GridSpec, c: &SpectralField, fine: &GridSpec) -> Result<SpectralField> {
    coarse.check_len(c.len())?;
    let same_interval =
        (coarse.a - fine.a).abs() <= 1e-12 * coarse.length() && (coarse.b - fine.b).abs() <= 1e-12 * coarse.length();
    if !same_interval {
        return Err(KgeError::IncompatibleGrids(format!(
            "intervals differ: [{}, {}] vs [{}, {}]",
            coarse.a, coarse.b, fine.a, fine.b
        )));
    }
    if fine.m < coarse.m {
        return Err(KgeError::IncompatibleGrids(format!(
            "cannot embed M = {} into coarser M = {}",
            coarse.m, fine.m
        )));
    }
    if fine.m == coarse.m {
        return Ok(c.clone());
    }
    let half = (coarse.m / 2) as i64;
    let mut out = SpectralField::zeros(fine.m);
    for l in (-half + 1)..half {
        out.set_mode(l, c.mode(l));
    }
    let nyq = c.mode(-half) * 0.5;
    out.set_mode(-half, nyq);
    out.set_mode(half, nyq);
    Ok(out)
}

/// Zeroes all modes with `|l| > M/3` (two-thirds dealiasing rule).
pub fn two_thirds_filter(grid: &GridSpec, c: &mut SpectralField) {
    let cutoff = (grid.m() / 3) as i64;
    for (k, z) in c.0.iter_mut().enumerate() {
        if grid.mode_of_index(k).abs() > cutoff {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}
