//! Dirichlet sine eigensystem of `-d²/dx²` on `(0, 1)`.
//!
//! `λ_k = (kπ)²`, `φ_k(x) = √2 sin(kπx)`, orthonormal in `L²(0, 1)`. A
//! [`SpectralState`] holds the first `N` coefficients of a function in this
//! basis, so its Euclidean norm is the `L²` norm of the function.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub index: usize,
    pub value: f64,
}

impl Eigenpair {
    /// `φ_k(x) = √2 sin(kπx)`.
    pub fn phi(&self, x: f64) -> f64 {
        SQRT_2 * (self.index as f64 * PI * x).sin()
    }
}

pub fn eigenpair(k: usize) -> Result<Eigenpair> {
    if k == 0 {
        return Err(invalid("eigenpair index starts at 1"));
    }
    Ok(Eigenpair {
        index: k,
        value: eigenvalue(k),
    })
}

/// `λ_k = (kπ)²` without validation.
#[inline]
pub fn eigenvalue(k: usize) -> f64 {
    let r = k as f64 * PI;
    r * r
}

/// `(1, φ_k) = √2 (1 - cos kπ) / (kπ)`: `2√2/(kπ)` for odd `k`, zero for even.
pub fn constant_coefficient(k: usize) -> f64 {
    if k % 2 == 1 {
        2.0 * SQRT_2 / (k as f64 * PI)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub coeffs: Vec<f64>,
}

impl SpectralState {
    pub fn zeros(n_modes: usize) -> Self {
        SpectralState {
            coeffs: vec![0.0; n_modes],
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        SpectralState { coeffs }
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    /// `L²(0,1)` norm (Parseval).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `L²` distance to `other`; the shorter state is padded with zeros, so
    /// modes present in only one of them count in full.
    pub fn l2_distance(&self, other: &SpectralState) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|k| {
                let a = self.coeffs.get(k).copied().unwrap_or(0.0);
                let b = other.coeffs.get(k).copied().unwrap_or(0.0);
                (a - b) * (a - b)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Point value of the truncated sine series.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * SQRT_2 * ((i + 1) as f64 * PI * x).sin())
            .sum()
    }
}

/// `P_N u` from samples of `u` on the uniform grid `x_i = i/G`, `i = 0..=G`.
///
/// Inner products use composite Simpson quadrature, so `G` must be even and
/// at least `4N`.
pub fn project(samples: &[f64], n_modes: usize) -> Result<SpectralState> {
    if n_modes == 0 {
        return Err(invalid("projection needs at least one mode"));
    }
    let intervals = samples.len().saturating_sub(1);
    if intervals < 4 * n_modes {
        return Err(Error::Resolution(format!(
            "{} grid points cannot resolve {} modes (need at least {})",
            samples.len(),
            n_modes,
            4 * n_modes + 1
        )));
    }
    if !intervals.is_multiple_of(2) {
        return Err(Error::Resolution(format!(
            "Simpson quadrature needs an even number of intervals, got {intervals}"
        )));
    }
    let h = 1.0 / intervals as f64;
    let weights = simpson_weights(intervals, h);
    let coeffs = (1..=n_modes)
        .map(|k| {
            let kpi = k as f64 * PI;
            samples
                .iter()
                .zip(&weights)
                .enumerate()
                .map(|(i, (u, w))| w * u * SQRT_2 * (kpi * i as f64 * h).sin())
                .sum()
        })
        .collect();
    Ok(SpectralState { coeffs })
}

fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    (0..=intervals)
        .map(|i| {
            let m = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            m * h / 3.0
        })
        .collect()
}

/// Multiplies coefficient `k` by `λ_k^{±s}`.
pub fn apply_frac_laplacian(state: &SpectralState, s: f64, sign: i32) -> SpectralState {
    let e = if sign >= 0 { s } else { -s };
    let coeffs = state
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * (e * eigenvalue(i + 1).ln()).exp())
        .collect();
    SpectralState { coeffs }
}

/// `λ_k^s` for `k = 1..=n`.
pub fn frac_eigenvalues(n: usize, s: f64) -> Vec<f64> {
    (1..=n).map(|k| (s * eigenvalue(k).ln()).exp()).collect()
}

/// Fast pseudo-spectral transforms between `N` sine coefficients and the
/// interior of the uniform grid with `G = 4N` intervals.
///
/// Both directions are one DST-I of length `G - 1`, done as a complex FFT of
/// length `2G`. [`SineGrid::analyze`] applies the same Simpson weights as
/// [`project`], so the two agree to rounding.
#[derive(Clone)]
pub struct SineGrid {
    n_modes: usize,
    intervals: usize,
    fft: Arc<dyn Fft<f64>>,
    simpson: Vec<f64>,
}

impl std::fmt::Debug for SineGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineGrid")
            .field("n_modes", &self.n_modes)
            .field("intervals", &self.intervals)
            .finish()
    }
}

/// Scratch buffers for one [`SineGrid`] user; not shared between threads.
#[derive(Debug, Clone)]
pub struct SineScratch {
    buf: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
    full: Vec<f64>,
}

impl SineGrid {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("sine grid needs at least one mode"));
        }
        let intervals = 4 * n_modes;
        let fft = FftPlanner::new().plan_fft_forward(2 * intervals);
        let simpson = simpson_weights(intervals, 1.0 / intervals as f64);
        Ok(SineGrid {
            n_modes,
            intervals,
            fft,
            simpson,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Number of grid intervals `G`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn scratch(&self) -> SineScratch {
        SineScratch {
            buf: vec![Complex64::new(0.0, 0.0); 2 * self.intervals],
            fft_scratch: vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
            full: vec![0.0; self.intervals - 1],
        }
    }

    /// `Σ_i y_i sin(π k i / G)` for `k = 1..G-1`, written to `out[k-1]`.
    fn dst1(
        &self,
        buf: &mut [Complex64],
        fft_scratch: &mut [Complex64],
        y: impl Iterator<Item = f64>,
        out: &mut [f64],
    ) {
        let g = self.intervals;
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (i, v) in y.enumerate() {
            buf[i + 1] = Complex64::new(v, 0.0);
            buf[2 * g - i - 1] = Complex64::new(-v, 0.0);
        }
        self.fft.process_with_scratch(buf, fft_scratch);
        for (k, o) in out.iter_mut().enumerate() {
            *o = -0.5 * buf[k + 1].im;
        }
    }

    /// Values of `Σ_k c_k φ_k` at the interior nodes `x_i = i/G`, `i = 1..G-1`.
    pub fn synthesize(&self, coeffs: &[f64], scratch: &mut SineScratch, values: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        debug_assert_eq!(values.len(), self.intervals - 1);
        let n = self.n_modes;
        let g = self.intervals;
        let padded = (0..g - 1).map(|k| if k < n { SQRT_2 * coeffs[k] } else { 0.0 });
        self.dst1(&mut scratch.buf, &mut scratch.fft_scratch, padded, values);
    }

    /// Simpson projection of interior nodal values onto the first `N` modes.
    /// Boundary values do not contribute since every `φ_k` vanishes there.
    pub fn analyze(&self, values: &[f64], scratch: &mut SineScratch, coeffs: &mut [f64]) {
        debug_assert_eq!(values.len(), self.intervals - 1);
        let weighted = values
            .iter()
            .zip(&self.simpson[1..])
            .map(|(v, w)| SQRT_2 * v * w);
        let SineScratch {
            buf,
            fft_scratch,
            full,
        } = scratch;
        self.dst1(buf, fft_scratch, weighted, full);
        coeffs.copy_from_slice(&full[..self.n_modes]);
    }

    /// Interior node `x_i`, `i = 1..G-1`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.intervals as f64
    }
}
