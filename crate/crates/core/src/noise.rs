//! Wong-Zakai coefficients of the fractional Brownian sheet.
//!
//! The regularised noise is
//!
//! ```text
//! ξ_R(x, t) = Σ_i Σ_k (1/τ) X[k][i] φ_k(x) χ_{I_i}(t),
//! X[k][i]   = ∫_{I_i} ∫_D φ_k(y) ξ(y, r) dy dr,
//! ```
//!
//! with `I_i = (t_{i-1}, t_i]`. The family `X` is centred Gaussian with
//! covariance `E[X[j][i] X[k][m]] = Q[j][k] C[i][m]`: `C` is the covariance of
//! fractional Brownian increments over the time cells, `Q` the covariance of
//! the projections `∫ φ_k dW^{H1}` of the spatial factor. Samples are drawn as
//! `X = L_Q Z L_Cᵀ` from Cholesky factors and an `N×M` standard normal `Z`.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::basis::eigenpair;
use crate::error::{config, invalid, Error, Result};

/// Fine-grid resolution used for the spatial covariance unless more is
/// needed to satisfy the `64 N` guard.
pub const DEFAULT_FINE_GRID: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstPair {
    /// Spatial Hurst index.
    pub h1: f64,
    /// Temporal Hurst index.
    pub h2: f64,
}

impl HurstPair {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        for (name, h) in [("h1", h1), ("h2", h2)] {
            if !(h > 0.0 && h <= 0.5) {
                return Err(invalid(format!(
                    "Hurst index {name} must lie in (0, 1/2], got {h}"
                )));
            }
        }
        Ok(HurstPair { h1, h2 })
    }
}

/// `½(|d+1|^{2H} + |d-1|^{2H} - 2|d|^{2H})`: covariance of unit-step
/// fractional Gaussian noise at lag `d`.
fn fgn_autocov(d: usize, h: f64) -> f64 {
    let e = 2.0 * h;
    let d = d as f64;
    0.5 * ((d + 1.0).powf(e) + (d - 1.0).abs().powf(e) - 2.0 * d.powf(e))
}

/// Lower Cholesky factor, adding `1e-12 * trace / n` to the diagonal (then
/// 10x more, up to three times) when the plain factorisation fails.
fn cholesky_with_jitter(matrix: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if let Some(c) = matrix.clone().cholesky() {
        return Ok(c.l());
    }
    let n = matrix.nrows().max(1);
    let mut jitter = 1e-12 * matrix.trace() / n as f64;
    for _ in 0..3 {
        let mut m = matrix.clone();
        for i in 0..matrix.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            log::debug!("{what}: Cholesky needed diagonal jitter {jitter:e}");
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::CovarianceDegenerate(format!(
        "{what} ({n}x{n}) is not positive definite even with jitter {:e}",
        jitter / 10.0
    )))
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

/// Covariance of the fractional Brownian increments over the `M` time cells.
///
/// Stationary on the uniform grid, so it is kept as the lag sequence
/// `C[i][m] = lag[|i - m|]`. At `H2 = 1/2` it is `τ I` and no factorisation is
/// formed.
#[derive(Debug, Clone)]
pub struct TimeIncrementCov {
    pub lag: Vec<f64>,
    pub h2: f64,
    pub tau: f64,
    pub t_final: f64,
    /// Lower Cholesky factor; `None` when the covariance is diagonal.
    factor: Option<DMatrix<f64>>,
}

impl TimeIncrementCov {
    pub fn steps(&self) -> usize {
        self.lag.len()
    }

    /// Dense `M x M` covariance.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.steps();
        DMatrix::from_fn(m, m, |i, j| self.lag[i.abs_diff(j)])
    }

    /// Dense lower Cholesky factor.
    pub fn chol(&self) -> DMatrix<f64> {
        match &self.factor {
            Some(l) => l.clone(),
            None => DMatrix::from_diagonal_element(self.steps(), self.steps(), self.lag[0].sqrt()),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.factor.is_none()
    }
}

/// `C[i][m] = ½(|t_i − t_{m−1}|^{2H} + |t_{i−1} − t_m|^{2H} − |t_i − t_m|^{2H}
/// − |t_{i−1} − t_{m−1}|^{2H})` on the uniform grid `t_i = i T / M`.
pub fn time_increment_cov(h2: f64, steps: usize, t_final: f64) -> Result<TimeIncrementCov> {
    if !(h2 > 0.0 && h2 <= 0.5) {
        return Err(invalid(format!(
            "Hurst index h2 must lie in (0, 1/2], got {h2}"
        )));
    }
    if steps == 0 {
        return Err(config("need at least one time step"));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid(format!("T must be positive, got {t_final}")));
    }
    let tau = t_final / steps as f64;
    let scale = tau.powf(2.0 * h2);
    // uniform grid: the polarisation identity reduces to the lag form, which
    // keeps C = τ I exact at H = 1/2
    let lag: Vec<f64> = (0..steps).map(|d| scale * fgn_autocov(d, h2)).collect();
    let mut cov = TimeIncrementCov {
        lag,
        h2,
        tau,
        t_final,
        factor: None,
    };
    if cov.lag[1..].iter().any(|&v| v != 0.0) {
        let l = cholesky_with_jitter(&cov.matrix(), "temporal increment covariance")?;
        cov.factor = Some(l);
    }
    Ok(cov)
}

/// Covariance of `∫_D φ_k dW^{H1}`, `k = 1..N`.
#[derive(Debug, Clone)]
pub struct SpatialProjCov {
    pub matrix: DMatrix<f64>,
    pub chol: DMatrix<f64>,
    pub h1: f64,
    pub fine_grid: usize,
    diagonal: bool,
}

impl SpatialProjCov {
    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Smallest admissible fine grid for `n_modes`, rounded up to a power of two
/// and at least [`DEFAULT_FINE_GRID`].
pub fn fine_grid_for(n_modes: usize) -> usize {
    (64 * n_modes).next_power_of_two().max(DEFAULT_FINE_GRID)
}

/// `Q = Vᵀ C_f V`, where `C_f` is the covariance of the fractional Brownian
/// increments over `N_f` equal cells of `(0, 1)` and `V[c][j] = φ_j` at the
/// midpoint of cell `c`.
pub fn spatial_proj_cov(h1: f64, n_modes: usize, fine_grid: usize) -> Result<SpatialProjCov> {
    if !(h1 > 0.0 && h1 <= 0.5) {
        return Err(invalid(format!(
            "Hurst index h1 must lie in (0, 1/2], got {h1}"
        )));
    }
    if n_modes == 0 {
        return Err(config("need at least one spatial mode"));
    }
    if fine_grid < 64 * n_modes {
        return Err(config(format!(
            "fine grid {fine_grid} is below 64 * N = {} for N = {n_modes}",
            64 * n_modes
        )));
    }
    let nf = fine_grid;
    let hf = 1.0 / nf as f64;
    let scale = hf.powf(2.0 * h1);

    // C_f is symmetric Toeplitz; multiply through a circulant embedding of size 2 N_f
    let size = 2 * nf;
    let mut col = vec![Complex64::new(0.0, 0.0); size];
    for d in 0..nf {
        let g = scale * fgn_autocov(d, h1);
        col[d] = Complex64::new(g, 0.0);
        if d > 0 {
            col[size - d] = Complex64::new(g, 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    fwd.process(&mut col);
    let eig = col;

    let phis: Vec<Vec<f64>> = (1..=n_modes)
        .map(|k| {
            let e = eigenpair(k).expect("k >= 1");
            (0..nf).map(|c| e.phi((c as f64 + 0.5) * hf)).collect()
        })
        .collect();

    let mut matrix = DMatrix::zeros(n_modes, n_modes);
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for j in 0..n_modes {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (b, v) in buf.iter_mut().zip(&phis[j]) {
            b.re = *v;
        }
        fwd.process(&mut buf);
        buf.iter_mut().zip(&eig).for_each(|(b, e)| *b *= e);
        inv.process(&mut buf);
        let norm = 1.0 / size as f64;
        for k in j..n_modes {
            let q: f64 = phis[k]
                .iter()
                .zip(&buf[..nf])
                .map(|(p, y)| p * y.re)
                .sum::<f64>()
                * norm;
            matrix[(j, k)] = q;
            matrix[(k, j)] = q;
        }
    }
    // exact symmetry: mirror the upper triangle
    for j in 0..n_modes {
        for k in 0..j {
            matrix[(j, k)] = matrix[(k, j)];
        }
    }
    let chol = cholesky_with_jitter(&matrix, "spatial projection covariance")?;
    let diagonal = is_diagonal(&chol);
    Ok(SpatialProjCov {
        matrix,
        chol,
        h1,
        fine_grid: nf,
        diagonal,
    })
}

/// One realisation of the Wong-Zakai coefficients, `X[k][i]` for modes
/// `k = 0..N` and time cells `i = 0..M` (zero-based), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    n_modes: usize,
    steps: usize,
    t_final: f64,
    pub hurst: HurstPair,
    pub seed: u64,
    data: Vec<f64>,
}

impl NoiseSample {
    pub fn zeros(n_modes: usize, steps: usize, t_final: f64, hurst: HurstPair) -> Self {
        NoiseSample {
            n_modes,
            steps,
            t_final,
            hurst,
            seed: 0,
            data: vec![0.0; n_modes * steps],
        }
    }

    pub fn from_rows(
        n_modes: usize,
        steps: usize,
        t_final: f64,
        hurst: HurstPair,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != n_modes * steps {
            return Err(config(format!(
                "noise payload has {} values, expected {}x{}",
                data.len(),
                n_modes,
                steps
            )));
        }
        Ok(NoiseSample {
            n_modes,
            steps,
            t_final,
            hurst,
            seed: 0,
            data,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// `X[k][i]`, zero-based mode `k` and cell `i`.
    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.steps + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.steps..(k + 1) * self.steps]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Little-endian dump: `N`, `M` (u64), `τ`, `H1`, `H2` (f64), seed (u64),
    /// then the `N·M` coefficients row-major as f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_modes as u64).to_le_bytes())?;
        w.write_all(&(self.steps as u64).to_le_bytes())?;
        w.write_all(&self.tau().to_le_bytes())?;
        w.write_all(&self.hurst.h1.to_le_bytes())?;
        w.write_all(&self.hurst.h2.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let n_modes = u64::from_le_bytes(next(&mut r)?) as usize;
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let tau = f64::from_le_bytes(next(&mut r)?);
        let h1 = f64::from_le_bytes(next(&mut r)?);
        let h2 = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let len = n_modes
            .checked_mul(steps)
            .ok_or_else(|| Error::Parse("noise header dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(NoiseSample {
            n_modes,
            steps,
            t_final: tau * steps as f64,
            hurst: HurstPair::new(h1, h2)?,
            seed,
            data,
        })
    }
}

/// Draws `X = L_Q Z L_Cᵀ`, filling `Z` row-major from `rng`.
pub fn sample_noise<R: Rng + ?Sized>(
    q: &SpatialProjCov,
    c: &TimeIncrementCov,
    rng: &mut R,
) -> NoiseSample {
    let n = q.modes();
    let m = c.steps();
    let mut z = vec![0.0; n * m];
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }

    // A = L_Q Z  (row-major N x M)
    let a = if q.diagonal {
        let mut a = z;
        for k in 0..n {
            let d = q.chol[(k, k)];
            a[k * m..(k + 1) * m].iter_mut().for_each(|v| *v *= d);
        }
        a
    } else {
        let mut a = vec![0.0; n * m];
        for k in 0..n {
            for j in 0..=k {
                let l = q.chol[(k, j)];
                if l == 0.0 {
                    continue;
                }
                let (src, dst) = (&z[j * m..(j + 1) * m], &mut a[k * m..(k + 1) * m]);
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += l * s);
            }
        }
        a
    };

    // X = A L_Cᵀ: X[k][i] = Σ_{j<=i} A[k][j] L_C[i][j]
    let data = match &c.factor {
        None => {
            let sd = c.lag[0].sqrt();
            a.into_iter().map(|v| v * sd).collect()
        }
        Some(chol) => {
            let lrows: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..=i).map(|j| chol[(i, j)]).collect())
                .collect();
            let mut x = vec![0.0; n * m];
            for k in 0..n {
                let arow = &a[k * m..(k + 1) * m];
                for (i, lrow) in lrows.iter().enumerate() {
                    x[k * m + i] = arow[..=i].iter().zip(lrow).map(|(p, q)| p * q).sum();
                }
            }
            x
        }
    };
    NoiseSample {
        n_modes: n,
        steps: m,
        t_final: c.t_final,
        hurst: HurstPair { h1: q.h1, h2: c.h2 },
        seed: 0,
        data,
    }
}

/// Merges `factor` consecutive time cells by summing their coefficients.
pub fn coarsen_time(s: &NoiseSample, factor: usize) -> Result<NoiseSample> {
    if factor == 0 || !s.steps.is_multiple_of(factor) {
        return Err(config(format!(
            "coarsening factor {factor} does not divide M = {}",
            s.steps
        )));
    }
    let m2 = s.steps / factor;
    let mut data = Vec::with_capacity(s.n_modes * m2);
    for k in 0..s.n_modes {
        let row = s.row(k);
        data.extend(row.chunks_exact(factor).map(|c| c.iter().sum::<f64>()));
    }
    Ok(NoiseSample {
        steps: m2,
        data,
        ..s.clone_header()
    })
}

/// Keeps the first `n_small` modes.
pub fn truncate_modes(s: &NoiseSample, n_small: usize) -> Result<NoiseSample> {
    if n_small == 0 || n_small > s.n_modes {
        return Err(config(format!(
            "cannot keep {n_small} of {} modes",
            s.n_modes
        )));
    }
    Ok(NoiseSample {
        n_modes: n_small,
        data: s.data[..n_small * s.steps].to_vec(),
        ..s.clone_header()
    })
}

impl NoiseSample {
    fn clone_header(&self) -> NoiseSample {
        NoiseSample {
            n_modes: self.n_modes,
            steps: self.steps,
            t_final: self.t_final,
            hurst: self.hurst,
            seed: self.seed,
            data: Vec::new(),
        }
    }
}

/// Independent random stream for Monte Carlo path `index`.
///
/// ChaCha8 keyed by the master seed, one 64-bit stream id per path, so the
/// draws of a path do not depend on which worker runs it or in what order.
pub fn path_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Shared, immutable covariance factors for drawing paths of one experiment.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub spatial: Arc<SpatialProjCov>,
    pub temporal: Arc<TimeIncrementCov>,
    pub master_seed: u64,
}

impl NoiseModel {
    pub fn new(
        hurst: HurstPair,
        n_modes: usize,
        steps: usize,
        t_final: f64,
        master_seed: u64,
    ) -> Result<Self> {
        let spatial = spatial_proj_cov(hurst.h1, n_modes, fine_grid_for(n_modes))?;
        let temporal = time_increment_cov(hurst.h2, steps, t_final)?;
        Ok(NoiseModel {
            spatial: Arc::new(spatial),
            temporal: Arc::new(temporal),
            master_seed,
        })
    }

    /// The coefficients of path `index`.
    pub fn sample(&self, index: u64) -> NoiseSample {
        let mut rng = path_rng(self.master_seed, index);
        let mut s = sample_noise(&self.spatial, &self.temporal, &mut rng);
        s.seed = self.master_seed;
        s
    }
}
