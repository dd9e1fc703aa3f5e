use num_complex::Complex64;

use crate::basis::SpectralState;
use crate::contour::{ramp_transform, ContourRule};
use crate::error::Result;
use crate::harness::theoretical_rates;
use crate::noise::NoiseSample;

use super::{ModelParams, SchemeTrajectory, Solver, SourceProjector, Variant};

/// `e^w - 1` without cancellation for small `|w|`.
fn exp_m1(w: Complex64) -> Complex64 {
    let (x, y) = (w.re, w.im);
    let half = (0.5 * y).sin();
    Complex64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
}

/// History terms of the two convolutions, one per contour node and mode:
///
/// ```text
/// G^n_{k,j} = Σ_{i=1}^{n} ω_j (e^{z_j t_{n-i+1}} - e^{z_j t_{n-i}}) c_{k,j} g^i_k,
/// c_{k,j}   = z_j^{α-2} / (z_j^α + λ_k^s),
/// ```
///
/// with `g^i = f̂^{i-1}` in `g1` and `g^i = X[k][i] / τ` in `g2`. Only nodes
/// `j = 0..=L` are stored; `G_{k,-j}` is the conjugate of `G_{k,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBank {
    n_modes: usize,
    half: usize,
    g1_re: Vec<f64>,
    g1_im: Vec<f64>,
    g2_re: Vec<f64>,
    g2_im: Vec<f64>,
}

impl HistoryBank {
    pub fn zeros(n_modes: usize, half_nodes: usize) -> Self {
        let len = n_modes * (half_nodes + 1);
        HistoryBank {
            n_modes,
            half: half_nodes + 1,
            g1_re: vec![0.0; len],
            g1_im: vec![0.0; len],
            g2_re: vec![0.0; len],
            g2_im: vec![0.0; len],
        }
    }

    fn at(re: &[f64], im: &[f64], half: usize, k: usize, j: isize) -> Complex64 {
        let idx = k * half + j.unsigned_abs();
        let v = Complex64::new(re[idx], im[idx]);
        if j < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// `G_{1,k,j}` for zero-based mode `k` and node `j ∈ [-L, L]`.
    pub fn g1(&self, k: usize, j: isize) -> Complex64 {
        Self::at(&self.g1_re, &self.g1_im, self.half, k, j)
    }

    /// `G_{2,k,j}` for zero-based mode `k` and node `j ∈ [-L, L]`.
    pub fn g2(&self, k: usize, j: isize) -> Complex64 {
        Self::at(&self.g2_re, &self.g2_im, self.half, k, j)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// One step for mode `k`: `G ← e^{zτ} G + d_k g` in both banks, returning
    /// `u_k = Σ_j Re(G_{1,k,j} + G_{2,k,j})` over all `2L + 1` nodes.
    #[inline]
    fn advance(
        &mut self,
        k: usize,
        exp: (&[f64], &[f64]),
        d: (&[f64], &[f64]),
        f1: f64,
        f2: f64,
    ) -> f64 {
        let r = k * self.half..(k + 1) * self.half;
        let (er, ei) = exp;
        let (dr, di) = d;
        let g1r = &mut self.g1_re[r.clone()];
        let g1i = &mut self.g1_im[r.clone()];
        let g2r = &mut self.g2_re[r.clone()];
        let g2i = &mut self.g2_im[r];
        for j in 0..er.len() {
            let (a, b) = (g1r[j], g1i[j]);
            g1r[j] = er[j] * a - ei[j] * b + dr[j] * f1;
            g1i[j] = er[j] * b + ei[j] * a + di[j] * f1;
            let (a, b) = (g2r[j], g2i[j]);
            g2r[j] = er[j] * a - ei[j] * b + dr[j] * f2;
            g2i[j] = er[j] * b + ei[j] * a + di[j] * f2;
        }
        let mut acc = [0.0; 4];
        let mut tail = 0.0;
        let (c1, c2) = (g1r[1..].chunks_exact(4), g2r[1..].chunks_exact(4));
        for (x, y) in c1.remainder().iter().zip(c2.remainder()) {
            tail += x + y;
        }
        for (x, y) in c1.zip(c2) {
            for i in 0..4 {
                acc[i] += x[i] + y[i];
            }
        }
        let pairs = (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail;
        // conjugate pairs cancel; the centre node carries all of the imaginary part
        debug_assert!(
            (g1i[0] + g2i[0]).abs() <= 1e-10 * (g1r[0] + g2r[0] + 2.0 * pairs).abs().max(1e-300),
            "imaginary residue {} in fast update",
            g1i[0] + g2i[0]
        );
        g1r[0] + g2r[0] + 2.0 * pairs
    }
}

/// Mittag-Leffler Euler integrator with contour-quadrature kernels and
/// `O(N L)` history updates per step.
pub struct FastSolver {
    params: ModelParams,
    half: usize,
    exp_re: Vec<f64>,
    exp_im: Vec<f64>,
    /// `ω_j c_{k,j} (e^{z_j τ} - 1)` at `k * (L + 1) + j`.
    drive_re: Vec<f64>,
    drive_im: Vec<f64>,
    /// `Σ_j ω_j c_{k,j}`: the quadrature of the kernel at `t = 0`, where the
    /// exact value is 0 but the sinc sum does not converge.
    origin: Vec<f64>,
    projector: SourceProjector,
}

impl std::fmt::Debug for FastSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastSolver")
            .field("params", &self.params)
            .field("half_nodes", &(self.half - 1))
            .finish()
    }
}

impl FastSolver {
    pub fn new(p: &ModelParams, rule: &ContourRule) -> Result<Self> {
        p.validate()?;
        rule.params().validate()?;
        rule.check_horizon(p.t_final);
        check_coupling(p, rule);
        let tau = p.tau();
        let upper: Vec<(Complex64, Complex64)> = rule.upper_half().collect();
        let half = upper.len();
        let (exp_re, exp_im): (Vec<f64>, Vec<f64>) = upper
            .iter()
            .map(|(z, _)| (z * tau).exp())
            .map(|e| (e.re, e.im))
            .unzip();
        let mut drive_re = Vec::with_capacity(p.n_modes * half);
        let mut drive_im = Vec::with_capacity(p.n_modes * half);
        let mut origin = Vec::with_capacity(p.n_modes);
        for lam in p.frac_eigenvalues() {
            let mut at_zero = 0.0;
            for (j, &(z, w)) in upper.iter().enumerate() {
                let wc = w * ramp_transform(z, p.alpha, lam);
                let d = wc * exp_m1(z * tau);
                drive_re.push(d.re);
                drive_im.push(d.im);
                at_zero += if j == 0 { wc.re } else { 2.0 * wc.re };
            }
            origin.push(at_zero);
        }
        let projector = SourceProjector::new(&p.source, p.n_modes)?;
        Ok(FastSolver {
            params: p.clone(),
            half,
            exp_re,
            exp_im,
            drive_re,
            drive_im,
            origin,
            projector,
        })
    }

    /// Runs the recurrence, handing every state and the bank after each step
    /// to `keep`.
    pub fn march_with_bank(
        &self,
        noise: &NoiseSample,
        mut keep: impl FnMut(&[f64], &HistoryBank),
    ) -> Result<Vec<f64>> {
        self.params.check_noise(noise)?;
        let (n, m) = (self.params.n_modes, self.params.steps);
        let inv_tau = 1.0 / self.params.tau();
        let mut bank = HistoryBank::zeros(n, self.half - 1);
        let mut u = vec![0.0; n];
        let mut fhat = vec![0.0; n];
        let mut scratch = self.projector.scratch();
        keep(&u, &bank);
        let h = self.half;
        for step in 1..=m {
            self.projector.project(&u, &mut scratch, &mut fhat);
            for (k, uk) in u.iter_mut().enumerate() {
                let d = (
                    &self.drive_re[k * h..(k + 1) * h],
                    &self.drive_im[k * h..(k + 1) * h],
                );
                let (f1, f2) = (fhat[k], noise.get(k, step - 1) * inv_tau);
                // the newest cell's weight is K(τ) - K(0); take K(0) = 0 exactly
                *uk = bank.advance(k, (&self.exp_re, &self.exp_im), d, f1, f2)
                    + self.origin[k] * (f1 + f2);
            }
            keep(&u, &bank);
        }
        Ok(u)
    }
}

impl Solver for FastSolver {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn variant(&self) -> Variant {
        Variant::Fast
    }

    fn solve(&self, noise: &NoiseSample) -> Result<SchemeTrajectory> {
        let mut states = Vec::with_capacity(self.params.steps + 1);
        self.march_with_bank(noise, |u, _| {
            states.push(SpectralState::from_coeffs(u.to_vec()))
        })?;
        Ok(SchemeTrajectory {
            states,
            params: self.params.clone(),
            variant: Variant::Fast,
        })
    }

    fn solve_final(&self, noise: &NoiseSample) -> Result<SpectralState> {
        Ok(SpectralState::from_coeffs(
            self.march_with_bank(noise, |_, _| {})?,
        ))
    }
}

/// Quadrature error budget tying `L` to `τ` and `N`:
/// `e^{-2√(2πqL)} ≲ τ^{2 + r_t} N^{-2σ - 2 + 2 H1}` with `r_t` the temporal and
/// `2σ` the spatial exponent. Returns whether the budget holds; warns if not.
pub fn check_coupling(p: &ModelParams, rule: &ContourRule) -> bool {
    let (spatial, temporal) = theoretical_rates(p);
    let bound = rule.params().error_bound();
    let budget = p.tau().powf(2.0 + temporal)
        * (p.n_modes as f64).powf(-spatial.max(0.0) - 2.0 + 2.0 * p.hurst.h1);
    let ok = bound * bound <= budget;
    if !ok {
        log::warn!(
            "contour error {:.3e} squared exceeds the discretisation budget {:.3e}; consider more nodes",
            bound,
            budget
        );
    }
    ok
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_m1_small_and_large() {
        let w = Complex64::new(1e-9, -2e-9);
        let e = exp_m1(w);
        assert!((e - w).norm() < 1e-17);
        let w = Complex64::new(0.3, 1.7);
        assert!((exp_m1(w) - (w.exp() - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn bank_conjugate_access() {
        let mut b = HistoryBank::zeros(2, 3);
        b.g1_re[4 + 2] = 1.0;
        b.g1_im[4 + 2] = 0.5;
        assert_eq!(b.g1(1, 2), Complex64::new(1.0, 0.5));
        assert_eq!(b.g1(1, -2), Complex64::new(1.0, -0.5));
        assert_eq!(b.g2(0, -3), Complex64::new(0.0, 0.0));
    }
}
