use crate::basis::SpectralState;
use crate::error::Result;
use crate::mlf::{MittagLeffler, MlfParams};
use crate::noise::NoiseSample;

use super::{dot, ModelParams, SchemeTrajectory, Solver, SourceProjector, Variant};

/// Mittag-Leffler Euler integrator with the convolution weights
/// `W_{m,k}` tabulated once per parameter set.
pub struct ClassicalSolver {
    params: ModelParams,
    /// `W_{m,k}` at `weights[k * M + m]`.
    weights: Vec<f64>,
    projector: SourceProjector,
}

impl std::fmt::Debug for ClassicalSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassicalSolver")
            .field("params", &self.params)
            .finish()
    }
}

impl ClassicalSolver {
    pub fn new(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        let (n, m) = (p.n_modes, p.steps);
        let tau = p.tau();
        let ramp = MittagLeffler::new(MlfParams::new(p.alpha, 2.0)?)?;
        let mut weights = Vec::with_capacity(n * m);
        let mut r = vec![0.0; m + 1];
        for lam in p.frac_eigenvalues() {
            for (i, v) in r.iter_mut().enumerate() {
                *v = ramp.ramp_unchecked(lam, i as f64 * tau);
            }
            weights.extend(r.windows(2).map(|w| w[1] - w[0]));
        }
        let projector = SourceProjector::new(&p.source, n)?;
        Ok(ClassicalSolver {
            params: p.clone(),
            weights,
            projector,
        })
    }

    /// `W_{m,k}` for zero-based `m` and one-based mode `k`.
    pub fn weight(&self, m: usize, k: usize) -> f64 {
        self.weights[(k - 1) * self.params.steps + m]
    }

    fn march(&self, noise: &NoiseSample, mut keep: impl FnMut(&[f64])) -> Result<Vec<f64>> {
        self.params.check_noise(noise)?;
        let (n, m) = (self.params.n_modes, self.params.steps);
        let inv_tau = 1.0 / self.params.tau();
        // forcing history stored backwards: rev[k * M + (M - i)] = g^i_k
        let mut rev = vec![0.0; n * m];
        let mut u = vec![0.0; n];
        let mut fhat = vec![0.0; n];
        let mut scratch = self.projector.scratch();
        keep(&u);
        for step in 1..=m {
            self.projector.project(&u, &mut scratch, &mut fhat);
            for k in 0..n {
                rev[k * m + m - step] = fhat[k] + noise.get(k, step - 1) * inv_tau;
            }
            for (k, uk) in u.iter_mut().enumerate() {
                let w = &self.weights[k * m..k * m + step];
                let g = &rev[k * m + m - step..(k + 1) * m];
                *uk = dot(w, g);
            }
            keep(&u);
        }
        Ok(u)
    }
}

impl Solver for ClassicalSolver {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn variant(&self) -> Variant {
        Variant::Classical
    }

    fn solve(&self, noise: &NoiseSample) -> Result<SchemeTrajectory> {
        let mut states = Vec::with_capacity(self.params.steps + 1);
        self.march(noise, |u| {
            states.push(SpectralState::from_coeffs(u.to_vec()))
        })?;
        Ok(SchemeTrajectory {
            states,
            params: self.params.clone(),
            variant: Variant::Classical,
        })
    }

    fn solve_final(&self, noise: &NoiseSample) -> Result<SpectralState> {
        Ok(SpectralState::from_coeffs(self.march(noise, |_| {})?))
    }
}
