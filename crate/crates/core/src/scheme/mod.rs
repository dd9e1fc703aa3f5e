//! Fully discrete solvers.
//!
//! Both variants march the spectral coefficients
//!
//! ```text
//! u^n_k = Σ_{i=1}^{n} W_{n-i,k} (f̂^{i-1}_k + X[k][i] / τ),
//! W_{m,k} = t_{m+1} E_{α,2}(-λ_k^s t_{m+1}^α) - t_m E_{α,2}(-λ_k^s t_m^α),
//! ```
//!
//! where `f̂^{i-1}` is the projection of `f(u^{i-1})`. [`ClassicalSolver`]
//! evaluates the convolution directly in `O(N M^2)`; [`FastSolver`] replaces
//! `W` by its contour quadrature and carries the convolution in history
//! recurrences at `O(N L M)`.

mod classical;
mod fast;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

pub use classical::ClassicalSolver;
pub use fast::{FastSolver, HistoryBank};

use crate::basis::{constant_coefficient, eigenvalue, SineGrid, SineScratch, SpectralState};
use crate::contour::ContourRule;
use crate::error::{config, invalid, Result};
use crate::mlf::{MittagLeffler, MlfParams};
use crate::noise::{HurstPair, NoiseSample};

/// The deterministic forcing `f(u)`.
#[derive(Clone)]
pub enum SourceTerm {
    /// `f ≡ c`. Projected exactly, `(c, φ_k)`.
    Constant(f64),
    /// Pointwise map with its declared Lipschitz constant.
    Function {
        name: String,
        lipschitz: f64,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl SourceTerm {
    /// `f(u) = sin u`, Lipschitz constant 1.
    pub fn sine() -> Self {
        SourceTerm::function("sin", 1.0, f64::sin)
    }

    pub fn zero() -> Self {
        SourceTerm::Constant(0.0)
    }

    pub fn function(
        name: impl Into<String>,
        lipschitz: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SourceTerm::Function {
            name: name.into(),
            lipschitz,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> String {
        match self {
            SourceTerm::Constant(c) => format!("{c}"),
            SourceTerm::Function { name, .. } => name.clone(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            SourceTerm::Constant(_) => 0.0,
            SourceTerm::Function { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            SourceTerm::Constant(c) => Some(*c),
            SourceTerm::Function { .. } => None,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SourceTerm::Constant(c) => *c,
            SourceTerm::Function { f, .. } => f(u),
        }
    }
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTerm::Constant(c) => write!(f, "Constant({c})"),
            SourceTerm::Function {
                name, lipschitz, ..
            } => {
                write!(f, "Function({name}, L = {lipschitz})")
            }
        }
    }
}

impl Default for SourceTerm {
    fn default() -> Self {
        SourceTerm::sine()
    }
}

/// Model and discretisation parameters of one solve.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub alpha: f64,
    pub s: f64,
    pub hurst: HurstPair,
    pub t_final: f64,
    pub n_modes: usize,
    pub steps: usize,
    pub source: SourceTerm,
}

impl ModelParams {
    /// Parameters with `f = sin`; logs the rate-positivity warnings.
    pub fn new(
        alpha: f64,
        s: f64,
        hurst: HurstPair,
        t_final: f64,
        n_modes: usize,
        steps: usize,
    ) -> Result<Self> {
        let p = ModelParams {
            alpha,
            s,
            hurst,
            t_final,
            n_modes,
            steps,
            source: SourceTerm::sine(),
        };
        p.validate()?;
        for w in p.warnings() {
            log::warn!("{w}");
        }
        Ok(p)
    }

    pub fn with_source(mut self, source: SourceTerm) -> Self {
        self.source = source;
        self
    }

    pub fn with_resolution(mut self, n_modes: usize, steps: usize) -> Self {
        self.n_modes = n_modes;
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid(format!("s must lie in (0,1), got {}", self.s)));
        }
        HurstPair::new(self.hurst.h1, self.hurst.h2)?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid(format!(
                "T must be positive and finite, got {}",
                self.t_final
            )));
        }
        if self.n_modes == 0 {
            return Err(invalid("N must be at least 1"));
        }
        if self.steps == 0 {
            return Err(invalid("M must be at least 1"));
        }
        let l = self.source.lipschitz();
        if !(l >= 0.0 && l.is_finite()) {
            return Err(invalid(format!(
                "Lipschitz constant must be finite and >= 0, got {l}"
            )));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Non-fatal diagnostics: the regularity exponents the error analysis
    /// needs positive.
    pub fn warnings(&self) -> Vec<String> {
        let HurstPair { h1, h2 } = self.hurst;
        let mut out = Vec::new();
        let a = 2.0 * self.s * h2 / self.alpha + h1 - 1.0;
        if a <= 0.0 {
            out.push(format!(
                "2 s H2 / alpha + H1 - 1 = {a:.4} <= 0: no spatial rate is predicted"
            ));
        }
        let b = h1 + 2.0 * self.s - 1.0;
        if b <= 0.0 {
            out.push(format!(
                "H1 + 2 s - 1 = {b:.4} <= 0: no spatial rate is predicted"
            ));
        }
        out
    }

    /// `λ_k^s`, `k = 1..N`.
    pub fn frac_eigenvalues(&self) -> Vec<f64> {
        (1..=self.n_modes)
            .map(|k| eigenvalue(k).powf(self.s))
            .collect()
    }

    fn check_noise(&self, noise: &NoiseSample) -> Result<()> {
        if noise.n_modes() != self.n_modes || noise.steps() != self.steps {
            return Err(config(format!(
                "noise is {}x{} but the model needs N = {}, M = {}",
                noise.n_modes(),
                noise.steps(),
                self.n_modes,
                self.steps
            )));
        }
        if (noise.t_final() - self.t_final).abs() > 1e-12 * self.t_final {
            return Err(config(format!(
                "noise horizon {} differs from T = {}",
                noise.t_final(),
                self.t_final
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Classical,
    Fast,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Classical => "classical",
            Variant::Fast => "fast",
        })
    }
}

/// States `u^0 ... u^M` of one solve.
#[derive(Debug, Clone)]
pub struct SchemeTrajectory {
    pub states: Vec<SpectralState>,
    pub params: ModelParams,
    pub variant: Variant,
}

impl SchemeTrajectory {
    pub fn final_state(&self) -> &SpectralState {
        self.states.last().expect("trajectory holds u^0")
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.params.tau()
    }

    /// CSV with columns `n, t_n, coeff_1 ... coeff_N`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_rows(w, 0..self.states.len())
    }

    /// Same layout as [`write_csv`](Self::write_csv) with only the row `n = M`.
    pub fn write_final_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_rows(w, self.states.len() - 1..self.states.len())
    }

    fn write_rows<W: Write>(&self, mut w: W, rows: std::ops::Range<usize>) -> Result<()> {
        write!(w, "n,t_n")?;
        for k in 1..=self.params.n_modes {
            write!(w, ",coeff_{k}")?;
        }
        writeln!(w)?;
        for n in rows {
            write!(w, "{n},{}", self.time(n))?;
            for c in &self.states[n].coeffs {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// A solver prepared for one set of parameters, reusable across noise paths.
pub trait Solver: Send + Sync {
    fn params(&self) -> &ModelParams;

    fn variant(&self) -> Variant;

    /// Every state `u^0 ... u^M`.
    fn solve(&self, noise: &NoiseSample) -> Result<SchemeTrajectory>;

    /// Only `u^M`.
    fn solve_final(&self, noise: &NoiseSample) -> Result<SpectralState>;
}

/// `f̂ = P_N f(u)`: pseudo-spectral for general `f`, exact for constants.
pub(crate) struct SourceProjector {
    source: SourceTerm,
    grid: Option<SineGrid>,
    exact: Vec<f64>,
}

pub(crate) struct ProjectorScratch {
    sine: Option<SineScratch>,
    values: Vec<f64>,
}

impl SourceProjector {
    pub(crate) fn new(source: &SourceTerm, n_modes: usize) -> Result<Self> {
        let (grid, exact) = match source {
            SourceTerm::Constant(c) => (
                None,
                (1..=n_modes).map(|k| c * constant_coefficient(k)).collect(),
            ),
            SourceTerm::Function { .. } => (Some(SineGrid::new(n_modes)?), Vec::new()),
        };
        Ok(SourceProjector {
            source: source.clone(),
            grid,
            exact,
        })
    }

    pub(crate) fn scratch(&self) -> ProjectorScratch {
        match &self.grid {
            Some(g) => ProjectorScratch {
                sine: Some(g.scratch()),
                values: vec![0.0; g.intervals() - 1],
            },
            None => ProjectorScratch {
                sine: None,
                values: Vec::new(),
            },
        }
    }

    pub(crate) fn project(&self, u: &[f64], scratch: &mut ProjectorScratch, out: &mut [f64]) {
        match (&self.grid, &self.source) {
            (Some(g), SourceTerm::Function { f, .. }) => {
                let sine = scratch
                    .sine
                    .as_mut()
                    .expect("scratch built for this projector");
                g.synthesize(u, sine, &mut scratch.values);
                scratch.values.iter_mut().for_each(|v| *v = f(*v));
                g.analyze(&scratch.values, sine, out);
            }
            _ => out.copy_from_slice(&self.exact),
        }
    }
}

/// Exact solution for `f ≡ c` without noise:
/// `u_k(t) = c (1, φ_k) t E_{α,2}(-λ_k^s t^α)`.
pub fn linear_oracle(p: &ModelParams, t: f64) -> Result<SpectralState> {
    let c = p
        .source
        .constant()
        .ok_or_else(|| invalid("linear oracle needs a constant source"))?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be finite and >= 0, got {t}")));
    }
    let ramp = MittagLeffler::new(MlfParams::new(p.alpha, 2.0)?)?;
    let coeffs = p
        .frac_eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, &lam)| Ok(c * constant_coefficient(i + 1) * ramp.kernel(lam, t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralState::from_coeffs(coeffs))
}

pub fn solve_classical(p: &ModelParams, noise: &NoiseSample) -> Result<SchemeTrajectory> {
    ClassicalSolver::new(p)?.solve(noise)
}

pub fn solve_fast(
    p: &ModelParams,
    noise: &NoiseSample,
    rule: &ContourRule,
) -> Result<SchemeTrajectory> {
    FastSolver::new(p, rule)?.solve(noise)
}

/// `Σ a_i b_i` with eight interleaved partial sums, combined in a fixed order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hurst() -> HurstPair {
        HurstPair::new(0.5, 0.5).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelParams::new(0.7, 0.5, hurst(), 0.1, 8, 16).is_ok());
        let e = ModelParams::new(1.5, 0.5, hurst(), 0.1, 8, 16).unwrap_err();
        assert!(e.to_string().contains("alpha must lie in (0,1)"));
        assert!(ModelParams::new(0.7, 1.0, hurst(), 0.1, 8, 16).is_err());
        assert!(ModelParams::new(0.7, 0.5, hurst(), 0.0, 8, 16).is_err());
        assert!(ModelParams::new(0.7, 0.5, hurst(), 0.1, 0, 16).is_err());
        assert!(ModelParams::new(0.7, 0.5, hurst(), 0.1, 8, 0).is_err());
    }

    #[test]
    fn rate_positivity_warnings() {
        let p = ModelParams::new(0.7, 0.5, hurst(), 0.1, 8, 16).unwrap();
        assert!(p.warnings().is_empty());
        let q = ModelParams::new(0.9, 0.1, HurstPair::new(0.1, 0.1).unwrap(), 0.1, 8, 16).unwrap();
        assert_eq!(q.warnings().len(), 2);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-13);
        assert_eq!(dot(&[], &[]), 0.0);
    }

    #[test]
    fn oracle_heat_limit_shape() {
        let p = ModelParams::new(0.7, 0.5, hurst(), 0.1, 4, 4)
            .unwrap()
            .with_source(SourceTerm::Constant(0.0));
        assert!(linear_oracle(&p, 0.1)
            .unwrap()
            .coeffs
            .iter()
            .all(|&c| c == 0.0));
        let q = p.clone().with_source(SourceTerm::sine());
        assert!(linear_oracle(&q, 0.1).is_err());
        let one = p.with_source(SourceTerm::Constant(1.0));
        let s = linear_oracle(&one, 0.1).unwrap();
        assert_eq!(s.coeffs[1], 0.0);
        assert!(s.coeffs[0] > 0.0);
    }

    #[test]
    fn trajectory_csv_layout() {
        let p = ModelParams::new(0.7, 0.5, hurst(), 0.1, 2, 2).unwrap();
        let t = SchemeTrajectory {
            states: vec![
                SpectralState::zeros(2),
                SpectralState::from_coeffs(vec![0.5, -1.0]),
            ],
            params: p,
            variant: Variant::Classical,
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "n,t_n,coeff_1,coeff_2\n0,0,0,0\n1,0.05,0.5,-1\n");
    }
}
