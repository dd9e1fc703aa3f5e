//! Monte Carlo convergence experiments and timings.
//!
//! The error estimators compare solutions on one noise path at two adjacent
//! resolutions,
//!
//! ```text
//! e_τ = (1/l Σ_i ‖u_τ(ω_i) − u_{τ/2}(ω_i)‖²)^{1/2},
//! e_N = (1/l Σ_i ‖u^M_N(ω_i) − u^M_{2N}(ω_i)‖²)^{1/2},
//! ```
//!
//! and rates are `ln(e_r / e_{2r}) / ln 2`. Each path is sampled once at the
//! finest resolution; coarser levels see the aggregated (time) or truncated
//! (space) coefficients of the same sample.

mod output;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

pub use output::{write_errors_csv, write_plot_data, write_rates_csv, write_timing_csv};

use crate::basis::SpectralState;
use crate::contour::{ContourParams, ContourRule};
use crate::error::{config, Error, Result};
use crate::noise::{coarsen_time, truncate_modes, NoiseModel, NoiseSample};
use crate::parallel::par_map;
use crate::scheme::{ClassicalSolver, FastSolver, ModelParams, SchemeTrajectory, Solver, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Spatial,
    Temporal,
    Timing,
    Single,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spatial" => Ok(Mode::Spatial),
            "temporal" => Ok(Mode::Temporal),
            "timing" => Ok(Mode::Timing),
            "single" => Ok(Mode::Single),
            other => Err(config(format!(
                "unknown mode '{other}', expected spatial, temporal, timing or single"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Spatial => "spatial",
            Mode::Temporal => "temporal",
            Mode::Timing => "timing",
            Mode::Single => "single",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" => Ok(Variant::Classical),
            "fast" => Ok(Variant::Fast),
            other => Err(config(format!(
                "unknown solver '{other}', expected classical or fast"
            ))),
        }
    }
}

/// One experiment. `model` fixes everything but the resolution being swept:
/// its `steps` for spatial runs, its `n_modes` for temporal ones, both for
/// timing (`n_modes`) and single runs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub contour: ContourParams,
    /// Number of Monte Carlo paths `l`.
    pub samples: usize,
    /// Ladder of `N` (spatial) or `M` (temporal, timing); each entry doubles
    /// the previous one.
    pub resolutions: Vec<usize>,
    pub mode: Mode,
    pub master_seed: u64,
    /// Solver used by the convergence experiments.
    pub solver: Variant,
    /// Worker threads for independent paths; 0 uses every core.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.contour.validate()?;
        if matches!(self.mode, Mode::Spatial | Mode::Temporal) && self.samples == 0 {
            return Err(config("need at least one sample path"));
        }
        if self.mode != Mode::Single {
            if self.resolutions.is_empty() {
                return Err(config("resolution ladder is empty"));
            }
            if self.resolutions[0] == 0 {
                return Err(config("resolutions must be positive"));
            }
            for w in self.resolutions.windows(2) {
                if w[1] != 2 * w[0] {
                    return Err(config(format!(
                        "each ladder entry must double the previous one, got {} then {}",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn rule(&self) -> Result<ContourRule> {
        ContourRule::new(&self.contour)
    }
}

/// `(spatial, temporal)` exponents:
/// `min{2sH2/α + H1 − 1, H1 + 2s − 1}` and `H2 + α(H1 − 1)/(2s)`.
/// Non-positive values are returned as they are; see [`ModelParams::warnings`].
pub fn theoretical_rates(p: &ModelParams) -> (f64, f64) {
    let (a, s) = (p.alpha, p.s);
    let (h1, h2) = (p.hurst.h1, p.hurst.h2);
    let spatial = (2.0 * s * h2 / a + h1 - 1.0).min(h1 + 2.0 * s - 1.0);
    let temporal = h2 + a * (h1 - 1.0) / (2.0 * s);
    (spatial, temporal)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub resolution: usize,
    pub error: f64,
    /// Standard error of `error` across paths (delta method).
    pub stderr: f64,
    /// Rate from the previous row into this one; `None` on the first row or
    /// when either error vanishes.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub mode: Mode,
    pub rows: Vec<ErrorRow>,
    pub observed_mean: Option<f64>,
    pub theoretical: f64,
}

/// `ln(e_coarse / e_fine) / ln 2`.
pub fn pairwise_rate(e_coarse: f64, e_fine: f64) -> Option<f64> {
    (e_coarse > 0.0 && e_fine > 0.0).then(|| (e_coarse / e_fine).ln() / std::f64::consts::LN_2)
}

impl ErrorTable {
    /// Table from per-path squared differences: `sq[i][level]`.
    fn from_squared(mode: Mode, ladder: &[usize], sq: &[Vec<f64>], theoretical: f64) -> Self {
        let l = sq.len() as f64;
        let mut rows: Vec<ErrorRow> = Vec::with_capacity(ladder.len());
        for (lev, &res) in ladder.iter().enumerate() {
            // ascending path index: bit-reproducible whatever the worker count
            let mean = sq.iter().map(|p| p[lev]).sum::<f64>() / l;
            let var = if sq.len() > 1 {
                sq.iter().map(|p| (p[lev] - mean).powi(2)).sum::<f64>() / (l - 1.0)
            } else {
                0.0
            };
            let error = mean.sqrt();
            let stderr = if error > 0.0 {
                (var / l).sqrt() / (2.0 * error)
            } else {
                0.0
            };
            let rate = rows
                .last()
                .and_then(|prev| pairwise_rate(prev.error, error));
            rows.push(ErrorRow {
                resolution: res,
                error,
                stderr,
                rate,
            });
        }
        let rates: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        let observed_mean =
            (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
        ErrorTable {
            mode,
            rows,
            observed_mean,
            theoretical,
        }
    }
}

fn build_solver(p: &ModelParams, variant: Variant, rule: &ContourRule) -> Result<Arc<dyn Solver>> {
    Ok(match variant {
        Variant::Classical => Arc::new(ClassicalSolver::new(p)?),
        Variant::Fast => Arc::new(FastSolver::new(p, rule)?),
    })
}

/// Ladder plus the doubled top level every difference needs.
fn levels(ladder: &[usize]) -> Vec<usize> {
    let mut v = ladder.to_vec();
    v.push(2 * ladder[ladder.len() - 1]);
    v
}

/// Squared adjacent-level distances of one path.
fn adjacent_sq(finals: &[SpectralState]) -> Vec<f64> {
    finals
        .windows(2)
        .map(|w| w[0].l2_distance(&w[1]).powi(2))
        .collect()
}

/// Temporal self-convergence at fixed `N = cfg.model.n_modes`.
pub fn temporal_convergence(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    let rule = cfg.rule()?;
    let steps = levels(&cfg.resolutions);
    let finest = *steps.last().expect("non-empty");
    let p = &cfg.model;
    let solvers = steps
        .iter()
        .map(|&m| build_solver(&p.clone().with_resolution(p.n_modes, m), cfg.solver, &rule))
        .collect::<Result<Vec<_>>>()?;
    let noise = NoiseModel::new(p.hurst, p.n_modes, finest, p.t_final, cfg.master_seed)?;
    let sq = par_map(cfg.samples, cfg.workers, |i| {
        let fine = noise.sample(i as u64);
        let finals = steps
            .iter()
            .zip(&solvers)
            .map(|(&m, s)| s.solve_final(&coarsen_time(&fine, finest / m)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(adjacent_sq(&finals))
    })?;
    Ok(ErrorTable::from_squared(
        Mode::Temporal,
        &cfg.resolutions,
        &sq,
        theoretical_rates(p).1,
    ))
}

/// Spatial self-convergence at fixed `M = cfg.model.steps`.
pub fn spatial_convergence(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    let rule = cfg.rule()?;
    let modes = levels(&cfg.resolutions);
    let largest = *modes.last().expect("non-empty");
    let p = &cfg.model;
    let solvers = modes
        .iter()
        .map(|&n| build_solver(&p.clone().with_resolution(n, p.steps), cfg.solver, &rule))
        .collect::<Result<Vec<_>>>()?;
    let noise = NoiseModel::new(p.hurst, largest, p.steps, p.t_final, cfg.master_seed)?;
    let sq = par_map(cfg.samples, cfg.workers, |i| {
        let full = noise.sample(i as u64);
        let finals = modes
            .iter()
            .zip(&solvers)
            .map(|(&n, s)| s.solve_final(&truncate_modes(&full, n)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(adjacent_sq(&finals))
    })?;
    Ok(ErrorTable::from_squared(
        Mode::Spatial,
        &cfg.resolutions,
        &sq,
        theoretical_rates(p).0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub steps: usize,
    pub classical_seconds: f64,
    pub fast_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
    pub classical_slope: Option<f64>,
    pub fast_slope: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || x.iter().chain(y).any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fastest of `repeats` solves, in seconds.
fn time_solve(solver: &dyn Solver, noise: &NoiseSample, repeats: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        std::hint::black_box(solver.solve_final(std::hint::black_box(noise))?);
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Wall-clock of one solve of each variant over the `M` ladder, on a single
/// thread. Solver setup (weight tables, contour coefficients) is excluded:
/// it is paid once per parameter set, not per path.
pub fn timing_compare(cfg: &ExperimentConfig) -> Result<TimingTable> {
    timing_compare_with(cfg, 3)
}

pub fn timing_compare_with(cfg: &ExperimentConfig, repeats: usize) -> Result<TimingTable> {
    cfg.validate()?;
    let rule = cfg.rule()?;
    let p = &cfg.model;
    let mut rows = Vec::with_capacity(cfg.resolutions.len());
    for &m in &cfg.resolutions {
        let q = p.clone().with_resolution(p.n_modes, m);
        let noise = NoiseModel::new(p.hurst, p.n_modes, m, p.t_final, cfg.master_seed)?.sample(0);
        let classical = ClassicalSolver::new(&q)?;
        let fast = FastSolver::new(&q, &rule)?;
        let classical_seconds = time_solve(&classical, &noise, repeats)?;
        let fast_seconds = time_solve(&fast, &noise, repeats)?;
        log::info!("M = {m}: classical {classical_seconds:.4e} s, fast {fast_seconds:.4e} s");
        rows.push(TimingRow {
            steps: m,
            classical_seconds,
            fast_seconds,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.steps as f64).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.classical_seconds).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.fast_seconds).collect();
    Ok(TimingTable {
        rows,
        classical_slope: loglog_slope(&x, &c),
        fast_slope: loglog_slope(&x, &f),
    })
}

/// One path at the model's `(N, M)` with the configured solver.
pub fn single_run(cfg: &ExperimentConfig) -> Result<(NoiseSample, SchemeTrajectory)> {
    cfg.validate()?;
    let rule = cfg.rule()?;
    let p = &cfg.model;
    let noise = NoiseModel::new(p.hurst, p.n_modes, p.steps, p.t_final, cfg.master_seed)?.sample(0);
    let traj = build_solver(p, cfg.solver, &rule)?.solve(&noise)?;
    Ok((noise, traj))
}
