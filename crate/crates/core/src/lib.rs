//! Solvers for the stochastic time-space fractional diffusion equation
//!
//! ```text
//! ∂_t u + ∂_t^{1-α} A^s u = f(u) + ξ^{H1,H2}(x, t),   x ∈ (0, 1), t ∈ (0, T]
//! ```
//!
//! with zero initial and Dirichlet boundary data, driven by the formal
//! derivative of a fractional Brownian sheet. Space is discretised by a sine
//! spectral Galerkin method, the noise by its Wong-Zakai (piecewise constant in
//! time, spectrally truncated in space) regularisation, and time by the
//! Mittag-Leffler Euler integrator, either directly (`O(M^2)`) or through a
//! hyperbolic-contour quadrature with `O(LM)` history recurrences.
//!
//! Module map:
//!
//! * [`mlf`]: Mittag-Leffler functions.
//! * [`contour`]: hyperbolic contour and sinc quadrature.
//! * [`basis`]: Dirichlet sine basis, projection, fractional powers.
//! * [`noise`]: Wong-Zakai coefficients of the fractional Brownian sheet.
//! * [`scheme`]: classical and fast integrators, linear oracle.
//! * [`harness`]: Monte Carlo error estimators, rates and timings.
//! * [`config`]: run configuration and the command-line driver.

pub mod basis;
pub mod config;
pub mod contour;
pub mod error;
pub mod harness;
pub mod mlf;
pub mod noise;
pub mod parallel;
pub mod scheme;

pub use error::{Error, Result};
