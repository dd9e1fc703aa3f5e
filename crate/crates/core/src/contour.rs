//! Hyperbolic Bromwich contour and its sinc (trapezoidal) quadrature rule.
//!
//! The contour is `rho(r) = mu * (1 - sin(nu + i r))`, `r` real. It opens to
//! the left, crosses the positive real axis at `mu * (1 - sin nu)` and has
//! asymptotes at angles `±(pi/2 + nu)`. With `2L + 1` nodes at `r_j = j h`,
//! `h = sqrt(2 pi q / L)`, the inverse Laplace transform
//!
//! ```text
//! f(t) = 1/(2 pi i) ∫ e^{zt} F(z) dz  ≈  Σ_j w_j e^{z_j t} F(z_j)
//! ```
//!
//! has error of order `exp(-sqrt(2 pi q L))` for transforms analytic in the
//! sector swept by the strip `|Im r| < q`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Parameters of the hyperbolic contour and its quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourParams {
    /// Half node count `L`; the rule has `2L + 1` nodes.
    pub half_nodes: usize,
    /// Contour scale.
    pub mu: f64,
    /// Contour angle, in `(0, pi/2)`.
    pub nu: f64,
    /// Half-width of the strip of analyticity; `q + nu < pi/2`.
    pub q: f64,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams {
            half_nodes: 200,
            mu: 7.0,
            nu: 0.1 * PI,
            q: 0.05 * PI,
        }
    }
}

impl ContourParams {
    pub fn validate(&self) -> Result<()> {
        if self.half_nodes == 0 {
            return Err(Error::InvalidContour("L must be at least 1".into()));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidContour(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.nu > 0.0 && self.nu < FRAC_PI_2) {
            return Err(Error::InvalidContour(format!(
                "nu must lie in (0, pi/2), got {}",
                self.nu
            )));
        }
        if self.q.is_nan() || self.q <= 0.0 {
            return Err(Error::InvalidContour(format!(
                "q must be positive, got {}",
                self.q
            )));
        }
        if self.q + self.nu >= FRAC_PI_2 {
            return Err(Error::InvalidContour(format!(
                "q + nu must be < pi/2 (q = {}, nu = {})",
                self.q, self.nu
            )));
        }
        Ok(())
    }

    /// Quadrature step `sqrt(2 pi q / L)`.
    pub fn step(&self) -> f64 {
        (2.0 * PI * self.q / self.half_nodes as f64).sqrt()
    }

    /// The `C = 1` reference scale `exp(-sqrt(2 pi q L))` of the quadrature error.
    pub fn error_bound(&self) -> f64 {
        (-(2.0 * PI * self.q * self.half_nodes as f64).sqrt()).exp()
    }
}

/// `exp(-sqrt(2 pi q L))`.
pub fn error_bound(p: &ContourParams) -> f64 {
    p.error_bound()
}

/// Nodes and weights of the sinc rule on the hyperbolic contour.
///
/// Stored in order `j = -L, ..., L`. Immutable once built.
#[derive(Debug, Clone)]
pub struct ContourRule {
    params: ContourParams,
    step: f64,
    nodes: Vec<Complex64>,
    weights: Vec<Complex64>,
}

/// Builds the `2L + 1` node rule for `p`.
pub fn build_rule(p: &ContourParams) -> Result<ContourRule> {
    ContourRule::new(p)
}

impl ContourRule {
    pub fn new(p: &ContourParams) -> Result<Self> {
        p.validate()?;
        let l = p.half_nodes;
        let h = p.step();
        let mut nodes = vec![Complex64::new(0.0, 0.0); 2 * l + 1];
        let mut weights = vec![Complex64::new(0.0, 0.0); 2 * l + 1];
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        for j in 0..=l {
            let r = j as f64 * h;
            let arg = Complex64::new(p.nu, r);
            let z = p.mu * (1.0 - arg.sin());
            // rho'(r) = -i mu cos(nu + i r)
            let drho = Complex64::new(0.0, -p.mu) * arg.cos();
            let w = -h / two_pi_i * drho;
            nodes[l + j] = z;
            weights[l + j] = w;
            // rho(-r) = conj(rho(r)) for real r
            nodes[l - j] = z.conj();
            weights[l - j] = w.conj();
        }
        nodes[l].im = 0.0;
        weights[l].im = 0.0;

        // principal branch of z^a is continuous along the rule: no node on the
        // closed negative real axis
        for (j, z) in nodes.iter().enumerate() {
            if !(z.im != 0.0 || z.re > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidContour(format!(
                    "node {} = {} sits on the branch cut or overflowed",
                    j as isize - l as isize,
                    z
                )));
            }
        }
        Ok(ContourRule {
            params: *p,
            step: h,
            nodes,
            weights,
        })
    }

    pub fn params(&self) -> &ContourParams {
        &self.params
    }

    pub fn half_nodes(&self) -> usize {
        self.params.half_nodes
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node `z_j`, `j` in `-L..=L`.
    pub fn node(&self, j: isize) -> Complex64 {
        self.nodes[self.index(j)]
    }

    /// Weight `w_j = -h/(2 pi i) rho'(j h)`.
    pub fn weight(&self, j: isize) -> Complex64 {
        self.weights[self.index(j)]
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Nodes `j = 0..=L` with their weights. Together with conjugation these
    /// determine the whole rule.
    pub fn upper_half(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let l = self.params.half_nodes;
        self.nodes[l..]
            .iter()
            .copied()
            .zip(self.weights[l..].iter().copied())
    }

    fn index(&self, j: isize) -> usize {
        let l = self.params.half_nodes as isize;
        assert!((-l..=l).contains(&j), "node index {j} outside [-{l}, {l}]");
        (j + l) as usize
    }

    /// Full complex quadrature sum `Σ_j w_j e^{z_j t} F(z_j)` over all `2L + 1` nodes.
    pub fn invert_complex<F>(&self, t: f64, transform: F) -> Complex64
    where
        F: Fn(Complex64) -> Complex64,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * (z * t).exp() * transform(z))
            .sum()
    }

    /// Real inverse transform for transforms with `F(conj z) = conj F(z)`,
    /// summing only `j >= 0` and doubling the conjugate pairs.
    pub fn invert_real<F>(&self, t: f64, transform: F) -> f64
    where
        F: Fn(Complex64) -> Complex64,
    {
        let mut it = self.upper_half();
        let (z0, w0) = it.next().expect("rule has a centre node");
        let mut acc = (w0 * (z0 * t).exp() * transform(z0)).re;
        for (z, w) in it {
            acc += 2.0 * (w * (z * t).exp() * transform(z)).re;
        }
        acc
    }

    /// Warns when `e^{z_0 t}` can grow large enough to swamp the result.
    pub fn check_horizon(&self, t_max: f64) -> bool {
        let ok = self.params.mu * t_max <= 30.0;
        if !ok {
            log::warn!(
                "contour scale mu = {} with horizon T = {} gives mu*T > 30; expect loss of accuracy",
                self.params.mu,
                t_max
            );
        }
        ok
    }
}

/// Transform `z^{alpha-2} / (z^alpha + lambda_s)`, whose inverse Laplace
/// transform is `t E_{alpha,2}(-lambda_s t^alpha)`.
#[inline]
pub(crate) fn ramp_transform(z: Complex64, alpha: f64, lambda_s: f64) -> Complex64 {
    let za = z.powf(alpha);
    za / (z * z * (za + lambda_s))
}

/// Quadrature approximation of `∫_0^t E_{alpha,1}(-lambda_s r^alpha) dr
/// = t E_{alpha,2}(-lambda_s t^alpha)`. Returns 0 at `t = 0`.
pub fn kernel_weights(rule: &ContourRule, alpha: f64, lambda_s: f64, t: f64) -> Result<f64> {
    check_kernel_args(alpha, lambda_s, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(rule.invert_real(t, |z| ramp_transform(z, alpha, lambda_s)))
}

/// Same sum as [`kernel_weights`] over all nodes, without dropping the
/// imaginary part.
pub fn kernel_weights_complex(
    rule: &ContourRule,
    alpha: f64,
    lambda_s: f64,
    t: f64,
) -> Result<Complex64> {
    check_kernel_args(alpha, lambda_s, t)?;
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(rule.invert_complex(t, |z| ramp_transform(z, alpha, lambda_s)))
}

fn check_kernel_args(alpha: f64, lambda_s: f64, t: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(lambda_s >= 0.0 && lambda_s.is_finite()) {
        return Err(invalid(format!(
            "lambda_s must be finite and >= 0, got {lambda_s}"
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be finite and >= 0, got {t}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_rule() -> ContourRule {
        build_rule(&ContourParams::default()).unwrap()
    }

    #[test]
    fn step_and_centre_node() {
        let rule = default_rule();
        assert!((rule.step() - 0.070_248_15).abs() < 1e-8, "{}", rule.step());
        let z0 = rule.node(0);
        assert!((z0.re - 7.0 * (1.0 - (0.1 * PI).sin())).abs() < 1e-14);
        assert!((z0.re - 4.8368).abs() < 1e-4);
        assert_eq!(z0.im, 0.0);
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        let rule = build_rule(&ContourParams {
            half_nodes: 37,
            ..Default::default()
        })
        .unwrap();
        for j in 1..=37isize {
            assert_eq!(rule.node(-j), rule.node(j).conj());
            assert_eq!(rule.weight(-j), rule.weight(j).conj());
        }
    }

    #[test]
    fn nodes_run_off_to_the_left() {
        let rule = default_rule();
        let mu = rule.params().mu;
        for j in 1..=200isize {
            assert!(rule.node(j).re < mu);
            assert!(rule.node(j).re < rule.node(j - 1).re);
        }
        assert!(rule.node(200).re < -1e5);
    }

    #[test]
    fn weight_matches_analytic_derivative() {
        let rule = default_rule();
        let p = rule.params();
        for j in -200..=200isize {
            let expect = rule.step() * p.mu / (2.0 * PI)
                * Complex64::new(p.nu, j as f64 * rule.step()).cos();
            let got = rule.weight(j);
            assert!(
                (got - expect).norm() <= 1e-14 * expect.norm().max(1.0),
                "j={j}"
            );
        }
    }

    #[test]
    fn error_bound_values() {
        let p = ContourParams::default();
        let e200 = error_bound(&p);
        assert!((e200.ln() + (0.1 * PI * PI * 200.0).sqrt()).abs() < 1e-12);
        assert!((e200 - 7.9e-7).abs() < 0.05e-7, "{e200}");
        let e50 = error_bound(&ContourParams {
            half_nodes: 50,
            ..p
        });
        assert!((e50 - 8.9e-4).abs() < 0.05e-4, "{e50}");
        let e800 = error_bound(&ContourParams {
            half_nodes: 800,
            ..p
        });
        assert!((e800 / (e200 * e200) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_contours() {
        let p = ContourParams::default();
        assert!(matches!(
            build_rule(&ContourParams {
                q: 1.0,
                nu: 0.6,
                ..p
            }),
            Err(Error::InvalidContour(_))
        ));
        assert!(build_rule(&ContourParams { half_nodes: 0, ..p }).is_err());
        assert!(build_rule(&ContourParams { mu: -1.0, ..p }).is_err());
        assert!(build_rule(&ContourParams { nu: 0.0, ..p }).is_err());
    }

    #[test]
    fn pure_ramp_when_lambda_vanishes() {
        let rule = default_rule();
        for &t in &[1e-4, 0.01, 0.05, 0.1] {
            let v = kernel_weights(&rule, 0.6, 0.0, t).unwrap();
            assert!(
                (v - t).abs() < 10.0 * rule.params().error_bound(),
                "t={t}: {v}"
            );
        }
        assert_eq!(kernel_weights(&rule, 0.6, 3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn near_unit_alpha_matches_exponential() {
        // at alpha = 1, t E_{1,2}(-t) = 1 - e^{-t}
        let rule = default_rule();
        let v = kernel_weights(&rule, 0.999, 1.0, 1.0).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 2e-3, "{v}");
    }

    #[test]
    fn quadrature_sum_is_real() {
        let rule = default_rule();
        for &(a, l, t) in &[(0.3, 9.87, 0.01), (0.7, 100.0, 0.1), (0.5, 1e4, 1e-3)] {
            let c = kernel_weights_complex(&rule, a, l, t).unwrap();
            assert!(c.im.abs() <= 1e-13 * c.norm(), "{c}");
            let r = kernel_weights(&rule, a, l, t).unwrap();
            assert!((r - c.re).abs() <= 1e-13 * c.norm());
        }
    }
}
