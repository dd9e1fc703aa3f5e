//! Mittag-Leffler functions `E_{a,b}(z) = Σ_k z^k / Γ(a k + b)`.
//!
//! Three evaluation paths are combined:
//!
//! * the power series, for `|z| <= 1` (and as a fallback off the negative
//!   real axis),
//! * a Bromwich integral of `s^{a-b} / (s^a - z)` along a fixed hyperbolic
//!   contour ([`crate::contour`]), used on the negative real axis for `a <= 1`,
//! * the large-argument expansion `-Σ_{k>=1} z^{-k} / Γ(b - a k)` plus the
//!   residues of the poles `s^a = z` on the principal sheet.
//!
//! The negative real axis `z = -x`, `x >= 0`, is the hot path: the solvers
//! need `E_{a,b}(-λ t^a)` for every mode and every time level. A
//! [`MittagLeffler`] caches everything that depends only on `(a, b)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::contour::{ContourParams, ContourRule};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlfParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MlfParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = MlfParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(invalid(format!(
                "alpha must lie in (0, 2], got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() {
            return Err(invalid(format!("beta must be finite, got {}", self.beta)));
        }
        Ok(())
    }
}

/// `E_{alpha,beta}(z)`.
pub fn ml(p: MlfParams, z: Complex64) -> Result<Complex64> {
    MittagLeffler::new(p)?.eval(z)
}

/// `t^{beta-1} E_{alpha,beta}(-lambda_s t^alpha)`.
pub fn ml_kernel(p: MlfParams, lambda_s: f64, t: f64) -> Result<f64> {
    MittagLeffler::new(p)?.kernel(lambda_s, t)
}

/// `1/Γ(x)`, exactly zero at the poles of Γ.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 171.7 {
        return 0.0;
    }
    1.0 / libm::tgamma(x)
}

/// Rounds `x` onto a non-positive integer it misses only by rounding, so
/// that e.g. `0.6 - 3 * 0.2` hits the pole of `Γ` and its coefficient vanishes.
fn snap_pole(x: f64) -> f64 {
    let r = x.round();
    if r <= 0.0 && (x - r).abs() <= 1e-12 * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

const SERIES_RADIUS: f64 = 1.0;
/// Below this the large-argument expansion is not tried on the negative axis.
const ASYMPTOTIC_MIN: f64 = 20.0;
const MAX_SERIES_TERMS: usize = 4000;

/// Contour used for the Bromwich representation at `t = 1`: 65 nodes with
/// step 0.1 (`q = 0.16/pi` at `L = 32`). Relative accuracy is a few ulp over
/// `a` in `(0, 1]`, `b` in `[0.5, 2]` and `x` up to `10^3`.
fn ml_contour() -> &'static ContourRule {
    static RULE: OnceLock<ContourRule> = OnceLock::new();
    RULE.get_or_init(|| {
        ContourRule::new(&ContourParams {
            half_nodes: 32,
            mu: 4.0,
            nu: 0.9,
            q: 0.16 / PI,
        })
        .expect("built-in contour is valid")
    })
}

/// Series evaluation together with an estimate of its rounding error.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValue {
    pub value: Complex64,
    /// `eps * Σ |terms|`: an upper estimate of the absolute rounding error.
    pub rounding: f64,
    pub converged: bool,
}

/// Evaluator for one `(alpha, beta)` pair.
#[derive(Debug, Clone)]
pub struct MittagLeffler {
    p: MlfParams,
    /// `1/Γ(a k + b)`, `k = 0, 1, ...`
    series_coef: Vec<f64>,
    /// `1/Γ(b - a k)`, `k = 1, 2, ...`
    asym_coef: Vec<f64>,
    /// Per contour node `j >= 0`: `w_j e^{s_j} s_j^{a-b}` and `s_j^a`.
    contour_num: Vec<Complex64>,
    contour_pow: Vec<Complex64>,
}

impl MittagLeffler {
    pub fn new(p: MlfParams) -> Result<Self> {
        p.validate()?;
        let series_coef: Vec<f64> = (0..MAX_SERIES_TERMS)
            .map(|k| rgamma(snap_pole(p.alpha * k as f64 + p.beta)))
            .collect();
        let asym_coef: Vec<f64> = (1..=60)
            .map(|k| rgamma(snap_pole(p.beta - p.alpha * k as f64)))
            .collect();
        let rule = ml_contour();
        let mut contour_num = Vec::with_capacity(rule.half_nodes() + 1);
        let mut contour_pow = Vec::with_capacity(rule.half_nodes() + 1);
        for (j, (s, w)) in rule.upper_half().enumerate() {
            let pair = if j == 0 { 1.0 } else { 2.0 };
            contour_num.push(pair * w * s.exp() * s.powf(p.alpha - p.beta));
            contour_pow.push(s.powf(p.alpha));
        }
        Ok(MittagLeffler {
            p,
            series_coef,
            asym_coef,
            contour_num,
            contour_pow,
        })
    }

    pub fn params(&self) -> MlfParams {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.p.alpha
    }

    pub fn beta(&self) -> f64 {
        self.p.beta
    }

    /// `E_{a,b}(z)` for complex `z`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(invalid(format!("argument must be finite, got {z}")));
        }
        if z.im == 0.0 && z.re <= 0.0 {
            return Ok(Complex64::new(self.eval_neg(-z.re), 0.0));
        }
        if z.norm() <= SERIES_RADIUS {
            return Ok(self.series(z).value);
        }
        let a = self.p.alpha;
        let arg = z.arg().abs();
        // no pole of (s^a - z)^{-1} on the principal sheet: plain Bromwich integral
        if a <= 1.0 && arg >= a * PI + 0.05 {
            return Ok(self.integral(z));
        }
        if let Some(v) = self.asymptotic(z) {
            return Ok(v);
        }
        let s = self.series(z);
        if s.converged && s.rounding <= 1e-10 * s.value.norm() {
            return Ok(s.value);
        }
        Err(Error::Singular(format!(
            "E_{{{},{}}}({}) cannot be evaluated to working accuracy",
            a, self.p.beta, z
        )))
    }

    /// `E_{a,b}(-x)` for `x >= 0`.
    ///
    /// Panics in debug builds on negative or non-finite `x`.
    pub fn eval_neg(&self, x: f64) -> f64 {
        debug_assert!(
            x >= 0.0 && x.is_finite(),
            "eval_neg needs finite x >= 0, got {x}"
        );
        if x <= SERIES_RADIUS {
            return self.series_neg(x);
        }
        let (a, b) = (self.p.alpha, self.p.beta);
        if a == 1.0 && b == b.floor() && (1.0..=8.0).contains(&b) {
            return exp_like(b as i32, -x);
        }
        if x >= ASYMPTOTIC_MIN {
            if let Some(v) = self.asymptotic_neg(x) {
                return v;
            }
        }
        if a <= 1.0 {
            return self.integral_neg(x);
        }
        // a in (1, 2]: the poles sit close to any fixed contour; series until
        // its cancellation becomes unacceptable, then the expansion regardless
        let s = self.series(Complex64::new(-x, 0.0));
        if s.converged && s.rounding <= 1e-9 * s.value.norm() {
            return s.value.re;
        }
        self.asymptotic_neg_forced(x)
    }

    /// `t^{b-1} E_{a,b}(-lambda_s t^a)`.
    pub fn kernel(&self, lambda_s: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("t must be finite and >= 0, got {t}")));
        }
        if !(lambda_s >= 0.0 && lambda_s.is_finite()) {
            return Err(invalid(format!(
                "lambda_s must be finite and >= 0, got {lambda_s}"
            )));
        }
        let b = self.p.beta;
        if t == 0.0 {
            if b < 1.0 {
                return Err(Error::Singular(format!(
                    "t^(beta-1) at t = 0 with beta = {b}"
                )));
            }
            return Ok(if b == 1.0 { self.series_coef[0] } else { 0.0 });
        }
        let x = lambda_s * t.powf(self.p.alpha);
        Ok(t.powf(b - 1.0) * self.eval_neg(x))
    }

    /// `t E_{a,2}(-lambda_s t^a)` without argument checks, `b` assumed 2.
    #[inline]
    pub(crate) fn ramp_unchecked(&self, lambda_s: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        t * self.eval_neg(lambda_s * t.powf(self.p.alpha))
    }

    /// Power series path.
    pub fn series(&self, z: Complex64) -> SeriesValue {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut abs_sum = 0.0;
        let mut zk = Complex64::new(1.0, 0.0);
        let mut converged = false;
        let mut small_run = 0;
        for (k, &c) in self.series_coef.iter().enumerate() {
            let term = zk * c;
            sum += term;
            let m = term.norm();
            abs_sum += m;
            // stop once several consecutive terms are negligible (coefficients
            // can vanish at poles of Γ, so one small term is not enough)
            if k > 2 && m <= 1e-17 * sum.norm().max(1e-300) {
                small_run += 1;
                if small_run >= 3 {
                    converged = true;
                    break;
                }
            } else {
                small_run = 0;
            }
            zk *= z;
            if !zk.norm().is_finite() {
                break;
            }
        }
        SeriesValue {
            value: sum,
            rounding: f64::EPSILON * abs_sum,
            converged,
        }
    }

    fn series_neg(&self, x: f64) -> f64 {
        let mut sum = 0.0;
        let mut xk = 1.0;
        let mut small_run = 0;
        for &c in &self.series_coef {
            let term = xk * c;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                small_run += 1;
                if small_run >= 3 {
                    break;
                }
            } else {
                small_run = 0;
            }
            xk *= -x;
            if xk == 0.0 {
                break;
            }
        }
        sum
    }

    /// Bromwich integral path at a general `z` (no pole enclosed or excluded).
    pub fn integral(&self, z: Complex64) -> Complex64 {
        let rule = ml_contour();
        let (a, b) = (self.p.alpha, self.p.beta);
        rule.invert_complex(1.0, |s| s.powf(a - b) / (s.powf(a) - z))
    }

    /// Bromwich integral path on the negative real axis, `E_{a,b}(-x)`.
    pub fn integral_neg(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (num, pw) in self.contour_num.iter().zip(&self.contour_pow) {
            // Re(num / (pw + x)) without a complex division
            let dr = pw.re + x;
            let di = pw.im;
            acc += (num.re * dr + num.im * di) / (dr * dr + di * di);
        }
        acc
    }

    /// Residues `(1/a) s^{1-b} e^{s}` of the poles `s^a = z` with `|arg s| <= pi`.
    fn pole_terms(&self, z: Complex64) -> Complex64 {
        let a = self.p.alpha;
        let b = self.p.beta;
        let r = z.norm().powf(1.0 / a);
        let th = z.arg();
        let mut acc = Complex64::new(0.0, 0.0);
        // arguments (th + 2 pi m)/a inside (-pi, pi]
        let m_lo = ((-PI * a - th) / (2.0 * PI)).floor() as i64 - 1;
        let m_hi = ((PI * a - th) / (2.0 * PI)).ceil() as i64 + 1;
        for m in m_lo..=m_hi {
            let phi = (th + 2.0 * PI * m as f64) / a;
            if phi > -PI && phi <= PI {
                let s = Complex64::from_polar(r, phi);
                acc += s.powf(1.0 - b) * s.exp() / a;
            }
        }
        acc
    }

    /// Large-argument expansion, truncated optimally. `None` if the smallest
    /// term is not negligible.
    pub fn asymptotic(&self, z: Complex64) -> Option<Complex64> {
        let poles = self.pole_terms(z);
        let inv = 1.0 / z;
        let mut zk = inv;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut prev = f64::INFINITY;
        for &c in &self.asym_coef {
            if c != 0.0 {
                let term = zk * c;
                let m = term.norm();
                if m > prev {
                    return None;
                }
                sum -= term;
                if m <= 1e-17 * (sum + poles).norm() {
                    return Some(sum + poles);
                }
                prev = m;
            }
            zk *= inv;
        }
        // every coefficient vanished: the pole terms are the whole function
        prev.is_infinite().then_some(poles)
    }

    fn asymptotic_neg(&self, x: f64) -> Option<f64> {
        let z = Complex64::new(-x, 0.0);
        if self.p.alpha < 1.0 {
            // no principal-sheet poles; the inverse-power part alone
            let mut sum: f64 = 0.0;
            let mut xk = -1.0 / x;
            let mut prev = f64::INFINITY;
            for &c in &self.asym_coef {
                let term = xk * c;
                let m = term.abs();
                if c != 0.0 {
                    if m > prev {
                        return None;
                    }
                    if m <= 1e-17 * sum.abs() {
                        return Some(sum - term);
                    }
                    prev = m;
                }
                sum -= term;
                xk *= -1.0 / x;
            }
            return None;
        }
        self.asymptotic(z).map(|v| v.re)
    }

    fn asymptotic_neg_forced(&self, x: f64) -> f64 {
        let z = Complex64::new(-x, 0.0);
        let inv = 1.0 / z;
        let mut zk = inv;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut prev = f64::INFINITY;
        for &c in &self.asym_coef {
            let term = zk * c;
            if c != 0.0 {
                if term.norm() > prev {
                    break;
                }
                prev = term.norm();
            }
            sum -= term;
            zk *= inv;
        }
        (sum + self.pole_terms(z)).re
    }
}

/// `E_{1,m}(z) = z^{1-m} (e^z - Σ_{k<m-1} z^k/k!)`, evaluated without the
/// cancellation of the closed form where `|z|` is small.
fn exp_like(m: i32, z: f64) -> f64 {
    match m {
        1 => z.exp(),
        2 => z.exp_m1() / z,
        _ => {
            // downward recursion E_{1,m+1}(z) = (E_{1,m}(z) - 1/(m-1)!) / z
            let mut e = z.exp_m1() / z;
            let mut fact = 1.0;
            for k in 2..m {
                fact *= (k - 1) as f64;
                e = (e - 1.0 / fact) / z;
            }
            e
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exponential_special_case() {
        let p = MlfParams::new(1.0, 1.0).unwrap();
        let v = ml(p, Complex64::new(-1.0, 0.0)).unwrap();
        assert!(rel(v.re, (-1.0f64).exp()) < 1e-15);
        let v = ml(p, Complex64::new(0.3, 0.4)).unwrap();
        let e = Complex64::new(0.3, 0.4).exp();
        assert!((v - e).norm() < 1e-15);
        let v = ml(p, Complex64::new(3.0, 2.0)).unwrap();
        assert!((v - Complex64::new(3.0, 2.0).exp()).norm() < 1e-12 * v.norm());
    }

    #[test]
    fn value_at_origin() {
        let p = MlfParams::new(0.7, 1.0).unwrap();
        assert_eq!(ml(p, Complex64::new(0.0, 0.0)).unwrap().re, 1.0);
        let p = MlfParams::new(0.7, 2.0).unwrap();
        assert_eq!(ml(p, Complex64::new(0.0, 0.0)).unwrap().re, 1.0);
    }

    #[test]
    fn half_order_closed_form() {
        // E_{1/2,1}(-1) = e erfc(1)
        let p = MlfParams::new(0.5, 1.0).unwrap();
        let v = ml(p, Complex64::new(-1.0, 0.0)).unwrap().re;
        assert!(rel(v, 0.427_583_576_155_807) < 1e-14, "{v}");
    }

    #[test]
    fn second_kind_closed_form() {
        let p = MlfParams::new(1.0, 2.0).unwrap();
        let v = ml_kernel(p, 1.0, 2.0).unwrap();
        assert!(rel(v, 1.0 - (-2.0f64).exp()) < 1e-15);
        for &t in &[1e-8, 1e-3, 0.5, 3.0, 50.0] {
            let e = ml(p, Complex64::new(-t, 0.0)).unwrap().re;
            assert!(rel(e, -(-t).exp_m1() / t) < 1e-14, "t={t}");
        }
    }

    #[test]
    fn kernel_at_zero_time() {
        let p = MlfParams::new(0.5, 1.0).unwrap();
        assert_eq!(ml_kernel(p, 3.0, 0.0).unwrap(), 1.0);
        let p = MlfParams::new(0.5, 0.6).unwrap();
        assert!(matches!(ml_kernel(p, 3.0, 0.0), Err(Error::Singular(_))));
        let p = MlfParams::new(0.5, 2.0).unwrap();
        assert_eq!(ml_kernel(p, 3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MlfParams::new(0.0, 1.0).is_err());
        assert!(MlfParams::new(-0.5, 1.0).is_err());
        assert!(MlfParams::new(2.5, 1.0).is_err());
        let p = MlfParams::new(0.5, 1.0).unwrap();
        assert!(ml(p, Complex64::new(f64::NAN, 0.0)).is_err());
        assert!(ml(p, Complex64::new(f64::INFINITY, 0.0)).is_err());
        assert!(ml_kernel(p, -1.0, 1.0).is_err());
        assert!(ml_kernel(p, 1.0, -1.0).is_err());
    }

    #[test]
    fn second_order_is_cosine() {
        // E_{2,1}(-x^2) = cos x
        let p = MlfParams::new(2.0, 1.0).unwrap();
        for &x in &[0.5f64, 1.0, 2.0, 5.0, 10.0, 40.0] {
            let v = ml(p, Complex64::new(-x * x, 0.0)).unwrap().re;
            assert!((v - x.cos()).abs() < 1e-9, "x={x}: {v} vs {}", x.cos());
        }
    }

    #[test]
    fn nonpositive_beta() {
        // E_{1,0}(z) = z e^z
        let p = MlfParams::new(1.0, 0.0).unwrap();
        let v = ml(p, Complex64::new(-0.5, 0.0)).unwrap().re;
        assert!(rel(v, -0.5 * (-0.5f64).exp()) < 1e-14);
        let v = ml(p, Complex64::new(-5.0, 0.0)).unwrap().re;
        assert!(rel(v, -5.0 * (-5.0f64).exp()) < 1e-11, "{v}");
    }
}
