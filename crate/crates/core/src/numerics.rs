//! Scalar primitives shared by the solvers: the principal Lambert-W branch on
//! `[-1/e, 0]`, the marginal-rate function `h` and its inverse, monotone
//! bisection, clamps and the alpha-fair utility.

use std::f64::consts::{E, LN_2};

use crate::error::{Error, Result};

/// Stopping rule for iterative scalar routines.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        let tol = Self {
            abs_tol,
            rel_tol,
            max_iter,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 0.0 && self.rel_tol >= 0.0) {
            return Err(Error::Argument("tolerances must be non-negative".into()));
        }
        if self.abs_tol == 0.0 && self.rel_tol == 0.0 {
            return Err(Error::Argument(
                "at least one of abs_tol and rel_tol must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    fn width_ok(&self, lo: f64, hi: f64) -> bool {
        let w = (hi - lo).abs();
        w <= self.abs_tol || w <= self.rel_tol * lo.abs().max(hi.abs())
    }
}

const INV_E: f64 = 1.0 / E;

/// Principal branch `W0(x)` for `x` in `[-1/e, 0]`.
///
/// Halley iteration seeded by the branch-point series near `-1/e` and by
/// `x` itself near the origin; falls back to bisection on `[-1, 0]` if
/// the iteration fails to settle.
pub fn lambert_w0(x: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if x.is_nan() || x > 0.0 || x < -INV_E - SLACK {
        return Err(Error::Domain {
            what: "lambert_w0",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= -INV_E {
        return Ok(-1.0);
    }

    let mut w = if x < -0.25 {
        // series in p = sqrt(2(ex + 1)) about the branch point
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        // w ~ x - x^2 for small |x|
        x - x * x
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = (w - step).clamp(-1.0, 0.0);
        if (next - w).abs() <= 1e-16 * (1.0 + w.abs()) {
            return Ok(next);
        }
        w = next;
    }

    if (w * w.exp() - x).abs() <= 1e-15 {
        return Ok(w);
    }
    // w e^w is increasing on [-1, 0]
    bisect(
        |t| t * t.exp() - x,
        -1.0,
        0.0,
        Tolerance {
            abs_tol: 1e-16,
            rel_tol: 0.0,
            max_iter: 200,
        },
    )
}

/// Marginal value of time for a perspective rate `t log2(1 + s/t)`,
/// expressed in the per-time SNR `x = s/t`:
/// `h(x) = ln(1 + x)/ln 2 - x/((1 + x) ln 2)`.
pub fn h(x: f64) -> f64 {
    debug_assert!(x >= 0.0 || x.is_nan());
    if x.is_infinite() {
        return f64::INFINITY;
    }
    (x.ln_1p() - x / (1.0 + x)) / LN_2
}

/// Derivative `h'(x) = x / ((1 + x)^2 ln 2)`.
pub fn h_prime(x: f64) -> f64 {
    x / ((1.0 + x) * (1.0 + x) * LN_2)
}

/// Inverse of [`h`] by bisection on an auto-expanded bracket `[0, 2^j]`.
pub fn h_inv(c: f64, tol: Tolerance) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain {
            what: "h_inv",
            value: c,
        });
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    if c.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut hi = 1.0_f64;
    while h(hi) <= c {
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(f64::INFINITY);
        }
    }
    let lo = hi / 2.0;
    let lo = if h(lo) <= c { lo } else { 0.0 };
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..tol.max_iter.max(1) {
        let mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if (hm - c).abs() <= tol.abs_tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        if hm < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence {
        what: "h_inv bisection",
        iterations: tol.max_iter,
    })
}

/// Closed-form inverse `h^{-1}(c) = -1/W0(-e^{-1 - c ln 2}) - 1`, polished by
/// a Newton step on `h(x) = c`. This is the fast path used inside the
/// solvers' inner bisections.
pub fn h_inv_lambert(c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let expo = -1.0 - c * LN_2;
    let mut x = if expo < -40.0 {
        // W0(-y) = -y - y^2 - 1.5 y^3 for tiny y
        let y = expo.exp();
        if y == 0.0 {
            // e^{-expo} overflows only beyond c ~ 1022
            let big = (-expo).exp();
            return if big.is_finite() { big - 1.0 } else { f64::INFINITY };
        }
        let w = -y - y * y;
        -1.0 / w - 1.0
    } else {
        match lambert_w0(-expo.exp()) {
            Ok(w) if w < 0.0 => -1.0 / w - 1.0,
            _ => 0.0,
        }
    };
    if !x.is_finite() {
        return x;
    }
    for _ in 0..2 {
        let d = h_prime(x);
        if d <= 0.0 {
            break;
        }
        let next = x - (h(x) - c) / d;
        if !(next > 0.0) {
            break;
        }
        x = next;
    }
    x
}

/// Bisection for a monotone `f` on `[lo, hi]`.
///
/// Accepts either end as the root when `|f|` there is already within
/// `abs_tol`.
pub fn bisect<F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a);
    let fb = f(b);
    if fa.abs() <= tol.abs_tol {
        return Ok(a);
    }
    if fb.abs() <= tol.abs_tol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket { lo, hi });
    }
    for _ in 0..tol.max_iter {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm.abs() <= tol.abs_tol || tol.width_ok(a, b) || mid == a || mid == b {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Err(Error::Convergence {
        what: "bisection",
        iterations: tol.max_iter,
    })
}

/// `a|_b = max(a, b)`.
pub fn clamp_lo(a: f64, b: f64) -> f64 {
    a.max(b)
}

/// `a|_b^c = min(max(a, b), c)`.
pub fn clamp_range(a: f64, b: f64, c: f64) -> Result<f64> {
    if b > c {
        return Err(Error::Argument(format!(
            "clamp_range lower bound {b} exceeds upper bound {c}"
        )));
    }
    Ok(a.max(b).min(c))
}

/// Alpha-fair utility: `ln x` for `alpha == 1`, `x^(1-alpha)/(1-alpha)` otherwise.
pub fn alpha_utility(x: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain {
            what: "alpha_utility (alpha)",
            value: alpha,
        });
    }
    if x < 0.0 || (x == 0.0 && alpha >= 1.0) || x.is_nan() {
        return Err(Error::Domain {
            what: "alpha_utility",
            value: x,
        });
    }
    if alpha == 1.0 {
        Ok(x.ln())
    } else {
        Ok(x.powf(1.0 - alpha) / (1.0 - alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tight() -> Tolerance {
        Tolerance::new(1e-12, 0.0, 400).unwrap()
    }

    #[test]
    fn lambert_reference_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(lambert_w0(-INV_E).unwrap(), -1.0, epsilon = 1e-12);
        // Newton on w e^w = -0.1 from w0 = -0.1, 30 digits
        assert_abs_diff_eq!(
            lambert_w0(-0.1).unwrap(),
            -0.111_832_559_158_962_96,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lambert_rejects_outside_domain() {
        assert!(matches!(lambert_w0(0.1), Err(Error::Domain { .. })));
        assert!(matches!(lambert_w0(-0.5), Err(Error::Domain { .. })));
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn lambert_near_branch_point() {
        for eps in [1e-14, 1e-10, 1e-6, 1e-3] {
            let x = -INV_E + eps;
            let w = lambert_w0(x).unwrap();
            assert!(w >= -1.0 && w <= 0.0);
            assert!((w * w.exp() - x).abs() <= 1e-12, "eps {eps}");
        }
    }

    #[test]
    fn h_reference_points() {
        assert_eq!(h(0.0), 0.0);
        assert_abs_diff_eq!(h(1.0), 0.278_652_479_555_518_3, epsilon = 1e-14);
        assert_abs_diff_eq!(h(9.0), 2.023_502_558_087_295_3, epsilon = 1e-14);
    }

    #[test]
    fn h_inv_reference_points() {
        let tol = Tolerance::default();
        assert_eq!(h_inv(0.0, tol).unwrap(), 0.0);
        assert_abs_diff_eq!(h_inv(h(5.0), tight()).unwrap(), 5.0, epsilon = 1e-9);
        // bisection in 30-digit arithmetic on [0, 100]
        assert_abs_diff_eq!(
            h_inv(1.0, tight()).unwrap(),
            3.311_070_407_001_005,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(h_inv_lambert(1.0), 3.311_070_407_001_005, epsilon = 1e-10);
        assert!(h_inv(-1.0, tol).is_err());
    }

    #[test]
    fn h_inv_convergence_error() {
        let tol = Tolerance::new(1e-300, 0.0, 3).unwrap();
        assert!(matches!(
            h_inv(1.0, tol),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn bisect_cases() {
        let tol = Tolerance::default();
        assert_abs_diff_eq!(bisect(|x| x - 2.0, 0.0, 5.0, tol).unwrap(), 2.0, epsilon = 1e-9);
        let r = bisect(|x| h(x) - 1.0, 0.0, 100.0, tight()).unwrap();
        assert_abs_diff_eq!(r, h_inv(1.0, tight()).unwrap(), epsilon = 1e-9);
        assert!(matches!(
            bisect(|x| x + 1.0, 0.0, 5.0, tol),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn clamps() {
        assert_eq!(clamp_lo(-1.0, 0.0), 0.0);
        assert_eq!(clamp_range(5.0, 0.0, 2.0).unwrap(), 2.0);
        assert_eq!(clamp_range(1.0, 0.0, 2.0).unwrap(), 1.0);
        assert!(clamp_range(1.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn utility_cases() {
        assert_eq!(alpha_utility(5.0, 0.0).unwrap(), 5.0);
        assert_eq!(alpha_utility(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(alpha_utility(2.0, 2.0).unwrap(), -0.5, epsilon = 1e-15);
        assert_eq!(alpha_utility(0.0, 0.5).unwrap(), 0.0);
        assert!(alpha_utility(0.0, 1.0).is_err());
        assert!(alpha_utility(0.0, 3.0).is_err());
    }

    proptest! {
        #[test]
        fn lambert_identity(x in -INV_E..=0.0f64) {
            let w = lambert_w0(x).unwrap();
            prop_assert!((w * w.exp() - x).abs() <= 1e-9);
            prop_assert!(w >= -1.0);
        }

        #[test]
        fn h_strictly_increasing(a in 0.0..1e3f64, d in 1e-6..1e3f64) {
            prop_assert!(h(a) < h(a + d));
        }

        #[test]
        fn h_round_trip(c in 0.0..20.0f64) {
            let tol = Tolerance::default();
            let x = h_inv(c, tol).unwrap();
            prop_assert!((h(x) - c).abs() <= tol.abs_tol);
        }

        #[test]
        fn h_inv_matches_lambert_form(c in 0.0..20.0f64) {
            let x = h_inv(c, tight()).unwrap();
            let w = lambert_w0(-(-1.0 - c * LN_2).exp()).unwrap();
            let closed = -1.0 / w - 1.0;
            prop_assert!((x - closed).abs() <= 1e-8 * (1.0 + x), "{x} vs {closed}");
            prop_assert!((h_inv_lambert(c) - x).abs() <= 1e-8 * (1.0 + x));
        }

        #[test]
        fn utility_midpoint_concave(a in 1e-3..1e2f64, b in 1e-3..1e2f64, alpha in 0.0..8.0f64) {
            let mid = alpha_utility(0.5 * (a + b), alpha).unwrap();
            let avg = 0.5 * (alpha_utility(a, alpha).unwrap() + alpha_utility(b, alpha).unwrap());
            prop_assert!(mid >= avg - 1e-9 * (1.0 + avg.abs()));
            prop_assert!(alpha_utility(a.max(b), alpha).unwrap() >= alpha_utility(a.min(b), alpha).unwrap());
        }
    }
}
