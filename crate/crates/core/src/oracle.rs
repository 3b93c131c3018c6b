//! Independent brute-force references for the curve math.
//!
//! Everything here is built from [`Curve::price`] alone, never from the
//! antiderivative or the closed-form inversion, so tests can use these
//! routines to catch transcription errors in the printed primitives and
//! swap formulas. Quadrature is adaptive Simpson: recursive interval
//! halving with the classic two-level embedded error estimate
//! `|S(left) + S(right) − S(whole)| / 15`.
//!
//! Not a general-purpose integrator: integrands are smooth positive price
//! curves, and performance only needs to be good enough for test suites.

use crate::curve::{Curve, CurveError, Value, DUST_FLOOR};

/// Subdivision depth cap. Beyond 60 halvings an interval is below
/// representable width.
pub const MAX_DEPTH: u32 = 60;

/// Iteration budget for [`brute_invert`] bisection.
pub const MAX_INVERT_ITERS: u32 = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("quadrature did not converge within depth {max_depth}")]
    NoConvergence { max_depth: u32 },
    #[error("bisection did not converge within {iters} iterations")]
    InversionNoConvergence { iters: u32 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Result of an adaptive quadrature run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u64,
}

struct QuadState<'c> {
    curve: &'c Curve,
    evaluations: u64,
    error_sum: f64,
}

impl QuadState<'_> {
    fn price(&mut self, x: f64) -> Result<f64, OracleError> {
        self.evaluations += 1;
        Ok(self.curve.price(x)?)
    }

    fn simpson(&self, fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, OracleError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.price(lm)?;
        let frm = self.price(rm)?;
        let left = self.simpson(fa, flm, fm, m - a);
        let right = self.simpson(fm, frm, fb, b - m);
        let err = (left + right - whole) / 15.0;
        if err.abs() <= tol {
            self.error_sum += err.abs();
            return Ok(left + right + err);
        }
        if depth >= MAX_DEPTH {
            return Err(OracleError::NoConvergence {
                max_depth: MAX_DEPTH,
            });
        }
        let l = self.refine(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
        let r = self.refine(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
        Ok(l + r)
    }
}

/// Integrate the price curve over `[a, b]` by adaptive Simpson quadrature
/// to relative tolerance `tol`. Bounds may be given in either order; the
/// result is sign-correct, matching `value_between` semantics.
pub fn quad_value(
    curve: &Curve,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadratureResult, OracleError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(CurveError::Domain {
            name: "a",
            value: a,
        }
        .into());
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(CurveError::Domain {
            name: "b",
            value: b,
        }
        .into());
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CurveError::Domain {
            name: "tol",
            value: tol,
        }
        .into());
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut state = QuadState {
        curve,
        evaluations: 0,
        error_sum: 0.0,
    };
    // Price curves blow up toward zero balance, so a single linear-space
    // refinement cannot cross many decades. Split the interval into at most
    // one-decade segments first, then adapt within each; a rough log-spaced
    // trapezoid pass fixes the absolute tolerance for the requested
    // relative one.
    let decades = (hi / lo).log10().ceil().max(1.0);
    let segments = decades as usize;
    let ratio = (hi / lo).powf(1.0 / segments as f64);
    let mut bounds = Vec::with_capacity(segments + 1);
    bounds.push(lo);
    for i in 1..segments {
        bounds.push(lo * ratio.powi(i as i32));
    }
    bounds.push(hi);

    let mut rough = 0.0;
    for pair in bounds.windows(2) {
        let fa = state.price(pair[0])?;
        let fb = state.price(pair[1])?;
        rough += 0.5 * (fa + fb) * (pair[1] - pair[0]);
    }
    let seg_tol = 0.25 * tol * rough.abs() / segments as f64;

    let mut value = 0.0;
    for pair in bounds.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let fa = state.price(a)?;
        let fb = state.price(b)?;
        let m = 0.5 * (a + b);
        let fm = state.price(m)?;
        let whole = state.simpson(fa, fm, fb, b - a);
        value += state.refine(a, b, fa, fm, fb, whole, seg_tol, 0)?;
    }
    Ok(QuadratureResult {
        value: sign * value,
        error_estimate: state.error_sum,
        evaluations: state.evaluations,
    })
}

/// Invert the value integral by bisection against the quadrature oracle:
/// find `Δj` with `∫ over [j − Δj, j] = v`, never touching the closed-form
/// inversion. Used to cross-check `invert_out`.
pub fn brute_invert(curve: &Curve, balance: f64, v: Value, tol: f64) -> Result<f64, OracleError> {
    if !(balance.is_finite() && balance > 0.0) {
        return Err(CurveError::Domain {
            name: "balance",
            value: balance,
        }
        .into());
    }
    if !v.is_finite() || v.amount() < 0.0 {
        return Err(CurveError::Domain {
            name: "value",
            value: v.amount(),
        }
        .into());
    }
    if v.amount() == 0.0 {
        return Ok(0.0);
    }
    let quad_tol = (tol / v.amount().max(1.0)).min(1e-12);
    let available = quad_value(curve, DUST_FLOOR, balance, quad_tol)?.value;
    if v.amount() > available {
        return Err(CurveError::InsufficientLiquidity {
            requested: v.amount(),
            available,
        }
        .into());
    }
    // Bisect on the remaining balance, mirroring the closed-form side, so
    // deep drains keep full float resolution where the curve is steep.
    let mut lo = DUST_FLOOR;
    let mut hi = balance;
    for _ in 0..MAX_INVERT_ITERS {
        let mid = 0.5 * (lo + hi);
        let got = quad_value(curve, mid, balance, quad_tol)?.value;
        let err = got - v.amount();
        if err.abs() <= tol {
            return Ok(balance - mid);
        }
        if err > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(OracleError::InversionNoConvergence {
        iters: MAX_INVERT_ITERS,
    })
}

/// Constant-product baseline: output of swapping `delta_in` into a pool with
/// reserves `(reserve_in, reserve_out)` under `x · y = k`.
pub fn constant_product_out(reserve_in: f64, reserve_out: f64, delta_in: f64) -> f64 {
    reserve_out * delta_in / (reserve_in + delta_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn quad_matches_analytic_log_integral() {
        let c = Curve::volatile(1.0).unwrap();
        let q = quad_value(&c, 100.0, 200.0, 1e-12).unwrap();
        assert_relative_eq!(q.value, std::f64::consts::LN_2, max_relative = 1e-12);
        assert!(q.evaluations > 0);
        // Accepted-panel error sum stays below the requested relative
        // tolerance.
        assert!(q.error_estimate <= 1e-12 * q.value.abs());
    }

    #[test]
    fn quad_zero_width_is_zero() {
        let c = Curve::volatile(1.0).unwrap();
        let q = quad_value(&c, 123.0, 123.0, 1e-12).unwrap();
        assert_eq!(q.value, 0.0);
        assert_eq!(q.evaluations, 0);
    }

    #[test]
    fn quad_is_sign_correct() {
        let c = Curve::volatile(1.0).unwrap();
        let fwd = quad_value(&c, 100.0, 200.0, 1e-12).unwrap().value;
        let rev = quad_value(&c, 200.0, 100.0, 1e-12).unwrap().value;
        assert_eq!(fwd, -rev);
    }

    #[test]
    fn quad_error_estimate_is_honest() {
        // On the volatile curve the analytic answer is known; the measured
        // error must not exceed the reported estimate (plus float noise).
        let c = Curve::volatile(2.0).unwrap();
        for (a, b) in [(1.0, 10.0), (50.0, 51.0), (0.001, 1000.0)] {
            let q = quad_value(&c, a, b, 1e-10).unwrap();
            let exact = 2.0 * (b / a).ln();
            assert!(
                (q.value - exact).abs() <= q.error_estimate + 1e-13 * exact.abs().max(1.0),
                "measured {} > estimate {}",
                (q.value - exact).abs(),
                q.error_estimate
            );
        }
    }

    #[test]
    fn quad_cross_validates_stable_antiderivative() {
        let c = Curve::stable(1.0, 100.0, 10.0).unwrap();
        let (a, b) = (50.0, 200.0);
        let q = quad_value(&c, a, b, 1e-12).unwrap();
        let analytic = c.value_between(a, b).unwrap().amount();
        assert_relative_eq!(q.value, analytic, max_relative = 1e-8);
    }

    #[test]
    fn quad_rejects_bad_bounds() {
        let c = Curve::volatile(1.0).unwrap();
        assert!(quad_value(&c, 0.0, 1.0, 1e-9).is_err());
        assert!(quad_value(&c, 1.0, -1.0, 1e-9).is_err());
        assert!(quad_value(&c, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn brute_invert_halves_volatile_pool_for_ln2() {
        let c = Curve::volatile(1.0).unwrap();
        let dj = brute_invert(&c, 100.0, Value(std::f64::consts::LN_2), 1e-10).unwrap();
        assert_abs_diff_eq!(dj, 50.0, epsilon = 1e-6);
    }

    #[test]
    fn brute_invert_zero_value() {
        let c = Curve::stable(1.0, 100.0, 10.0).unwrap();
        assert_eq!(brute_invert(&c, 100.0, Value::ZERO, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn constant_product_examples() {
        assert_eq!(constant_product_out(100.0, 100.0, 100.0), 50.0);
        assert_eq!(constant_product_out(100.0, 100.0, 0.0), 0.0);
    }
}
