//! Price curves, value integrals, inversion, and share formulas.
//!
//! Every pooled asset is priced by a univariate curve `P(x)` of its own
//! balance. The net value traded out of an asset between two balances is the
//! definite integral of `P`, so swap, fee, and liquidity math all reduce to
//! evaluating and inverting antiderivative differences. Two curve kinds are
//! supported:
//!
//! * **Volatile**: `P(x) = w / x`. The weight `w` is the asset's
//!   value-per-unit scale in the pool's common value units. The integral is
//!   `w · ln(x)`, which makes value additive over adjacent balance intervals
//!   and lets a swap be inverted in closed form.
//! * **Stable**: the volatile curve blended with the constant level
//!   `w / x_stable` through a Witch-of-Agnesi bell
//!   `θ(x) = A² / ((x − x_stable)² + A²)`:
//!
//!   ```text
//!   P(x) = (w/x)·(1 − θ(x)) + (w/x_stable)·θ(x)
//!   ```
//!
//!   `x_stable` is the equilibrium quantity where the spot price equals the
//!   configured ratio, and the amplification `A` is the width of the
//!   flattened region around it. The bell keeps `P` integrable in closed
//!   form (logarithm and arctangent terms, see [`Curve::antiderivative`]).
//!
//! All functions here are pure; they are used identically on every simulated
//! chain. Quantities are `f64`; invariant tolerances elsewhere in the crate
//! are stated relative to that. Fixed-point on-chain arithmetic is a
//! production concern out of scope here.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Minimum balance a pool may be left with by a swap or refund. Keeps
/// prices and logarithms finite and models economic reality: draining a
/// pool to exactly zero is never allowed.
pub const DUST_FLOOR: f64 = 1e-9;

/// Iteration budget for bisection in [`Curve::invert_out`]. Halving a
/// bracket no wider than the balance reaches machine precision well inside
/// this budget.
pub const MAX_BISECT_ITERS: u32 = 128;

/// Default absolute tolerance, in value units, for inversion.
pub const DEFAULT_VALUE_TOL: f64 = 1e-12;

/// Errors from curve math.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    /// A quantity that must be positive and finite was not.
    #[error("{name} out of domain: {value} (must be positive and finite)")]
    Domain { name: &'static str, value: f64 },
    /// Bisection failed to reach the requested tolerance in the budget.
    #[error("bisection did not reach tolerance {tol} within {iters} iterations")]
    NoConvergence { tol: f64, iters: u32 },
    /// The requested value cannot be withdrawn without leaving the balance
    /// below the dust floor.
    #[error("insufficient liquidity: value {requested} exceeds drainable value {available}")]
    InsufficientLiquidity { requested: f64, available: f64 },
}

fn require_positive(name: &'static str, value: f64) -> Result<f64, CurveError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CurveError::Domain { name, value })
    }
}

/// A signed amount in the pool's common value units.
///
/// Values are what swaps move between chains: the integral of a price curve
/// over a balance interval. A zero-width interval has value exactly `0`,
/// and values over adjacent intervals add.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(pub f64);

impl Value {
    pub const ZERO: Value = Value(0.0);

    pub fn amount(self) -> f64 {
        self.0
    }

    pub fn abs(self) -> f64 {
        self.0.abs()
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl Add for Value {
    type Output = Value;
    fn add(self, rhs: Value) -> Value {
        Value(self.0 + rhs.0)
    }
}

impl AddAssign for Value {
    fn add_assign(&mut self, rhs: Value) {
        self.0 += rhs.0;
    }
}

impl Sub for Value {
    type Output = Value;
    fn sub(self, rhs: Value) -> Value {
        Value(self.0 - rhs.0)
    }
}

impl Neg for Value {
    type Output = Value;
    fn neg(self) -> Value {
        Value(-self.0)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Tagged description of an asset's price curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    /// `P(x) = weight / x`.
    Volatile { weight: f64 },
    /// Volatile curve flattened around `x_stable` by an Agnesi bell of
    /// width `amplification`. For stable pairs the weight encodes the
    /// predefined price ratio between the assets.
    Stable {
        weight: f64,
        x_stable: f64,
        amplification: f64,
    },
}

impl Curve {
    pub fn volatile(weight: f64) -> Result<Self, CurveError> {
        require_positive("weight", weight)?;
        Ok(Curve::Volatile { weight })
    }

    pub fn stable(weight: f64, x_stable: f64, amplification: f64) -> Result<Self, CurveError> {
        require_positive("weight", weight)?;
        require_positive("x_stable", x_stable)?;
        require_positive("amplification", amplification)?;
        Ok(Curve::Stable {
            weight,
            x_stable,
            amplification,
        })
    }

    pub fn weight(&self) -> f64 {
        match *self {
            Curve::Volatile { weight } => weight,
            Curve::Stable { weight, .. } => weight,
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self, Curve::Stable { .. })
    }

    pub fn x_stable(&self) -> Option<f64> {
        match *self {
            Curve::Volatile { .. } => None,
            Curve::Stable { x_stable, .. } => Some(x_stable),
        }
    }

    pub fn amplification(&self) -> Option<f64> {
        match *self {
            Curve::Volatile { .. } => None,
            Curve::Stable { amplification, .. } => Some(amplification),
        }
    }

    /// Curve for a pool scaled by `factor` on a liquidity event.
    ///
    /// Both `x_stable` and `amplification` are quantity-dimensioned, so both
    /// scale: the resulting curve satisfies `P'(f·x) = P(x) / f`, which is
    /// exactly what makes value integrals and relative spot prices invariant
    /// under proportional deposits and withdrawals. Volatile curves are
    /// already scale-free.
    pub fn scaled(&self, factor: f64) -> Result<Self, CurveError> {
        require_positive("scale factor", factor)?;
        Ok(match *self {
            Curve::Volatile { weight } => Curve::Volatile { weight },
            Curve::Stable {
                weight,
                x_stable,
                amplification,
            } => Curve::Stable {
                weight,
                x_stable: x_stable * factor,
                amplification: amplification * factor,
            },
        })
    }

    /// Agnesi bell factor `θ(x) = A² / ((x − x_stable)² + A²)`; `1` at the
    /// equilibrium point, falling off over a width of `A`.
    fn bell(x: f64, x_stable: f64, amplification: f64) -> f64 {
        let d = x - x_stable;
        let a2 = amplification * amplification;
        a2 / (d * d + a2)
    }

    /// Spot price at balance `x`. Finite and positive for all `x > 0`, and
    /// non-increasing in `x`.
    pub fn price(&self, x: f64) -> Result<f64, CurveError> {
        require_positive("balance", x)?;
        Ok(match *self {
            Curve::Volatile { weight } => weight / x,
            Curve::Stable {
                weight,
                x_stable,
                amplification,
            } => {
                let theta = Self::bell(x, x_stable, amplification);
                (weight / x) * (1.0 - theta) + (weight / x_stable) * theta
            }
        })
    }

    /// A primitive `F` of the price curve: `F'(x) = price(x)`.
    ///
    /// The constant of integration is fixed per curve (the volatile
    /// primitive is `w·ln x` with constant zero), so only differences of
    /// this function are meaningful. The stable primitive is
    ///
    /// ```text
    /// w·ln x − (w·A/x_s)·atan((x_s − x)/A)
    ///        + w·A·(−2A·ln x + 2·x_s·atan((x_s − x)/A) + A·ln(A² + (x_s − x)²))
    ///          / (2·x_s² + 2·A²)
    /// ```
    ///
    /// which differentiates back to `(w/x)(1 − θ) + (w/x_s)·θ`.
    pub fn antiderivative(&self, x: f64) -> Result<f64, CurveError> {
        require_positive("balance", x)?;
        Ok(match *self {
            Curve::Volatile { weight } => weight * x.ln(),
            Curve::Stable {
                weight,
                x_stable,
                amplification,
            } => {
                let a = amplification;
                let xs = x_stable;
                let atan_term = ((xs - x) / a).atan();
                let tail = weight
                    * a
                    * (-2.0 * a * x.ln()
                        + 2.0 * xs * atan_term
                        + a * (a * a + (xs - x) * (xs - x)).ln())
                    / (2.0 * xs * xs + 2.0 * a * a);
                weight * x.ln() - (weight * a / xs) * atan_term + tail
            }
        })
    }

    /// Net value traded when the balance moves from `x_from` to `x_to`:
    /// the integral of the price curve over the interval. Positive when the
    /// balance grows.
    pub fn value_between(&self, x_from: f64, x_to: f64) -> Result<Value, CurveError> {
        require_positive("x_from", x_from)?;
        require_positive("x_to", x_to)?;
        if x_from == x_to {
            return Ok(Value::ZERO);
        }
        Ok(Value(
            self.antiderivative(x_to)? - self.antiderivative(x_from)?,
        ))
    }

    /// Maximum value that can be withdrawn from `balance` without breaching
    /// the dust floor.
    pub fn drainable_value(&self, balance: f64) -> Result<Value, CurveError> {
        require_positive("balance", balance)?;
        if balance <= DUST_FLOOR {
            return Ok(Value::ZERO);
        }
        self.value_between(DUST_FLOOR, balance)
    }

    /// Solve for the output amount `Δj` such that withdrawing it moves
    /// exactly `v` in value: `value_between(balance − Δj, balance) = v`
    /// within `tol` (absolute, in value units).
    ///
    /// Volatile curves invert in closed form, `Δj = j·(1 − e^(−v/w))`,
    /// which analytically keeps `Δj < j`. Stable curves bisect the strictly
    /// increasing map `δ ↦ value_between(j − δ, j)` over `(0, j)` with an
    /// iteration budget of [`MAX_BISECT_ITERS`].
    pub fn invert_out(&self, balance: f64, v: Value, tol: f64) -> Result<f64, CurveError> {
        require_positive("balance", balance)?;
        require_positive("tolerance", tol)?;
        if !v.is_finite() || v.amount() < 0.0 {
            return Err(CurveError::Domain {
                name: "value",
                value: v.amount(),
            });
        }
        if v.amount() == 0.0 {
            return Ok(0.0);
        }
        let available = self.drainable_value(balance)?;
        if v.amount() > available.amount() {
            return Err(CurveError::InsufficientLiquidity {
                requested: v.amount(),
                available: available.amount(),
            });
        }
        match *self {
            Curve::Volatile { weight } => {
                let out = balance * (1.0 - (-v.amount() / weight).exp());
                debug_assert!(out < balance);
                Ok(out)
            }
            Curve::Stable { .. } => self.bisect_out(balance, v, tol),
        }
    }

    /// Verify a candidate output amount against the value equation without
    /// searching: returns `true` iff withdrawing `delta_out` from `balance`
    /// moves `v` in value within `tol`. This is the cheap on-chain check for
    /// outputs computed off-chain.
    pub fn verify_out(&self, balance: f64, v: Value, delta_out: f64, tol: f64) -> bool {
        if !(delta_out >= 0.0 && delta_out < balance) {
            return false;
        }
        let lower = balance - delta_out;
        if lower < DUST_FLOOR {
            return false;
        }
        match self.value_between(lower, balance) {
            Ok(got) => (got.amount() - v.amount()).abs() <= tol,
            Err(_) => false,
        }
    }

    fn bisect_out(&self, balance: f64, v: Value, tol: f64) -> Result<f64, CurveError> {
        // Bisect on the remaining balance rather than the output amount:
        // deep drains put the solution where the curve is steep and the
        // remaining balance is tiny, and f64 resolution near `balance`
        // cannot represent it, while resolution near zero is ample.
        let target = v.amount();
        let mut lo = DUST_FLOOR; // value_between(lo, balance) >= v, pre-checked
        let mut hi = balance; // value_between(hi, balance) = 0 <= v
        for _ in 0..MAX_BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            let got = self.value_between(mid, balance)?.amount();
            let err = got - target;
            if err.abs() <= tol {
                return Ok(balance - mid);
            }
            if err > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(CurveError::NoConvergence {
            tol,
            iters: MAX_BISECT_ITERS,
        })
    }
}

/// Initial share supply for a freshly created pool: the geometric mean of
/// the deposited token quantities.
pub fn initial_shares(balances: &[f64]) -> Result<f64, CurveError> {
    if balances.is_empty() {
        return Err(CurveError::Domain {
            name: "balances",
            value: f64::NAN,
        });
    }
    let mut log_sum = 0.0;
    for &b in balances {
        require_positive("balance", b)?;
        log_sum += b.ln();
    }
    Ok((log_sum / balances.len() as f64).exp())
}

/// Reference-point shift that keeps an asset's value integral unchanged when
/// `delta_balance` is added to (or removed from) the pool outside of a swap:
/// `Δx₀ = (x₀ / x_p) · Δx_p`.
pub fn reference_shift(
    reference: f64,
    balance: f64,
    delta_balance: f64,
) -> Result<f64, CurveError> {
    require_positive("reference", reference)?;
    require_positive("balance", balance)?;
    let shifted = balance + delta_balance;
    if !(shifted.is_finite() && shifted > 0.0) {
        return Err(CurveError::Domain {
            name: "shifted balance",
            value: shifted,
        });
    }
    Ok(reference / balance * delta_balance)
}

/// Shares to mint (positive) or burn (negative) for a proportional
/// liquidity change of `delta_balance` against a pre-event balance
/// `balance`: `(Δx_p / x_p) · supply`.
pub fn proportional_shares(
    delta_balance: f64,
    balance: f64,
    supply: f64,
) -> Result<f64, CurveError> {
    require_positive("balance", balance)?;
    require_positive("supply", supply)?;
    if !delta_balance.is_finite() || delta_balance <= -balance {
        return Err(CurveError::Domain {
            name: "delta_balance",
            value: delta_balance,
        });
    }
    let shares = delta_balance / balance * supply;
    if shares < -supply {
        return Err(CurveError::Domain {
            name: "burn amount",
            value: shares,
        });
    }
    Ok(shares)
}
