//! Cross-chain AMM built on univariate price curves.
//!
//! Each pooled asset carries its own price curve `P(x)` that depends only on
//! that asset's local balance. The net value traded out of an asset is the
//! integral of its price curve between a per-asset reference balance and the
//! current balance, and the pool invariant is that these integrals sum to
//! zero across all assets. Because every integral is univariate, a swap
//! splits into two single-chain computations joined by one scalar message:
//! the source chain credits the input and integrates, the destination chain
//! inverts its own integral to find the output. No shared state, bridge, or
//! intermediate token is needed.
//!
//! The crate has three layers:
//!
//! * [`curve`] / [`oracle`]: pure curve math (prices, value integrals,
//!   inversion, share formulas) and independent brute-force references used
//!   by tests to cross-check the closed forms.
//! * [`pool`] / [`protocol`]: per-chain pool state machines (balances,
//!   reference points, fee accrual, liquidity operations) and the swap
//!   lifecycle (initiate, relay one value message, finalize or refund) with
//!   replay-safe registries.
//! * [`sim`]: a deterministic discrete-event simulator with chains as
//!   independent state machines, a relay that delays/drops/duplicates/
//!   reorders messages, scenario files, and auditable reports.
//!
//! All quantities are `f64`. On-chain fixed-point arithmetic is out of
//! scope; this library is the reference model a production implementation
//! would be validated against.

pub mod curve;
pub mod oracle;
pub mod pool;
pub mod protocol;
pub mod rng;
pub mod sim;

pub use curve::{Curve, CurveError, Value};
pub use pool::{AssetState, PoolError, PoolView, ShareLedger};
pub use protocol::{RefundMessage, SwapMessage, SwapReceipt, SwapStatus};
pub use sim::{run_scenario, RelayConfig, Report, Scenario, World};
