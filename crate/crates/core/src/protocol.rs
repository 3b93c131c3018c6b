//! Cross-chain swap lifecycle: initiate, relay one value message, finalize
//! or refund.
//!
//! A swap touches two chains exactly once each. The source chain credits
//! the input, commits its state, and emits a [`SwapMessage`] whose only
//! numeric payload is the traded value: the integral of the source curve
//! over the credited interval. The destination chain inverts its own curve
//! to find the output. Neither side ever reads the other's state, and the
//! source commit has no two-phase dependency on the destination.
//!
//! Failure handling is value-based: if the destination cannot honor the
//! message (slippage, liquidity), it emits a [`RefundMessage`] carrying the
//! same value, and the source re-credits the token amount whose integral
//! equals that value *at refund time*. This keeps the pool invariant exact
//! even when other trades interleave with the refund.
//!
//! Both directions are replay-safe: each chain keeps a [`SwapRegistry`] of
//! processed swap ids, and redelivered messages return the recorded outcome
//! without touching state.
//!
//! The wire form of a message is a structured text record with one
//! `key=value` line per field and all numerics as decimal strings, so a
//! message survives the simulated wire without binary float drift
//! ([`encode_wire`] / [`decode_wire`] round-trip bit-for-bit).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curve::Value;
use crate::pool::{AssetId, ChainId, PoolError, PoolView};

pub type SwapId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapStatus {
    Pending,
    Finalized,
    Refunding,
    Refunded,
}

impl SwapStatus {
    fn as_str(self) -> &'static str {
        match self {
            SwapStatus::Pending => "pending",
            SwapStatus::Finalized => "finalized",
            SwapStatus::Refunding => "refunding",
            SwapStatus::Refunded => "refunded",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pending" => SwapStatus::Pending,
            "finalized" => SwapStatus::Finalized,
            "refunding" => SwapStatus::Refunding,
            "refunded" => SwapStatus::Refunded,
            _ => return None,
        })
    }
}

/// The single cross-chain payload for a swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapMessage {
    pub swap_id: SwapId,
    pub source_chain: ChainId,
    pub dest_chain: ChainId,
    pub asset_in: AssetId,
    pub asset_out: AssetId,
    /// Traded value of the post-fee input on the source chain.
    pub value: Value,
    pub min_out: f64,
    pub status: SwapStatus,
}

/// Sent from the destination back to the source when a swap cannot be
/// honored; carries the unchanged value so the source can re-credit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefundMessage {
    pub swap_id: SwapId,
    pub source_chain: ChainId,
    pub asset_in: AssetId,
    pub value: Value,
    pub reason: RefundReason,
    pub status: SwapStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefundReason {
    Slippage,
    InsufficientLiquidity,
    MalformedMessage,
    Timeout,
}

impl RefundReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RefundReason::Slippage => "slippage",
            RefundReason::InsufficientLiquidity => "insufficient_liquidity",
            RefundReason::MalformedMessage => "malformed_message",
            RefundReason::Timeout => "timeout",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "slippage" => RefundReason::Slippage,
            "insufficient_liquidity" => RefundReason::InsufficientLiquidity,
            "malformed_message" => RefundReason::MalformedMessage,
            "timeout" => RefundReason::Timeout,
            _ => return None,
        })
    }
}

/// Execution record for a completed swap, assembled by the simulator from
/// the source-side registry entry and the destination-side settlement.
/// Neither chain alone knows all of these figures (that is the point of
/// the protocol), so receipts are reporting artifacts, not chain state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapReceipt {
    pub swap_id: SwapId,
    pub amount_in: f64,
    pub amount_out: f64,
    pub fee_paid: f64,
    /// `amount_in / amount_out`.
    pub effective_price: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("swap id {0} already initiated on this chain")]
    DuplicateSwapId(SwapId),
    #[error("refund for unknown swap id {0}")]
    UnknownSwapId(SwapId),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("wire line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("wire record missing field {0}")]
    MissingField(&'static str),
    #[error("unknown wire record type {0}")]
    UnknownType(String),
}

/// Destination-side record of how a swap id was settled.
#[derive(Debug, Clone, PartialEq)]
pub enum FinalizeOutcome {
    /// The output was paid; the message reached `Finalized`.
    Settled {
        amount_out: f64,
    },
    Refund(RefundMessage),
}

/// Result of processing an inbound swap message, with `fresh` false on
/// replays so the caller does not act twice on the same outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalizeResult {
    pub outcome: FinalizeOutcome,
    pub fresh: bool,
}

/// Source-side record of an initiated swap.
#[derive(Debug, Clone, PartialEq)]
pub struct OutgoingSwap {
    pub asset_in: AssetId,
    pub dest_chain: ChainId,
    pub amount_in: f64,
    pub net_in: f64,
    pub fee_paid: f64,
    pub value: Value,
    pub status: SwapStatus,
    /// Amount re-credited if the swap was refunded.
    pub refunded_amount: Option<f64>,
}

/// Per-chain registry of processed swap ids. Grows monotonically; entries
/// are retained for the life of the simulation so every redelivery can be
/// answered from the record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SwapRegistry {
    outgoing: BTreeMap<SwapId, OutgoingSwap>,
    finalized: BTreeMap<SwapId, FinalizeOutcome>,
}

impl SwapRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn outgoing(&self, swap_id: SwapId) -> Option<&OutgoingSwap> {
        self.outgoing.get(&swap_id)
    }

    pub fn finalized(&self, swap_id: SwapId) -> Option<&FinalizeOutcome> {
        self.finalized.get(&swap_id)
    }

    pub fn outgoing_len(&self) -> usize {
        self.outgoing.len()
    }

    pub fn finalized_len(&self) -> usize {
        self.finalized.len()
    }

    /// Swaps initiated here that have not settled or refunded yet.
    pub fn pending_outgoing(&self) -> impl Iterator<Item = (SwapId, &OutgoingSwap)> {
        self.outgoing
            .iter()
            .filter(|(_, o)| o.status == SwapStatus::Pending)
            .map(|(id, o)| (*id, o))
    }
}

/// Start a swap on its source chain: credit the input (fee withheld
/// locally), commit, and emit the pending message. The caller supplies a
/// pool-unique `swap_id` nonce.
#[allow(clippy::too_many_arguments)]
pub fn initiate_swap(
    pool: &mut PoolView,
    registry: &mut SwapRegistry,
    swap_id: SwapId,
    source_chain: &str,
    asset_in: &str,
    amount_in: f64,
    dest_chain: &str,
    asset_out: &str,
    min_out: f64,
) -> Result<SwapMessage, ProtocolError> {
    if registry.outgoing.contains_key(&swap_id) {
        return Err(ProtocolError::DuplicateSwapId(swap_id));
    }
    let credit = pool.swap_credit(asset_in, amount_in)?;
    registry.outgoing.insert(
        swap_id,
        OutgoingSwap {
            asset_in: asset_in.to_string(),
            dest_chain: dest_chain.to_string(),
            amount_in,
            net_in: credit.net_in,
            fee_paid: credit.fee,
            value: credit.value,
            status: SwapStatus::Pending,
            refunded_amount: None,
        },
    );
    Ok(SwapMessage {
        swap_id,
        source_chain: source_chain.to_string(),
        dest_chain: dest_chain.to_string(),
        asset_in: asset_in.to_string(),
        asset_out: asset_out.to_string(),
        value: credit.value,
        min_out,
        status: SwapStatus::Pending,
    })
}

fn refund_for(msg: &SwapMessage, reason: RefundReason) -> RefundMessage {
    RefundMessage {
        swap_id: msg.swap_id,
        source_chain: msg.source_chain.clone(),
        asset_in: msg.asset_in.clone(),
        value: msg.value,
        reason,
        status: SwapStatus::Refunding,
    }
}

/// Settle an inbound swap message on the destination chain. Idempotent: a
/// replayed swap id returns the recorded outcome without touching state.
/// On slippage or liquidity failure the pool is untouched and a refund
/// message is produced instead.
pub fn finalize_swap(
    pool: &mut PoolView,
    registry: &mut SwapRegistry,
    msg: &SwapMessage,
    tol: f64,
) -> FinalizeResult {
    if let Some(outcome) = registry.finalized.get(&msg.swap_id) {
        return FinalizeResult {
            outcome: outcome.clone(),
            fresh: false,
        };
    }
    let outcome = if msg.value.amount() <= 0.0 || !msg.value.is_finite() {
        FinalizeOutcome::Refund(refund_for(msg, RefundReason::MalformedMessage))
    } else {
        match pool.swap_debit(&msg.asset_out, msg.value, msg.min_out, tol) {
            Ok(amount_out) => FinalizeOutcome::Settled { amount_out },
            Err(PoolError::SlippageExceeded { .. }) => {
                FinalizeOutcome::Refund(refund_for(msg, RefundReason::Slippage))
            }
            Err(PoolError::InsufficientLiquidity { .. }) => {
                FinalizeOutcome::Refund(refund_for(msg, RefundReason::InsufficientLiquidity))
            }
            Err(PoolError::UnknownAsset(_)) => {
                FinalizeOutcome::Refund(refund_for(msg, RefundReason::MalformedMessage))
            }
            Err(_) => FinalizeOutcome::Refund(refund_for(msg, RefundReason::MalformedMessage)),
        }
    };
    registry.finalized.insert(msg.swap_id, outcome.clone());
    FinalizeResult {
        outcome,
        fresh: true,
    }
}

/// Variant of [`finalize_swap`] modeling the verify-only mode: the output
/// is computed off-chain (here, by the same inversion) and the chain only
/// re-checks the candidate against the value equation at the same
/// tolerance. Outcomes are identical to the searching mode.
pub fn finalize_swap_verified(
    pool: &mut PoolView,
    registry: &mut SwapRegistry,
    msg: &SwapMessage,
    tol: f64,
) -> FinalizeResult {
    if let Some(outcome) = registry.finalized.get(&msg.swap_id) {
        return FinalizeResult {
            outcome: outcome.clone(),
            fresh: false,
        };
    }
    let outcome = if msg.value.amount() <= 0.0 || !msg.value.is_finite() {
        FinalizeOutcome::Refund(refund_for(msg, RefundReason::MalformedMessage))
    } else {
        let candidate = pool
            .asset(&msg.asset_out)
            .map(|a| a.curve.invert_out(a.balance, msg.value, tol));
        match candidate {
            None => FinalizeOutcome::Refund(refund_for(msg, RefundReason::MalformedMessage)),
            Some(Err(crate::curve::CurveError::InsufficientLiquidity { .. })) => {
                FinalizeOutcome::Refund(refund_for(msg, RefundReason::InsufficientLiquidity))
            }
            Some(Err(_)) => {
                FinalizeOutcome::Refund(refund_for(msg, RefundReason::MalformedMessage))
            }
            Some(Ok(candidate)) => {
                match pool.swap_debit_verified(
                    &msg.asset_out,
                    msg.value,
                    candidate,
                    msg.min_out,
                    tol,
                ) {
                    Ok(amount_out) => FinalizeOutcome::Settled { amount_out },
                    Err(PoolError::SlippageExceeded { .. }) => {
                        FinalizeOutcome::Refund(refund_for(msg, RefundReason::Slippage))
                    }
                    Err(PoolError::InsufficientLiquidity { .. }) => FinalizeOutcome::Refund(
                        refund_for(msg, RefundReason::InsufficientLiquidity),
                    ),
                    Err(_) => {
                        FinalizeOutcome::Refund(refund_for(msg, RefundReason::MalformedMessage))
                    }
                }
            }
        }
    };
    registry.finalized.insert(msg.swap_id, outcome.clone());
    FinalizeResult {
        outcome,
        fresh: true,
    }
}

/// Apply a refund on the source chain: withdraw the token amount whose
/// value integral equals the refunded value at current state, and mark the
/// outgoing swap refunded. Idempotent on redelivery. Returns the amount
/// refunded, or `None` if this delivery was a replay.
pub fn apply_refund(
    pool: &mut PoolView,
    registry: &mut SwapRegistry,
    refund: &RefundMessage,
    tol: f64,
) -> Result<Option<f64>, ProtocolError> {
    let outgoing = registry
        .outgoing
        .get_mut(&refund.swap_id)
        .ok_or(ProtocolError::UnknownSwapId(refund.swap_id))?;
    match outgoing.status {
        SwapStatus::Refunded | SwapStatus::Finalized => return Ok(None),
        SwapStatus::Pending | SwapStatus::Refunding => {}
    }
    let refunded = pool.swap_debit(&outgoing.asset_in, refund.value, 0.0, tol)?;
    outgoing.status = SwapStatus::Refunded;
    outgoing.refunded_amount = Some(refunded);
    Ok(Some(refunded))
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

/// A message as it travels the relay.
#[derive(Debug, Clone, PartialEq)]
pub enum WirePayload {
    Swap(SwapMessage),
    Refund(RefundMessage),
}

fn fmt_decimal(v: f64) -> String {
    // Shortest decimal that parses back to the identical f64.
    format!("{v}")
}

/// Encode a payload as a structured text record: one `key=value` line per
/// field, numerics as decimal strings.
pub fn encode_wire(payload: &WirePayload) -> String {
    match payload {
        WirePayload::Swap(m) => format!(
            "type=swap\nswap_id={}\nsource_chain={}\ndest_chain={}\nasset_in={}\nasset_out={}\nvalue={}\nmin_out={}\nstatus={}\n",
            m.swap_id,
            m.source_chain,
            m.dest_chain,
            m.asset_in,
            m.asset_out,
            fmt_decimal(m.value.amount()),
            fmt_decimal(m.min_out),
            m.status.as_str(),
        ),
        WirePayload::Refund(r) => format!(
            "type=refund\nswap_id={}\nsource_chain={}\nasset_in={}\nvalue={}\nreason={}\nstatus={}\n",
            r.swap_id,
            r.source_chain,
            r.asset_in,
            fmt_decimal(r.value.amount()),
            r.reason.as_str(),
            r.status.as_str(),
        ),
    }
}

fn wire_fields(text: &str) -> Result<BTreeMap<&str, &str>, WireError> {
    let mut fields = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| WireError::Malformed {
            line: idx + 1,
            reason: format!("expected key=value, got {line:?}"),
        })?;
        if fields.insert(key, value).is_some() {
            return Err(WireError::Malformed {
                line: idx + 1,
                reason: format!("duplicate field {key:?}"),
            });
        }
    }
    Ok(fields)
}

fn take<'a>(fields: &BTreeMap<&str, &'a str>, key: &'static str) -> Result<&'a str, WireError> {
    fields.get(key).copied().ok_or(WireError::MissingField(key))
}

fn parse_f64(fields: &BTreeMap<&str, &str>, key: &'static str) -> Result<f64, WireError> {
    let raw = take(fields, key)?;
    raw.parse::<f64>().map_err(|e| WireError::Malformed {
        line: 0,
        reason: format!("field {key}: {e}"),
    })
}

/// Decode a structured text record produced by [`encode_wire`].
pub fn decode_wire(text: &str) -> Result<WirePayload, WireError> {
    let fields = wire_fields(text)?;
    let kind = take(&fields, "type")?;
    let status = |s: &str| {
        SwapStatus::parse(s).ok_or_else(|| WireError::Malformed {
            line: 0,
            reason: format!("unknown status {s:?}"),
        })
    };
    match kind {
        "swap" => Ok(WirePayload::Swap(SwapMessage {
            swap_id: take(&fields, "swap_id")?
                .parse()
                .map_err(|e| WireError::Malformed {
                    line: 0,
                    reason: format!("field swap_id: {e}"),
                })?,
            source_chain: take(&fields, "source_chain")?.to_string(),
            dest_chain: take(&fields, "dest_chain")?.to_string(),
            asset_in: take(&fields, "asset_in")?.to_string(),
            asset_out: take(&fields, "asset_out")?.to_string(),
            value: Value(parse_f64(&fields, "value")?),
            min_out: parse_f64(&fields, "min_out")?,
            status: status(take(&fields, "status")?)?,
        })),
        "refund" => Ok(WirePayload::Refund(RefundMessage {
            swap_id: take(&fields, "swap_id")?
                .parse()
                .map_err(|e| WireError::Malformed {
                    line: 0,
                    reason: format!("field swap_id: {e}"),
                })?,
            source_chain: take(&fields, "source_chain")?.to_string(),
            asset_in: take(&fields, "asset_in")?.to_string(),
            value: Value(parse_f64(&fields, "value")?),
            reason: RefundReason::parse(take(&fields, "reason")?).ok_or_else(|| {
                WireError::Malformed {
                    line: 0,
                    reason: "unknown refund reason".to_string(),
                }
            })?,
            status: status(take(&fields, "status")?)?,
        })),
        other => Err(WireError::UnknownType(other.to_string())),
    }
}
