//! Run reports: per-swap receipts, the value-deviation trace, final state
//! snapshots, and the invariant-violation list.
//!
//! Reports are structured text. Every numeric field is serialized as a
//! decimal string, the shortest one that parses back to the identical
//! binary64, so rendered reports are byte-identical across platforms and
//! runs, and golden files never drift. The header records the schema
//! version, the RNG identity, and the seed needed to reproduce the run.

use serde::{Deserialize, Serialize};

/// Bumped whenever the report layout changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Round down to `places` decimals. Outputs paid to users quantize in the
/// pool's favor wherever a report rounds at all.
fn floor_decimals(v: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (v * scale).floor() / scale
}

/// Serialize `f64` as the shortest round-tripping decimal string.
pub mod decimal {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse::<f64>().map_err(serde::de::Error::custom)
    }
}

/// Same as [`decimal`] for optional fields.
pub mod decimal_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_some(&format!("{x}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|r| r.parse::<f64>().map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiptRow {
    pub swap_id: u64,
    pub source_chain: String,
    pub dest_chain: String,
    pub asset_in: String,
    pub asset_out: String,
    #[serde(with = "decimal")]
    pub amount_in: f64,
    #[serde(with = "decimal")]
    pub fee_paid: f64,
    #[serde(with = "decimal")]
    pub amount_out: f64,
    /// `amount_in / amount_out`.
    #[serde(with = "decimal")]
    pub effective_price: f64,
    /// `1 − amount_out / ideal_out`, where the ideal output converts the
    /// post-fee input at the marginal spot prices both sides saw.
    #[serde(with = "decimal")]
    pub slippage: f64,
    pub initiated_tick: u64,
    pub settled_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefundRow {
    pub swap_id: u64,
    pub source_chain: String,
    pub asset_in: String,
    pub reason: String,
    #[serde(with = "decimal")]
    pub refunded_amount: f64,
    pub initiated_tick: u64,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Index of the processed event (0-based, in processing order).
    pub event_seq: u64,
    pub tick: u64,
    /// Pool-wide value deviation after the event.
    #[serde(with = "decimal")]
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRow {
    pub asset_id: String,
    pub curve: String,
    #[serde(with = "decimal")]
    pub weight: f64,
    #[serde(with = "decimal_opt", default, skip_serializing_if = "Option::is_none")]
    pub x_stable: Option<f64>,
    #[serde(with = "decimal_opt", default, skip_serializing_if = "Option::is_none")]
    pub amplification: Option<f64>,
    #[serde(with = "decimal")]
    pub balance: f64,
    #[serde(with = "decimal")]
    pub reference: f64,
    #[serde(with = "decimal")]
    pub local_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub chain_id: String,
    pub local_time: u64,
    pub assets: Vec<AssetRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionRow {
    pub provider: String,
    #[serde(with = "decimal")]
    pub shares: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareSnapshot {
    #[serde(with = "decimal")]
    pub total_supply: f64,
    pub positions: Vec<PositionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapCounts {
    pub initiated: u64,
    pub finalized: u64,
    pub refunded: u64,
    pub pending: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalitySummary {
    /// True iff every non-coordinated event touched at most one chain.
    pub single_chain_ok: bool,
    /// Liquidity events coordinate every chain and are tallied here instead.
    pub coordinated_events: u64,
}

/// Complete record of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// RNG algorithm identity, for reproduction.
    pub generator: String,
    pub seed: u64,
    pub scenario: String,
    /// True iff the run drained its queue with no aborts: nothing pending,
    /// nothing refunding.
    pub quiescent: bool,
    pub events_processed: u64,
    pub swaps: SwapCounts,
    pub receipts: Vec<ReceiptRow>,
    pub refunds: Vec<RefundRow>,
    pub deviation_trace: Vec<TracePoint>,
    /// Pool-wide deviation at end of run.
    #[serde(with = "decimal")]
    pub final_deviation: f64,
    pub chains: Vec<ChainSnapshot>,
    pub shares: ShareSnapshot,
    pub locality: LocalitySummary,
    pub violations: Vec<String>,
}

impl Report {
    /// Structured text rendering (JSON with decimal-string numerics).
    /// Byte-identical for identical runs.
    pub fn render_structured(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_structured(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Delimited rendering: the value-deviation trace as CSV, one row per
    /// processed event. The series external plotting tools want.
    pub fn render_delimited(&self) -> String {
        let mut out = String::from("event_seq,tick,deviation\n");
        for p in &self.deviation_trace {
            out.push_str(&format!("{},{},{}\n", p.event_seq, p.tick, p.deviation));
        }
        out
    }

    /// Human-readable summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "scenario {} | schema v{} | rng {} seed {}\n",
            self.scenario, self.schema_version, self.generator, self.seed
        ));
        out.push_str(&format!(
            "events {} | swaps {} (finalized {}, refunded {}, pending {}) | quiescent {}\n",
            self.events_processed,
            self.swaps.initiated,
            self.swaps.finalized,
            self.swaps.refunded,
            self.swaps.pending,
            self.quiescent
        ));
        out.push_str(&format!("final deviation {}\n", self.final_deviation));
        if !self.receipts.is_empty() {
            out.push_str("\nreceipts:\n");
            out.push_str(
                "  swap_id  route                        amount_in      amount_out     eff_price      slippage\n",
            );
            for r in &self.receipts {
                let route = format!(
                    "{}:{} -> {}:{}",
                    r.source_chain, r.asset_in, r.dest_chain, r.asset_out
                );
                // Swap outputs quantize downward, in the pool's favor; the
                // structured report keeps the unrounded values.
                out.push_str(&format!(
                    "  {:<8} {:<28} {:<14.6} {:<14.6} {:<14.6} {:.3e}\n",
                    r.swap_id,
                    route,
                    r.amount_in,
                    floor_decimals(r.amount_out, 6),
                    r.effective_price,
                    r.slippage
                ));
            }
        }
        if !self.refunds.is_empty() {
            out.push_str("\nrefunds:\n");
            for r in &self.refunds {
                out.push_str(&format!(
                    "  swap {} on {}:{} reason {} amount {:.6}\n",
                    r.swap_id,
                    r.source_chain,
                    r.asset_in,
                    r.reason,
                    floor_decimals(r.refunded_amount, 6)
                ));
            }
        }
        out.push_str("\nfinal state:\n");
        for chain in &self.chains {
            out.push_str(&format!(
                "  chain {} (events {})\n",
                chain.chain_id, chain.local_time
            ));
            for a in &chain.assets {
                let stable = match (a.x_stable, a.amplification) {
                    (Some(xs), Some(amp)) => format!(" x_stable {xs:.6} amp {amp:.6}"),
                    _ => String::new(),
                };
                out.push_str(&format!(
                    "    {:<8} {} w {:<10.4} balance {:<16.8} reference {:<16.8} local_value {:+.3e}{}\n",
                    a.asset_id, a.curve, a.weight, a.balance, a.reference, a.local_value, stable
                ));
            }
        }
        out.push_str(&format!(
            "\nshares: supply {:.8}, {} position(s)\n",
            self.shares.total_supply,
            self.shares.positions.len()
        ));
        out.push_str(&format!(
            "locality: single_chain_ok {} coordinated_events {}\n",
            self.locality.single_chain_ok, self.locality.coordinated_events
        ));
        if self.violations.is_empty() {
            out.push_str("violations: none\n");
        } else {
            out.push_str(&format!("violations ({}):\n", self.violations.len()));
            for v in &self.violations {
                out.push_str(&format!("  - {v}\n"));
            }
        }
        out
    }
}
