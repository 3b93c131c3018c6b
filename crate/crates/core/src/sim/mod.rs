//! Deterministic multi-chain discrete-event simulator.
//!
//! A [`World`] holds one [`ChainState`] per chain, a fault-injecting relay,
//! and a single priority queue of pending work ordered by `(tick, seq)`:
//! integer event ticks, ties broken by insertion sequence. Time is purely
//! logical; identical `(scenario, seed)` pairs replay identical histories,
//! byte for byte, down to the rendered report.
//!
//! Chains are isolated state machines: a swap delivery may only touch the
//! destination chain's pool and registry, a refund only the source chain's.
//! Every event handler records which chains it touched, and
//! [`World::audit_locality`] checks the log. Liquidity events are the
//! documented exception: the pool design requires all-asset proportional
//! deposits, so the simulator applies them as coordinated steps across all
//! chains and the audit reports them separately instead of flagging them.
//!
//! After every event the world checks pool and ledger invariants; a
//! violation aborts the run and the report carries the diagnostic plus the
//! full state dump.

pub mod relay;
pub mod report;
pub mod scenario;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

pub use relay::RelayConfig;
pub use report::Report;
pub use scenario::{Scenario, ScenarioError, ScenarioEvent};

use crate::curve::Value;
use crate::pool::{self, ChainId, PoolView, ShareLedger};
use crate::protocol::{
    self, FinalizeOutcome, RefundMessage, RefundReason, SwapId, SwapRegistry, SwapStatus,
    WirePayload,
};
use crate::rng;
use crate::sim::relay::RelayState;
use crate::sim::report::{
    AssetRow, ChainSnapshot, LocalitySummary, PositionRow, ReceiptRow, RefundRow, ShareSnapshot,
    SwapCounts, TracePoint, REPORT_SCHEMA_VERSION,
};

/// One simulated chain: its slice of the pool, its processed-message
/// registry, and a local event counter.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub chain_id: ChainId,
    pub pool: PoolView,
    pub registry: SwapRegistry,
    /// Number of events this chain has processed.
    pub local_time: u64,
}

/// What one event handler touched, for the locality audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessRecord {
    pub event_seq: u64,
    pub tick: u64,
    pub label: String,
    pub chains: BTreeSet<ChainId>,
    /// True for liquidity events, which coordinate every chain.
    pub coordinated: bool,
}

/// Locality audit result.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityAudit {
    pub single_chain_ok: bool,
    pub coordinated_events: u64,
    pub violations: Vec<String>,
}

/// Audit a handler access log: every non-coordinated event must have
/// touched at most one chain (plus its message payload, which is not chain
/// state). Coordinated events are counted, not flagged.
pub fn audit_access_log(records: &[AccessRecord]) -> LocalityAudit {
    let mut violations = Vec::new();
    let mut coordinated = 0u64;
    for rec in records {
        if rec.coordinated {
            coordinated += 1;
        } else if rec.chains.len() > 1 {
            violations.push(format!(
                "event {} ({}) touched {} chains: {:?}",
                rec.event_seq,
                rec.label,
                rec.chains.len(),
                rec.chains
            ));
        }
    }
    LocalityAudit {
        single_chain_ok: violations.is_empty(),
        coordinated_events: coordinated,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Scenario(ScenarioEvent),
    Deliver { to_chain: ChainId, wire: String },
    RefundClaim { chain: ChainId, swap_id: SwapId },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    tick: u64,
    seq: u64,
}

#[derive(Debug, Clone)]
struct QueueEntry {
    key: QueueKey,
    payload: Payload,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

/// Source-side and settlement bookkeeping for one swap, kept by the world
/// for report assembly. This is reporting state, not chain state: no event
/// handler reads it across chains.
#[derive(Debug, Clone)]
struct SwapMeta {
    source_chain: ChainId,
    dest_chain: ChainId,
    asset_in: String,
    asset_out: String,
    amount_in: f64,
    net_in: f64,
    fee_paid: f64,
    spot_in: f64,
    initiated_tick: u64,
    settled: Option<Settlement>,
}

#[derive(Debug, Clone)]
enum Settlement {
    Finalized {
        amount_out: f64,
        spot_out: f64,
        tick: u64,
    },
    Refunded {
        amount: f64,
        reason: RefundReason,
        tick: u64,
    },
}

/// The simulated multi-chain world.
#[derive(Debug, Clone)]
pub struct World {
    scenario_name: String,
    chains: BTreeMap<ChainId, ChainState>,
    ledger: ShareLedger,
    relay: RelayState,
    queue: BinaryHeap<Reverse<QueueEntry>>,
    next_seq: u64,
    now: u64,
    max_ticks: u64,
    inversion_tol: f64,
    verify_mode: bool,
    seed: u64,
    next_swap_id: SwapId,
    swap_meta: BTreeMap<SwapId, SwapMeta>,
    deviation_trace: Vec<TracePoint>,
    access_log: Vec<AccessRecord>,
    violations: Vec<String>,
    events_processed: u64,
    aborted: bool,
}

impl World {
    /// Build a world from a validated scenario and enqueue its events.
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let mut deposits = Vec::new();
        for chain in &scenario.chains {
            for asset in &chain.assets {
                deposits.push(pool::Deposit {
                    chain_id: chain.id.clone(),
                    asset_id: asset.id.clone(),
                    amount: asset.amount,
                    curve: asset.curve.build(asset.amount)?,
                });
            }
        }
        let (pools, ledger) =
            pool::init_pool(&deposits, scenario.run.fee_rate, &scenario.run.founder).map_err(
                |e| ScenarioError::Validation {
                    context: "init".to_string(),
                    reason: e.to_string(),
                },
            )?;
        let chains = pools
            .into_iter()
            .map(|(chain_id, pool)| {
                (
                    chain_id.clone(),
                    ChainState {
                        chain_id,
                        pool,
                        registry: SwapRegistry::new(),
                        local_time: 0,
                    },
                )
            })
            .collect();
        let mut world = World {
            scenario_name: scenario.name.clone(),
            chains,
            ledger,
            relay: RelayState::new(scenario.relay.clone()),
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
            max_ticks: scenario.run.max_ticks,
            inversion_tol: scenario.run.inversion_tol,
            verify_mode: scenario.run.verify_mode,
            seed: scenario.relay.seed,
            next_swap_id: 1,
            swap_meta: BTreeMap::new(),
            deviation_trace: Vec::new(),
            access_log: Vec::new(),
            violations: Vec::new(),
            events_processed: 0,
            aborted: false,
        };
        for timed in &scenario.events {
            world.push(timed.at, Payload::Scenario(timed.event.clone()));
        }
        Ok(world)
    }

    fn push(&mut self, tick: u64, payload: Payload) {
        let key = QueueKey {
            tick,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        self.queue.push(Reverse(QueueEntry { key, payload }));
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn chain(&self, chain_id: &str) -> Option<&ChainState> {
        self.chains.get(chain_id)
    }

    pub fn chains(&self) -> impl Iterator<Item = &ChainState> {
        self.chains.values()
    }

    pub fn ledger(&self) -> &ShareLedger {
        &self.ledger
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn access_log(&self) -> &[AccessRecord] {
        &self.access_log
    }

    /// Pool-wide value deviation right now.
    pub fn deviation(&self) -> Value {
        pool::value_deviation(self.chains.values().map(|c| &c.pool))
    }

    /// Locality audit over everything processed so far.
    pub fn audit_locality(&self) -> LocalityAudit {
        audit_access_log(&self.access_log)
    }

    fn touch(&mut self, chain_id: &str) {
        if let Some(chain) = self.chains.get_mut(chain_id) {
            chain.local_time += 1;
        }
    }

    fn record_access(&mut self, label: impl Into<String>, chains: &[&str], coordinated: bool) {
        self.access_log.push(AccessRecord {
            event_seq: self.events_processed,
            tick: self.now,
            label: label.into(),
            chains: chains.iter().map(|c| c.to_string()).collect(),
            coordinated,
        });
    }

    fn violation(&mut self, message: String) {
        let dump = self.state_dump();
        self.violations
            .push(format!("tick {}: {message}\n{dump}", self.now));
        self.aborted = true;
        self.queue.clear();
    }

    /// Diagnostic snapshot attached to violations.
    fn state_dump(&self) -> String {
        let mut out = String::from("state dump:\n");
        for chain in self.chains.values() {
            out.push_str(&format!("  chain {}:\n", chain.chain_id));
            for asset in chain.pool.assets() {
                out.push_str(&format!(
                    "    {} balance={} reference={} local_value={:?}\n",
                    asset.asset_id,
                    asset.balance,
                    asset.reference,
                    asset.local_value().map(Value::amount)
                ));
            }
        }
        out.push_str(&format!("  share supply={}\n", self.ledger.total_supply()));
        out
    }

    fn check_invariants_after_event(&mut self) {
        let mut problem: Option<String> = None;
        for chain in self.chains.values() {
            if let Err(e) = chain.pool.check_invariants() {
                problem = Some(format!("chain {}: {e}", chain.chain_id));
                break;
            }
        }
        if problem.is_none() {
            if let Err(e) = self.ledger.check_invariants() {
                problem = Some(e);
            }
        }
        if let Some(p) = problem {
            self.violation(p);
        }
    }

    /// Process the earliest queued item. Returns `false` when the world is
    /// quiescent (queue drained or run aborted).
    pub fn step(&mut self) -> bool {
        let Some(Reverse(entry)) = self.queue.pop() else {
            return false;
        };
        self.now = entry.key.tick;
        if self.now > self.max_ticks {
            self.violation(format!(
                "event clock {} passed max_ticks {} before quiescence",
                self.now, self.max_ticks
            ));
            return false;
        }
        match entry.payload {
            Payload::Scenario(ev) => self.apply_scenario_event(ev),
            Payload::Deliver { to_chain, wire } => self.deliver(&to_chain, &wire),
            Payload::RefundClaim { chain, swap_id } => self.refund_claim(&chain, swap_id),
        }
        self.events_processed += 1;
        self.check_invariants_after_event();
        let deviation = self.deviation().amount();
        self.deviation_trace.push(TracePoint {
            event_seq: self.events_processed - 1,
            tick: self.now,
            deviation,
        });
        !self.aborted
    }

    /// Run until quiescence (or abort).
    pub fn run_to_quiescence(&mut self) {
        while self.step() {}
    }

    fn apply_scenario_event(&mut self, event: ScenarioEvent) {
        match event {
            ScenarioEvent::Swap {
                source_chain,
                asset_in,
                amount_in,
                dest_chain,
                asset_out,
                min_out,
            } => {
                let swap_id = self.next_swap_id;
                self.next_swap_id += 1;
                let now = self.now;
                let Some(chain) = self.chains.get_mut(&source_chain) else {
                    self.violation(format!("swap {swap_id}: unknown chain {source_chain}"));
                    return;
                };
                let spot_in = chain
                    .pool
                    .asset(&asset_in)
                    .and_then(|a| a.curve.price(a.balance).ok())
                    .unwrap_or(f64::NAN);
                let msg = match protocol::initiate_swap(
                    &mut chain.pool,
                    &mut chain.registry,
                    swap_id,
                    &source_chain,
                    &asset_in,
                    amount_in,
                    &dest_chain,
                    &asset_out,
                    min_out,
                ) {
                    Ok(msg) => msg,
                    Err(e) => {
                        self.violation(format!("swap {swap_id}: initiation failed: {e}"));
                        return;
                    }
                };
                chain.local_time += 1;
                let outgoing = chain.registry.outgoing(swap_id).expect("just initiated");
                self.swap_meta.insert(
                    swap_id,
                    SwapMeta {
                        source_chain: source_chain.clone(),
                        dest_chain: dest_chain.clone(),
                        asset_in: asset_in.clone(),
                        asset_out: asset_out.clone(),
                        amount_in,
                        net_in: outgoing.net_in,
                        fee_paid: outgoing.fee_paid,
                        spot_in,
                        initiated_tick: now,
                        settled: None,
                    },
                );
                self.record_access(format!("swap:{swap_id}:initiate"), &[&source_chain], false);
                self.relay_send(&source_chain, &dest_chain, &WirePayload::Swap(msg));
            }
            ScenarioEvent::AddLiquidity { provider, lambda } => {
                let chain_ids: Vec<String> = self.chains.keys().cloned().collect();
                let result = pool::add_liquidity(
                    self.chains.values_mut().map(|c| &mut c.pool),
                    &mut self.ledger,
                    &provider,
                    lambda,
                );
                for id in &chain_ids {
                    self.touch(id);
                }
                let refs: Vec<&str> = chain_ids.iter().map(|s| s.as_str()).collect();
                self.record_access("liquidity:add", &refs, true);
                if let Err(e) = result {
                    self.violation(format!("add_liquidity failed: {e}"));
                }
            }
            ScenarioEvent::RemoveLiquidity { provider, shares } => {
                let chain_ids: Vec<String> = self.chains.keys().cloned().collect();
                let result = pool::remove_liquidity(
                    self.chains.values_mut().map(|c| &mut c.pool),
                    &mut self.ledger,
                    &provider,
                    shares,
                );
                for id in &chain_ids {
                    self.touch(id);
                }
                let refs: Vec<&str> = chain_ids.iter().map(|s| s.as_str()).collect();
                self.record_access("liquidity:remove", &refs, true);
                if let Err(e) = result {
                    self.violation(format!("remove_liquidity failed: {e}"));
                }
            }
            ScenarioEvent::SetFeeRate { chain, fee_rate } => {
                let result = match self.chains.get_mut(&chain) {
                    Some(c) => {
                        c.local_time += 1;
                        c.pool.set_fee_rate(fee_rate)
                    }
                    None => {
                        self.violation(format!("set_fee_rate: unknown chain {chain}"));
                        return;
                    }
                };
                self.record_access("config:fee_rate", &[&chain], false);
                if let Err(e) = result {
                    self.violation(format!("set_fee_rate failed: {e}"));
                }
            }
            ScenarioEvent::SetRelay {
                drop_rate,
                dup_rate,
                reorder,
            } => {
                self.relay.reconfigure(drop_rate, dup_rate, reorder);
                self.record_access("config:relay", &[], false);
            }
            ScenarioEvent::InjectBalance {
                chain,
                asset,
                delta,
            } => {
                let result = match self.chains.get_mut(&chain) {
                    Some(c) => {
                        c.local_time += 1;
                        c.pool.inject_balance_delta(&asset, delta)
                    }
                    None => {
                        self.violation(format!("inject_balance: unknown chain {chain}"));
                        return;
                    }
                };
                self.record_access("fixture:inject_balance", &[&chain], false);
                if let Err(e) = result {
                    self.violation(format!("inject_balance failed: {e}"));
                }
            }
        }
    }

    fn relay_send(&mut self, from: &str, to: &str, payload: &WirePayload) {
        let outcome = self.relay.send(self.now, from, to, payload);
        for delivery in outcome.deliveries {
            self.push(
                delivery.tick,
                Payload::Deliver {
                    to_chain: delivery.to_chain,
                    wire: delivery.wire,
                },
            );
        }
        if let Some(claim) = outcome.claim {
            self.push(
                claim.tick,
                Payload::RefundClaim {
                    chain: claim.chain,
                    swap_id: claim.swap_id,
                },
            );
        }
    }

    fn deliver(&mut self, to_chain: &str, wire: &str) {
        let payload = match protocol::decode_wire(wire) {
            Ok(p) => p,
            Err(e) => {
                // Cannot even identify a source to refund; record and drop.
                self.record_access("deliver:malformed", &[to_chain], false);
                self.violations
                    .push(format!("tick {}: undecodable wire record: {e}", self.now));
                self.aborted = true;
                self.queue.clear();
                return;
            }
        };
        match payload {
            WirePayload::Swap(msg) => {
                let tol = self.inversion_tol;
                let verify = self.verify_mode;
                let now = self.now;
                let swap_id = msg.swap_id;
                let Some(chain) = self.chains.get_mut(to_chain) else {
                    // Unknown destination chain: malformed route, bounce the
                    // value back to its source.
                    self.record_access("deliver:unroutable", &[to_chain], false);
                    let refund = RefundMessage {
                        swap_id,
                        source_chain: msg.source_chain.clone(),
                        asset_in: msg.asset_in.clone(),
                        value: msg.value,
                        reason: RefundReason::MalformedMessage,
                        status: SwapStatus::Refunding,
                    };
                    let source = refund.source_chain.clone();
                    self.relay_send(to_chain, &source, &WirePayload::Refund(refund));
                    return;
                };
                chain.local_time += 1;
                let spot_out = chain
                    .pool
                    .asset(&msg.asset_out)
                    .and_then(|a| a.curve.price(a.balance).ok())
                    .unwrap_or(f64::NAN);
                let result = if verify {
                    protocol::finalize_swap_verified(
                        &mut chain.pool,
                        &mut chain.registry,
                        &msg,
                        tol,
                    )
                } else {
                    protocol::finalize_swap(&mut chain.pool, &mut chain.registry, &msg, tol)
                };
                self.record_access(format!("swap:{swap_id}:finalize"), &[to_chain], false);
                if !result.fresh {
                    return;
                }
                match result.outcome {
                    FinalizeOutcome::Settled { amount_out } => {
                        if let Some(meta) = self.swap_meta.get_mut(&swap_id) {
                            meta.settled = Some(Settlement::Finalized {
                                amount_out,
                                spot_out,
                                tick: now,
                            });
                        }
                    }
                    FinalizeOutcome::Refund(refund) => {
                        let source = refund.source_chain.clone();
                        let from = to_chain.to_string();
                        self.relay_send(&from, &source, &WirePayload::Refund(refund));
                    }
                }
            }
            WirePayload::Refund(refund) => {
                self.apply_refund_on(to_chain, &refund);
            }
        }
    }

    fn apply_refund_on(&mut self, chain_id: &str, refund: &RefundMessage) {
        let tol = self.inversion_tol;
        let now = self.now;
        let swap_id = refund.swap_id;
        let Some(chain) = self.chains.get_mut(chain_id) else {
            self.record_access("refund:unroutable", &[chain_id], false);
            return;
        };
        chain.local_time += 1;
        let applied = protocol::apply_refund(&mut chain.pool, &mut chain.registry, refund, tol);
        self.record_access(format!("swap:{swap_id}:refund"), &[chain_id], false);
        match applied {
            Ok(Some(amount)) => {
                if let Some(meta) = self.swap_meta.get_mut(&swap_id) {
                    meta.settled = Some(Settlement::Refunded {
                        amount,
                        reason: refund.reason,
                        tick: now,
                    });
                }
            }
            Ok(None) => {}
            Err(protocol::ProtocolError::UnknownSwapId(id)) => {
                // Rejected, auditable rather than fatal.
                self.record_access(format!("swap:{id}:refund_rejected"), &[chain_id], false);
            }
            Err(e) => {
                self.violation(format!("refund for swap {swap_id} failed: {e}"));
            }
        }
    }

    fn refund_claim(&mut self, chain_id: &str, swap_id: SwapId) {
        let Some(chain) = self.chains.get(chain_id) else {
            return;
        };
        let Some(outgoing) = chain.registry.outgoing(swap_id) else {
            return;
        };
        if outgoing.status != SwapStatus::Pending {
            return;
        }
        let refund = RefundMessage {
            swap_id,
            source_chain: chain_id.to_string(),
            asset_in: outgoing.asset_in.clone(),
            value: outgoing.value,
            reason: RefundReason::Timeout,
            status: SwapStatus::Refunding,
        };
        self.apply_refund_on(chain_id, &refund);
    }

    /// True when nothing is queued and the run was not aborted.
    pub fn quiescent(&self) -> bool {
        self.queue.is_empty() && !self.aborted
    }

    /// Assemble the run report.
    pub fn report(&self) -> Report {
        let mut receipts = Vec::new();
        let mut refunds = Vec::new();
        let mut finalized = 0u64;
        let mut refunded = 0u64;
        for (&swap_id, meta) in &self.swap_meta {
            match &meta.settled {
                Some(Settlement::Finalized {
                    amount_out,
                    spot_out,
                    tick,
                }) => {
                    finalized += 1;
                    // Ideal output converts the post-fee input at the spot
                    // prices each side saw at execution time.
                    let ideal_out = meta.net_in * meta.spot_in / spot_out;
                    let slippage = 1.0 - amount_out / ideal_out;
                    receipts.push(ReceiptRow {
                        swap_id,
                        source_chain: meta.source_chain.clone(),
                        dest_chain: meta.dest_chain.clone(),
                        asset_in: meta.asset_in.clone(),
                        asset_out: meta.asset_out.clone(),
                        amount_in: meta.amount_in,
                        fee_paid: meta.fee_paid,
                        amount_out: *amount_out,
                        effective_price: meta.amount_in / amount_out,
                        slippage,
                        initiated_tick: meta.initiated_tick,
                        settled_tick: *tick,
                    });
                }
                Some(Settlement::Refunded {
                    amount,
                    reason,
                    tick,
                }) => {
                    refunded += 1;
                    refunds.push(RefundRow {
                        swap_id,
                        source_chain: meta.source_chain.clone(),
                        asset_in: meta.asset_in.clone(),
                        reason: reason.as_str().to_string(),
                        refunded_amount: *amount,
                        initiated_tick: meta.initiated_tick,
                        tick: *tick,
                    });
                }
                None => {}
            }
        }
        let initiated = self.swap_meta.len() as u64;
        let chains = self
            .chains
            .values()
            .map(|chain| ChainSnapshot {
                chain_id: chain.chain_id.clone(),
                local_time: chain.local_time,
                assets: chain
                    .pool
                    .assets()
                    .map(|a| AssetRow {
                        asset_id: a.asset_id.clone(),
                        curve: if a.curve.is_stable() {
                            "stable".to_string()
                        } else {
                            "volatile".to_string()
                        },
                        weight: a.curve.weight(),
                        x_stable: a.curve.x_stable(),
                        amplification: a.curve.amplification(),
                        balance: a.balance,
                        reference: a.reference,
                        local_value: a.local_value().map(Value::amount).unwrap_or(f64::NAN),
                    })
                    .collect(),
            })
            .collect();
        let audit = self.audit_locality();
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            generator: rng::GENERATOR_NAME.to_string(),
            seed: self.seed,
            scenario: self.scenario_name.clone(),
            quiescent: self.quiescent(),
            events_processed: self.events_processed,
            swaps: SwapCounts {
                initiated,
                finalized,
                refunded,
                pending: initiated - finalized - refunded,
            },
            receipts,
            refunds,
            deviation_trace: self.deviation_trace.clone(),
            final_deviation: self.deviation().amount(),
            chains,
            shares: ShareSnapshot {
                total_supply: self.ledger.total_supply(),
                positions: self
                    .ledger
                    .positions()
                    .map(|(provider, shares)| PositionRow {
                        provider: provider.to_string(),
                        shares,
                    })
                    .collect(),
            },
            locality: LocalitySummary {
                single_chain_ok: audit.single_chain_ok,
                coordinated_events: audit.coordinated_events,
            },
            violations: self.violations.clone(),
        }
    }
}

/// Validate, build, and run a scenario to quiescence, optionally checking
/// the final conservation bound, and return its report.
pub fn run_scenario(scenario: &Scenario) -> Result<Report, ScenarioError> {
    let mut world = World::new(scenario)?;
    world.run_to_quiescence();
    // At quiescence every message is settled, so a pool-wide deviation
    // beyond accumulated float noise means value leaked.
    if world.quiescent() {
        let bound = 1e-7 * (world.events_processed as f64 + 1.0);
        let total = world.deviation().amount();
        if total.abs() > bound {
            world.violations.push(format!(
                "quiescent deviation {total} exceeds conservation bound {bound}"
            ));
        }
    }
    Ok(world.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{AssetSpec, ChainSpec, CurveSpec, RunSettings, TimedEvent};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn two_chain_scenario(seed: u64) -> Scenario {
        Scenario {
            name: "two_chain".to_string(),
            relay: RelayConfig {
                seed,
                min_delay: 1,
                max_delay: 1,
                ..RelayConfig::default()
            },
            run: RunSettings::default(),
            chains: vec![
                ChainSpec {
                    id: "alpha".into(),
                    assets: vec![AssetSpec {
                        id: "ATK".into(),
                        amount: 100.0,
                        curve: CurveSpec::Volatile { weight: 1.0 },
                    }],
                },
                ChainSpec {
                    id: "beta".into(),
                    assets: vec![AssetSpec {
                        id: "BTK".into(),
                        amount: 100.0,
                        curve: CurveSpec::Volatile { weight: 1.0 },
                    }],
                },
            ],
            events: vec![TimedEvent {
                at: 1,
                event: ScenarioEvent::Swap {
                    source_chain: "alpha".into(),
                    asset_in: "ATK".into(),
                    amount_in: 100.0,
                    dest_chain: "beta".into(),
                    asset_out: "BTK".into(),
                    min_out: 0.0,
                },
            }],
        }
    }

    #[test]
    fn clean_swap_conserves_value_at_quiescence() {
        let report = run_scenario(&two_chain_scenario(7)).unwrap();
        assert!(report.quiescent);
        assert!(report.violations.is_empty());
        assert_eq!(report.swaps.finalized, 1);
        // Mid-flight the deviation equals the message value, then returns
        // to zero once the destination settles.
        assert!(report.deviation_trace[0].deviation > 0.5);
        assert_abs_diff_eq!(report.final_deviation, 0.0, epsilon = 1e-12);
        assert_relative_eq!(report.receipts[0].amount_out, 50.0, max_relative = 1e-12);
    }

    #[test]
    fn same_seed_reproduces_byte_identical_reports() {
        let scenario = two_chain_scenario(99);
        let a = run_scenario(&scenario).unwrap().render_structured();
        let b = run_scenario(&scenario).unwrap().render_structured();
        assert_eq!(a, b);
    }

    #[test]
    fn drop_everything_refunds_everything() {
        let mut scenario = two_chain_scenario(3);
        scenario.relay.drop_rate = 1.0;
        scenario.relay.refund_timeout = Some(10);
        let report = run_scenario(&scenario).unwrap();
        assert!(report.quiescent);
        assert_eq!(report.swaps.refunded, 1);
        assert_eq!(report.swaps.finalized, 0);
        assert_eq!(report.refunds[0].reason, "timeout");
        // Initiator balance restored (fee-free), so state returns to start.
        let alpha = &report.chains[0];
        assert_eq!(alpha.chain_id, "alpha");
        assert_relative_eq!(alpha.assets[0].balance, 100.0, max_relative = 1e-9);
        assert_abs_diff_eq!(report.final_deviation, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn duplicate_delivery_settles_once() {
        let mut scenario = two_chain_scenario(5);
        scenario.relay.dup_rate = 1.0;
        let report = run_scenario(&scenario).unwrap();
        assert!(report.quiescent);
        assert_eq!(report.swaps.finalized, 1);
        // Second copy is a registry no-op: final pool state identical to
        // the fault-free run (local event counts legitimately differ).
        let clean = run_scenario(&two_chain_scenario(5)).unwrap();
        for (faulty, clean) in report.chains.iter().zip(&clean.chains) {
            assert_eq!(faulty.assets, clean.assets);
        }
    }

    #[test]
    fn reorder_preserves_quiescent_conservation() {
        let mut scenario = two_chain_scenario(11);
        scenario.relay.reorder = true;
        scenario.relay.min_delay = 1;
        scenario.relay.max_delay = 5;
        scenario.events.push(TimedEvent {
            at: 2,
            event: ScenarioEvent::Swap {
                source_chain: "alpha".into(),
                asset_in: "ATK".into(),
                amount_in: 40.0,
                dest_chain: "beta".into(),
                asset_out: "BTK".into(),
                min_out: 0.0,
            },
        });
        let report = run_scenario(&scenario).unwrap();
        assert!(report.quiescent);
        assert_eq!(report.swaps.finalized, 2);
        assert_abs_diff_eq!(report.final_deviation, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn slippage_failure_refunds_through_relay() {
        let mut scenario = two_chain_scenario(13);
        // ln 2 against balance 100 yields 50; demand more.
        if let ScenarioEvent::Swap { min_out, .. } = &mut scenario.events[0].event {
            *min_out = 60.0;
        }
        let report = run_scenario(&scenario).unwrap();
        assert!(report.quiescent);
        assert_eq!(report.swaps.refunded, 1);
        assert_eq!(report.refunds[0].reason, "slippage");
        // Refund restores the initiator's balance.
        assert_relative_eq!(
            report.chains[0].assets[0].balance,
            100.0,
            max_relative = 1e-9
        );
        assert_abs_diff_eq!(report.final_deviation, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn inject_balance_fixture_trips_invariant_audit() {
        let mut scenario = two_chain_scenario(17);
        scenario.events.push(TimedEvent {
            at: 5,
            event: ScenarioEvent::InjectBalance {
                chain: "alpha".into(),
                asset: "ATK".into(),
                delta: -1e6,
            },
        });
        let report = run_scenario(&scenario).unwrap();
        assert!(!report.quiescent);
        assert!(!report.violations.is_empty());
        assert!(report.violations[0].contains("not positive"));
    }

    #[test]
    fn verify_mode_matches_search_mode() {
        let mut scenario = two_chain_scenario(23);
        let searched = run_scenario(&scenario).unwrap();
        scenario.run.verify_mode = true;
        let verified = run_scenario(&scenario).unwrap();
        assert_eq!(
            searched.receipts[0].amount_out.to_bits(),
            verified.receipts[0].amount_out.to_bits()
        );
    }

    #[test]
    fn liquidity_event_is_coordinated_not_a_violation() {
        let mut scenario = two_chain_scenario(29);
        scenario.events.push(TimedEvent {
            at: 10,
            event: ScenarioEvent::AddLiquidity {
                provider: "lp".into(),
                lambda: 0.5,
            },
        });
        let report = run_scenario(&scenario).unwrap();
        assert!(report.locality.single_chain_ok);
        assert_eq!(report.locality.coordinated_events, 1);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn synthetic_multi_chain_handler_fails_audit() {
        // Negative control: a handler that touched two chains without the
        // coordinated flag must be flagged.
        let records = vec![AccessRecord {
            event_seq: 0,
            tick: 1,
            label: "rogue".to_string(),
            chains: ["alpha".to_string(), "beta".to_string()]
                .into_iter()
                .collect(),
            coordinated: false,
        }];
        let audit = audit_access_log(&records);
        assert!(!audit.single_chain_ok);
        assert_eq!(audit.violations.len(), 1);
    }

    #[test]
    fn every_passing_run_audits_local() {
        let report = run_scenario(&two_chain_scenario(31)).unwrap();
        assert!(report.locality.single_chain_ok);
    }

    #[test]
    fn same_chain_swap_goes_through_the_relay() {
        let scenario = Scenario {
            name: "one_chain".to_string(),
            relay: RelayConfig {
                seed: 5,
                ..RelayConfig::default()
            },
            run: RunSettings::default(),
            chains: vec![ChainSpec {
                id: "solo".into(),
                assets: vec![
                    AssetSpec {
                        id: "X".into(),
                        amount: 100.0,
                        curve: CurveSpec::Volatile { weight: 1.0 },
                    },
                    AssetSpec {
                        id: "Y".into(),
                        amount: 100.0,
                        curve: CurveSpec::Volatile { weight: 1.0 },
                    },
                ],
            }],
            events: vec![TimedEvent {
                at: 1,
                event: ScenarioEvent::Swap {
                    source_chain: "solo".into(),
                    asset_in: "X".into(),
                    amount_in: 100.0,
                    dest_chain: "solo".into(),
                    asset_out: "Y".into(),
                    min_out: 0.0,
                },
            }],
        };
        let report = run_scenario(&scenario).unwrap();
        assert!(report.quiescent && report.violations.is_empty());
        assert_relative_eq!(report.receipts[0].amount_out, 50.0, max_relative = 1e-12);
        assert_abs_diff_eq!(report.final_deviation, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn undecodable_wire_record_aborts_with_violation() {
        let mut world = World::new(&two_chain_scenario(41)).unwrap();
        world.deliver("alpha", "not a wire record");
        assert!(!world.quiescent());
        assert!(world.violations()[0].contains("undecodable"));
    }

    #[test]
    fn unroutable_swap_bounces_a_refund_to_its_source() {
        let mut world = World::new(&two_chain_scenario(43)).unwrap();
        world.run_to_quiescence();
        // Craft a message addressed to a chain that does not exist. The
        // bounce arrives at alpha, which has no matching outgoing swap, so
        // the refund is rejected into the audit trail and state stands.
        let msg = crate::protocol::SwapMessage {
            swap_id: 999,
            source_chain: "alpha".into(),
            dest_chain: "ghost".into(),
            asset_in: "ATK".into(),
            asset_out: "ZTK".into(),
            value: Value(0.1),
            min_out: 0.0,
            status: SwapStatus::Pending,
        };
        let balance_before = world
            .chain("alpha")
            .unwrap()
            .pool
            .asset("ATK")
            .unwrap()
            .balance;
        let wire = crate::protocol::encode_wire(&WirePayload::Swap(msg));
        world.deliver("ghost", &wire);
        world.run_to_quiescence();
        let balance_after = world
            .chain("alpha")
            .unwrap()
            .pool
            .asset("ATK")
            .unwrap()
            .balance;
        assert_eq!(balance_before, balance_after);
        assert!(world
            .access_log()
            .iter()
            .any(|r| r.label == "deliver:unroutable"));
        assert!(world
            .access_log()
            .iter()
            .any(|r| r.label == "swap:999:refund_rejected"));
        assert!(world.violations().is_empty());
    }

    #[test]
    fn distinct_swaps_get_distinct_ids() {
        let mut scenario = two_chain_scenario(37);
        scenario.events.push(TimedEvent {
            at: 2,
            event: scenario.events[0].event.clone(),
        });
        let report = run_scenario(&scenario).unwrap();
        assert_eq!(report.receipts.len(), 2);
        assert_ne!(report.receipts[0].swap_id, report.receipts[1].swap_id);
    }
}
