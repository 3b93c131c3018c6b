//! Message relay with seeded fault injection.
//!
//! The relay decides each message's complete fate at send time: how many
//! copies arrive (duplication), when (sampled delays, optionally FIFO per
//! directed channel), or that none do (drop). Deciding fates up front keeps
//! the schedule a pure function of the seed and lets a lost swap message be
//! converted into a source-side refund claim, the simulator's stand-in for
//! the timeout/proof-of-non-delivery machinery a real deployment would
//! need.
//!
//! Faults are asymmetric: only forward swap messages can be
//! dropped. Refund messages model the source chain reclaiming funds after a
//! proven failure, so the relay treats them as reliable (delayed,
//! duplicated, and reordered like anything else, but always delivered).
//! Without that, a dropped refund would strand value forever and no fault
//! schedule could quiesce conserved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pool::ChainId;
use crate::protocol::{SwapId, WirePayload};
use crate::rng::SplitMix64;

/// Relay behavior knobs. All randomness flows from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayConfig {
    pub seed: u64,
    /// Delivery delay bounds in event ticks, inclusive.
    pub min_delay: u64,
    pub max_delay: u64,
    /// Probability a swap message is lost entirely (no copy delivered).
    pub drop_rate: f64,
    /// Probability a delivered message arrives twice.
    pub dup_rate: f64,
    /// When false, deliveries on each directed chain pair keep send order.
    pub reorder: bool,
    /// Ticks after which a lost swap message turns into a refund claim on
    /// its source chain. Required whenever drops are possible.
    pub refund_timeout: Option<u64>,
}

impl Default for RelayConfig {
    fn default() -> Self {
        RelayConfig {
            seed: 0,
            min_delay: 1,
            max_delay: 1,
            drop_rate: 0.0,
            dup_rate: 0.0,
            reorder: false,
            refund_timeout: None,
        }
    }
}

impl RelayConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_delay > self.max_delay {
            return Err(format!(
                "relay min_delay {} exceeds max_delay {}",
                self.min_delay, self.max_delay
            ));
        }
        for (name, rate) in [("drop_rate", self.drop_rate), ("dup_rate", self.dup_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(format!("relay {name} {rate} outside [0, 1]"));
            }
        }
        if self.drop_rate > 0.0 {
            match self.refund_timeout {
                None => {
                    return Err(
                        "relay drop_rate > 0 requires refund_timeout so lost swaps resolve"
                            .to_string(),
                    )
                }
                Some(t) if t < self.max_delay => {
                    return Err(format!(
                        "refund_timeout {} must be at least max_delay {}",
                        t, self.max_delay
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// A scheduled arrival of a wire record at a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub tick: u64,
    pub to_chain: ChainId,
    pub wire: String,
}

/// A scheduled source-side refund claim for a lost swap message.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeoutClaim {
    pub tick: u64,
    pub chain: ChainId,
    pub swap_id: SwapId,
}

/// What the relay scheduled for one sent message.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SendOutcome {
    pub deliveries: Vec<Delivery>,
    pub claim: Option<TimeoutClaim>,
    pub dropped: bool,
    pub duplicated: bool,
}

#[derive(Debug, Clone)]
pub struct RelayState {
    config: RelayConfig,
    /// Master stream; hands every send its own substream seed, so one
    /// message's fate draws never perturb another's. Adding or removing
    /// faults therefore leaves unaffected messages' schedules untouched.
    master: SplitMix64,
    /// Per directed channel: earliest tick the next delivery may use when
    /// reordering is off.
    fifo_floor: BTreeMap<(ChainId, ChainId), u64>,
}

impl RelayState {
    pub fn new(config: RelayConfig) -> Self {
        let master = SplitMix64::new(config.seed);
        RelayState {
            config,
            master,
            fifo_floor: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &RelayConfig {
        &self.config
    }

    /// Apply a mid-run fault toggle.
    pub fn reconfigure(
        &mut self,
        drop_rate: Option<f64>,
        dup_rate: Option<f64>,
        reorder: Option<bool>,
    ) {
        if let Some(d) = drop_rate {
            self.config.drop_rate = d;
        }
        if let Some(d) = dup_rate {
            self.config.dup_rate = d;
        }
        if let Some(r) = reorder {
            self.config.reorder = r;
        }
    }

    fn sample_delay(rng: &mut SplitMix64, config: &RelayConfig) -> u64 {
        let span = config.max_delay - config.min_delay + 1;
        config.min_delay + rng.next_below(span)
    }

    fn clamp_fifo(&mut self, mut tick: u64, from: &str, to: &str) -> u64 {
        if !self.config.reorder {
            let key = (from.to_string(), to.to_string());
            let floor = self.fifo_floor.get(&key).copied().unwrap_or(0);
            tick = tick.max(floor);
            self.fifo_floor.insert(key, tick);
        }
        tick
    }

    /// Send a wire record from `from` to `to` at tick `now`, sampling its
    /// fate from this send's own substream. Swap messages may be lost
    /// (scheduling a refund claim instead); refund messages always arrive
    /// at least once. A duplicate models a retransmission and arrives at or
    /// after the original copy, so it is always a replay at the receiver.
    pub fn send(&mut self, now: u64, from: &str, to: &str, payload: &WirePayload) -> SendOutcome {
        let mut rng = SplitMix64::new(self.master.next_u64());
        let mut outcome = SendOutcome::default();
        let lost = rng.chance(self.config.drop_rate);
        let duplicated = rng.chance(self.config.dup_rate);
        if let WirePayload::Swap(msg) = payload {
            if lost {
                let timeout = self
                    .config
                    .refund_timeout
                    .expect("validated: drops require refund_timeout");
                outcome.dropped = true;
                outcome.claim = Some(TimeoutClaim {
                    tick: now + timeout,
                    chain: msg.source_chain.clone(),
                    swap_id: msg.swap_id,
                });
                return outcome;
            }
        }
        let wire = crate::protocol::encode_wire(payload);
        let first_tick =
            self.clamp_fifo(now + Self::sample_delay(&mut rng, &self.config), from, to);
        outcome.deliveries.push(Delivery {
            tick: first_tick,
            to_chain: to.to_string(),
            wire: wire.clone(),
        });
        if duplicated {
            outcome.duplicated = true;
            let retick = self.clamp_fifo(
                first_tick + Self::sample_delay(&mut rng, &self.config),
                from,
                to,
            );
            outcome.deliveries.push(Delivery {
                tick: retick,
                to_chain: to.to_string(),
                wire,
            });
        }
        outcome
    }
}
