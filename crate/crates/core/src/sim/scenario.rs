//! Scenario files: chains, founding deposits, an ordered event list, and
//! relay/fault settings.
//!
//! Scenarios are written as TOML, human-writable structured text with all
//! numerics as decimal text. Events occur at explicit integer ticks; when a
//! tick is omitted, the event lands one tick after the previous one.
//! Validation is strict and names the offending field so the `check`
//! subcommand can point at problems before a run.

use serde::Deserialize;

use crate::curve::Curve;
use crate::pool::{AssetId, ChainId, ProviderId};
use crate::sim::relay::RelayConfig;

/// Default safety bound on the event clock.
pub const DEFAULT_MAX_TICKS: u64 = 1_000_000;

/// Default absolute value tolerance for swap-output inversion.
pub const DEFAULT_INVERSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario invalid: {context}: {reason}")]
    Validation { context: String, reason: String },
}

fn invalid(context: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        context: context.into(),
        reason: reason.into(),
    }
}

/// Price curve shape for a founding deposit. The stable anchor `x_stable`
/// is always the deposit amount, so it is not a file field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveSpec {
    Volatile { weight: f64 },
    Stable { weight: f64, amplification: f64 },
}

impl CurveSpec {
    pub fn build(&self, deposit: f64) -> Result<Curve, ScenarioError> {
        match *self {
            CurveSpec::Volatile { weight } => {
                Curve::volatile(weight).map_err(|e| invalid("curve", e.to_string()))
            }
            CurveSpec::Stable {
                weight,
                amplification,
            } => Curve::stable(weight, deposit, amplification)
                .map_err(|e| invalid("curve", e.to_string())),
        }
    }

    pub fn amplification_mut(&mut self) -> Option<&mut f64> {
        match self {
            CurveSpec::Volatile { .. } => None,
            CurveSpec::Stable { amplification, .. } => Some(amplification),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetSpec {
    pub id: AssetId,
    pub amount: f64,
    pub curve: CurveSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub id: ChainId,
    pub assets: Vec<AssetSpec>,
}

/// One step of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioEvent {
    Swap {
        source_chain: ChainId,
        asset_in: AssetId,
        amount_in: f64,
        dest_chain: ChainId,
        asset_out: AssetId,
        min_out: f64,
    },
    AddLiquidity {
        provider: ProviderId,
        lambda: f64,
    },
    RemoveLiquidity {
        provider: ProviderId,
        shares: f64,
    },
    SetFeeRate {
        chain: ChainId,
        fee_rate: f64,
    },
    SetRelay {
        drop_rate: Option<f64>,
        dup_rate: Option<f64>,
        reorder: Option<bool>,
    },
    /// Test fixture: raw balance mutation that bypasses pool accounting,
    /// used to prove the invariant audit trips. Never part of the protocol.
    InjectBalance {
        chain: ChainId,
        asset: AssetId,
        delta: f64,
    },
}

impl ScenarioEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioEvent::Swap { .. } => "swap",
            ScenarioEvent::AddLiquidity { .. } => "add_liquidity",
            ScenarioEvent::RemoveLiquidity { .. } => "remove_liquidity",
            ScenarioEvent::SetFeeRate { .. } => "set_fee_rate",
            ScenarioEvent::SetRelay { .. } => "set_relay",
            ScenarioEvent::InjectBalance { .. } => "inject_balance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub at: u64,
    pub event: ScenarioEvent,
}

/// Run-wide settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// Initial fee rate applied to every chain.
    pub fee_rate: f64,
    /// Provider credited with the founding share supply.
    pub founder: ProviderId,
    /// Abort if the event clock passes this tick before quiescence.
    pub max_ticks: u64,
    /// Absolute value tolerance for output inversion.
    pub inversion_tol: f64,
    /// Finalize by verifying an off-chain candidate output instead of
    /// searching on-chain.
    pub verify_mode: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            fee_rate: 0.0,
            founder: "genesis".to_string(),
            max_ticks: DEFAULT_MAX_TICKS,
            inversion_tol: DEFAULT_INVERSION_TOL,
            verify_mode: false,
        }
    }
}

/// A complete scenario: world layout plus the ordered event list.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub relay: RelayConfig,
    pub run: RunSettings,
    pub chains: Vec<ChainSpec>,
    pub events: Vec<TimedEvent>,
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 64
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

impl Scenario {
    /// Full semantic validation: identifier hygiene, reference resolution,
    /// positivity, relay sanity (including fault toggles scheduled later).
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !valid_identifier(&self.name) {
            return Err(invalid(
                "name",
                format!("{:?} is not a valid identifier", self.name),
            ));
        }
        self.relay
            .validate()
            .map_err(|reason| invalid("relay", reason))?;
        if !(0.0..1.0).contains(&self.run.fee_rate) {
            return Err(invalid(
                "run.fee_rate",
                format!("{} outside [0, 1)", self.run.fee_rate),
            ));
        }
        if !valid_identifier(&self.run.founder) {
            return Err(invalid("run.founder", "not a valid identifier"));
        }
        if !(self.run.inversion_tol.is_finite() && self.run.inversion_tol > 0.0) {
            return Err(invalid("run.inversion_tol", "must be positive"));
        }
        if self.chains.is_empty() {
            return Err(invalid("chains", "at least one chain required"));
        }
        let mut asset_count = 0usize;
        for chain in &self.chains {
            if !valid_identifier(&chain.id) {
                return Err(invalid(
                    format!("chains.{}", chain.id),
                    "chain id is not a valid identifier",
                ));
            }
            if self.chains.iter().filter(|c| c.id == chain.id).count() > 1 {
                return Err(invalid(
                    format!("chains.{}", chain.id),
                    "duplicate chain id",
                ));
            }
            if chain.assets.is_empty() {
                return Err(invalid(
                    format!("chains.{}", chain.id),
                    "chain hosts no assets",
                ));
            }
            for asset in &chain.assets {
                asset_count += 1;
                let ctx = format!("chains.{}.assets.{}", chain.id, asset.id);
                if !valid_identifier(&asset.id) {
                    return Err(invalid(ctx, "asset id is not a valid identifier"));
                }
                if chain.assets.iter().filter(|a| a.id == asset.id).count() > 1 {
                    return Err(invalid(ctx, "duplicate asset id on this chain"));
                }
                if !(asset.amount.is_finite() && asset.amount > 0.0) {
                    return Err(invalid(
                        ctx,
                        format!("deposit {} not positive", asset.amount),
                    ));
                }
                asset.curve.build(asset.amount).map_err(|e| match e {
                    ScenarioError::Validation { reason, .. } => invalid(ctx.clone(), reason),
                    other => other,
                })?;
            }
        }
        if asset_count < 2 {
            return Err(invalid("chains", "pool needs at least two assets overall"));
        }

        let mut last_at = 0u64;
        let mut drop_possible = self.relay.drop_rate > 0.0;
        for (idx, timed) in self.events.iter().enumerate() {
            let ctx = format!("events[{idx}] ({})", timed.event.kind());
            if timed.at < last_at {
                return Err(invalid(ctx, "event ticks must be non-decreasing"));
            }
            if timed.at == 0 {
                return Err(invalid(ctx, "tick 0 is reserved for pool creation"));
            }
            last_at = timed.at;
            match &timed.event {
                ScenarioEvent::Swap {
                    source_chain,
                    asset_in,
                    amount_in,
                    dest_chain,
                    asset_out,
                    min_out,
                } => {
                    self.resolve_asset(&ctx, source_chain, asset_in)?;
                    self.resolve_asset(&ctx, dest_chain, asset_out)?;
                    if !(amount_in.is_finite() && *amount_in > 0.0) {
                        return Err(invalid(ctx, format!("amount_in {amount_in} not positive")));
                    }
                    if !(min_out.is_finite() && *min_out >= 0.0) {
                        return Err(invalid(ctx, format!("min_out {min_out} negative")));
                    }
                }
                ScenarioEvent::AddLiquidity { provider, lambda } => {
                    if !valid_identifier(provider) {
                        return Err(invalid(ctx, "provider is not a valid identifier"));
                    }
                    if !(lambda.is_finite() && *lambda > 0.0) {
                        return Err(invalid(ctx, format!("lambda {lambda} not positive")));
                    }
                }
                ScenarioEvent::RemoveLiquidity { provider, shares } => {
                    if !valid_identifier(provider) {
                        return Err(invalid(ctx, "provider is not a valid identifier"));
                    }
                    if !(shares.is_finite() && *shares > 0.0) {
                        return Err(invalid(ctx, format!("shares {shares} not positive")));
                    }
                }
                ScenarioEvent::SetFeeRate { chain, fee_rate } => {
                    self.resolve_chain(&ctx, chain)?;
                    if !(0.0..1.0).contains(fee_rate) {
                        return Err(invalid(ctx, format!("fee_rate {fee_rate} outside [0, 1)")));
                    }
                }
                ScenarioEvent::SetRelay {
                    drop_rate,
                    dup_rate,
                    ..
                } => {
                    for (name, rate) in [("drop_rate", drop_rate), ("dup_rate", dup_rate)] {
                        if let Some(r) = rate {
                            if !(0.0..=1.0).contains(r) {
                                return Err(invalid(
                                    ctx.clone(),
                                    format!("{name} {r} outside [0, 1]"),
                                ));
                            }
                        }
                    }
                    if drop_rate.is_some_and(|r| r > 0.0) {
                        drop_possible = true;
                    }
                }
                ScenarioEvent::InjectBalance { chain, asset, .. } => {
                    self.resolve_asset(&ctx, chain, asset)?;
                }
            }
        }
        if drop_possible && self.relay.refund_timeout.is_none() {
            return Err(invalid(
                "relay.refund_timeout",
                "required because a fault toggle enables drops",
            ));
        }
        if let Some(t) = self.relay.refund_timeout {
            if t < self.relay.max_delay {
                return Err(invalid(
                    "relay.refund_timeout",
                    format!("{} below max_delay {}", t, self.relay.max_delay),
                ));
            }
        }
        if self.run.max_ticks <= last_at {
            return Err(invalid(
                "run.max_ticks",
                format!(
                    "{} does not cover the last event tick {last_at}",
                    self.run.max_ticks
                ),
            ));
        }
        Ok(())
    }

    fn resolve_chain(&self, ctx: &str, chain: &str) -> Result<&ChainSpec, ScenarioError> {
        self.chains
            .iter()
            .find(|c| c.id == chain)
            .ok_or_else(|| invalid(ctx.to_string(), format!("unknown chain {chain:?}")))
    }

    fn resolve_asset(&self, ctx: &str, chain: &str, asset: &str) -> Result<(), ScenarioError> {
        let spec = self.resolve_chain(ctx, chain)?;
        if spec.assets.iter().any(|a| a.id == asset) {
            Ok(())
        } else {
            Err(invalid(
                ctx.to_string(),
                format!("unknown asset {asset:?} on chain {chain:?}"),
            ))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let scenario = raw.into_scenario()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

// ---------------------------------------------------------------------------
// Raw TOML layer
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: Option<String>,
    relay: RawRelay,
    #[serde(default)]
    run: RawRun,
    chains: Vec<RawChain>,
    #[serde(default)]
    events: Vec<RawEvent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelay {
    seed: u64,
    #[serde(default = "default_delay")]
    min_delay: u64,
    #[serde(default = "default_delay")]
    max_delay: u64,
    #[serde(default)]
    drop_rate: f64,
    #[serde(default)]
    dup_rate: f64,
    #[serde(default)]
    reorder: bool,
    #[serde(default)]
    refund_timeout: Option<u64>,
}

fn default_delay() -> u64 {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    fee_rate: f64,
    #[serde(default)]
    founder: Option<String>,
    #[serde(default)]
    max_ticks: Option<u64>,
    #[serde(default)]
    inversion_tol: Option<f64>,
    #[serde(default)]
    verify_mode: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    id: String,
    assets: Vec<RawAsset>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAsset {
    id: String,
    amount: f64,
    curve: String,
    weight: f64,
    #[serde(default)]
    amplification: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    #[serde(default)]
    at: Option<u64>,
    kind: String,
    #[serde(default)]
    source_chain: Option<String>,
    #[serde(default)]
    asset_in: Option<String>,
    #[serde(default)]
    amount_in: Option<f64>,
    #[serde(default)]
    dest_chain: Option<String>,
    #[serde(default)]
    asset_out: Option<String>,
    #[serde(default)]
    min_out: Option<f64>,
    #[serde(default)]
    provider: Option<String>,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    shares: Option<f64>,
    #[serde(default)]
    chain: Option<String>,
    #[serde(default)]
    fee_rate: Option<f64>,
    #[serde(default)]
    drop_rate: Option<f64>,
    #[serde(default)]
    dup_rate: Option<f64>,
    #[serde(default)]
    reorder: Option<bool>,
    #[serde(default)]
    asset: Option<String>,
    #[serde(default)]
    delta: Option<f64>,
}

fn need<T>(field: Option<T>, ctx: &str, name: &str) -> Result<T, ScenarioError> {
    field.ok_or_else(|| invalid(ctx.to_string(), format!("missing field {name:?}")))
}

impl RawScenario {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let _ = self.description;
        let relay = RelayConfig {
            seed: self.relay.seed,
            min_delay: self.relay.min_delay,
            max_delay: self.relay.max_delay,
            drop_rate: self.relay.drop_rate,
            dup_rate: self.relay.dup_rate,
            reorder: self.relay.reorder,
            refund_timeout: self.relay.refund_timeout,
        };
        let defaults = RunSettings::default();
        let run = RunSettings {
            fee_rate: self.run.fee_rate,
            founder: self.run.founder.unwrap_or(defaults.founder),
            max_ticks: self.run.max_ticks.unwrap_or(defaults.max_ticks),
            inversion_tol: self.run.inversion_tol.unwrap_or(defaults.inversion_tol),
            verify_mode: self.run.verify_mode,
        };
        let mut chains = Vec::new();
        for chain in self.chains {
            let mut assets = Vec::new();
            for asset in chain.assets {
                let ctx = format!("chains.{}.assets.{}", chain.id, asset.id);
                let curve = match asset.curve.as_str() {
                    "volatile" => {
                        if asset.amplification.is_some() {
                            return Err(invalid(ctx, "volatile curve takes no amplification"));
                        }
                        CurveSpec::Volatile {
                            weight: asset.weight,
                        }
                    }
                    "stable" => CurveSpec::Stable {
                        weight: asset.weight,
                        amplification: need(asset.amplification, &ctx, "amplification")?,
                    },
                    other => return Err(invalid(ctx, format!("unknown curve kind {other:?}"))),
                };
                assets.push(AssetSpec {
                    id: asset.id,
                    amount: asset.amount,
                    curve,
                });
            }
            chains.push(ChainSpec {
                id: chain.id,
                assets,
            });
        }
        let mut events = Vec::new();
        let mut prev_at = 0u64;
        for (idx, raw) in self.events.into_iter().enumerate() {
            let ctx = format!("events[{idx}] ({})", raw.kind);
            let at = raw.at.unwrap_or(prev_at + 1);
            prev_at = at;
            let event = match raw.kind.as_str() {
                "swap" => ScenarioEvent::Swap {
                    source_chain: need(raw.source_chain, &ctx, "source_chain")?,
                    asset_in: need(raw.asset_in, &ctx, "asset_in")?,
                    amount_in: need(raw.amount_in, &ctx, "amount_in")?,
                    dest_chain: need(raw.dest_chain, &ctx, "dest_chain")?,
                    asset_out: need(raw.asset_out, &ctx, "asset_out")?,
                    min_out: raw.min_out.unwrap_or(0.0),
                },
                "add_liquidity" => ScenarioEvent::AddLiquidity {
                    provider: need(raw.provider, &ctx, "provider")?,
                    lambda: need(raw.lambda, &ctx, "lambda")?,
                },
                "remove_liquidity" => ScenarioEvent::RemoveLiquidity {
                    provider: need(raw.provider, &ctx, "provider")?,
                    shares: need(raw.shares, &ctx, "shares")?,
                },
                "set_fee_rate" => ScenarioEvent::SetFeeRate {
                    chain: need(raw.chain, &ctx, "chain")?,
                    fee_rate: need(raw.fee_rate, &ctx, "fee_rate")?,
                },
                "set_relay" => ScenarioEvent::SetRelay {
                    drop_rate: raw.drop_rate,
                    dup_rate: raw.dup_rate,
                    reorder: raw.reorder,
                },
                "inject_balance" => ScenarioEvent::InjectBalance {
                    chain: need(raw.chain, &ctx, "chain")?,
                    asset: need(raw.asset, &ctx, "asset")?,
                    delta: need(raw.delta, &ctx, "delta")?,
                },
                other => return Err(invalid(ctx, format!("unknown event kind {other:?}"))),
            };
            events.push(TimedEvent { at, event });
        }
        Ok(Scenario {
            name: self.name,
            relay,
            run,
            chains,
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
name = "two_chain_volatile"
description = "one swap across two chains"

[relay]
seed = 42
min_delay = 1
max_delay = 2

[run]
fee_rate = 0.0

[[chains]]
id = "alpha"
  [[chains.assets]]
  id = "ATK"
  amount = 100.0
  curve = "volatile"
  weight = 1.0

[[chains]]
id = "beta"
  [[chains.assets]]
  id = "BTK"
  amount = 100.0
  curve = "volatile"
  weight = 1.0

[[events]]
kind = "swap"
source_chain = "alpha"
asset_in = "ATK"
amount_in = 100.0
dest_chain = "beta"
asset_out = "BTK"
min_out = 0.0
"#;

    #[test]
    fn parses_basic_scenario() {
        let s = Scenario::from_toml_str(BASIC).unwrap();
        assert_eq!(s.name, "two_chain_volatile");
        assert_eq!(s.chains.len(), 2);
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events[0].at, 1);
    }

    #[test]
    fn rejects_unknown_asset_reference() {
        let text = BASIC.replace("asset_out = \"BTK\"", "asset_out = \"NOPE\"");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { .. }));
        assert!(err.to_string().contains("NOPE"));
    }

    #[test]
    fn rejects_duplicate_chain_id() {
        let text = BASIC.replace("id = \"beta\"", "id = \"alpha\"");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate chain id"));
    }

    #[test]
    fn rejects_malformed_toml() {
        let err = Scenario::from_toml_str("name = [unclosed").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn rejects_drops_without_timeout() {
        let text = BASIC.replace("max_delay = 2", "max_delay = 2\ndrop_rate = 0.5");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("refund_timeout"));
    }

    #[test]
    fn stable_asset_requires_amplification() {
        let text = BASIC.replace(
            "curve = \"volatile\"\n  weight = 1.0\n\n[[events]]",
            "curve = \"stable\"\n  weight = 1.0\n\n[[events]]",
        );
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("amplification"));
    }

    #[test]
    fn parses_every_event_kind() {
        let text = format!(
            r#"{BASIC}
[[events]]
at = 5
kind = "add_liquidity"
provider = "lp1"
lambda = 0.25

[[events]]
at = 6
kind = "remove_liquidity"
provider = "lp1"
shares = 10.0

[[events]]
at = 7
kind = "set_fee_rate"
chain = "alpha"
fee_rate = 0.003

[[events]]
at = 8
kind = "set_relay"
drop_rate = 0.1
dup_rate = 0.2
reorder = true

[[events]]
at = 9
kind = "inject_balance"
chain = "beta"
asset = "BTK"
delta = -5.0
"#
        );
        // Drops toggled mid-run still demand a refund timeout.
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("refund_timeout"));

        let with_timeout = text.replace("max_delay = 2", "max_delay = 2\nrefund_timeout = 5");
        let s = Scenario::from_toml_str(&with_timeout).unwrap();
        assert_eq!(s.events.len(), 6);
        let kinds: Vec<&str> = s.events.iter().map(|e| e.event.kind()).collect();
        assert_eq!(
            kinds,
            [
                "swap",
                "add_liquidity",
                "remove_liquidity",
                "set_fee_rate",
                "set_relay",
                "inject_balance"
            ]
        );
    }

    #[test]
    fn rejects_unknown_event_kind_and_missing_fields() {
        let text = format!("{BASIC}\n[[events]]\nkind = \"teleport\"\n");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("teleport"));

        let text = format!("{BASIC}\n[[events]]\nkind = \"add_liquidity\"\nlambda = 0.5\n");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("provider"));
    }

    #[test]
    fn event_ticks_default_to_sequential() {
        let text = format!(
            "{BASIC}\n[[events]]\nkind = \"add_liquidity\"\nprovider = \"lp\"\nlambda = 0.5\n"
        );
        let s = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(s.events[0].at, 1);
        assert_eq!(s.events[1].at, 2);
    }
}
