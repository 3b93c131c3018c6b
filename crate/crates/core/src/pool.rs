//! Per-chain pool state and pool-wide liquidity accounting.
//!
//! A [`PoolView`] is the slice of the pool hosted on one chain: a set of
//! [`AssetState`]s plus the chain's fee rate. Every mutation here depends
//! only on locally hosted state, the property that lets a swap be
//! split across chains with a single value message.
//!
//! Each asset tracks, besides its balance `x_n`, a *reference* balance
//! `x_0`: the lower bound of its value integral. Swaps move the balance and
//! leave the reference alone, so `value_between(reference, balance)` is the
//! net value traded out of the asset. Fees and liquidity events move both
//! bounds together (reference shift `Δx₀ = (x₀/x_p)·Δx_p`, plus curve
//! scaling for stable assets) so they never register as traded value.
//!
//! Share accounting lives in [`ShareLedger`]. It is a pool-wide logical
//! ledger kept by the simulator, not hosted on any chain; how a real
//! deployment reaches consensus on share supply across chains is an open
//! protocol question outside this model. Liquidity events are therefore
//! coordinated scenario steps applied to every chain, with deposits given
//! as a fraction `λ` of current balances ("in ratio of their value").

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curve::{
    initial_shares, proportional_shares, reference_shift, Curve, CurveError, Value, DUST_FLOOR,
};

pub type AssetId = String;
pub type ChainId = String;
pub type ProviderId = String;

/// Relative tolerance used by internal consistency checks.
pub const LEDGER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoolError {
    #[error("unknown asset {0}")]
    UnknownAsset(AssetId),
    #[error("duplicate asset {0}")]
    DuplicateAsset(AssetId),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("fee rate {0} outside [0, 1)")]
    FeeRateOutOfRange(f64),
    #[error("pool needs at least two assets, got {0}")]
    TooFewAssets(usize),
    #[error("stable asset {asset}: x_stable {x_stable} must equal the initial deposit {deposit}")]
    StableReferenceMismatch {
        asset: AssetId,
        x_stable: f64,
        deposit: f64,
    },
    #[error("slippage exceeded: output {amount_out} below minimum {min_out}")]
    SlippageExceeded { amount_out: f64, min_out: f64 },
    #[error(
        "insufficient liquidity in {asset}: requested value {requested}, drainable {available}"
    )]
    InsufficientLiquidity {
        asset: AssetId,
        requested: f64,
        available: f64,
    },
    #[error("provider {provider} holds {held} shares, cannot burn {requested}")]
    InsufficientShares {
        provider: ProviderId,
        requested: f64,
        held: f64,
    },
    #[error("removing the full share supply would drain the pool")]
    FullDrain,
    #[error(transparent)]
    Math(#[from] CurveError),
}

/// One asset's on-chain state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetState {
    pub asset_id: AssetId,
    /// Current balance `x_n`.
    pub balance: f64,
    /// Reference balance `x_0`, the lower bound of the value integral.
    pub reference: f64,
    pub curve: Curve,
}

impl AssetState {
    /// Net value traded out of this asset since its reference point:
    /// `value_between(reference, balance)`.
    pub fn local_value(&self) -> Result<Value, CurveError> {
        self.curve.value_between(self.reference, self.balance)
    }

    fn check(&self) -> Result<(), String> {
        if !(self.balance.is_finite() && self.balance > 0.0) {
            return Err(format!(
                "asset {}: balance {} not positive",
                self.asset_id, self.balance
            ));
        }
        if !(self.reference.is_finite() && self.reference > 0.0) {
            return Err(format!(
                "asset {}: reference {} not positive",
                self.asset_id, self.reference
            ));
        }
        match self.local_value() {
            Ok(v) if v.is_finite() => Ok(()),
            _ => Err(format!("asset {}: local value not finite", self.asset_id)),
        }
    }
}

/// Outcome of crediting a swap input on the source chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreditOutcome {
    /// Value of the post-fee credit; the entire cross-chain payload.
    pub value: Value,
    /// Fee withheld from the input and accrued to the pool.
    pub fee: f64,
    /// Post-fee amount actually credited to the traded balance.
    pub net_in: f64,
}

/// The slice of the pool hosted on one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolView {
    assets: BTreeMap<AssetId, AssetState>,
    fee_rate: f64,
}

impl PoolView {
    pub fn new(fee_rate: f64) -> Result<Self, PoolError> {
        if !(0.0..1.0).contains(&fee_rate) {
            return Err(PoolError::FeeRateOutOfRange(fee_rate));
        }
        Ok(PoolView {
            assets: BTreeMap::new(),
            fee_rate,
        })
    }

    pub fn fee_rate(&self) -> f64 {
        self.fee_rate
    }

    pub fn set_fee_rate(&mut self, fee_rate: f64) -> Result<(), PoolError> {
        if !(0.0..1.0).contains(&fee_rate) {
            return Err(PoolError::FeeRateOutOfRange(fee_rate));
        }
        self.fee_rate = fee_rate;
        Ok(())
    }

    /// Add a founding deposit: balance and reference both start at the
    /// deposit amount, so the asset's initial local value is exactly zero.
    /// Stable curves must be anchored at the deposit (`x_stable == amount`).
    pub fn add_asset(
        &mut self,
        asset_id: &str,
        amount: f64,
        curve: Curve,
    ) -> Result<(), PoolError> {
        if !(amount.is_finite() && amount > 0.0) {
            return Err(PoolError::NonPositive {
                what: "deposit",
                value: amount,
            });
        }
        if self.assets.contains_key(asset_id) {
            return Err(PoolError::DuplicateAsset(asset_id.to_string()));
        }
        if let Some(x_stable) = curve.x_stable() {
            if x_stable != amount {
                return Err(PoolError::StableReferenceMismatch {
                    asset: asset_id.to_string(),
                    x_stable,
                    deposit: amount,
                });
            }
        }
        self.assets.insert(
            asset_id.to_string(),
            AssetState {
                asset_id: asset_id.to_string(),
                balance: amount,
                reference: amount,
                curve,
            },
        );
        Ok(())
    }

    pub fn asset(&self, asset_id: &str) -> Option<&AssetState> {
        self.assets.get(asset_id)
    }

    pub fn assets(&self) -> impl Iterator<Item = &AssetState> {
        self.assets.values()
    }

    pub fn asset_count(&self) -> usize {
        self.assets.len()
    }

    fn asset_mut(&mut self, asset_id: &str) -> Result<&mut AssetState, PoolError> {
        self.assets
            .get_mut(asset_id)
            .ok_or_else(|| PoolError::UnknownAsset(asset_id.to_string()))
    }

    /// Credit a swap input of `delta_in`. The fee share of the input is
    /// accrued to the pool (value-neutral, via the reference shift); the
    /// remainder moves the traded balance. Returns the value of the traded
    /// part, which is the one scalar the destination chain needs.
    pub fn swap_credit(
        &mut self,
        asset_id: &str,
        delta_in: f64,
    ) -> Result<CreditOutcome, PoolError> {
        if !(delta_in.is_finite() && delta_in > 0.0) {
            return Err(PoolError::NonPositive {
                what: "swap input",
                value: delta_in,
            });
        }
        let fee = self.fee_rate * delta_in;
        let net_in = delta_in - fee;
        let value = {
            let asset = self.asset_mut(asset_id)?;
            let before = asset.balance;
            let after = before + net_in;
            let value = asset.curve.value_between(before, after)?;
            asset.balance = after;
            value
        };
        if fee > 0.0 {
            self.accrue_fee(asset_id, fee)?;
        }
        Ok(CreditOutcome { value, fee, net_in })
    }

    /// Debit a swap output worth exactly `value`. Fails without touching
    /// state if the output would fall short of `min_out` or drain the
    /// balance below the dust floor.
    pub fn swap_debit(
        &mut self,
        asset_id: &str,
        value: Value,
        min_out: f64,
        tol: f64,
    ) -> Result<f64, PoolError> {
        let asset = self.asset_mut(asset_id)?;
        let delta_out = match asset.curve.invert_out(asset.balance, value, tol) {
            Ok(d) => d,
            Err(CurveError::InsufficientLiquidity {
                requested,
                available,
            }) => {
                return Err(PoolError::InsufficientLiquidity {
                    asset: asset_id.to_string(),
                    requested,
                    available,
                })
            }
            Err(e) => return Err(e.into()),
        };
        if delta_out < min_out {
            return Err(PoolError::SlippageExceeded {
                amount_out: delta_out,
                min_out,
            });
        }
        asset.balance -= delta_out;
        Ok(delta_out)
    }

    /// Like [`PoolView::swap_debit`], but verifies a candidate output
    /// computed elsewhere instead of searching for it. Models the cheap
    /// verify-only mode where the inversion runs off-chain.
    pub fn swap_debit_verified(
        &mut self,
        asset_id: &str,
        value: Value,
        candidate_out: f64,
        min_out: f64,
        tol: f64,
    ) -> Result<f64, PoolError> {
        let asset = self.asset_mut(asset_id)?;
        if !asset
            .curve
            .verify_out(asset.balance, value, candidate_out, tol)
        {
            let available = asset.curve.drainable_value(asset.balance)?;
            return Err(PoolError::InsufficientLiquidity {
                asset: asset_id.to_string(),
                requested: value.amount(),
                available: available.amount(),
            });
        }
        if candidate_out < min_out {
            return Err(PoolError::SlippageExceeded {
                amount_out: candidate_out,
                min_out,
            });
        }
        asset.balance -= candidate_out;
        Ok(candidate_out)
    }

    /// Accrue `fee_amount` of an asset to the pool without registering
    /// traded value: the reference moves by `(x₀/x_p)·Δx_p` and, for stable
    /// assets, the curve geometry scales by the same factor, so
    /// `value_between(reference, balance)` is unchanged.
    pub fn accrue_fee(&mut self, asset_id: &str, fee_amount: f64) -> Result<(), PoolError> {
        if !(fee_amount.is_finite() && fee_amount > 0.0) {
            return Err(PoolError::NonPositive {
                what: "fee",
                value: fee_amount,
            });
        }
        let asset = self.asset_mut(asset_id)?;
        let shift = reference_shift(asset.reference, asset.balance, fee_amount)?;
        let factor = 1.0 + fee_amount / asset.balance;
        asset.curve = asset.curve.scaled(factor)?;
        asset.reference += shift;
        asset.balance += fee_amount;
        Ok(())
    }

    /// Scale every hosted asset by `factor` (balance, reference, and stable
    /// curve geometry together). Used by pool-wide liquidity events.
    fn scale_assets(&mut self, factor: f64) -> Result<(), PoolError> {
        for asset in self.assets.values_mut() {
            asset.curve = asset.curve.scaled(factor)?;
            asset.balance *= factor;
            asset.reference *= factor;
        }
        Ok(())
    }

    /// Sum of hosted assets' local values.
    pub fn value_deviation(&self) -> Value {
        let mut total = Value::ZERO;
        for asset in self.assets.values() {
            if let Ok(v) = asset.local_value() {
                total += v;
            } else {
                total += Value(f64::NAN);
            }
        }
        total
    }

    /// Check per-asset invariants, returning a diagnostic for the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        for asset in self.assets.values() {
            asset.check()?;
            if asset.balance < DUST_FLOOR {
                return Err(format!(
                    "asset {}: balance {} below dust floor",
                    asset.asset_id, asset.balance
                ));
            }
        }
        Ok(())
    }

    /// Test-only raw state mutation, used by fault-injection scenarios to
    /// verify that invariant auditing actually trips. Bypasses all
    /// accounting on purpose.
    pub fn inject_balance_delta(&mut self, asset_id: &str, delta: f64) -> Result<(), PoolError> {
        let asset = self.asset_mut(asset_id)?;
        asset.balance += delta;
        Ok(())
    }
}

/// Share supply and provider positions for the whole pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareLedger {
    total_supply: f64,
    positions: BTreeMap<ProviderId, f64>,
}

impl ShareLedger {
    fn new(founder: &str, supply: f64) -> Self {
        let mut positions = BTreeMap::new();
        positions.insert(founder.to_string(), supply);
        ShareLedger {
            total_supply: supply,
            positions,
        }
    }

    pub fn total_supply(&self) -> f64 {
        self.total_supply
    }

    pub fn position(&self, provider: &str) -> f64 {
        self.positions.get(provider).copied().unwrap_or(0.0)
    }

    pub fn positions(&self) -> impl Iterator<Item = (&str, f64)> {
        self.positions.iter().map(|(p, s)| (p.as_str(), *s))
    }

    fn mint(&mut self, provider: &str, amount: f64) {
        *self.positions.entry(provider.to_string()).or_insert(0.0) += amount;
        self.total_supply += amount;
    }

    fn burn(&mut self, provider: &str, amount: f64) -> Result<(), PoolError> {
        let held = self.position(provider);
        if amount > held {
            return Err(PoolError::InsufficientShares {
                provider: provider.to_string(),
                requested: amount,
                held,
            });
        }
        let entry = self.positions.entry(provider.to_string()).or_insert(0.0);
        *entry -= amount;
        if *entry <= 0.0 {
            self.positions.remove(provider);
        }
        self.total_supply -= amount;
        Ok(())
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let sum: f64 = self.positions.values().sum();
        let scale = self.total_supply.abs().max(1.0);
        if (sum - self.total_supply).abs() > LEDGER_TOL * scale {
            return Err(format!(
                "share ledger out of balance: positions sum {} vs supply {}",
                sum, self.total_supply
            ));
        }
        Ok(())
    }
}

/// A founding deposit for one asset on one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Deposit {
    pub chain_id: ChainId,
    pub asset_id: AssetId,
    pub amount: f64,
    pub curve: Curve,
}

/// Create the pool across chains. Every asset starts with
/// `balance = reference = deposit`, the share supply is the geometric mean
/// of all deposits pool-wide, and the founding provider owns it all.
pub fn init_pool(
    deposits: &[Deposit],
    fee_rate: f64,
    founder: &str,
) -> Result<(BTreeMap<ChainId, PoolView>, ShareLedger), PoolError> {
    if deposits.len() < 2 {
        return Err(PoolError::TooFewAssets(deposits.len()));
    }
    let mut pools: BTreeMap<ChainId, PoolView> = BTreeMap::new();
    let mut amounts = Vec::with_capacity(deposits.len());
    for dep in deposits {
        if !pools.contains_key(&dep.chain_id) {
            pools.insert(dep.chain_id.clone(), PoolView::new(fee_rate)?);
        }
        let pool = pools.get_mut(&dep.chain_id).expect("just inserted");
        pool.add_asset(&dep.asset_id, dep.amount, dep.curve)?;
        amounts.push(dep.amount);
    }
    let supply = initial_shares(&amounts)?;
    Ok((pools, ShareLedger::new(founder, supply)))
}

/// Deposit `λ` of every asset's current balance across all chains, minting
/// `λ · supply` shares. Balances, references, and stable curve geometry all
/// scale by `1 + λ`, so local values and relative spot prices are
/// untouched.
pub fn add_liquidity<'a>(
    pools: impl IntoIterator<Item = &'a mut PoolView>,
    ledger: &mut ShareLedger,
    provider: &str,
    lambda: f64,
) -> Result<f64, PoolError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(PoolError::NonPositive {
            what: "deposit fraction",
            value: lambda,
        });
    }
    let minted = proportional_shares(lambda, 1.0, ledger.total_supply())?;
    for pool in pools {
        pool.scale_assets(1.0 + lambda)?;
    }
    ledger.mint(provider, minted);
    Ok(minted)
}

/// Burn `shares` and pay out the matching fraction of every balance.
/// Returns the per-asset amounts paid out, in (chain-order, asset-order).
pub fn remove_liquidity<'a>(
    pools: impl IntoIterator<Item = &'a mut PoolView>,
    ledger: &mut ShareLedger,
    provider: &str,
    shares: f64,
) -> Result<Vec<(AssetId, f64)>, PoolError> {
    if !(shares.is_finite() && shares > 0.0) {
        return Err(PoolError::NonPositive {
            what: "shares",
            value: shares,
        });
    }
    let held = ledger.position(provider);
    if shares > held {
        return Err(PoolError::InsufficientShares {
            provider: provider.to_string(),
            requested: shares,
            held,
        });
    }
    let lambda = shares / ledger.total_supply();
    if lambda >= 1.0 {
        return Err(PoolError::FullDrain);
    }
    let mut payouts = Vec::new();
    let mut pools: Vec<&mut PoolView> = pools.into_iter().collect();
    for pool in pools.iter() {
        for asset in pool.assets() {
            payouts.push((asset.asset_id.clone(), lambda * asset.balance));
        }
    }
    for pool in pools.iter_mut() {
        pool.scale_assets(1.0 - lambda)?;
    }
    ledger.burn(provider, shares)?;
    Ok(payouts)
}

/// Pool-wide value deviation: the sum over every asset, on every chain, of
/// its local value. Zero at rest; equal to the in-flight message values
/// mid-swap. Diagnostic only.
pub fn value_deviation<'a>(pools: impl IntoIterator<Item = &'a PoolView>) -> Value {
    let mut total = Value::ZERO;
    for pool in pools {
        total += pool.value_deviation();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn volatile(w: f64) -> Curve {
        Curve::volatile(w).unwrap()
    }

    fn two_chain_pool(fee_rate: f64) -> (BTreeMap<ChainId, PoolView>, ShareLedger) {
        init_pool(
            &[
                Deposit {
                    chain_id: "alpha".into(),
                    asset_id: "A".into(),
                    amount: 100.0,
                    curve: volatile(1.0),
                },
                Deposit {
                    chain_id: "beta".into(),
                    asset_id: "B".into(),
                    amount: 400.0,
                    curve: volatile(1.0),
                },
            ],
            fee_rate,
            "genesis",
        )
        .unwrap()
    }

    #[test]
    fn init_sets_identity_state_and_geometric_mean_supply() {
        let (pools, ledger) = two_chain_pool(0.0);
        assert_relative_eq!(ledger.total_supply(), 200.0, max_relative = 1e-12);
        assert_relative_eq!(ledger.position("genesis"), 200.0, max_relative = 1e-12);
        let a = pools["alpha"].asset("A").unwrap();
        assert_eq!((a.balance, a.reference), (100.0, 100.0));
        let b = pools["beta"].asset("B").unwrap();
        assert_eq!((b.balance, b.reference), (400.0, 400.0));
    }

    #[test]
    fn init_stable_pair_anchors_x_stable_at_deposit() {
        let (pools, _) = init_pool(
            &[
                Deposit {
                    chain_id: "c1".into(),
                    asset_id: "USD1".into(),
                    amount: 100.0,
                    curve: Curve::stable(1.0, 100.0, 20.0).unwrap(),
                },
                Deposit {
                    chain_id: "c2".into(),
                    asset_id: "USD2".into(),
                    amount: 100.0,
                    curve: Curve::stable(1.0, 100.0, 20.0).unwrap(),
                },
            ],
            0.0,
            "genesis",
        )
        .unwrap();
        assert_eq!(
            pools["c1"].asset("USD1").unwrap().curve.x_stable(),
            Some(100.0)
        );
        assert_eq!(
            pools["c2"].asset("USD2").unwrap().curve.x_stable(),
            Some(100.0)
        );
    }

    #[test]
    fn init_rejects_empty_duplicate_and_mismatched() {
        assert!(matches!(
            init_pool(&[], 0.0, "g"),
            Err(PoolError::TooFewAssets(0))
        ));
        let dup = vec![
            Deposit {
                chain_id: "c".into(),
                asset_id: "A".into(),
                amount: 1.0,
                curve: volatile(1.0),
            },
            Deposit {
                chain_id: "c".into(),
                asset_id: "A".into(),
                amount: 2.0,
                curve: volatile(1.0),
            },
        ];
        assert!(matches!(
            init_pool(&dup, 0.0, "g"),
            Err(PoolError::DuplicateAsset(_))
        ));
        let mismatch = vec![
            Deposit {
                chain_id: "c".into(),
                asset_id: "S".into(),
                amount: 100.0,
                curve: Curve::stable(1.0, 50.0, 10.0).unwrap(),
            },
            Deposit {
                chain_id: "c".into(),
                asset_id: "T".into(),
                amount: 100.0,
                curve: volatile(1.0),
            },
        ];
        assert!(matches!(
            init_pool(&mismatch, 0.0, "g"),
            Err(PoolError::StableReferenceMismatch { .. })
        ));
    }

    #[test]
    fn swap_credit_no_fee_returns_log_value() {
        let (mut pools, _) = two_chain_pool(0.0);
        let out = pools
            .get_mut("alpha")
            .unwrap()
            .swap_credit("A", 100.0)
            .unwrap();
        assert_relative_eq!(
            out.value.amount(),
            std::f64::consts::LN_2,
            max_relative = 1e-12
        );
        assert_eq!(out.fee, 0.0);
        assert_eq!(pools["alpha"].asset("A").unwrap().balance, 200.0);
    }

    #[test]
    fn swap_credit_splits_fee_and_stays_value_neutral_on_fee_part() {
        let (mut pools, _) = two_chain_pool(0.01);
        let before_dev = pools["alpha"].value_deviation();
        assert_eq!(before_dev, Value::ZERO);
        let out = pools
            .get_mut("alpha")
            .unwrap()
            .swap_credit("A", 100.0)
            .unwrap();
        assert_eq!(out.fee, 1.0);
        assert_eq!(out.net_in, 99.0);
        // Total balance grew by the full input; only the net part is traded value.
        let a = pools["alpha"].asset("A").unwrap();
        assert_eq!(a.balance, 200.0);
        let dev = pools["alpha"].value_deviation();
        assert_relative_eq!(dev.amount(), out.value.amount(), max_relative = 1e-9);
    }

    #[test]
    fn swap_credit_value_vanishes_with_input() {
        let (mut pools, _) = two_chain_pool(0.0);
        let out = pools
            .get_mut("alpha")
            .unwrap()
            .swap_credit("A", 1e-9)
            .unwrap();
        assert!(out.value.amount() > 0.0 && out.value.amount() < 1e-10);
    }

    #[test]
    fn swap_debit_slippage_leaves_state_unchanged() {
        let (mut pools, _) = two_chain_pool(0.0);
        let beta = pools.get_mut("beta").unwrap();
        let before = beta.clone();
        let v = Value(std::f64::consts::LN_2);
        // ln 2 against balance 400 yields 200; min_out 300 must fail cleanly.
        match beta.swap_debit("B", v, 300.0, 1e-12) {
            Err(PoolError::SlippageExceeded { amount_out, .. }) => {
                assert_relative_eq!(amount_out, 200.0, max_relative = 1e-9);
            }
            other => panic!("expected SlippageExceeded, got {other:?}"),
        }
        assert_eq!(*beta, before);
    }

    #[test]
    fn swap_debit_insufficient_liquidity_leaves_state_unchanged() {
        let (mut pools, _) = two_chain_pool(0.0);
        let beta = pools.get_mut("beta").unwrap();
        let before = beta.clone();
        match beta.swap_debit("B", Value(1e6), 0.0, 1e-12) {
            Err(PoolError::InsufficientLiquidity { .. }) => {}
            other => panic!("expected InsufficientLiquidity, got {other:?}"),
        }
        assert_eq!(*beta, before);
    }

    #[test]
    fn swap_debit_verified_accepts_offchain_candidate() {
        let (mut pools, _) = two_chain_pool(0.0);
        let v = Value(std::f64::consts::LN_2);
        let candidate = pools["beta"]
            .asset("B")
            .unwrap()
            .curve
            .invert_out(400.0, v, 1e-12)
            .unwrap();
        let out = pools
            .get_mut("beta")
            .unwrap()
            .swap_debit_verified("B", v, candidate, 0.0, 1e-12)
            .unwrap();
        assert_eq!(out, candidate);
        assert_relative_eq!(
            pools["beta"].asset("B").unwrap().balance,
            200.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn accrue_fee_shifts_reference_by_ratio() {
        let mut pool = PoolView::new(0.0).unwrap();
        pool.add_asset("A", 50.0, volatile(1.0)).unwrap();
        // Drive balance to 100 via a swap so reference (50) lags balance.
        pool.swap_credit("A", 50.0).unwrap();
        pool.accrue_fee("A", 10.0).unwrap();
        let a = pool.asset("A").unwrap();
        assert_relative_eq!(a.reference, 55.0, max_relative = 1e-12);
        assert_relative_eq!(a.balance, 110.0, max_relative = 1e-12);
    }

    #[test]
    fn accrue_fee_preserves_local_value() {
        let mut pool = PoolView::new(0.0).unwrap();
        pool.add_asset("A", 100.0, volatile(2.0)).unwrap();
        pool.add_asset("S", 100.0, Curve::stable(1.0, 100.0, 15.0).unwrap())
            .unwrap();
        pool.swap_credit("A", 40.0).unwrap();
        pool.swap_credit("S", 25.0).unwrap();
        for asset in ["A", "S"] {
            let before = pool.asset(asset).unwrap().local_value().unwrap();
            pool.accrue_fee(asset, 7.5).unwrap();
            let after = pool.asset(asset).unwrap().local_value().unwrap();
            assert_relative_eq!(before.amount(), after.amount(), max_relative = 1e-9);
        }
    }

    #[test]
    fn add_liquidity_triples_reference_in_paper_example() {
        // Stable pair at (100, 100); depositing λ=2 of every balance moves
        // reference and x_stable from 100 to 300 exactly.
        let (mut pools, mut ledger) = init_pool(
            &[
                Deposit {
                    chain_id: "c1".into(),
                    asset_id: "USD1".into(),
                    amount: 100.0,
                    curve: Curve::stable(1.0, 100.0, 20.0).unwrap(),
                },
                Deposit {
                    chain_id: "c2".into(),
                    asset_id: "USD2".into(),
                    amount: 100.0,
                    curve: Curve::stable(1.0, 100.0, 20.0).unwrap(),
                },
            ],
            0.0,
            "genesis",
        )
        .unwrap();
        add_liquidity(pools.values_mut(), &mut ledger, "lp", 2.0).unwrap();
        for pool in pools.values() {
            for asset in pool.assets() {
                assert_eq!(asset.balance, 300.0);
                assert_eq!(asset.reference, 300.0);
                assert_eq!(asset.curve.x_stable(), Some(300.0));
            }
        }
    }

    #[test]
    fn add_liquidity_mints_proportionally() {
        let (mut pools, mut ledger) = two_chain_pool(0.0);
        let minted = add_liquidity(pools.values_mut(), &mut ledger, "lp", 0.5).unwrap();
        assert_relative_eq!(minted, 100.0, max_relative = 1e-12);
        assert_relative_eq!(ledger.total_supply(), 300.0, max_relative = 1e-12);
        assert_relative_eq!(ledger.position("lp"), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn add_liquidity_preserves_local_value_and_price_ratios() {
        let (mut pools, mut ledger) = two_chain_pool(0.0);
        pools
            .get_mut("alpha")
            .unwrap()
            .swap_credit("A", 30.0)
            .unwrap();
        let dev_before = value_deviation(pools.values());
        let pa = pools["alpha"].asset("A").unwrap();
        let pb = pools["beta"].asset("B").unwrap();
        let ratio_before =
            pa.curve.price(pa.balance).unwrap() / pb.curve.price(pb.balance).unwrap();
        add_liquidity(pools.values_mut(), &mut ledger, "lp", 0.7).unwrap();
        let dev_after = value_deviation(pools.values());
        assert_abs_diff_eq!(dev_before.amount(), dev_after.amount(), epsilon = 1e-9);
        let pa = pools["alpha"].asset("A").unwrap();
        let pb = pools["beta"].asset("B").unwrap();
        let ratio_after = pa.curve.price(pa.balance).unwrap() / pb.curve.price(pb.balance).unwrap();
        assert_relative_eq!(ratio_before, ratio_after, max_relative = 1e-12);
    }

    #[test]
    fn remove_liquidity_pays_out_fraction_and_burns() {
        let (mut pools, mut ledger) = two_chain_pool(0.0);
        let payouts = remove_liquidity(pools.values_mut(), &mut ledger, "genesis", 100.0).unwrap();
        assert_eq!(payouts.len(), 2);
        for (asset, amount) in &payouts {
            match asset.as_str() {
                "A" => assert_relative_eq!(*amount, 50.0, max_relative = 1e-9),
                "B" => assert_relative_eq!(*amount, 200.0, max_relative = 1e-9),
                other => panic!("unexpected asset {other}"),
            }
        }
        assert_relative_eq!(ledger.total_supply(), 100.0, max_relative = 1e-9);
    }

    #[test]
    fn remove_liquidity_rejects_zero_overdraw_and_full_drain() {
        let (mut pools, mut ledger) = two_chain_pool(0.0);
        assert!(matches!(
            remove_liquidity(pools.values_mut(), &mut ledger, "genesis", 0.0),
            Err(PoolError::NonPositive { .. })
        ));
        assert!(matches!(
            remove_liquidity(pools.values_mut(), &mut ledger, "nobody", 1.0),
            Err(PoolError::InsufficientShares { .. })
        ));
        let supply = ledger.total_supply();
        assert!(matches!(
            remove_liquidity(pools.values_mut(), &mut ledger, "genesis", supply),
            Err(PoolError::FullDrain)
        ));
    }

    #[test]
    fn add_then_remove_round_trips_state() {
        let (mut pools, mut ledger) = two_chain_pool(0.0);
        pools
            .get_mut("alpha")
            .unwrap()
            .swap_credit("A", 20.0)
            .unwrap();
        let snapshot = pools.clone();
        let supply_before = ledger.total_supply();
        let minted = add_liquidity(pools.values_mut(), &mut ledger, "lp", 0.8).unwrap();
        remove_liquidity(pools.values_mut(), &mut ledger, "lp", minted).unwrap();
        assert_relative_eq!(ledger.total_supply(), supply_before, max_relative = 1e-9);
        for (chain, pool) in &pools {
            for asset in pool.assets() {
                let orig = snapshot[chain].asset(&asset.asset_id).unwrap();
                assert_relative_eq!(asset.balance, orig.balance, max_relative = 1e-9);
                assert_relative_eq!(asset.reference, orig.reference, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn value_deviation_tracks_in_flight_value() {
        let (mut pools, _) = two_chain_pool(0.0);
        assert_eq!(value_deviation(pools.values()), Value::ZERO);
        let out = pools
            .get_mut("alpha")
            .unwrap()
            .swap_credit("A", 100.0)
            .unwrap();
        // Source credited, destination still pending: deviation equals the
        // in-flight message value.
        let dev = value_deviation(pools.values());
        assert_relative_eq!(dev.amount(), out.value.amount(), max_relative = 1e-12);
        pools
            .get_mut("beta")
            .unwrap()
            .swap_debit("B", out.value, 0.0, 1e-12)
            .unwrap();
        let dev = value_deviation(pools.values());
        assert_abs_diff_eq!(dev.amount(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ledger_invariant_checks() {
        let (_, ledger) = two_chain_pool(0.0);
        assert!(ledger.check_invariants().is_ok());
    }

    #[test]
    fn unknown_asset_errors() {
        let (mut pools, _) = two_chain_pool(0.0);
        let alpha = pools.get_mut("alpha").unwrap();
        assert!(matches!(
            alpha.swap_credit("Z", 1.0),
            Err(PoolError::UnknownAsset(_))
        ));
        assert!(matches!(
            alpha.swap_debit("Z", Value(0.1), 0.0, 1e-12),
            Err(PoolError::UnknownAsset(_))
        ));
        assert!(matches!(
            alpha.accrue_fee("Z", 1.0),
            Err(PoolError::UnknownAsset(_))
        ));
    }
}
