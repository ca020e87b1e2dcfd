//! Token prices in a common currency.

use alloc::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::types::Address;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPrice {
    /// Price of one whole token in the common currency.
    pub price: BigRational,
    pub decimals: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PriceError {
    #[error("negative price for {0}")]
    Negative(Address),
    #[error("the common currency {0} must be priced at exactly 1")]
    CommonNotUnit(Address),
}

/// Prices keyed by token address. The common currency is always present at
/// price 1; the native coin is priced through `native_token` (its wrapped
/// ERC-20, e.g. WMATIC on Polygon).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceTable {
    common_currency: Address,
    native_token: Address,
    entries: BTreeMap<Address, TokenPrice>,
}

impl PriceTable {
    /// A table whose common currency is also the native coin's wrapper.
    pub fn native(common_currency: Address, decimals: u8) -> Self {
        Self::new(common_currency, decimals, common_currency)
    }

    pub fn new(common_currency: Address, common_decimals: u8, native_token: Address) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            common_currency,
            TokenPrice {
                price: BigRational::one(),
                decimals: common_decimals,
            },
        );
        Self {
            common_currency,
            native_token,
            entries,
        }
    }

    pub fn set(&mut self, token: Address, price: BigRational, decimals: u8) -> Result<(), PriceError> {
        if price.is_negative() {
            return Err(PriceError::Negative(token));
        }
        if token == self.common_currency && !price.is_one() {
            return Err(PriceError::CommonNotUnit(token));
        }
        self.entries.insert(token, TokenPrice { price, decimals });
        Ok(())
    }

    pub fn with(mut self, token: Address, price: BigRational, decimals: u8) -> Result<Self, PriceError> {
        self.set(token, price, decimals)?;
        Ok(self)
    }

    pub fn common_currency(&self) -> Address {
        self.common_currency
    }

    pub fn native_token(&self) -> Address {
        self.native_token
    }

    pub fn get(&self, token: &Address) -> Option<&TokenPrice> {
        self.entries.get(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, &TokenPrice)> {
        self.entries.iter()
    }

    /// Price of one whole native coin in the common currency, when known.
    pub fn native_price(&self) -> Option<BigRational> {
        if self.native_token == self.common_currency {
            return Some(BigRational::one());
        }
        self.entries.get(&self.native_token).map(|p| p.price.clone())
    }
}
