//! Signed per-token net flows of a transaction.

use alloc::collections::btree_map::{self, BTreeMap};
use core::ops::Add;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::types::Address;

/// Mapping token → signed raw amount. Zero entries are never stored, so two
/// vectors describing the same flows compare equal structurally.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DeltaVector {
    entries: BTreeMap<Address, BigInt>,
}

impl DeltaVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `amount` to the entry for `token`, dropping it if it reaches zero.
    pub fn credit(&mut self, token: Address, amount: &BigInt) {
        if amount.is_zero() {
            return;
        }
        match self.entries.entry(token) {
            btree_map::Entry::Vacant(v) => {
                v.insert(amount.clone());
            }
            btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += amount;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn debit(&mut self, token: Address, amount: &BigInt) {
        self.credit(token, &-amount);
    }

    /// Net amount for `token`; zero when absent.
    pub fn get(&self, token: &Address) -> BigInt {
        self.entries.get(token).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, &BigInt)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tokens whose net amount is negative.
    pub fn deficits(&self) -> impl Iterator<Item = (&Address, &BigInt)> {
        self.entries.iter().filter(|(_, v)| v.is_negative())
    }

    /// Entrywise sum of two vectors.
    pub fn delta_add(&self, other: &DeltaVector) -> DeltaVector {
        let mut out = self.clone();
        out += other;
        out
    }
}

impl core::ops::AddAssign<&DeltaVector> for DeltaVector {
    fn add_assign(&mut self, rhs: &DeltaVector) {
        for (token, amount) in &rhs.entries {
            self.credit(*token, amount);
        }
    }
}

impl Add for &DeltaVector {
    type Output = DeltaVector;
    fn add(self, rhs: Self) -> DeltaVector {
        self.delta_add(rhs)
    }
}

impl FromIterator<(Address, BigInt)> for DeltaVector {
    fn from_iter<I: IntoIterator<Item = (Address, BigInt)>>(iter: I) -> Self {
        let mut v = DeltaVector::new();
        for (token, amount) in iter {
            v.credit(token, &amount);
        }
        v
    }
}
