//! Contract execution: the interface contracts implement and the context
//! they run in.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::block::Write;
use super::state::WorldState;
use super::LedgerError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("already exists: {0}")]
    Duplicate(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("no eligible edge node: {0}")]
    NoEligibleServer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Read,
    Write,
}

/// Deterministic business logic. `invoke` must depend only on `args` and
/// what it reads through `ctx`.
pub trait Contract: Send + Sync {
    fn name(&self) -> &'static str;
    /// `None` when the operation is not part of this contract.
    fn op_kind(&self, operation: &str) -> Option<OpKind>;
    fn invoke(
        &self,
        operation: &str,
        args: &[String],
        ctx: &mut TxContext<'_>,
    ) -> Result<Vec<u8>, ContractError>;
}

pub trait StateView {
    fn get(&self, key: &str) -> Option<Vec<u8>>;
    /// Ascending by key.
    fn range(&self, prefix: &str) -> Vec<(String, Vec<u8>)>;
}

impl StateView for WorldState {
    fn get(&self, key: &str) -> Option<Vec<u8>> {
        WorldState::get(self, key).map(<[u8]>::to_vec)
    }

    fn range(&self, prefix: &str) -> Vec<(String, Vec<u8>)> {
        self.range_prefix(prefix)
    }
}

pub(crate) type Overlay = BTreeMap<String, Option<Vec<u8>>>;

/// A base view with uncommitted writes layered on top.
pub(crate) struct Layered<'a> {
    pub base: &'a dyn StateView,
    pub over: &'a Overlay,
}

impl StateView for Layered<'_> {
    fn get(&self, key: &str) -> Option<Vec<u8>> {
        match self.over.get(key) {
            Some(v) => v.clone(),
            None => self.base.get(key),
        }
    }

    fn range(&self, prefix: &str) -> Vec<(String, Vec<u8>)> {
        let mut merged: BTreeMap<String, Vec<u8>> = self.base.range(prefix).into_iter().collect();
        for (k, v) in self
            .over
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
        {
            match v {
                Some(v) => {
                    merged.insert(k.clone(), v.clone());
                }
                None => {
                    merged.remove(k);
                }
            }
        }
        merged.into_iter().collect()
    }
}

pub(crate) fn apply_to_overlay(over: &mut Overlay, writes: &[Write]) {
    for w in writes {
        over.insert(w.key.clone(), w.value.clone());
    }
}

pub struct TxContext<'a> {
    tx_id: &'a str,
    timestamp_ms: i64,
    base: &'a dyn StateView,
    local: Overlay,
    writes: Vec<Write>,
}

impl<'a> TxContext<'a> {
    pub fn new(tx_id: &'a str, timestamp_ms: i64, base: &'a dyn StateView) -> Self {
        Self {
            tx_id,
            timestamp_ms,
            base,
            local: Overlay::new(),
            writes: Vec::new(),
        }
    }

    pub fn tx_id(&self) -> &str {
        self.tx_id
    }

    /// Timestamp assigned by the ordering step.
    pub fn timestamp_ms(&self) -> i64 {
        self.timestamp_ms
    }

    pub fn get(&self, key: &str) -> Option<Vec<u8>> {
        Layered {
            base: self.base,
            over: &self.local,
        }
        .get(key)
    }

    pub fn range(&self, prefix: &str) -> Vec<(String, Vec<u8>)> {
        Layered {
            base: self.base,
            over: &self.local,
        }
        .range(prefix)
    }

    pub fn put(&mut self, key: impl Into<String>, value: Vec<u8>) {
        let w = Write::put(key, value);
        self.local.insert(w.key.clone(), w.value.clone());
        self.writes.push(w);
    }

    pub fn delete(&mut self, key: impl Into<String>) {
        let w = Write::delete(key);
        self.local.insert(w.key.clone(), None);
        self.writes.push(w);
    }

    pub fn into_writes(self) -> Vec<Write> {
        self.writes
    }

    pub fn has_writes(&self) -> bool {
        !self.writes.is_empty()
    }
}

#[derive(Default, Clone)]
pub struct ContractRegistry {
    contracts: BTreeMap<String, Arc<dyn Contract>>,
}

impl ContractRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, contract: Arc<dyn Contract>) -> &mut Self {
        self.contracts.insert(contract.name().to_string(), contract);
        self
    }

    pub fn resolve(
        &self,
        contract: &str,
        operation: &str,
    ) -> Result<(Arc<dyn Contract>, OpKind), LedgerError> {
        let c = self
            .contracts
            .get(contract)
            .ok_or_else(|| LedgerError::UnknownContract(contract.to_string()))?;
        let kind = c
            .op_kind(operation)
            .ok_or_else(|| LedgerError::UnknownOperation {
                contract: contract.to_string(),
                operation: operation.to_string(),
            })?;
        Ok((c.clone(), kind))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.contracts.keys().map(String::as_str)
    }
}
