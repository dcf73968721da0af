use std::collections::BTreeMap;

use sha2::{Digest as _, Sha256};

use super::block::{Block, Digest, Write};

/// The materialized key-value view of every committed write.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldState {
    entries: BTreeMap<String, Vec<u8>>,
    height: Option<u64>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds state by applying every block's writes in order.
    pub fn replay<'a>(blocks: impl IntoIterator<Item = &'a Block>) -> Self {
        let mut s = Self::new();
        for b in blocks {
            s.apply_block(b);
        }
        s
    }

    pub fn apply_block(&mut self, block: &Block) {
        for tx in &block.txs {
            self.apply_writes(&tx.writes);
        }
        self.height = Some(block.height);
    }

    pub fn apply_writes(&mut self, writes: &[Write]) {
        for w in writes {
            match &w.value {
                Some(v) => {
                    self.entries.insert(w.key.clone(), v.clone());
                }
                None => {
                    self.entries.remove(&w.key);
                }
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&[u8]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    /// Entries whose key starts with `prefix`, ascending by key bytes.
    pub fn range_prefix(&self, prefix: &str) -> Vec<(String, Vec<u8>)> {
        self.entries
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn set_height(&mut self, height: u64) {
        self.height = Some(height);
    }

    /// Height of the last applied block, `None` before genesis.
    pub fn height(&self) -> Option<u64> {
        self.height
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<u8>> {
        &self.entries
    }

    /// Digest over the sorted entries; equal states have equal digests.
    pub fn digest(&self) -> Digest {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update((k.len() as u32).to_be_bytes());
            h.update(k.as_bytes());
            h.update((v.len() as u32).to_be_bytes());
            h.update(v);
        }
        Digest(h.finalize().into())
    }
}
