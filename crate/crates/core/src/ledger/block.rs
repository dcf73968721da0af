//! Transactions, blocks and their canonical byte encoding.
//!
//! Every block is serialized with a fixed field order:
//!
//! ```text
//! height      u64 BE
//! prev_hash   32 bytes
//! tx_count    u32 BE
//! txs         tx_count x transaction
//! block_hash  32 bytes   (SHA-256 over everything above)
//! ```
//!
//! A transaction is `tx_id, contract, operation` (strings), `args`
//! (u32 count + strings), `timestamp_ms` (i64 BE) and `writes` (u32 count of
//! `key` string, tag byte `1` + value bytes for a put, tag byte `0` for a
//! delete). Strings and byte values are u32 BE length-prefixed.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))?;
        Ok(Digest(arr))
    }
}

/// A single key-value effect of a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Write {
    pub key: String,
    /// `None` is the delete marker.
    pub value: Option<Vec<u8>>,
}

impl Write {
    pub fn put(key: impl Into<String>, value: Vec<u8>) -> Self {
        Self {
            key: key.into(),
            value: Some(value),
        }
    }

    pub fn delete(key: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerTransaction {
    pub tx_id: String,
    pub contract: String,
    pub operation: String,
    pub args: Vec<String>,
    pub timestamp_ms: i64,
    pub writes: Vec<Write>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub txs: Vec<LedgerTransaction>,
    pub block_hash: Digest,
}

impl Block {
    pub fn genesis() -> Block {
        Block::seal(0, Digest::ZERO, Vec::new())
    }

    /// Builds a block and computes its hash.
    pub fn seal(height: u64, prev_hash: Digest, txs: Vec<LedgerTransaction>) -> Block {
        let mut block = Block {
            height,
            prev_hash,
            txs,
            block_hash: Digest::ZERO,
        };
        block.block_hash = block.compute_hash();
        block
    }

    pub fn compute_hash(&self) -> Digest {
        Digest::of(&self.encode_body())
    }

    fn encode_body(&self) -> Vec<u8> {
        let mut enc = Encoder::default();
        enc.u64(self.height);
        enc.raw(&self.prev_hash.0);
        enc.u32(self.txs.len() as u32);
        for tx in &self.txs {
            encode_tx(&mut enc, tx);
        }
        enc.buf
    }

    /// Canonical bytes including the trailing block hash.
    pub fn encode(&self) -> Vec<u8> {
        let mut bytes = self.encode_body();
        bytes.extend_from_slice(&self.block_hash.0);
        bytes
    }

    /// Strict inverse of [`Block::encode`]; trailing bytes or unknown tags
    /// are errors. The stored hash is returned as-is, not checked.
    pub fn decode(bytes: &[u8]) -> Result<Block, CodecError> {
        let mut dec = Decoder::new(bytes);
        let height = dec.u64()?;
        let prev_hash = Digest(dec.array32()?);
        let count = dec.u32()? as usize;
        let mut txs = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            txs.push(decode_tx(&mut dec)?);
        }
        let block_hash = Digest(dec.array32()?);
        if !dec.is_empty() {
            return Err(CodecError::TrailingBytes(dec.remaining()));
        }
        Ok(Block {
            height,
            prev_hash,
            txs,
            block_hash,
        })
    }
}

fn encode_tx(enc: &mut Encoder, tx: &LedgerTransaction) {
    enc.str(&tx.tx_id);
    enc.str(&tx.contract);
    enc.str(&tx.operation);
    enc.u32(tx.args.len() as u32);
    for a in &tx.args {
        enc.str(a);
    }
    enc.i64(tx.timestamp_ms);
    enc.u32(tx.writes.len() as u32);
    for w in &tx.writes {
        enc.str(&w.key);
        match &w.value {
            Some(v) => {
                enc.u8(1);
                enc.bytes(v);
            }
            None => enc.u8(0),
        }
    }
}

fn decode_tx(dec: &mut Decoder<'_>) -> Result<LedgerTransaction, CodecError> {
    let tx_id = dec.string()?;
    let contract = dec.string()?;
    let operation = dec.string()?;
    let argc = dec.u32()? as usize;
    let mut args = Vec::with_capacity(argc.min(1024));
    for _ in 0..argc {
        args.push(dec.string()?);
    }
    let timestamp_ms = dec.i64()?;
    let wc = dec.u32()? as usize;
    let mut writes = Vec::with_capacity(wc.min(1024));
    for _ in 0..wc {
        let key = dec.string()?;
        let value = match dec.u8()? {
            1 => Some(dec.bytes()?.to_vec()),
            0 => None,
            t => return Err(CodecError::BadTag(t)),
        };
        writes.push(Write { key, value });
    }
    Ok(LedgerTransaction {
        tx_id,
        contract,
        operation,
        args,
        timestamp_ms,
        writes,
    })
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("unexpected end of record")]
    Truncated,
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
    #[error("unknown write tag {0}")]
    BadTag(u8),
    #[error("string is not valid UTF-8")]
    Utf8,
}

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }
    fn raw(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.raw(b);
    }
    fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated)?;
        if end > self.buf.len() {
            return Err(CodecError::Truncated);
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64, CodecError> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn array32(&mut self) -> Result<[u8; 32], CodecError> {
        Ok(self.take(32)?.try_into().unwrap())
    }
    fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
    fn string(&mut self) -> Result<String, CodecError> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| CodecError::Utf8)
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    fn is_empty(&self) -> bool {
        self.remaining() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub valid: bool,
    pub block_count: u64,
    pub first_bad_height: Option<u64>,
    pub reason: Option<String>,
}

impl VerifyReport {
    fn ok(block_count: u64) -> Self {
        Self {
            valid: true,
            block_count,
            first_bad_height: None,
            reason: None,
        }
    }

    fn bad(block_count: u64, height: u64, reason: impl Into<String>) -> Self {
        Self {
            valid: false,
            block_count,
            first_bad_height: Some(height),
            reason: Some(reason.into()),
        }
    }
}

/// Checks hash integrity, linkage, consecutive heights and tx-id uniqueness.
pub fn verify_chain(blocks: &[Block]) -> VerifyReport {
    let n = blocks.len() as u64;
    let mut seen = HashSet::new();
    let mut prev = Digest::ZERO;
    for (i, b) in blocks.iter().enumerate() {
        let h = i as u64;
        if let Some(reason) = check_block(b, h, &prev, &mut seen) {
            return VerifyReport::bad(n, h, reason);
        }
        prev = b.block_hash;
    }
    VerifyReport::ok(n)
}

/// Same as [`verify_chain`] but over raw encoded records, so that records
/// which no longer decode are reported at their position.
pub fn verify_records<R: AsRef<[u8]>>(records: &[R]) -> VerifyReport {
    let n = records.len() as u64;
    let mut seen = HashSet::new();
    let mut prev = Digest::ZERO;
    for (i, raw) in records.iter().enumerate() {
        let h = i as u64;
        let block = match Block::decode(raw.as_ref()) {
            Ok(b) => b,
            Err(e) => return VerifyReport::bad(n, h, format!("undecodable record: {e}")),
        };
        if let Some(reason) = check_block(&block, h, &prev, &mut seen) {
            return VerifyReport::bad(n, h, reason);
        }
        prev = block.block_hash;
    }
    VerifyReport::ok(n)
}

fn check_block(
    b: &Block,
    expected_height: u64,
    prev: &Digest,
    seen: &mut HashSet<String>,
) -> Option<String> {
    if b.height != expected_height {
        return Some(format!("height {} out of sequence", b.height));
    }
    if &b.prev_hash != prev {
        return Some("prev hash does not link".into());
    }
    if b.compute_hash() != b.block_hash {
        return Some("block hash mismatch".into());
    }
    if b.height > 0 && b.txs.is_empty() {
        return Some("empty non-genesis block".into());
    }
    for tx in &b.txs {
        if !seen.insert(tx.tx_id.clone()) {
            return Some(format!("duplicate tx id {}", tx.tx_id));
        }
    }
    None
}
