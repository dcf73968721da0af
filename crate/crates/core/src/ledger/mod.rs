//! Minimal permissioned ledger.
//!
//! Transactions are executed one at a time by a single ordering step against
//! the committed world state plus every still-queued write, then batched into
//! hash-chained blocks. A block is cut when `max_txs` transactions are queued
//! or when the oldest queued transaction has waited `block_timeout`.
//! [`Ledger::submit`] returns only once the transaction's block is committed;
//! [`Ledger::evaluate`] reads the committed state and never writes.

mod block;
mod exec;
mod log;
mod state;

use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex, RwLock};
use sha2::{Digest as _, Sha256};

use crate::clock::{Clock, SystemClock};

pub use block::{
    verify_chain, verify_records, Block, CodecError, Digest, LedgerTransaction, VerifyReport,
    Write,
};
pub use exec::{Contract, ContractError, ContractRegistry, OpKind, StateView, TxContext};
pub use log::{purge, read_records, verify_log_file, BlockLog, RawLog};
pub use state::WorldState;

use exec::{apply_to_overlay, Layered, Overlay};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("unknown contract {0}")]
    UnknownContract(String),
    #[error("unknown operation {contract}.{operation}")]
    UnknownOperation { contract: String, operation: String },
    #[error("{contract}.{operation} is not a read-only operation")]
    NotReadOnly { contract: String, operation: String },
    #[error("{contract}.{operation} attempted a write during evaluation")]
    ReadOnlyViolation { contract: String, operation: String },
    #[error("transaction rejected: {0}")]
    Rejected(#[from] ContractError),
    #[error("block log: {0}")]
    Io(#[from] std::io::Error),
    #[error("block log is corrupt at height {:?}: {}", .0.first_bad_height, .0.reason.as_deref().unwrap_or(""))]
    Corrupt(VerifyReport),
    #[error("ledger unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone)]
pub struct LedgerConfig {
    pub max_txs: usize,
    pub block_timeout: Duration,
    /// In-memory only when `None`.
    pub log_path: Option<PathBuf>,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self {
            max_txs: 10,
            block_timeout: Duration::from_millis(500),
            log_path: None,
        }
    }
}

impl LedgerConfig {
    /// Blocks are only cut by an explicit [`Ledger::cut_block`].
    pub fn manual() -> Self {
        Self {
            max_txs: usize::MAX,
            block_timeout: Duration::MAX,
            log_path: None,
        }
    }
}

/// Result of executing a transaction.
#[derive(Debug, Clone)]
pub struct Receipt {
    pub tx: LedgerTransaction,
    /// Contract return value.
    pub result: Vec<u8>,
    seq: u64,
}

struct Committed {
    world: WorldState,
    blocks: Vec<Block>,
}

struct Ordering {
    queue: Vec<LedgerTransaction>,
    overlay: Overlay,
    next_seq: u64,
    committed_seq: u64,
    oldest: Option<Instant>,
    log: Option<BlockLog>,
    shutdown: bool,
    /// Set by the cutter once it has flushed the queue after shutdown.
    closed: bool,
    failed: Option<String>,
}

struct Shared {
    config: LedgerConfig,
    registry: ContractRegistry,
    clock: Arc<dyn Clock>,
    committed: RwLock<Committed>,
    ordering: Mutex<Ordering>,
    cv: Condvar,
}

pub struct Ledger {
    shared: Arc<Shared>,
    cutter: Option<JoinHandle<()>>,
}

impl Ledger {
    /// In-memory ledger on the system clock.
    pub fn in_memory(config: LedgerConfig, registry: ContractRegistry) -> Result<Self, LedgerError> {
        Self::open(config, registry, Arc::new(SystemClock))
    }

    /// Opens (or creates) a ledger. An existing block log is verified and
    /// replayed to rebuild the world state.
    pub fn open(
        config: LedgerConfig,
        registry: ContractRegistry,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, LedgerError> {
        let mut blocks = Vec::new();
        let mut log_handle = None;
        if let Some(path) = &config.log_path {
            if path.exists() {
                let raw = read_records(path)?;
                let report = verify_log_file(path)?;
                if !report.valid {
                    return Err(LedgerError::Corrupt(report));
                }
                for r in &raw.records {
                    blocks.push(Block::decode(r).map_err(|e| {
                        LedgerError::Unavailable(format!("undecodable block: {e}"))
                    })?);
                }
            }
            log_handle = Some(BlockLog::open(path)?);
        }
        if blocks.is_empty() {
            let g = Block::genesis();
            if let Some(log) = log_handle.as_mut() {
                log.append(&g)?;
            }
            blocks.push(g);
        }
        let tx_count: u64 = blocks.iter().map(|b| b.txs.len() as u64).sum();
        let world = WorldState::replay(&blocks);

        let shared = Arc::new(Shared {
            config,
            registry,
            clock,
            committed: RwLock::new(Committed { world, blocks }),
            ordering: Mutex::new(Ordering {
                queue: Vec::new(),
                overlay: Overlay::new(),
                next_seq: tx_count + 1,
                committed_seq: tx_count,
                oldest: None,
                log: log_handle,
                shutdown: false,
                closed: false,
                failed: None,
            }),
            cv: Condvar::new(),
        });
        let bg = shared.clone();
        let cutter = std::thread::Builder::new()
            .name("ledger-cutter".into())
            .spawn(move || bg.run_cutter())
            .map_err(LedgerError::Io)?;
        Ok(Self {
            shared,
            cutter: Some(cutter),
        })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.shared.config
    }

    pub fn registry(&self) -> &ContractRegistry {
        &self.shared.registry
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.shared.clock.clone()
    }

    /// Executes and queues a transaction and waits until its block commits.
    pub fn submit(
        &self,
        contract: &str,
        operation: &str,
        args: &[String],
    ) -> Result<Receipt, LedgerError> {
        let receipt = self.enqueue(contract, operation, args)?;
        self.wait_committed(receipt.seq)?;
        Ok(receipt)
    }

    /// Executes and queues a transaction without waiting for its block.
    pub fn enqueue(
        &self,
        contract: &str,
        operation: &str,
        args: &[String],
    ) -> Result<Receipt, LedgerError> {
        let (c, _) = self.shared.registry.resolve(contract, operation)?;
        let mut ord = self.shared.ordering.lock();
        ord.check_live()?;

        let seq = ord.next_seq;
        let timestamp_ms = self.shared.clock.now_ms();
        let tx_id = tx_id(seq, timestamp_ms, contract, operation, args);
        let (result, writes) = {
            let committed = self.shared.committed.read();
            let view = Layered {
                base: &committed.world,
                over: &ord.overlay,
            };
            let mut ctx = TxContext::new(&tx_id, timestamp_ms, &view);
            let result = c.invoke(operation, args, &mut ctx)?;
            (result, ctx.into_writes())
        };

        ord.next_seq += 1;
        apply_to_overlay(&mut ord.overlay, &writes);
        let tx = LedgerTransaction {
            tx_id,
            contract: contract.to_string(),
            operation: operation.to_string(),
            args: args.to_vec(),
            timestamp_ms,
            writes,
        };
        ord.queue.push(tx.clone());
        if ord.oldest.is_none() {
            ord.oldest = Some(Instant::now());
        }
        if ord.queue.len() >= self.shared.config.max_txs {
            self.shared.cut_locked(&mut ord)?;
        } else {
            self.shared.cv.notify_all();
        }
        Ok(Receipt { tx, result, seq })
    }

    fn wait_committed(&self, seq: u64) -> Result<(), LedgerError> {
        let mut ord = self.shared.ordering.lock();
        loop {
            if ord.committed_seq >= seq {
                return Ok(());
            }
            if let Some(f) = &ord.failed {
                return Err(LedgerError::Unavailable(f.clone()));
            }
            if ord.closed {
                return Err(LedgerError::Unavailable("ledger closed".into()));
            }
            self.shared.cv.wait(&mut ord);
        }
    }

    /// Runs a read-only operation against the committed state.
    pub fn evaluate(
        &self,
        contract: &str,
        operation: &str,
        args: &[String],
    ) -> Result<Vec<u8>, LedgerError> {
        let (c, kind) = self.shared.registry.resolve(contract, operation)?;
        if kind != OpKind::Read {
            return Err(LedgerError::NotReadOnly {
                contract: contract.into(),
                operation: operation.into(),
            });
        }
        let committed = self.shared.committed.read();
        let now = self.shared.clock.now_ms();
        let mut ctx = TxContext::new("evaluate", now, &committed.world);
        let out = c.invoke(operation, args, &mut ctx)?;
        if ctx.has_writes() {
            return Err(LedgerError::ReadOnlyViolation {
                contract: contract.into(),
                operation: operation.into(),
            });
        }
        Ok(out)
    }

    /// Cuts a block from whatever is queued; `None` when the queue is empty.
    pub fn cut_block(&self) -> Result<Option<Block>, LedgerError> {
        let mut ord = self.shared.ordering.lock();
        self.shared.cut_locked(&mut ord)
    }

    pub fn range_query(&self, prefix: &str) -> Vec<(String, Vec<u8>)> {
        self.shared.committed.read().world.range_prefix(prefix)
    }

    pub fn verify(&self) -> VerifyReport {
        verify_chain(&self.shared.committed.read().blocks)
    }

    pub fn blocks(&self) -> Vec<Block> {
        self.shared.committed.read().blocks.clone()
    }

    pub fn height(&self) -> u64 {
        self.shared.committed.read().blocks.len() as u64 - 1
    }

    pub fn world(&self) -> WorldState {
        self.shared.committed.read().world.clone()
    }

    pub fn state_digest(&self) -> Digest {
        self.shared.committed.read().world.digest()
    }

    pub fn queued(&self) -> usize {
        self.shared.ordering.lock().queue.len()
    }
}

impl Drop for Ledger {
    fn drop(&mut self) {
        {
            let mut ord = self.shared.ordering.lock();
            ord.shutdown = true;
            self.shared.cv.notify_all();
        }
        if let Some(h) = self.cutter.take() {
            let _ = h.join();
        }
    }
}

impl Ordering {
    fn check_live(&self) -> Result<(), LedgerError> {
        if let Some(f) = &self.failed {
            return Err(LedgerError::Unavailable(f.clone()));
        }
        if self.shutdown {
            return Err(LedgerError::Unavailable("ledger closed".into()));
        }
        Ok(())
    }
}

impl Shared {
    fn cut_locked(&self, ord: &mut Ordering) -> Result<Option<Block>, LedgerError> {
        if ord.queue.is_empty() {
            ord.oldest = None;
            return Ok(None);
        }
        let txs = std::mem::take(&mut ord.queue);
        let mut committed = self.committed.write();
        let prev = committed
            .blocks
            .last()
            .map(|b| b.block_hash)
            .unwrap_or(Digest::ZERO);
        let block = Block::seal(committed.blocks.len() as u64, prev, txs);
        if let Some(log) = ord.log.as_mut() {
            if let Err(e) = log.append(&block) {
                ord.failed = Some(format!("block log write failed: {e}"));
                self.cv.notify_all();
                return Err(e.into());
            }
        }
        committed.world.apply_block(&block);
        committed.blocks.push(block.clone());
        drop(committed);
        ord.overlay.clear();
        ord.committed_seq = ord.next_seq - 1;
        ord.oldest = None;
        self.cv.notify_all();
        Ok(Some(block))
    }

    fn run_cutter(&self) {
        let mut ord = self.ordering.lock();
        loop {
            if ord.shutdown {
                let _ = self.cut_locked(&mut ord);
                ord.closed = true;
                self.cv.notify_all();
                return;
            }
            let deadline = ord
                .oldest
                .and_then(|t| t.checked_add(self.config.block_timeout));
            match (ord.oldest, deadline) {
                (Some(_), Some(d)) if Instant::now() >= d => {
                    if let Err(e) = self.cut_locked(&mut ord) {
                        tracing::error!("block cut failed: {e}");
                    }
                }
                (Some(_), Some(d)) => {
                    self.cv.wait_until(&mut ord, d);
                }
                _ => self.cv.wait(&mut ord),
            }
        }
    }
}

fn tx_id(seq: u64, timestamp_ms: i64, contract: &str, operation: &str, args: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(seq.to_be_bytes());
    h.update(timestamp_ms.to_be_bytes());
    for part in [contract, operation].into_iter().chain(args.iter().map(String::as_str)) {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("block {height} tx {tx_id}: {source}")]
    Execution {
        height: u64,
        tx_id: String,
        source: LedgerError,
    },
    #[error("block {height} tx {tx_id}: re-executed writes differ from the logged writes")]
    Divergence { height: u64, tx_id: String },
}

/// Re-executes every logged transaction from an empty state and checks that
/// each reproduces exactly its logged writes. Returns the resulting state.
pub fn reexecute(blocks: &[Block], registry: &ContractRegistry) -> Result<WorldState, ReplayError> {
    let mut world = WorldState::new();
    for b in blocks {
        for tx in &b.txs {
            let fail = |source| ReplayError::Execution {
                height: b.height,
                tx_id: tx.tx_id.clone(),
                source,
            };
            let (c, _) = registry.resolve(&tx.contract, &tx.operation).map_err(fail)?;
            let mut ctx = TxContext::new(&tx.tx_id, tx.timestamp_ms, &world);
            c.invoke(&tx.operation, &tx.args, &mut ctx)
                .map_err(|e| fail(e.into()))?;
            let writes = ctx.into_writes();
            if writes != tx.writes {
                return Err(ReplayError::Divergence {
                    height: b.height,
                    tx_id: tx.tx_id.clone(),
                });
            }
            world.apply_writes(&writes);
        }
        world.set_height(b.height);
    }
    Ok(world)
}
