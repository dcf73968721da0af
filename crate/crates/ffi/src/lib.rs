//! C ABI over the edgeledger ledger and contracts.
//!
//! Handles are opaque. Every fallible call returns an [`ElStatus`]; on
//! failure the message is available from [`el_last_error_message`] on the
//! same thread. Strings returned through out-parameters are UTF-8 JSON owned
//! by the caller and released with [`el_string_free`].
//!
//! Contract arguments are passed as a JSON array of strings, exactly the
//! argument list the contract operation takes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use edgeledger::clock::SystemClock;
use edgeledger::contracts::{self, ops, TaskProperties};
use edgeledger::ledger::{self, ContractError, Ledger, LedgerConfig, LedgerError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElStatus {
    Ok = 0,
    /// A null pointer, non-UTF-8 string or malformed JSON argument.
    InvalidArgument = 1,
    NotFound = 2,
    Duplicate = 3,
    /// The contract rejected the arguments.
    Invalid = 4,
    NoEligibleServer = 5,
    UnknownOperation = 6,
    ReadOnlyViolation = 7,
    Io = 8,
    Corrupt = 9,
    Unavailable = 10,
    /// A Rust panic was caught at the boundary.
    Panic = 11,
}

/// Opaque ledger handle.
pub struct ElLedger {
    inner: Ledger,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &LedgerError) -> ElStatus {
    match e {
        LedgerError::Rejected(c) => match c {
            ContractError::NotFound(_) => ElStatus::NotFound,
            ContractError::Duplicate(_) => ElStatus::Duplicate,
            ContractError::Invalid(_) => ElStatus::Invalid,
            ContractError::NoEligibleServer(_) => ElStatus::NoEligibleServer,
        },
        LedgerError::UnknownContract(_) | LedgerError::UnknownOperation { .. } => {
            ElStatus::UnknownOperation
        }
        LedgerError::NotReadOnly { .. } | LedgerError::ReadOnlyViolation { .. } => {
            ElStatus::ReadOnlyViolation
        }
        LedgerError::Io(_) => ElStatus::Io,
        LedgerError::Corrupt(_) => ElStatus::Corrupt,
        LedgerError::Unavailable(_) => ElStatus::Unavailable,
    }
}

struct Failure(ElStatus, String);

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(ElStatus::Io, e.to_string())
    }
}

fn bad_arg(msg: impl Into<String>) -> Failure {
    Failure(ElStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any failure and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ElStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ElStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside edgeledger");
            ElStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(bad_arg(format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad_arg(format!("{name} is not UTF-8")))
}

unsafe fn ledger_arg<'a>(p: *const ElLedger) -> Result<&'a Ledger, Failure> {
    p.as_ref().map(|l| &l.inner).ok_or_else(|| bad_arg("ledger is null"))
}

unsafe fn write_out(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(bad_arg("out is null"));
    }
    let c = CString::new(s).map_err(|_| bad_arg("result contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

fn args_from_json(raw: &str) -> Result<Vec<String>, Failure> {
    serde_json::from_str(raw).map_err(|e| bad_arg(format!("args must be a JSON array of strings: {e}")))
}

fn utf8(bytes: Vec<u8>) -> Result<String, Failure> {
    String::from_utf8(bytes).map_err(|_| Failure(ElStatus::Unavailable, "non-UTF-8 contract output".into()))
}

/// Opens a ledger with all four contracts registered. `log_path` may be null
/// for an in-memory ledger. `block_timeout_ms` of 0 and `max_txs` of 0 take
/// the defaults (500 ms, 10).
///
/// # Safety
/// `log_path` is null or a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn el_ledger_open(
    log_path: *const c_char,
    max_txs: u32,
    block_timeout_ms: u64,
    out: *mut *mut ElLedger,
) -> ElStatus {
    guard(|| {
        if out.is_null() {
            return Err(bad_arg("out is null"));
        }
        let mut config = LedgerConfig::default();
        if !log_path.is_null() {
            config.log_path = Some(PathBuf::from(str_arg(log_path, "log_path")?));
        }
        if max_txs > 0 {
            config.max_txs = max_txs as usize;
        }
        if block_timeout_ms > 0 {
            config.block_timeout = Duration::from_millis(block_timeout_ms);
        }
        let inner = Ledger::open(config, contracts::default_registry(), Arc::new(SystemClock))?;
        *out = Box::into_raw(Box::new(ElLedger { inner }));
        Ok(())
    })
}

/// Flushes queued transactions and releases the handle. Null is a no-op.
///
/// # Safety
/// `ledger` came from [`el_ledger_open`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn el_ledger_free(ledger: *mut ElLedger) {
    if !ledger.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(ledger))));
    }
}

/// Submits a transaction and waits for its block to commit. `out_result`
/// receives the contract's JSON return value.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn el_ledger_submit(
    ledger: *const ElLedger,
    contract: *const c_char,
    operation: *const c_char,
    args_json: *const c_char,
    out_result: *mut *mut c_char,
) -> ElStatus {
    guard(|| {
        let l = ledger_arg(ledger)?;
        let args = args_from_json(str_arg(args_json, "args_json")?)?;
        let r = l.submit(str_arg(contract, "contract")?, str_arg(operation, "operation")?, &args)?;
        write_out(out_result, utf8(r.result)?)
    })
}

/// Runs a read-only operation against committed state.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn el_ledger_evaluate(
    ledger: *const ElLedger,
    contract: *const c_char,
    operation: *const c_char,
    args_json: *const c_char,
    out_result: *mut *mut c_char,
) -> ElStatus {
    guard(|| {
        let l = ledger_arg(ledger)?;
        let args = args_from_json(str_arg(args_json, "args_json")?)?;
        let r = l.evaluate(str_arg(contract, "contract")?, str_arg(operation, "operation")?, &args)?;
        write_out(out_result, utf8(r)?)
    })
}

/// Ranks eligible servers for `target_id`; `out_result` receives the
/// selection entries as a JSON array.
///
/// # Safety
/// Pointers are valid; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn el_select_offload_server(
    ledger: *const ElLedger,
    target_id: *const c_char,
    requires_gpu: bool,
    window_minutes: u32,
    now_ms: i64,
    out_result: *mut *mut c_char,
) -> ElStatus {
    guard(|| {
        let l = ledger_arg(ledger)?;
        let task = TaskProperties {
            requires_gpu,
            label: String::new(),
        };
        let args = vec![
            str_arg(target_id, "target_id")?.to_string(),
            serde_json::to_string(&task).expect("task serializes"),
            window_minutes.to_string(),
            now_ms.to_string(),
        ];
        let r = l.evaluate(contracts::OFFLOAD, ops::SELECT_OFFLOAD_SERVER, &args)?;
        write_out(out_result, utf8(r)?)
    })
}

/// World-state entries under `prefix` as a JSON array of `[key, value]`
/// pairs; values are the stored JSON documents.
///
/// # Safety
/// Pointers are valid; `prefix` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn el_ledger_range_query(
    ledger: *const ElLedger,
    prefix: *const c_char,
    out_result: *mut *mut c_char,
) -> ElStatus {
    guard(|| {
        let l = ledger_arg(ledger)?;
        let rows: Vec<(String, serde_json::Value)> = l
            .range_query(str_arg(prefix, "prefix")?)
            .into_iter()
            .map(|(k, v)| {
                let doc = serde_json::from_slice(&v)
                    .unwrap_or_else(|_| serde_json::Value::String(String::from_utf8_lossy(&v).into_owned()));
                (k, doc)
            })
            .collect();
        write_out(out_result, serde_json::to_string(&rows).expect("rows serialize"))
    })
}

/// Height of the last committed block.
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn el_ledger_height(ledger: *const ElLedger, out_height: *mut u64) -> ElStatus {
    guard(|| {
        let l = ledger_arg(ledger)?;
        if out_height.is_null() {
            return Err(bad_arg("out_height is null"));
        }
        *out_height = l.height();
        Ok(())
    })
}

/// Verifies the in-memory chain; `out_report` receives the verification
/// report as JSON (`valid`, `blockCount`, `firstBadHeight`, `reason`).
///
/// # Safety
/// Pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn el_ledger_verify(ledger: *const ElLedger, out_report: *mut *mut c_char) -> ElStatus {
    guard(|| {
        let l = ledger_arg(ledger)?;
        write_out(out_report, serde_json::to_string(&l.verify()).expect("report serializes"))
    })
}

/// Verifies a block log file without opening a ledger. An invalid chain is
/// still `EL_STATUS_OK`; inspect `valid` in the report.
///
/// # Safety
/// `path` is NUL-terminated; `out_report` is valid.
#[no_mangle]
pub unsafe extern "C" fn el_verify_log_file(path: *const c_char, out_report: *mut *mut c_char) -> ElStatus {
    guard(|| {
        let report = ledger::verify_log_file(str_arg(path, "path")?)?;
        write_out(out_report, serde_json::to_string(&report).expect("report serializes"))
    })
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn el_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn el_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn el_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has an interior NUL"),
    };
    VERSION.as_ptr()
}
