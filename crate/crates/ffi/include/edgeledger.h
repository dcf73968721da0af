#ifndef EDGELEDGER_H
#define EDGELEDGER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ElStatus {
  EL_STATUS_OK = 0,
  /**
   * A null pointer, non-UTF-8 string or malformed JSON argument.
   */
  EL_STATUS_INVALID_ARGUMENT = 1,
  EL_STATUS_NOT_FOUND = 2,
  EL_STATUS_DUPLICATE = 3,
  /**
   * The contract rejected the arguments.
   */
  EL_STATUS_INVALID = 4,
  EL_STATUS_NO_ELIGIBLE_SERVER = 5,
  EL_STATUS_UNKNOWN_OPERATION = 6,
  EL_STATUS_READ_ONLY_VIOLATION = 7,
  EL_STATUS_IO = 8,
  EL_STATUS_CORRUPT = 9,
  EL_STATUS_UNAVAILABLE = 10,
  /**
   * A Rust panic was caught at the boundary.
   */
  EL_STATUS_PANIC = 11,
} ElStatus;

/**
 * Opaque ledger handle.
 */
typedef struct ElLedger ElLedger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens a ledger with all four contracts registered. `log_path` may be null
 * for an in-memory ledger. `block_timeout_ms` of 0 and `max_txs` of 0 take
 * the defaults (500 ms, 10).
 *
 * # Safety
 * `log_path` is null or a NUL-terminated string; `out` is a valid pointer.
 */
enum ElStatus el_ledger_open(const char *log_path,
                             uint32_t max_txs,
                             uint64_t block_timeout_ms,
                             struct ElLedger **out);

/**
 * Flushes queued transactions and releases the handle. Null is a no-op.
 *
 * # Safety
 * `ledger` came from [`el_ledger_open`] and is not used afterwards.
 */
void el_ledger_free(struct ElLedger *ledger);

/**
 * Submits a transaction and waits for its block to commit. `out_result`
 * receives the contract's JSON return value.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum ElStatus el_ledger_submit(const struct ElLedger *ledger,
                               const char *contract,
                               const char *operation,
                               const char *args_json,
                               char **out_result);

/**
 * Runs a read-only operation against committed state.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum ElStatus el_ledger_evaluate(const struct ElLedger *ledger,
                                 const char *contract,
                                 const char *operation,
                                 const char *args_json,
                                 char **out_result);

/**
 * Ranks eligible servers for `target_id`; `out_result` receives the
 * selection entries as a JSON array.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum ElStatus el_select_offload_server(const struct ElLedger *ledger,
                                       const char *target_id,
                                       bool requires_gpu,
                                       uint32_t window_minutes,
                                       int64_t now_ms,
                                       char **out_result);

/**
 * World-state entries under `prefix` as a JSON array of `[key, value]`
 * pairs; values are the stored JSON documents.
 *
 * # Safety
 * Pointers are valid; `prefix` is NUL-terminated.
 */
enum ElStatus el_ledger_range_query(const struct ElLedger *ledger,
                                    const char *prefix,
                                    char **out_result);

/**
 * Height of the last committed block.
 *
 * # Safety
 * Pointers are valid.
 */
enum ElStatus el_ledger_height(const struct ElLedger *ledger, uint64_t *out_height);

/**
 * Verifies the in-memory chain; `out_report` receives the verification
 * report as JSON (`valid`, `blockCount`, `firstBadHeight`, `reason`).
 *
 * # Safety
 * Pointers are valid.
 */
enum ElStatus el_ledger_verify(const struct ElLedger *ledger, char **out_report);

/**
 * Verifies a block log file without opening a ledger. An invalid chain is
 * still `EL_STATUS_OK`; inspect `valid` in the report.
 *
 * # Safety
 * `path` is NUL-terminated; `out_report` is valid.
 */
enum ElStatus el_verify_log_file(const char *path, char **out_report);

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *el_last_error_message(void);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` came from this library and is not used afterwards.
 */
void el_string_free(char *s);

/**
 * Library version, static storage.
 */
const char *el_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDGELEDGER_H */
