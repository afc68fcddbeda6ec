#ifndef SNM_H
#define SNM_H

/* Generated by cbindgen from snm-ffi. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SnmStatus {
  SNM_STATUS_OK = 0,
  SNM_STATUS_NULL_POINTER = 1,
  SNM_STATUS_INVALID_ARGUMENT = 2,
  SNM_STATUS_OVERFLOW = 3,
  SNM_STATUS_CODEBOOK_TOO_LARGE = 4,
  SNM_STATUS_BUFFER_TOO_SMALL = 5,
  SNM_STATUS_INTERNAL = 6,
} SnmStatus;

typedef enum SnmAllocation {
  SNM_ALLOCATION_EQUAL_PER_NODE = 0,
  SNM_ALLOCATION_TOTAL_UNIFORM = 1,
} SnmAllocation;

typedef enum SnmMode {
  SNM_MODE_THRESHOLD = 0,
  SNM_MODE_EXACT = 1,
} SnmMode;

/**
 * Opaque materialized codebook.
 */
typedef struct SnmCodebook SnmCodebook;

/**
 * Opaque outage query (topology and modulation).
 */
typedef struct SnmQuery SnmQuery;

typedef struct SnmEstimate {
  double probability;
  uint64_t trials;
  uint64_t failures;
  double std_error;
  double ci_low;
  double ci_high;
} SnmEstimate;

typedef struct SnmComplex {
  double re;
  double im;
} SnmComplex;

/**
 * Message describing the last failure on this thread, or NULL.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *snm_last_error(void);

/**
 * Static description of a status code.
 */
const char *snm_status_message(enum SnmStatus status);

/**
 * Number of legitimate blocks for `n` subcarriers and `m`-PSK.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SnmStatus snm_codebook_size(size_t n, size_t m, uint64_t *out_size);

/**
 * Average rate in bits per channel use.
 *
 * # Safety
 * `out_rate` must be a valid pointer.
 */
enum SnmStatus snm_average_rate(size_t n, size_t m, double *out_rate);

/**
 * Creates a query over `hops` hops with the given distances.
 *
 * `pt_over_n0` and `xi` are linear ratios.
 *
 * # Safety
 * `distances` must point to `hops` doubles; `out_query` must be valid.
 */
enum SnmStatus snm_query_new(size_t n,
                             size_t m,
                             const double *distances,
                             size_t hops,
                             double alpha,
                             double pt_over_n0,
                             double xi,
                             enum SnmAllocation allocation,
                             struct SnmQuery **out_query);

/**
 * Releases a query. NULL is ignored.
 *
 * # Safety
 * `query` must come from [`snm_query_new`] and not be used afterwards.
 */
void snm_query_free(struct SnmQuery *query);

/**
 * Per-subcarrier outage of `hop` (0-based) with `active` subcarriers.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SnmStatus snm_per_hop_subcarrier_outage(const struct SnmQuery *q,
                                             size_t hop,
                                             size_t active,
                                             double *out_probability);

/**
 * End-to-end outage given `active` subcarriers.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SnmStatus snm_conditional_outage(const struct SnmQuery *q,
                                      size_t active,
                                      double *out_probability);

/**
 * Closed-form average outage.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SnmStatus snm_average_outage(const struct SnmQuery *q, double *out_probability);

/**
 * High-SNR average outage; `out_in_regime` is false when the value exceeds one.
 *
 * # Safety
 * Pointers must be valid; `out_in_regime` may be NULL.
 */
enum SnmStatus snm_asymptotic_average_outage(const struct SnmQuery *q,
                                             double *out_value,
                                             bool *out_in_regime);

/**
 * Monte Carlo outage estimate.
 *
 * `workers == 0` uses the default thread pool.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SnmStatus snm_simulate(const struct SnmQuery *q,
                            uint64_t trials,
                            uint64_t seed,
                            enum SnmMode mode,
                            double confidence_level,
                            size_t workers,
                            struct SnmEstimate *out_estimate);

/**
 * Materializes the codebook for `n` subcarriers and `m`-PSK.
 *
 * # Safety
 * `out_codebook` must be valid.
 */
enum SnmStatus snm_codebook_new(size_t n, size_t m, struct SnmCodebook **out_codebook);

/**
 * Releases a codebook. NULL is ignored.
 *
 * # Safety
 * `codebook` must come from [`snm_codebook_new`] and not be used afterwards.
 */
void snm_codebook_free(struct SnmCodebook *codebook);

/**
 * Number of blocks, or 0 for NULL.
 *
 * # Safety
 * `codebook` must be NULL or valid.
 */
size_t snm_codebook_len(const struct SnmCodebook *codebook);

/**
 * Maps `bits` (one 0/1 byte per bit) to a block.
 *
 * Writes `N` symbols to `out_symbols` and the pattern index to `out_index`.
 *
 * # Safety
 * `bits` must hold `bits_len` bytes, `out_symbols` room for `N` values.
 */
enum SnmStatus snm_encode(const struct SnmCodebook *cb,
                          const uint8_t *bits,
                          size_t bits_len,
                          struct SnmComplex *out_symbols,
                          size_t *out_index);

/**
 * Writes the bit stream of block `index` into `out_bits` (one byte per bit).
 *
 * `out_len` receives the stream length even when the buffer is too small.
 *
 * # Safety
 * `out_bits` must have room for `capacity` bytes.
 */
enum SnmStatus snm_decode(const struct SnmCodebook *cb,
                          size_t index,
                          uint8_t *out_bits,
                          size_t capacity,
                          size_t *out_len);

/**
 * Exhaustive ML detection; writes the detected pattern index.
 *
 * # Safety
 * `received` and `channel` must each hold `len` values, with `len == N`.
 */
enum SnmStatus snm_ml_detect(const struct SnmCodebook *cb,
                             const struct SnmComplex *received,
                             const struct SnmComplex *channel,
                             size_t len,
                             double power,
                             size_t *out_index);

#endif  /* SNM_H */
