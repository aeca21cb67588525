#ifndef BDRIS_EST_H
#define BDRIS_EST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define BDRIS_OK 0

#define BDRIS_ERR_CONFIG 2

#define BDRIS_ERR_DIMENSION 3

#define BDRIS_ERR_SINGULAR 4

#define BDRIS_ERR_ZERO_COLUMN 5

#define BDRIS_ERR_DEGENERATE 6

#define BDRIS_ERR_BUDGET 7

#define BDRIS_ERR_PARSE 8

#define BDRIS_ERR_IO 9

#define BDRIS_ERR_CSV 10

#define BDRIS_ERR_NULL_POINTER 20

#define BDRIS_ERR_INVALID_ARGUMENT 21

#define BDRIS_ERR_PANIC 22

#define BDRIS_ESTIMATOR_PROPOSED 1

#define BDRIS_ESTIMATOR_DIRECT_OMP 2

#define BDRIS_ESTIMATOR_SBL 4

/**
 * Opaque system configuration.
 */
typedef struct BdrisConfig BdrisConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *bdris_last_error_message(void);

/**
 * Full-size scenario: 8x8 BS, 6x6 RIS in four groups, five users.
 */
struct BdrisConfig *bdris_config_full_scale(void);

/**
 * Small scenario: 4x4 BS, 4x4 RIS in four groups, three users.
 */
struct BdrisConfig *bdris_config_desk(void);

/**
 * Parses and validates a TOML configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t bdris_config_from_toml(const char *text, struct BdrisConfig **out);

/**
 * Loads a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t bdris_config_load(const char *path, struct BdrisConfig **out);

/**
 * Releases a configuration; null is ignored.
 *
 * # Safety
 * `config` must come from this library and not be used afterwards.
 */
void bdris_config_free(struct BdrisConfig *config);

/**
 * Sets the SNR in dB; NaN selects noiseless observations.
 *
 * # Safety
 * `config` must be a live handle.
 */
int32_t bdris_config_set_snr_db(struct BdrisConfig *config, double snr_db);

/**
 * Snaps sampled angles to the estimator grids when `on_grid` is true.
 *
 * # Safety
 * `config` must be a live handle.
 */
int32_t bdris_config_set_on_grid(struct BdrisConfig *config, bool on_grid);

/**
 * Sets the master seed.
 *
 * # Safety
 * `config` must be a live handle.
 */
int32_t bdris_config_set_seed(struct BdrisConfig *config, uint64_t seed);

/**
 * Runs trial `trial` for the estimators in `mask` and writes three NMSE
 * values (proposed, direct OMP, SBL) to `nmse_out`; unselected entries are
 * NaN and a failed estimator reports 1.
 *
 * # Safety
 * `config` must be a live handle and `nmse_out` must hold three doubles.
 */
int32_t bdris_run_trial(const struct BdrisConfig *config,
                        uint64_t trial,
                        uint32_t mask,
                        double *nmse_out);

/**
 * Runs an SNR sweep and writes the campaign CSV to `out_path`.
 *
 * # Safety
 * `config` must be a live handle, `snr_db` must hold `count` doubles and
 * `out_path` must be a NUL-terminated string.
 */
int32_t bdris_run_snr_campaign(const struct BdrisConfig *config,
                               const double *snr_db,
                               size_t count,
                               size_t trials,
                               uint32_t mask,
                               const char *out_path);

/**
 * Runs the oracle suite and returns its CSV through `csv_out`; release it
 * with `bdris_string_free`. `passed` receives whether every check passed.
 *
 * # Safety
 * `csv_out` and `passed` must be valid pointers.
 */
int32_t bdris_selftest(uint64_t seed, char **csv_out, bool *passed);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void bdris_string_free(char *s);

/**
 * Writes the `horizontal·vertical` planar-array response at the given
 * spatial frequencies to `out` (interleaved complex).
 *
 * # Safety
 * `out` must hold `2·horizontal·vertical` doubles.
 */
int32_t bdris_upa_response(size_t horizontal,
                           size_t vertical,
                           double spacing,
                           double vertical_freq,
                           double horizontal_freq,
                           double *out);

/**
 * `‖estimate − truth‖² / ‖truth‖²` over `len` interleaved complex entries.
 *
 * # Safety
 * `estimate` and `truth` must hold `2·len` doubles; `out` must be valid.
 */
int32_t bdris_nmse(const double *estimate, const double *truth, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDRIS_EST_H */
