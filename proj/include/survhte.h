/* C interface to the survival treatment-effect benchmark toolkit.
 *
 * Every function returns a survhte_status; on failure a thread-local message
 * is available from survhte_last_error(). Objects returned through out
 * parameters are opaque handles owned by the caller and released with the
 * matching _free function. Strings returned through out parameters are
 * released with survhte_string_free.
 */
#ifndef SURVHTE_H
#define SURVHTE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SURVHTE_OK = 0,
  SURVHTE_ERR_INVALID_ARGUMENT = 1,
  SURVHTE_ERR_RUNTIME = 2,
  SURVHTE_ERR_IO = 3
} survhte_status;

/* Toolkit version, e.g. "1.0.0". Never NULL. */
const char* survhte_version(void);

/* Message from the most recent failing call on this thread; empty string if
 * none. The pointer stays valid until the next failing call on the same
 * thread. */
const char* survhte_last_error(void);

void survhte_string_free(char* s);

/* ---- dataset generation ------------------------------------------------ */

/* Writes a synthetic dataset as CSV.
 *   scenario: "A".."E"
 *   config:   e.g. "RCT-50", "OBS-CPS-InfC"
 *   estimand: "rmst" or "surv-prob"
 *   horizon:  fixed evaluation horizon; pass a value <= 0 to use the largest
 *             observed time in the dataset. */
survhte_status survhte_export_dataset(const char* scenario, const char* config,
                                      size_t n, uint64_t seed,
                                      const char* estimand, double horizon,
                                      const char* path);

/* ---- experiment runs --------------------------------------------------- */

typedef struct survhte_report survhte_report;

/* Runs the full split/repeat benchmark described by a JSON configuration.
 * seed_override >= 0 and threads_override > 0 replace the corresponding
 * config values. */
survhte_status survhte_run_benchmark(const char* config_json,
                                     int64_t seed_override, int threads_override,
                                     survhte_report** out);

/* Training-size sweep against a fixed validation/test split. */
survhte_status survhte_convergence_run(const char* config_json,
                                       const size_t* train_sizes, size_t n_sizes,
                                       int64_t seed_override, int threads_override,
                                       survhte_report** out);

/* metrics.csv content of a report, as a heap-allocated string. */
survhte_status survhte_report_metrics_csv(const survhte_report* report, char** out);

/* Writes metrics.csv, borda.csv, borda.md, winrates.csv, provenance.json
 * (and convergence.csv for sweep reports) into out_dir. */
survhte_status survhte_report_render(const survhte_report* report,
                                     const char* out_dir, int allow_missing);

void survhte_report_free(survhte_report* report);

/* ---- ranking over existing result files -------------------------------- */

/* Reads a metrics.csv and writes borda.csv, borda.md and winrates.csv into
 * out_dir. Missing (dataset x method) cells are an error unless
 * allow_missing is nonzero. */
survhte_status survhte_rank(const char* metrics_csv_path, const char* out_dir,
                            int allow_missing);

/* Reads a metrics.csv and writes the complete report file set, stamping the
 * given seed into provenance.json. */
survhte_status survhte_report_from_metrics(const char* metrics_csv_path,
                                           const char* out_dir, int allow_missing,
                                           uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* SURVHTE_H */
