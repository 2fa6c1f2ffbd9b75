/* mutforge C API.
 *
 * Every function returning mf_status sets a thread-local last error on
 * failure; read it with mf_last_error_message() or mf_last_error_json().
 * Strings returned through char** out-parameters are owned by the caller and
 * released with mf_string_free(). Handles are released with their *_free
 * function; passing NULL to a *_free function is a no-op.
 */
#ifndef MUTFORGE_H
#define MUTFORGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MF_API __declspec(dllexport)
#else
#define MF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mf_status {
  MF_OK = 0,
  MF_INVALID_ARGUMENT = 1,
  MF_IO = 2,
  MF_PARSE = 3,
  MF_CONFIG = 4,
  MF_INTEGRITY = 5,
  MF_STALE = 6,
  MF_FIXTURE_INVALID = 7,
  MF_TRANSPORT = 8,
  MF_PROTOCOL = 9,
  MF_UNDEFINED = 10,
  MF_FLAKY = 11,
  MF_UNCLASSIFIED = 12,
  MF_INTERNAL = 13
} mf_status;

typedef struct mf_config mf_config;
typedef struct mf_bug mf_bug;
typedef struct mf_pool mf_pool;
typedef struct mf_kill_matrix mf_kill_matrix;

typedef void (*mf_warn_fn)(const char* message, void* user);

MF_API const char* mf_version(void);
MF_API const char* mf_status_name(mf_status status);

/* Last error of the calling thread; MF_OK and "" when there is none. */
MF_API mf_status mf_last_error_code(void);
MF_API const char* mf_last_error_message(void);
/* {"error": "<name>", "code": <n>, "message": "..."} */
MF_API const char* mf_last_error_json(void);

MF_API void mf_string_free(char* s);

/* ---- configuration ---- */

/* MiniLang adapter, one offline stub backend "stub", generators stub-p1..p4
 * (prompt templates P1..P4) and "rules" (every operator). */
MF_API mf_status mf_config_new(mf_config** out);
/* TOML (.toml) or JSON. Errors name the offending key and its position. */
MF_API mf_status mf_config_load(const char* path, mf_config** out);
MF_API void mf_config_free(mf_config* cfg);

MF_API mf_status mf_config_set_seed(mf_config* cfg, uint64_t seed);
MF_API mf_status mf_config_set_workers(mf_config* cfg, size_t workers);
MF_API mf_status mf_config_set_out_dir(mf_config* cfg, const char* dir);
MF_API mf_status mf_config_set_context_length(mf_config* cfg, int lines);
MF_API mf_status mf_config_set_test_timeout(mf_config* cfg, double seconds);
MF_API uint64_t mf_config_seed(const mf_config* cfg);
MF_API const char* mf_config_out_dir(const mf_config* cfg);
MF_API mf_status mf_config_to_json(const mf_config* cfg, char** out);

/* ---- stages ---- */

/* Reads and validates a bug case directory (fixed/, buggy/, tests/,
 * bug.json) with the configured adapter and extracts its context. */
MF_API mf_status mf_bug_load(const mf_config* cfg, const char* dir, mf_bug** out);
MF_API void mf_bug_free(mf_bug* bug);
MF_API const char* mf_bug_id(const mf_bug* bug);

/* Runs one configured generator on the bug's context. */
MF_API mf_status mf_generate(const mf_config* cfg, const mf_bug* bug, const char* generator_id,
                             mf_pool** out);

MF_API mf_status mf_pool_load(const char* path, mf_pool** out);
MF_API mf_status mf_pool_save(const mf_pool* pool, const char* path);
MF_API void mf_pool_free(mf_pool* pool);
MF_API size_t mf_pool_size(const mf_pool* pool);
/* Counts of the classified pool: |A|, |C|, |U|, viable. */
MF_API mf_status mf_pool_counts(const mf_pool* pool, size_t* all, size_t* compilable,
                                size_t* useless, size_t* viable);

/* Classifies the pool in place, compiling against the bug's fixed version. */
MF_API mf_status mf_filter(const mf_config* cfg, const mf_bug* bug, mf_pool* pool);

/* Kill matrix of the pool's viable records over every test. */
MF_API mf_status mf_execute(const mf_config* cfg, const mf_bug* bug, const mf_pool* pool,
                            mf_kill_matrix** out);
MF_API mf_status mf_kill_matrix_load(const char* csv_path, mf_kill_matrix** out);
MF_API mf_status mf_kill_matrix_save(const mf_kill_matrix* m, const char* csv_path);
MF_API void mf_kill_matrix_free(mf_kill_matrix* m);

/* Metric report (JSON) for a classified pool. `matrix` may be NULL: the
 * behavior section is then marked not computed. `labels_csv` may be NULL. */
MF_API mf_status mf_metrics(const mf_config* cfg, const mf_bug* bug, const mf_pool* pool,
                            const mf_kill_matrix* matrix, const char* labels_csv, char** out_json);

/* Equivalence-sample skeleton (mutant_id,annotator,label) over the viable
 * records of a classified pool, or every record of an unclassified one. */
MF_API mf_status mf_sample(const mf_pool* pool, double confidence, double margin, uint64_t seed,
                           const char* csv_path, size_t* rows);

MF_API mf_status mf_sample_size(size_t population, double confidence, double margin, size_t* out);

/* Full bug x generator grid; writes the report bundle into the configured
 * output directory. Cell failures are reported through `warn`, not as an
 * error status. */
MF_API mf_status mf_experiment_run(const mf_config* cfg, mf_warn_fn warn, void* user,
                                   char** summary_md, size_t* failed_cells);

/* Markdown comparison of one or more report.json files. */
MF_API mf_status mf_compare(const char* const* report_paths, size_t n, char** out_md);

#ifdef __cplusplus
}
#endif

#endif /* MUTFORGE_H */
