#ifndef GROUNDINST_H
#define GROUNDINST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GiStatus {
  GiStatus_Ok = 0,
  GiStatus_NullArgument = 1,
  GiStatus_InvalidUtf8 = 2,
  GiStatus_Parse = 3,
  GiStatus_NotGround = 4,
  GiStatus_Io = 5,
  GiStatus_Panic = 6,
} GiStatus;

typedef enum GiVerdict {
  GiVerdict_Unsat = 0,
  GiVerdict_Sat = 1,
  GiVerdict_Timeout = 2,
} GiVerdict;

/**
 * Opaque parsed problem.
 */
typedef struct GiProblem GiProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses CNF text. `name` may be null.
 *
 * # Safety
 * `text` and `name` must be null or NUL-terminated; `out` must be writable.
 */
enum GiStatus gi_problem_parse(const char *text, const char *name, struct GiProblem **out);

/**
 * Loads a `.p` file; the problem is named after the file stem.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum GiStatus gi_problem_load(const char *path, struct GiProblem **out);

/**
 * # Safety
 * `problem` must come from this library and not be freed twice. Null is ignored.
 */
void gi_problem_free(struct GiProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum GiStatus gi_problem_clause_count(const struct GiProblem *problem, uintptr_t *out);

/**
 * CNF text of the problem, to be freed with [`gi_string_free`].
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum GiStatus gi_problem_serialize(const struct GiProblem *problem, char **out);

/**
 * One random-policy attempt (25, 5 samples) with the sweep's seed schedule;
 * writes the solution record as JSON.
 *
 * # Safety
 * `problem` must be a live handle; `out_json` must be writable.
 */
enum GiStatus gi_solve(const struct GiProblem *problem,
                       uint64_t base_seed,
                       uint64_t run,
                       double budget_secs,
                       char **out_json);

/**
 * Decides a problem whose clauses are all ground.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum GiStatus gi_decide_ground(const struct GiProblem *problem,
                               double budget_secs,
                               enum GiVerdict *out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is ignored.
 */
void gi_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *gi_last_error(void);

const char *gi_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GROUNDINST_H */
