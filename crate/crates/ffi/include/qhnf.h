#ifndef QHNF_H
#define QHNF_H

#include <stddef.h>

// Result codes shared by every function.
typedef enum QhnfStatus {
  QHNF_STATUS_OK = 0,
  QHNF_STATUS_NULL_POINTER = 1,
  QHNF_STATUS_INVALID_ARGUMENT = 2,
  // The input matrix or document was rejected.
  QHNF_STATUS_VALIDATION = 3,
  // Spectral analysis or chain construction failed.
  QHNF_STATUS_PIPELINE = 4,
  // The transform was built but failed its final checks.
  QHNF_STATUS_VERIFICATION = 5,
  // A Rust panic was caught at the boundary.
  QHNF_STATUS_PANIC = 6,
} QhnfStatus;

typedef enum QhnfVerdict {
  QHNF_VERDICT_STABLE = 0,
  QHNF_VERDICT_MARGINAL = 1,
  QHNF_VERDICT_UNSTABLE = 2,
} QhnfVerdict;

// Selects a matrix for [`qhnf_report_matrix`].
typedef enum QhnfMatrix {
  // Symplectic transform `T`.
  QHNF_MATRIX_TRANSFORM = 0,
  // Normal-form Hamiltonian matrix `Tᵀ M T`.
  QHNF_MATRIX_NORMAL_HAMILTONIAN = 1,
  // Normal-form equation-of-motion matrix.
  QHNF_MATRIX_NORMAL_EQUATION_OF_MOTION = 2,
} QhnfMatrix;

// Opaque analysis result.
typedef struct QhnfReport QhnfReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Analyze a row-major `2N×2N` symmetric matrix with default tolerances.
//
// # Safety
// `entries` must point to `4·n_modes²` readable doubles and `out` to a
// writable handle slot. On success `*out` must be released with
// [`qhnf_report_free`].
enum QhnfStatus qhnf_analyze(const double *entries, size_t n_modes, struct QhnfReport **out);

// Parse a matrix document (plain text or JSON) and analyze it, honouring
// any tolerances it declares.
//
// # Safety
// `text` must be a nul-terminated UTF-8 string and `out` a writable handle
// slot.
enum QhnfStatus qhnf_analyze_document(const char *text, struct QhnfReport **out);

// Release a report. Null is accepted.
//
// # Safety
// `report` must come from this library and not be used afterwards.
void qhnf_report_free(struct QhnfReport *report);

// # Safety
// `report` must be a live handle or null.
size_t qhnf_report_n_modes(const struct QhnfReport *report);

// # Safety
// `report` must be a live handle and `out` writable.
enum QhnfStatus qhnf_report_verdict(const struct QhnfReport *report, enum QhnfVerdict *out);

// Number of zero-frequency (free-particle) modes, or 0 for null.
//
// # Safety
// `report` must be a live handle or null.
size_t qhnf_report_zero_frequency_modes(const struct QhnfReport *report);

// Copy a `2N×2N` matrix in row-major order into `buffer`, which must hold
// `len ≥ 4N²` doubles.
//
// # Safety
// `report` must be a live handle and `buffer` writable for `len` doubles.
enum QhnfStatus qhnf_report_matrix(const struct QhnfReport *report,
                                   enum QhnfMatrix which,
                                   double *buffer,
                                   size_t len);

// Full report as JSON. Release with [`qhnf_string_free`].
//
// # Safety
// `report` must be a live handle and `out` writable.
enum QhnfStatus qhnf_report_json(const struct QhnfReport *report, char **out);

// Normal-form Hamiltonian as a single line such as `1.5(X1^2 + P1^2)`.
// Release with [`qhnf_string_free`].
//
// # Safety
// `report` must be a live handle and `out` writable.
enum QhnfStatus qhnf_report_expression(const struct QhnfReport *report, char **out);

// # Safety
// `text` must come from this library or be null.
void qhnf_string_free(char *text);

// Message of the last failure on this thread, or null. Valid until the next
// call into the library from the same thread.
const char *qhnf_last_error_message(void);

// Library version as a static nul-terminated string.
const char *qhnf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QHNF_H */
