#ifndef CONSLAW_H
#define CONSLAW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Direction argument of [`conslaw_total_derivative`].
 */
#define CONSLAW_DIRECTION_T 0

#define CONSLAW_DIRECTION_X 1

typedef enum ConslawStatus {
  CONSLAW_STATUS_OK = 0,
  CONSLAW_STATUS_NULL_POINTER = 1,
  CONSLAW_STATUS_INVALID_UTF8 = 2,
  CONSLAW_STATUS_PARSE_ERROR = 3,
  CONSLAW_STATUS_INVALID_PDE = 4,
  CONSLAW_STATUS_COMPUTATION_ERROR = 5,
  CONSLAW_STATUS_PANIC = 6,
} ConslawStatus;

/**
 * Opaque parsed expression.
 */
typedef struct ConslawExpr ConslawExpr;

/**
 * Opaque parsed equation together with its source text and parameters.
 */
typedef struct ConslawPde ConslawPde;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after a success. Valid until the next call.
 */
const char *conslaw_last_error(void);

/**
 * Parses an expression in the jet grammar.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum ConslawStatus conslaw_expr_parse(const char *text, struct ConslawExpr **out);

/**
 * Renders an expression; free the result with [`conslaw_string_free`].
 *
 * # Safety
 * `expr` must come from this library; `out` must be writable.
 */
enum ConslawStatus conslaw_expr_render(const struct ConslawExpr *expr, char **out);

/**
 * # Safety
 * `expr` must come from this library and not be used afterwards. Null is ignored.
 */
void conslaw_expr_free(struct ConslawExpr *expr);

/**
 * Parses `lhs = rhs` with optional parameters `"n=2,c0=1"` (`params` may be null).
 *
 * # Safety
 * String arguments must be nul-terminated; `out` must be writable.
 */
enum ConslawStatus conslaw_pde_parse(const char *text, const char *params, struct ConslawPde **out);

/**
 * # Safety
 * `pde` must come from this library and not be used afterwards. Null is ignored.
 */
void conslaw_pde_free(struct ConslawPde *pde);

/**
 * Total derivative in the direction [`CONSLAW_DIRECTION_T`] or [`CONSLAW_DIRECTION_X`].
 *
 * # Safety
 * `expr` must come from this library; `out` must be writable.
 */
enum ConslawStatus conslaw_total_derivative(const struct ConslawExpr *expr,
                                            uint32_t direction,
                                            struct ConslawExpr **out);

/**
 * Euler operator E_u.
 *
 * # Safety
 * `expr` must come from this library; `out` must be writable.
 */
enum ConslawStatus conslaw_euler_operator(const struct ConslawExpr *expr, struct ConslawExpr **out);

/**
 * Runs the multiplier search and writes the derive report as JSON.
 * `atoms` is a comma-separated list or null.
 *
 * # Safety
 * `pde` must come from this library; `atoms` null or nul-terminated; `out_json` writable.
 */
enum ConslawStatus conslaw_derive_json(const struct ConslawPde *pde,
                                       uint16_t order,
                                       uint32_t deg_tx,
                                       uint32_t deg_u,
                                       const char *atoms,
                                       char **out_json);

/**
 * Builds and verifies the conservation law of a multiplier. `out_json` may be null; otherwise it
 * receives `{pde, lambda, phi_t, phi_x, utilde, verified, failure}`.
 *
 * # Safety
 * Handles must come from this library; `out_verified` must be writable.
 */
enum ConslawStatus conslaw_verify_multiplier(const struct ConslawPde *pde,
                                             const struct ConslawExpr *lambda,
                                             bool *out_verified,
                                             char **out_json);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void conslaw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONSLAW_H */
