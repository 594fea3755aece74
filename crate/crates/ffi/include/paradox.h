#ifndef PARADOX_H
#define PARADOX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PARADOX_STATUS_OK = 0,
  PARADOX_STATUS_NULL_POINTER = 1,
  PARADOX_STATUS_INVALID_ARGUMENT = 2,
  PARADOX_STATUS_NOT_CONVERGED = 3,
  PARADOX_STATUS_DEGENERATE = 4,
  PARADOX_STATUS_NON_FINITE = 5,
  PARADOX_STATUS_CONFIG = 6,
  PARADOX_STATUS_IO = 7,
  PARADOX_STATUS_PANIC = 8,
} ParadoxStatus;

/**
 * Opaque two-coin comparison.
 */
typedef struct ParadoxCoin ParadoxCoin;

/**
 * Opaque experiment configuration.
 */
typedef struct ParadoxConfig ParadoxConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *paradox_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *paradox_last_error(void);

/**
 * # Safety
 * `out_coin` must be a valid pointer to writable storage for one handle.
 */
ParadoxStatus paradox_coin_new(double p_true, double p1, double p2, ParadoxCoin **out_coin);

/**
 * # Safety
 * `coin` must be NULL or a handle from `paradox_coin_new` not yet freed.
 */
void paradox_coin_free(ParadoxCoin *coin);

/**
 * Posterior probability of the first coin after `x` heads in `n` tosses.
 *
 * # Safety
 * `coin` must be a live handle and `out_p1` writable.
 */
ParadoxStatus paradox_coin_posterior(const ParadoxCoin *coin,
                                     uint64_t n,
                                     uint64_t x,
                                     double *out_p1);

/**
 * Exact P{alpha < P1 < 1 - alpha} over binomial data.
 *
 * # Safety
 * `coin` must be a live handle and `out_prob` writable.
 */
ParadoxStatus paradox_coin_prob_nonextreme(const ParadoxCoin *coin,
                                           uint64_t n,
                                           double alpha,
                                           double *out_prob);

/**
 * P1 for the sign comparison (mean <= 0 vs mean > 0) given the sample mean.
 *
 * # Safety
 * `out_p1` must be writable.
 */
ParadoxStatus paradox_balance_sign_posterior(double tau,
                                             double xi,
                                             uint64_t n,
                                             double xbar,
                                             double *out_p1);

/**
 * log(P1/P2) for two fixed-precision normal models; `s2` uses divisor n.
 *
 * # Safety
 * `out_log_odds` must be writable.
 */
ParadoxStatus paradox_balance_variance_log_odds(double tau1,
                                                double tau2,
                                                double xi,
                                                uint64_t n,
                                                double xbar,
                                                double s2,
                                                double *out_log_odds);

/**
 * The precision above 1 that is as far from N(0, 1) as precision `tau1`.
 *
 * # Safety
 * `out_tau2` must be writable.
 */
ParadoxStatus paradox_equally_wrong_partner(double tau1, double *out_tau2);

/**
 * The 15 quartet site-pattern class probabilities.
 *
 * `topology`: 0 star, 1 ((0,1),(2,3)), 2 ((0,2),(1,3)), 3 ((0,3),(1,2)).
 * `branches`: 5 lengths, internal first then taxa 0..3. `gamma_shape`
 * INFINITY selects plain JC.
 *
 * # Safety
 * `branches` must point to 5 doubles and `out_probs` to 15.
 */
ParadoxStatus paradox_quartet_pattern_probs(uint32_t topology,
                                            const double *branches,
                                            double gamma_shape,
                                            double *out_probs);

/**
 * Posterior of the three rooted triplet trees by quadrature under JC.
 *
 * # Safety
 * `counts` must point to 5 class counts and `out_posterior` to 3 doubles.
 */
ParadoxStatus paradox_triplet_tree_posteriors(const uint64_t *counts,
                                              double prior_mean_t0,
                                              double prior_mean_t1,
                                              size_t points_per_dim,
                                              double *out_posterior);

/**
 * Posterior of the three quartet trees by MCMC under JC. `out_gap` receives
 * the largest disagreement between chains.
 *
 * # Safety
 * `counts` must point to 15 class counts, `out_posterior` to 3 doubles and
 * `out_gap` to one double (or be NULL).
 */
ParadoxStatus paradox_quartet_tree_posteriors_mcmc(const uint64_t *counts,
                                                   double prior_mean,
                                                   uint64_t iterations,
                                                   size_t chains,
                                                   uint64_t seed,
                                                   double *out_posterior,
                                                   double *out_gap);

/**
 * Parses a TOML experiment configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out_config` writable.
 */
ParadoxStatus paradox_config_from_toml(const char *toml, ParadoxConfig **out_config);

/**
 * # Safety
 * `config` must be a live handle and `dir` a NUL-terminated path.
 */
ParadoxStatus paradox_config_set_output_dir(ParadoxConfig *config, const char *dir);

/**
 * Runs the configured experiment and writes its report files.
 * `out_rows` (may be NULL) receives the number of replicate rows.
 *
 * # Safety
 * `config` must be a live handle.
 */
ParadoxStatus paradox_run_experiment(const ParadoxConfig *config, uint64_t *out_rows);

/**
 * # Safety
 * `config` must be NULL or a handle from `paradox_config_from_toml` not yet freed.
 */
void paradox_config_free(ParadoxConfig *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARADOX_H */
