#ifndef BELIEFNET_H
#define BELIEFNET_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum BnStatus {
  BN_STATUS_OK = 0,
  // A required pointer argument was null.
  BN_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  BN_STATUS_INVALID_UTF8 = 2,
  // The network text did not parse or validate.
  BN_STATUS_PARSE_ERROR = 3,
  // A variable, level or alternative name is not in the network.
  BN_STATUS_UNKNOWN_NAME = 4,
  // The evidence has probability zero.
  BN_STATUS_IMPOSSIBLE_EVIDENCE = 5,
  // The output buffer is shorter than the result.
  BN_STATUS_BUFFER_TOO_SMALL = 6,
  // Any other engine failure; see `bn_last_error`.
  BN_STATUS_ENGINE_ERROR = 7,
  // The library caught an internal panic.
  BN_STATUS_PANIC = 99,
} BnStatus;

// Set of `variable = level` observations.
typedef struct BnEvidence BnEvidence;

// Parsed, validated network.
typedef struct BnNetwork BnNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The
// pointer stays valid until the next call into the library on this thread.
const char *bn_last_error(void);

// Library version as a static NUL-terminated string.
const char *bn_version(void);

// Parses netlang text. On success `*out` owns a new network that must be
// released with `bn_network_free`.
//
// # Safety
// `source` must be a NUL-terminated string and `out` a valid pointer.
enum BnStatus bn_network_parse(const char *source, struct BnNetwork **out);

// # Safety
// `net` must come from `bn_network_parse` and not be used afterwards.
void bn_network_free(struct BnNetwork *net);

// Number of nodes, including decision and utility nodes; 0 for null.
//
// # Safety
// `net` must be null or a live network handle.
size_t bn_network_node_count(const struct BnNetwork *net);

// Canonical netlang text for the network, released with `bn_string_free`.
//
// # Safety
// `net` must be a live network handle and `out` a valid pointer.
enum BnStatus bn_network_serialize(const struct BnNetwork *net, char **out);

// # Safety
// `s` must be null or a string returned by this library.
void bn_string_free(char *s);

// Number of levels of `variable`, written to `*out`.
//
// # Safety
// Pointers must be valid; `variable` NUL-terminated.
enum BnStatus bn_variable_cardinality(const struct BnNetwork *net,
                                      const char *variable,
                                      size_t *out);

// Creates an empty evidence set, released with `bn_evidence_free`.
struct BnEvidence *bn_evidence_new(void);

// # Safety
// `ev` must come from `bn_evidence_new` and not be used afterwards.
void bn_evidence_free(struct BnEvidence *ev);

// Observes `variable = level`, replacing any earlier observation. Names
// are checked against the network when the evidence is used.
//
// # Safety
// `ev` must be a live evidence handle; strings NUL-terminated.
enum BnStatus bn_evidence_set(struct BnEvidence *ev, const char *variable, const char *level);

// Removes any observation of `variable`.
//
// # Safety
// `ev` must be a live evidence handle; `variable` NUL-terminated.
enum BnStatus bn_evidence_clear(struct BnEvidence *ev, const char *variable);

// Posterior distribution of `variable` given `ev` (null for none), in
// level order. `*written` receives the cardinality even when `len` is too
// small, in which case `BN_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `out` must point to `len` doubles; other pointers valid or as noted.
enum BnStatus bn_posterior(const struct BnNetwork *net,
                           const struct BnEvidence *ev,
                           const char *variable,
                           double *out,
                           size_t len,
                           size_t *written);

// Probability of the evidence under the model.
//
// # Safety
// `net` and `out` must be valid; `ev` may be null.
enum BnStatus bn_evidence_probability(const struct BnNetwork *net,
                                      const struct BnEvidence *ev,
                                      double *out);

// Expected utility of choosing `alternative` for the network's decision.
//
// # Safety
// `net`, `alternative` and `out` must be valid; `ev` may be null.
enum BnStatus bn_expected_utility(const struct BnNetwork *net,
                                  const struct BnEvidence *ev,
                                  const char *alternative,
                                  double *out);

// Best alternative (released with `bn_string_free`) and its expected
// utility. `expected_utility` may be null.
//
// # Safety
// `net` and `alternative` must be valid; `ev` may be null.
enum BnStatus bn_recommend(const struct BnNetwork *net,
                           const struct BnEvidence *ev,
                           char **alternative,
                           double *expected_utility);

// `P(target | pivot, ev) - P(target | not pivot, ev)`.
//
// # Safety
// All strings NUL-terminated; `net` and `out` valid; `ev` may be null.
enum BnStatus bn_sensitivity_range(const struct BnNetwork *net,
                                   const struct BnEvidence *ev,
                                   const char *target_variable,
                                   const char *target_level,
                                   const char *pivot_variable,
                                   const char *pivot_level,
                                   double *out);

// Full and canonical parameter counts of a noisy-OR/MAX node.
//
// # Safety
// `parent_cards` must point to `n_parents` values; outputs valid.
enum BnStatus bn_parameter_counts(const size_t *parent_cards,
                                  size_t n_parents,
                                  size_t child_card,
                                  bool leak,
                                  size_t *full,
                                  size_t *canonical);

// Posterior probability `L * O / (L * O + 1)` from prior odds and a
// likelihood ratio.
double bn_posterior_from_odds(double prior_odds, double likelihood_ratio);

// Derivative of the posterior with respect to the likelihood ratio.
double bn_likelihood_sensitivity(double prior_odds, double likelihood_ratio);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELIEFNET_H */
