/*
 * rmisel — reverse-mutual-information scoring and selection for
 * instruction-tuning corpora.
 *
 * C interface of the shared library. All functions return RMISEL_OK on
 * success; on failure they return a status code and leave a message
 * retrievable with rmisel_last_error() (thread-local). Strings returned
 * through char** out-parameters are heap-allocated and must be released
 * with rmisel_string_free().
 */
#ifndef RMISEL_H
#define RMISEL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rmisel_status {
    RMISEL_OK = 0,
    RMISEL_ERR_IO = 1,
    RMISEL_ERR_PARSE = 2,
    RMISEL_ERR_CONFIG = 3,
    RMISEL_ERR_PRECONDITION = 4,
    RMISEL_ERR_BACKEND = 5,
    RMISEL_ERR_PROTOCOL = 6,
    RMISEL_ERR_INTERNAL = 7
} rmisel_status;

const char* rmisel_version(void);

/* Message for the most recent failing call on this thread ("" if none). */
const char* rmisel_last_error(void);

void rmisel_string_free(char* s);

/* ------------------------------------------------------------- corpus */

typedef struct rmisel_corpus rmisel_corpus;

/*
 * Loads a JSONL corpus ({"id"?, "query", "answer"} per line). When
 * count_whitespace_tokens is nonzero, samples are token-counted with the
 * builtin whitespace tokenizer and pairs longer than max_tokens
 * (query + answer jointly) are dropped; otherwise length filtering is
 * deferred to scoring.
 */
rmisel_status rmisel_corpus_open(const char* path, int64_t max_tokens,
                                 int count_whitespace_tokens, rmisel_corpus** out);
int64_t rmisel_corpus_size(const rmisel_corpus* corpus);
rmisel_status rmisel_corpus_load_report(const rmisel_corpus* corpus, char** json_out);
rmisel_status rmisel_corpus_sample(const rmisel_corpus* corpus, int64_t index, char** json_out);
void rmisel_corpus_close(rmisel_corpus* corpus);

/* ------------------------------------------------------------ metrics */

/* exp(-mean(logprobs)); logprobs are natural-log, one per token. */
rmisel_status rmisel_perplexity(const double* logprobs, size_t count, double* out);

/* ln(ppl_q) - ln(ppl_q_given_a). */
rmisel_status rmisel_rmi(double ppl_q, double ppl_q_given_a, double* out);

/* ppl_a_given_q / ppl_a. */
rmisel_status rmisel_ifd(double ppl_a_given_q, double ppl_a, double* out);

/* ------------------------------------------------------------- stages
 *
 * Each stage takes its options as a JSON object (text) and, when
 * summary_out is non-NULL, returns a JSON summary of what it did.
 *
 * score: {"corpus", "backend": {...}, "out",
 *         "variant"?, "directions"?: [..], "templates"?, "cache"?,
 *         "max_tokens"?, "length_filter"?, "workers"?}
 * rank: {"scores", "out", "k"?}
 * select: {"strategy", "out_dir",
 *          "tau"? | "fraction"? | "range"?: [lo, hi], "seed"?, "k"?,
 *          "ranks"? | "scores"? | "paired"? |
 *          ("strong_ranks" and "weak_ranks")}
 * analyze: {"scores", "out_dir", "weak_scores"?, "stability_scores"?,
 *           "variant_scores"?: {name: path}, "selections"?: {name: path},
 *           "k"?}
 * generate_defects: {"n", "out", "spec"?: {...} | "spec_file"?, "seed"?}
 */
rmisel_status rmisel_score(const char* options_json, char** summary_out);
rmisel_status rmisel_rank(const char* options_json, char** summary_out);
rmisel_status rmisel_select(const char* options_json, char** summary_out);
rmisel_status rmisel_analyze(const char* options_json, char** summary_out);
rmisel_status rmisel_generate_defects(const char* options_json, char** summary_out);

/* Executes a full pipeline run from a config file; the summary is the run
 * manifest. */
rmisel_status rmisel_run(const char* config_path, char** summary_out);

/* Rewrites a score cache keeping only the winning entry per key. */
rmisel_status rmisel_compact_cache(const char* cache_path, char** summary_out);

#ifdef __cplusplus
}
#endif

#endif /* RMISEL_H */
