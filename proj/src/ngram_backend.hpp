#pragma once

#include <unordered_map>

#include "scoring.hpp"

namespace rmisel {

// Deterministic offline backend: an add-one-smoothed n-gram over whitespace
// tokens, trained once on the corpus being scored, interpolated with an
// add-one-smoothed unigram over the request's context tokens. The base
// n-gram carries corpus statistics; the context term is what makes the
// conditional scores actually depend on the conditioning span (a bare
// bigram forgets everything past one token, which would make PPL(Q|A)
// blind to the answer).
//
//   p(w | prev, ctx) = (1 - cache_weight) * p_ngram(w | prev)
//                    + cache_weight * (count_ctx(w) + 1) / (|ctx| + V)
//
// request_options:
//   order        1 (unigram base) or 2 (bigram base, default)
//   cache_weight interpolation weight in [0, 1), default 0.5
class NgramBackend : public Backend {
  public:
    explicit NgramBackend(BackendDescriptor descriptor);

    void prepare(const std::vector<Sample>& samples) override;
    TokenLogProbs score_span(const PromptPlan& plan, const std::string& request_key) override;
    std::optional<std::int64_t> count_tokens(std::string_view text) override;

    // Trains directly on token streams; each stream is one sentence.
    void train(const std::vector<std::vector<std::string>>& streams);

    bool trained() const { return vocab_size_ > 0; }
    std::size_t vocab_size() const { return vocab_size_; }

  private:
    int order_ = 2;
    double cache_weight_ = 0.5;
    // token -> id; id 0 is reserved for <unk>, id 1 for the start token.
    std::unordered_map<std::string, std::int32_t> vocab_;
    std::unordered_map<std::int64_t, std::int64_t> bigram_counts_;  // prev * 2^32 + next
    std::vector<std::int64_t> prev_totals_;    // occurrences as a bigram prefix
    std::vector<std::int64_t> unigram_counts_;
    std::int64_t total_tokens_ = 0;
    std::size_t vocab_size_ = 0;  // predictable vocabulary incl. <unk>

    std::int32_t lookup(const std::string& token) const;
    double base_prob(std::int32_t prev, std::int32_t word) const;
};

} // namespace rmisel
