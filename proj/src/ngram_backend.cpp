#include "ngram_backend.hpp"

#include <cmath>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

namespace {
constexpr std::int32_t kUnk = 0;
constexpr std::int32_t kStart = 1;
constexpr std::int32_t kFirstWord = 2;

std::int64_t pair_key(std::int32_t prev, std::int32_t next) {
    return (static_cast<std::int64_t>(prev) << 32) | static_cast<std::uint32_t>(next);
}
} // namespace

NgramBackend::NgramBackend(BackendDescriptor descriptor) : Backend(std::move(descriptor)) {
    const auto& opts = descriptor_.request_options;
    if (opts.contains("order")) {
        order_ = opts["order"].get<int>();
        if (order_ != 1 && order_ != 2) fail(errc::config, "ngram order must be 1 or 2");
    }
    if (opts.contains("cache_weight")) {
        cache_weight_ = opts["cache_weight"].get<double>();
        if (!(cache_weight_ >= 0.0 && cache_weight_ < 1.0)) {
            fail(errc::config, "cache_weight must be in [0, 1)");
        }
    }
}

void NgramBackend::prepare(const std::vector<Sample>& samples) {
    std::vector<std::vector<std::string>> streams;
    streams.reserve(samples.size() * 2);
    for (const auto& s : samples) {
        streams.push_back(whitespace_tokens(s.query));
        streams.push_back(whitespace_tokens(s.answer));
    }
    train(streams);
}

void NgramBackend::train(const std::vector<std::vector<std::string>>& streams) {
    vocab_.clear();
    bigram_counts_.clear();
    for (const auto& stream : streams) {
        for (const auto& tok : stream) {
            vocab_.emplace(tok, kFirstWord + static_cast<std::int32_t>(vocab_.size()));
        }
    }
    vocab_size_ = vocab_.size() + 1;  // + <unk>
    prev_totals_.assign(vocab_.size() + 2, 0);
    unigram_counts_.assign(vocab_.size() + 2, 0);
    total_tokens_ = 0;
    for (const auto& stream : streams) {
        std::int32_t prev = kStart;
        for (const auto& tok : stream) {
            std::int32_t id = vocab_.at(tok);
            bigram_counts_[pair_key(prev, id)]++;
            prev_totals_[prev]++;
            unigram_counts_[id]++;
            total_tokens_++;
            prev = id;
        }
    }
}

std::int32_t NgramBackend::lookup(const std::string& token) const {
    auto it = vocab_.find(token);
    return it == vocab_.end() ? kUnk : it->second;
}

double NgramBackend::base_prob(std::int32_t prev, std::int32_t word) const {
    const double v = static_cast<double>(vocab_size_);
    if (order_ == 1) {
        std::int64_t c = (word < std::int32_t(unigram_counts_.size())) ? unigram_counts_[word] : 0;
        return (static_cast<double>(c) + 1.0) / (static_cast<double>(total_tokens_) + v);
    }
    std::int64_t pair = 0;
    auto it = bigram_counts_.find(pair_key(prev, word));
    if (it != bigram_counts_.end()) pair = it->second;
    std::int64_t total = (prev < std::int32_t(prev_totals_.size())) ? prev_totals_[prev] : 0;
    return (static_cast<double>(pair) + 1.0) / (static_cast<double>(total) + v);
}

TokenLogProbs NgramBackend::score_span(const PromptPlan& plan, const std::string& request_key) {
    (void)request_key;
    if (!trained()) fail(errc::precondition, "ngram backend not prepared with a corpus");

    std::vector<std::string> target = whitespace_tokens(plan.target_text);
    if (target.empty()) fail(errc::precondition, "empty target span");
    std::vector<std::string> context = whitespace_tokens(plan.context_text);

    // Context token histogram for the cache term.
    std::unordered_map<std::string, std::int64_t> ctx_counts;
    for (const auto& tok : context) ctx_counts[tok]++;
    const double ctx_total = static_cast<double>(context.size());
    const double v = static_cast<double>(vocab_size_);

    TokenLogProbs out;
    out.context_token_count = static_cast<std::int64_t>(context.size());
    out.token_texts = target;
    out.logprobs.reserve(target.size());

    std::int32_t prev = context.empty() ? kStart : lookup(context.back());
    for (const auto& tok : target) {
        std::int32_t id = lookup(tok);
        double base = base_prob(prev, id);
        auto it = ctx_counts.find(tok);
        double ctx_count = (it == ctx_counts.end()) ? 0.0 : static_cast<double>(it->second);
        double cache = (ctx_count + 1.0) / (ctx_total + v);
        double p = (1.0 - cache_weight_) * base + cache_weight_ * cache;
        out.logprobs.push_back(std::log(p));
        prev = id;
    }
    return out;
}

std::optional<std::int64_t> NgramBackend::count_tokens(std::string_view text) {
    return static_cast<std::int64_t>(whitespace_token_count(text));
}

} // namespace rmisel
