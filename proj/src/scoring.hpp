#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "score_cache.hpp"
#include "templating.hpp"

namespace rmisel {

// Per-token natural-log probabilities of a target span under a context, as
// reported by the backend (token boundaries are the backend's, so the
// vector length is the backend's count of the span).
struct TokenLogProbs {
    std::vector<std::string> token_texts;
    std::vector<double> logprobs;
    std::int64_t context_token_count = 0;
};

enum class ScoreStatus { Ok, Partial, Failed };

const char* score_status_name(ScoreStatus s);
ScoreStatus score_status_from_name(std::string_view name);

// Every perplexity and derived metric for one sample under one
// (model, template variant) pair.
struct ScoreRecord {
    std::string sample_id;
    std::string model_id;
    std::string template_variant;
    std::optional<double> ppl_q;
    std::optional<double> ppl_q_given_a;
    std::optional<double> ppl_a;
    std::optional<double> ppl_a_given_q;
    std::optional<double> rmi;          // present iff both query-side ppls are
    std::optional<double> ifd;          // present iff both answer-side ppls are
    bool ifd_hinders = false;           // ifd > 1: the instruction hinders the answer
    std::optional<std::int64_t> query_tokens;
    std::optional<std::int64_t> answer_tokens;
    ScoreStatus status = ScoreStatus::Ok;
    std::string reason;                 // failure detail for partial/failed
};

std::string score_record_to_json(const ScoreRecord& r);
ScoreRecord score_record_from_json(std::string_view line);
void write_score_records(const std::filesystem::path& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_score_records(const std::filesystem::path& path);

enum class BackendKind { HttpTeacherForcing, ReplayFile, BuiltinNgram };

const char* backend_kind_name(BackendKind k);
BackendKind backend_kind_from_name(std::string_view name);

struct BackendDescriptor {
    std::string model_id;
    BackendKind kind = BackendKind::BuiltinNgram;
    std::string endpoint;          // http backends: base URL
    std::string path;              // replay backends: logprob file
    std::string family = "plain";  // template family used when planning
    bool normalized_probs = true;
    int max_in_flight = 1;
    nlohmann::json request_options = nlohmann::json::object();

    static BackendDescriptor from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// A scoring backend: teacher-forces the plan's context and returns one
// natural-log probability per target token.
class Backend {
  public:
    virtual ~Backend() = default;

    const BackendDescriptor& descriptor() const { return descriptor_; }

    // Called once with the corpus before any scoring; backends that train
    // or pre-index on the corpus do it here.
    virtual void prepare(const std::vector<Sample>& samples) { (void)samples; }

    // `request_key` identifies the span deterministically (used for replay
    // lookup and idempotent request ids).
    virtual TokenLogProbs score_span(const PromptPlan& plan, const std::string& request_key) = 0;

    // Token count of a bare text span, when the backend can provide one.
    virtual std::optional<std::int64_t> count_tokens(std::string_view text) {
        (void)text;
        return std::nullopt;
    }

  protected:
    explicit Backend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) {}
    BackendDescriptor descriptor_;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor);

// Canonical identity of one span request; doubles as the replay-file key.
std::string span_request_key(std::string_view sample_id, std::string_view model_id,
                             TemplateVariant variant, Direction direction);

// ------------------------------------------------------------ reductions

// exp(-mean(logprobs)) with N = the exact target-token count.
double perplexity(const std::vector<double>& logprobs);

// ln(ppl_q) - ln(ppl_q_given_a): the information gain the answer provides
// about the query. Negative values mean the conditioning hurt.
double rmi(double ppl_q, double ppl_q_given_a);

// ppl_a_given_q / ppl_a. Values above 1 mean the instruction hinders.
double ifd(double ppl_a_given_q, double ppl_a);

// ------------------------------------------------------------ scoring

struct ScoreOptions {
    TemplateVariant variant = TemplateVariant::Standard;
    std::set<Direction> directions = {Direction::QUnconditional, Direction::QGivenA};
    const TemplateLibrary* templates = nullptr;  // null => builtin library
    ScoreCache* cache = nullptr;                 // consulted first, updated after
    int workers = 0;                             // 0 => backend max_in_flight
};

// Scores one sample in every requested direction: cache lookup, plan,
// span scoring, reduction, cache write-back. Failures in individual
// directions degrade status instead of throwing.
ScoreRecord score_sample(const Sample& sample, Backend& backend, const ScoreOptions& options);

// Scores a corpus with bounded concurrency. Output order and content are
// independent of scheduling: records are collected per input index.
std::vector<ScoreRecord> score_corpus(const std::vector<Sample>& samples, Backend& backend,
                                      const ScoreOptions& options);

} // namespace rmisel
