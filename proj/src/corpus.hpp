#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rmisel {

// One (query, answer) pair. Token counts are filled in by whichever backend
// tokenizer is active; they stay unset until first counted.
struct Sample {
    std::string id;
    std::string query;
    std::string answer;
    std::optional<std::int64_t> query_tokens;
    std::optional<std::int64_t> answer_tokens;
};

struct Rejection {
    std::int64_t line;       // 1-based input line
    std::string id;          // empty when no id could be read
    std::string reason;
};

struct LoadReport {
    std::int64_t kept = 0;
    std::int64_t dropped_length = 0;
    std::int64_t dropped_malformed = 0;
    std::int64_t deferred = 0;  // samples kept without token counts
    std::vector<Rejection> rejections;

    std::string to_json() const;
};

struct Corpus {
    std::vector<Sample> samples;   // stable input-file order
    std::string source_digest;     // sha-256 of the input bytes
    LoadReport report;
};

// Counts tokens in one text span; provided by the scoring backend. Null when
// no backend is attached at load time.
using TokenCounter = std::function<std::int64_t(std::string_view)>;

enum class LengthFilterMode {
    Joint,     // keep iff query_tokens + answer_tokens <= max_tokens
    Separate,  // keep iff max(query_tokens, answer_tokens) <= max_tokens
};

struct LoadOptions {
    std::int64_t max_tokens = 2048;
    LengthFilterMode length_mode = LengthFilterMode::Joint;
    TokenCounter counter;  // null => length filtering deferred to scoring
};

// Reads a JSONL corpus: one object per line with fields `query`, `answer`
// and optional `id` (synthesized as "line-<n>" when absent). Unknown fields
// are tolerated. Malformed or invalid records become rejection entries in
// the report; only an unreadable file is fatal.
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});

// Applies the token-length filter to an already-loaded corpus, used when
// counts only become available at scoring time. Returns the surviving
// samples in order and appends drop entries to the report.
void apply_length_filter(Corpus& corpus, const LoadOptions& options);

void write_corpus(const std::filesystem::path& path, const std::vector<Sample>& samples);

} // namespace rmisel
