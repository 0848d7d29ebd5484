#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace rmisel {

// All perplexities observed for one (sample, model, template variant).
// Fields stay unset for directions that were never scored.
struct ScoreCacheEntry {
    std::string sample_id;
    std::string model_id;
    std::string template_variant;  // canonical variant name, e.g. "standard"
    std::optional<double> ppl_q;
    std::optional<double> ppl_q_given_a;
    std::optional<double> ppl_a;
    std::optional<double> ppl_a_given_q;

    std::string key() const;
};

// Append-only JSONL cache. Perplexities are persisted as full-precision
// decimal strings so numeric round-trips are bit-exact. Duplicate keys
// resolve last-writer-wins, both in memory and on reload. Reads may run
// concurrently; writes are serialized.
class ScoreCache {
  public:
    // Opens (creating if needed) the cache at `path`. Corrupted lines are
    // skipped and counted, never fatal.
    explicit ScoreCache(std::filesystem::path path);

    std::optional<ScoreCacheEntry> get(std::string_view sample_id,
                                       std::string_view model_id,
                                       std::string_view template_variant) const;

    // Validates the entry and appends it. `normalized_probs` asserts the
    // perplexity >= 1 invariant that holds when logprobs are true log
    // probabilities.
    void put(const ScoreCacheEntry& entry, bool normalized_probs);

    // Rewrites the file keeping only the winning entry per key, sorted by
    // key. Returns the number of lines removed.
    std::size_t compact();

    std::size_t size() const;
    std::size_t corrupted_lines() const { return corrupted_; }
    const std::filesystem::path& path() const { return path_; }

    static void validate(const ScoreCacheEntry& entry, bool normalized_probs);

  private:
    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, ScoreCacheEntry> entries_;
    std::size_t corrupted_ = 0;

    void load();
    void append_line(const ScoreCacheEntry& entry);
};

std::string cache_entry_to_json(const ScoreCacheEntry& entry);
std::optional<ScoreCacheEntry> cache_entry_from_json(std::string_view line);

} // namespace rmisel
