#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "scoring.hpp"

namespace rmisel {

enum class DefectMode { Clean, KeywordEcho, Misalignment, OffTopicQuery };

const char* defect_mode_name(DefectMode m);
DefectMode defect_mode_from_name(std::string_view name);

// Failure-mode mix for a generated corpus. The seed fully determines the
// output; two runs with equal specs are byte-identical.
struct DefectSpec {
    std::map<DefectMode, double> rates = {{DefectMode::Clean, 0.25},
                                          {DefectMode::KeywordEcho, 0.25},
                                          {DefectMode::Misalignment, 0.25},
                                          {DefectMode::OffTopicQuery, 0.25}};
    std::uint64_t seed = 0;
    std::vector<std::string> vocabulary;  // empty => default_vocabulary()
    std::int64_t query_words_min = 4;
    std::int64_t query_words_max = 8;
    std::int64_t answer_words_min = 26;
    std::int64_t answer_words_max = 40;

    void validate() const;
    static DefectSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Invented compound words (prefix x suffix), so generated text can never
// collide with chat-template wording.
const std::vector<std::string>& default_vocabulary();

struct LabeledSample {
    Sample sample;
    DefectMode mode;
};

struct GeneratedCorpus {
    std::vector<LabeledSample> samples;

    std::vector<Sample> corpus() const;
    std::map<std::string, DefectMode> labels() const;
};

// Construction rules per mode:
//   Clean         — Q and A share a topic block; A contains ceil(m/2) of the
//                   query's content words exactly once and never the rest.
//   KeywordEcho   — A opens by restating all query content words (three
//                   passes), then topic filler.
//   Misalignment  — Q from the topic pool, A entirely from a disjoint pool.
//   OffTopicQuery — Q is a short greeting, A from the disjoint pool.
GeneratedCorpus generate_corpus(const DefectSpec& spec, std::int64_t n);

void write_labels(const std::filesystem::path& path, const GeneratedCorpus& corpus);
std::map<std::string, DefectMode> read_labels(const std::filesystem::path& path);

// Rank-placement statistics per mode; assertions live in tests.
struct ModeSummary {
    DefectMode mode = DefectMode::Clean;
    std::int64_t count = 0;
    double mean_rmi = 0.0;
    double median_rmi = 0.0;
    double min_rmi = 0.0;
    double max_rmi = 0.0;
    // Fraction of the mode's samples in each stratified-rank decile.
    std::array<double, 10> decile_fractions{};
};

std::vector<ModeSummary> separation_metrics(const std::vector<ScoreRecord>& scores,
                                            const std::map<std::string, DefectMode>& labels,
                                            std::int64_t k_bins = 10);

nlohmann::json mode_summaries_to_json(const std::vector<ModeSummary>& summaries);

} // namespace rmisel
