#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "ranking.hpp"
#include "scoring.hpp"

namespace rmisel {

// A full end-to-end run: load -> score (strong, then weak) -> stratify and
// rank per model -> pair -> select -> analyze. Everything after scoring is a
// pure function of the score tables, so a warm cache reproduces the run
// byte-for-byte without backend traffic.
struct RunConfig {
    std::filesystem::path corpus_path;
    std::int64_t max_tokens = 2048;
    LengthFilterMode length_mode = LengthFilterMode::Joint;
    BackendDescriptor strong_backend;
    std::optional<BackendDescriptor> weak_backend;
    TemplateVariant variant = TemplateVariant::Standard;
    std::optional<std::filesystem::path> templates_path;
    std::set<Direction> directions = {Direction::QUnconditional, Direction::QGivenA};
    std::int64_t k_bins = 10;
    std::vector<SelectionSpec> selections;
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> cache_path;
    int workers = 0;  // 0 => per-backend max_in_flight

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void validate() const;
};

struct RunResult {
    nlohmann::json manifest;
    std::filesystem::path manifest_path;
    std::vector<std::filesystem::path> outputs;
};

RunResult run(const RunConfig& config);

// Loads a corpus with the backend's token counts when the backend can
// count, deferring the length filter to scoring time otherwise.
Corpus load_for_scoring(const std::filesystem::path& corpus_path, std::int64_t max_tokens,
                        LengthFilterMode length_mode, Backend& backend);

// The canonical select() inputs per strategy, shared by `run` and the
// standalone select stage so their manifests agree:
//   diff/sum      -> paired ranks
//   top/percentile-> one model's rank records
//   global/ifd/random -> score records
enum class SelectionInputKind { Paired, Ranks, Scores };
SelectionInputKind selection_input_kind(Strategy strategy);

} // namespace rmisel
