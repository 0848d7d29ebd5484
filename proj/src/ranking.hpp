#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scoring.hpp"

namespace rmisel {

// Bin assignment and normalized within-bin RMI rank for one sample.
struct RankRecord {
    std::string sample_id;
    std::string model_id;
    std::int64_t bin_index = 0;       // 0..K-1 in ascending ppl_q order
    std::int64_t within_bin_rank = 0; // 1..|bin|, rank |bin| = highest RMI
    std::int64_t bin_size = 0;
    double normalized_rank = 0.0;     // within_bin_rank / bin_size, in (0, 1]
};

struct PairedRanks {
    std::string sample_id;
    double r_strong = 0.0;
    double r_weak = 0.0;
    double diff = 0.0;  // r_strong - r_weak
    double sum = 0.0;   // r_strong + r_weak
};

enum class Strategy {
    RmiTopFraction,
    RmiGlobalTopFraction,
    RmiPercentileRange,
    DiffHigh,
    DiffLow,
    SumHigh,
    SumLow,
    IfdClosestToOne,
    Random,
};

const char* strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);

struct SelectionSpec {
    Strategy strategy = Strategy::RmiTopFraction;
    std::int64_t k_bins = 10;
    double tau = 0.1;
    double fraction = 0.25;
    double range_lo = 0.5;   // RmiPercentileRange, half-open [lo, hi)
    double range_hi = 0.75;
    std::uint64_t seed = 0;  // Random only

    void validate() const;
    nlohmann::json to_json() const;
    static SelectionSpec from_json(const nlohmann::json& j);
};

struct BinAssignment {
    // sample ids per bin, in ascending (ppl_q, sample_id) order.
    std::vector<std::vector<std::string>> bins;
    std::int64_t excluded_failed = 0;  // records skipped for non-ok status
};

// Sorts ok-status records by ppl_q ascending (ties by sample_id) and splits
// them into K contiguous bins whose sizes differ by at most one; the first
// N mod K bins take the extra sample.
BinAssignment stratify(const std::vector<ScoreRecord>& scores, std::int64_t k_bins);

// Ranks each bin by RMI ascending (ties by sample_id) and normalizes the
// rank by the bin size.
std::vector<RankRecord> rank_within_bins(const std::vector<ScoreRecord>& scores,
                                         const BinAssignment& bins);

// Joins the two models' rankings on sample id; the id sets must coincide.
std::vector<PairedRanks> pair_ranks(const std::vector<RankRecord>& strong,
                                    const std::vector<RankRecord>& weak);

struct SelectionInputs {
    const std::vector<RankRecord>* ranks = nullptr;
    const std::vector<PairedRanks>* paired = nullptr;
    const std::vector<ScoreRecord>* scores = nullptr;
};

struct SelectionResult {
    std::vector<std::string> ids;  // deterministic order per strategy
    std::int64_t universe = 0;     // size of the candidate pool
    double realized_fraction = 0.0;
    std::optional<std::vector<std::int64_t>> counts_per_bin;  // rank-based strategies

    nlohmann::json manifest(const SelectionSpec& spec,
                            const nlohmann::json& input_digests) const;
};

SelectionResult select(const SelectionSpec& spec, const SelectionInputs& inputs);

// ------------------------------------------------------------ files

void write_rank_records(const std::filesystem::path& path, const std::vector<RankRecord>& records);
std::vector<RankRecord> read_rank_records(const std::filesystem::path& path);
void write_paired_ranks(const std::filesystem::path& path, const std::vector<PairedRanks>& paired);
std::vector<PairedRanks> read_paired_ranks(const std::filesystem::path& path);

} // namespace rmisel
