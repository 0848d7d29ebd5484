#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ranking.hpp"
#include "scoring.hpp"

namespace rmisel {

// Correlations are undefined for degenerate inputs (length < 2 or zero
// variance); nullopt encodes that, and reports say so explicitly.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rank correlation with average ranks for ties.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

std::vector<double> average_ranks(const std::vector<double>& values);

// |A of B| / min(|A|, |B|). The paper-style comparison uses equal-size
// sets, where every overlap convention coincides.
double overlap(const std::set<std::string>& a, const std::set<std::string>& b);

struct BinSpread {
    std::int64_t size = 0;
    std::optional<double> variance;  // unbiased; undefined for size < 2
    double min = 0.0;
    double max = 0.0;
};

// Per-bin RMI sample variance and range under a ppl_q stratification;
// feeds the heteroscedasticity scatter.
std::vector<BinSpread> heteroscedasticity_summary(const std::vector<ScoreRecord>& scores,
                                                  std::int64_t k_bins);

// Spearman of RMI between the standard variant and every other variant
// (plus IFD vs standard IFD where both sides carry it), over the common
// sample-id set, which must be identical across variants.
std::map<std::string, std::optional<double>> template_sensitivity(
    const std::map<std::string, std::vector<ScoreRecord>>& score_sets);

struct AnalysisReport {
    std::optional<double> spearman_rmi_vs_neg_log_ifd;
    std::optional<double> spearman_strong_vs_weak;
    std::optional<double> pearson_stability;
    std::map<std::string, double> overlap_matrix;        // "name-a|name-b" -> fraction
    std::map<std::string, std::optional<double>> template_correlations;
    std::vector<BinSpread> per_bin_rmi_spread;
    std::map<std::string, std::string> input_digests;
    std::int64_t scored_samples = 0;
    std::int64_t failed_samples = 0;

    nlohmann::json to_json() const;
};

struct AnalysisInputs {
    const std::vector<ScoreRecord>* strong_scores = nullptr;
    const std::vector<ScoreRecord>* weak_scores = nullptr;      // optional
    const std::vector<ScoreRecord>* stability_scores = nullptr; // same model re-scored
    std::map<std::string, std::vector<ScoreRecord>> variant_scores;
    std::map<std::string, std::set<std::string>> selections;    // name -> id set
    std::int64_t k_bins = 10;
    std::map<std::string, std::string> input_digests;
};

AnalysisReport analyze(const AnalysisInputs& inputs);

// Writes the JSON report plus plot-ready CSV scatter files into out_dir.
// Returns the list of files written.
std::vector<std::filesystem::path> emit_report(const AnalysisReport& report,
                                               const AnalysisInputs& inputs,
                                               const std::filesystem::path& out_dir);

} // namespace rmisel
