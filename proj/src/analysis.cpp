#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) j++;
        // Tied values share the mean of the ranks they occupy (1-based).
        double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; k++) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail(errc::precondition, "pearson inputs differ in length");
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; i++) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; i++) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail(errc::precondition, "spearman inputs differ in length");
    if (x.size() < 2) return std::nullopt;
    return pearson(average_ranks(x), average_ranks(y));
}

double overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() || b.empty()) fail(errc::precondition, "overlap of an empty set is undefined");
    std::size_t inter = 0;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& big = a.size() <= b.size() ? b : a;
    for (const auto& id : small) inter += big.count(id);
    return static_cast<double>(inter) / static_cast<double>(std::min(a.size(), b.size()));
}

std::vector<BinSpread> heteroscedasticity_summary(const std::vector<ScoreRecord>& scores,
                                                  std::int64_t k_bins) {
    BinAssignment bins = stratify(scores, k_bins);
    std::unordered_map<std::string_view, double> rmi_of;
    for (const auto& r : scores) {
        if (r.rmi) rmi_of.emplace(r.sample_id, *r.rmi);
    }
    std::vector<BinSpread> out;
    out.reserve(bins.bins.size());
    for (const auto& bin : bins.bins) {
        BinSpread s;
        s.size = static_cast<std::int64_t>(bin.size());
        double mean = 0.0;
        for (const auto& id : bin) mean += rmi_of.at(id);
        mean /= static_cast<double>(bin.size());
        double ss = 0.0;
        s.min = rmi_of.at(bin.front());
        s.max = s.min;
        for (const auto& id : bin) {
            double v = rmi_of.at(id);
            ss += (v - mean) * (v - mean);
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
        }
        if (bin.size() >= 2) s.variance = ss / static_cast<double>(bin.size() - 1);
        out.push_back(s);
    }
    return out;
}

namespace {

// Values for the shared id set, in sorted-id order so pairings line up.
std::vector<double> aligned_values(const std::vector<ScoreRecord>& records,
                                   const std::set<std::string>& ids,
                                   bool use_ifd) {
    std::map<std::string_view, double> by_id;
    for (const auto& r : records) {
        const auto& v = use_ifd ? r.ifd : r.rmi;
        if (v) by_id.emplace(r.sample_id, *v);
    }
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) fail(errc::precondition, "sample missing from a score set: " + id);
        out.push_back(it->second);
    }
    return out;
}

std::set<std::string> ids_with_metric(const std::vector<ScoreRecord>& records, bool use_ifd) {
    std::set<std::string> out;
    for (const auto& r : records) {
        if (use_ifd ? r.ifd.has_value() : r.rmi.has_value()) out.insert(r.sample_id);
    }
    return out;
}

} // namespace

std::map<std::string, std::optional<double>> template_sensitivity(
    const std::map<std::string, std::vector<ScoreRecord>>& score_sets) {
    if (score_sets.size() < 2) fail(errc::precondition, "need at least two variant score sets");
    auto std_it = score_sets.find("standard");
    if (std_it == score_sets.end()) fail(errc::precondition, "no standard-variant score set supplied");

    std::map<std::string, std::optional<double>> out;
    std::set<std::string> std_rmi_ids = ids_with_metric(std_it->second, false);
    std::set<std::string> std_ifd_ids = ids_with_metric(std_it->second, true);

    for (const auto& [name, records] : score_sets) {
        if (name == "standard") continue;
        std::set<std::string> ids = ids_with_metric(records, false);
        if (!ids.empty()) {
            if (ids != std_rmi_ids) {
                std::string example;
                for (const auto& id : std_rmi_ids) {
                    if (!ids.count(id)) {
                        example = id;
                        break;
                    }
                }
                if (example.empty()) {
                    for (const auto& id : ids) {
                        if (!std_rmi_ids.count(id)) {
                            example = id;
                            break;
                        }
                    }
                }
                fail(errc::precondition,
                     "variant " + name + " covers a different id set (e.g. " + example + ")");
            }
            out["rmi: standard vs " + name] =
                spearman(aligned_values(std_it->second, std_rmi_ids, false),
                         aligned_values(records, std_rmi_ids, false));
        }
        std::set<std::string> ifd_ids = ids_with_metric(records, true);
        if (!ifd_ids.empty() && !std_ifd_ids.empty()) {
            if (ifd_ids != std_ifd_ids) {
                fail(errc::precondition, "variant " + name + " IFD covers a different id set");
            }
            out["ifd: standard vs " + name] =
                spearman(aligned_values(std_it->second, std_ifd_ids, true),
                         aligned_values(records, std_ifd_ids, true));
        }
    }
    return out;
}

// ------------------------------------------------------------ report

namespace {

json opt_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

} // namespace

json AnalysisReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["spearman_rmi_vs_neg_log_ifd"] = opt_to_json(spearman_rmi_vs_neg_log_ifd);
    j["spearman_strong_vs_weak"] = opt_to_json(spearman_strong_vs_weak);
    j["pearson_stability"] = opt_to_json(pearson_stability);
    json om = json::object();
    for (const auto& [k, v] : overlap_matrix) om[k] = v;
    j["overlap_matrix"] = om;
    json tc = json::object();
    for (const auto& [k, v] : template_correlations) tc[k] = opt_to_json(v);
    j["template_correlations"] = tc;
    json spread = json::array();
    for (const auto& s : per_bin_rmi_spread) {
        spread.push_back({{"size", s.size},
                          {"variance", opt_to_json(s.variance)},
                          {"min", s.min},
                          {"max", s.max}});
    }
    j["per_bin_rmi_spread"] = spread;
    json digests = json::object();
    for (const auto& [k, v] : input_digests) digests[k] = v;
    j["input_digests"] = digests;
    j["scored_samples"] = scored_samples;
    j["failed_samples"] = failed_samples;
    return j;
}

AnalysisReport analyze(const AnalysisInputs& inputs) {
    if (!inputs.strong_scores) fail(errc::precondition, "analysis needs a primary score set");
    const auto& strong = *inputs.strong_scores;

    AnalysisReport report;
    report.input_digests = inputs.input_digests;
    for (const auto& r : strong) {
        if (r.status == ScoreStatus::Failed) report.failed_samples++;
        else report.scored_samples++;
    }

    // RMI vs -log(IFD) on samples carrying both metrics.
    {
        std::vector<double> rmi_vals, neg_log_ifd;
        for (const auto& r : strong) {
            if (r.rmi && r.ifd && *r.ifd > 0) {
                rmi_vals.push_back(*r.rmi);
                neg_log_ifd.push_back(-std::log(*r.ifd));
            }
        }
        if (rmi_vals.size() >= 2) {
            report.spearman_rmi_vs_neg_log_ifd = spearman(rmi_vals, neg_log_ifd);
        }
    }

    if (inputs.weak_scores) {
        std::set<std::string> common = ids_with_metric(strong, false);
        std::set<std::string> weak_ids = ids_with_metric(*inputs.weak_scores, false);
        std::set<std::string> both;
        for (const auto& id : common) {
            if (weak_ids.count(id)) both.insert(id);
        }
        if (both.size() >= 2) {
            report.spearman_strong_vs_weak = spearman(aligned_values(strong, both, false),
                                                      aligned_values(*inputs.weak_scores, both, false));
        }
    }

    if (inputs.stability_scores) {
        std::set<std::string> a = ids_with_metric(strong, false);
        std::set<std::string> b = ids_with_metric(*inputs.stability_scores, false);
        std::set<std::string> both;
        for (const auto& id : a) {
            if (b.count(id)) both.insert(id);
        }
        if (both.size() >= 2) {
            report.pearson_stability = pearson(aligned_values(strong, both, false),
                                               aligned_values(*inputs.stability_scores, both, false));
        }
    }

    for (auto it_a = inputs.selections.begin(); it_a != inputs.selections.end(); ++it_a) {
        for (auto it_b = std::next(it_a); it_b != inputs.selections.end(); ++it_b) {
            if (it_a->second.empty() || it_b->second.empty()) continue;
            report.overlap_matrix[it_a->first + "|" + it_b->first] =
                overlap(it_a->second, it_b->second);
        }
    }

    if (!inputs.variant_scores.empty()) {
        std::map<std::string, std::vector<ScoreRecord>> sets = inputs.variant_scores;
        if (!sets.count("standard")) sets.emplace("standard", strong);
        if (sets.size() >= 2) report.template_correlations = template_sensitivity(sets);
    }

    std::int64_t rankable = 0;
    for (const auto& r : strong) {
        if (r.status == ScoreStatus::Ok && r.ppl_q && r.rmi) rankable++;
    }
    if (rankable >= inputs.k_bins && inputs.k_bins >= 1) {
        report.per_bin_rmi_spread = heteroscedasticity_summary(strong, inputs.k_bins);
    }
    return report;
}

std::vector<std::filesystem::path> emit_report(const AnalysisReport& report,
                                               const AnalysisInputs& inputs,
                                               const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::vector<std::filesystem::path> written;

    auto report_path = out_dir / "analysis_report.json";
    write_file(report_path, report.to_json().dump(2) + "\n");
    written.push_back(report_path);

    const auto& strong = *inputs.strong_scores;

    {
        std::string csv = "sample_id,rmi,neg_log_ifd\n";
        std::size_t rows = 0;
        for (const auto& r : strong) {
            if (r.rmi && r.ifd && *r.ifd > 0) {
                csv += r.sample_id + "," + double_to_string(*r.rmi) + "," +
                       double_to_string(-std::log(*r.ifd)) + "\n";
                rows++;
            }
        }
        if (rows > 0) {
            auto p = out_dir / "scatter_rmi_vs_neg_log_ifd.csv";
            write_file(p, csv);
            written.push_back(p);
        }
    }
    {
        std::string csv = "sample_id,log_ppl_q,rmi\n";
        std::size_t rows = 0;
        for (const auto& r : strong) {
            if (r.rmi && r.ppl_q) {
                csv += r.sample_id + "," + double_to_string(std::log(*r.ppl_q)) + "," +
                       double_to_string(*r.rmi) + "\n";
                rows++;
            }
        }
        if (rows > 0) {
            auto p = out_dir / "scatter_rmi_vs_log_ppl_q.csv";
            write_file(p, csv);
            written.push_back(p);
        }
    }
    for (const auto& [name, records] : inputs.variant_scores) {
        if (name == "standard") continue;
        std::map<std::string_view, double> variant_rmi;
        for (const auto& r : records) {
            if (r.rmi) variant_rmi.emplace(r.sample_id, *r.rmi);
        }
        std::string csv = "sample_id,standard_rmi," + name + "_rmi\n";
        std::size_t rows = 0;
        for (const auto& r : strong) {
            auto it = variant_rmi.find(r.sample_id);
            if (r.rmi && it != variant_rmi.end()) {
                csv += r.sample_id + "," + double_to_string(*r.rmi) + "," +
                       double_to_string(it->second) + "\n";
                rows++;
            }
        }
        if (rows > 0) {
            auto p = out_dir / ("scatter_standard_vs_" + name + ".csv");
            write_file(p, csv);
            written.push_back(p);
        }
    }
    return written;
}

} // namespace rmisel
