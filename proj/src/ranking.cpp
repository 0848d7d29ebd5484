#include "ranking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::RmiTopFraction: return "rmi-top-fraction";
        case Strategy::RmiGlobalTopFraction: return "rmi-global-top-fraction";
        case Strategy::RmiPercentileRange: return "rmi-percentile-range";
        case Strategy::DiffHigh: return "diff-high";
        case Strategy::DiffLow: return "diff-low";
        case Strategy::SumHigh: return "sum-high";
        case Strategy::SumLow: return "sum-low";
        case Strategy::IfdClosestToOne: return "ifd-closest-to-one";
        case Strategy::Random: return "random";
    }
    return "rmi-top-fraction";
}

Strategy strategy_from_name(std::string_view name) {
    if (name == "rmi-top-fraction") return Strategy::RmiTopFraction;
    if (name == "rmi-global-top-fraction") return Strategy::RmiGlobalTopFraction;
    if (name == "rmi-percentile-range") return Strategy::RmiPercentileRange;
    if (name == "diff-high") return Strategy::DiffHigh;
    if (name == "diff-low") return Strategy::DiffLow;
    if (name == "sum-high") return Strategy::SumHigh;
    if (name == "sum-low") return Strategy::SumLow;
    if (name == "ifd-closest-to-one") return Strategy::IfdClosestToOne;
    if (name == "random") return Strategy::Random;
    fail(errc::config, "unknown selection strategy: " + std::string(name));
}

void SelectionSpec::validate() const {
    if (k_bins < 1) fail(errc::config, "K must be >= 1");
    if (!(fraction > 0.0 && fraction <= 1.0)) fail(errc::config, "fraction must be in (0, 1]");
    if (!(range_lo < range_hi)) fail(errc::config, "percentile range endpoints must be ordered");
    if (range_lo < 0.0 || range_hi > 1.0 + 1e-12) fail(errc::config, "percentile range must lie in [0, 1]");
    if (!std::isfinite(tau)) fail(errc::config, "tau must be finite");
}

json SelectionSpec::to_json() const {
    json j;
    j["strategy"] = strategy_name(strategy);
    j["k"] = k_bins;
    switch (strategy) {
        case Strategy::DiffHigh:
        case Strategy::DiffLow:
            j["tau"] = tau;
            break;
        case Strategy::RmiPercentileRange:
            j["range"] = {range_lo, range_hi};
            break;
        case Strategy::Random:
            j["fraction"] = fraction;
            j["seed"] = seed;
            break;
        default:
            j["fraction"] = fraction;
            break;
    }
    return j;
}

SelectionSpec SelectionSpec::from_json(const json& j) {
    SelectionSpec spec;
    spec.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    if (j.contains("k")) spec.k_bins = j["k"].get<std::int64_t>();
    if (j.contains("tau")) spec.tau = j["tau"].get<double>();
    if (j.contains("fraction")) spec.fraction = j["fraction"].get<double>();
    if (j.contains("range")) {
        spec.range_lo = j["range"].at(0).get<double>();
        spec.range_hi = j["range"].at(1).get<double>();
    }
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    spec.validate();
    return spec;
}

// ------------------------------------------------------------ stratify

BinAssignment stratify(const std::vector<ScoreRecord>& scores, std::int64_t k_bins) {
    if (k_bins < 1) fail(errc::config, "K must be >= 1");

    struct Item {
        double ppl_q;
        const std::string* id;
    };
    std::vector<Item> items;
    items.reserve(scores.size());
    BinAssignment out;
    for (const auto& r : scores) {
        if (r.status != ScoreStatus::Ok || !r.ppl_q || !r.rmi) {
            out.excluded_failed++;
            continue;
        }
        items.push_back({*r.ppl_q, &r.sample_id});
    }
    const auto n = static_cast<std::int64_t>(items.size());
    if (k_bins > n) {
        fail(errc::config, "K = " + std::to_string(k_bins) + " exceeds the " +
                               std::to_string(n) + " rankable samples");
    }

    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.ppl_q != b.ppl_q) return a.ppl_q < b.ppl_q;
        return *a.id < *b.id;
    });

    // Sizes differ by at most one; the first n % K bins take the extra.
    const std::int64_t base = n / k_bins;
    const std::int64_t extra = n % k_bins;
    out.bins.resize(static_cast<std::size_t>(k_bins));
    std::int64_t pos = 0;
    for (std::int64_t k = 0; k < k_bins; k++) {
        std::int64_t size = base + (k < extra ? 1 : 0);
        auto& bin = out.bins[static_cast<std::size_t>(k)];
        bin.reserve(static_cast<std::size_t>(size));
        for (std::int64_t i = 0; i < size; i++) bin.push_back(*items[static_cast<std::size_t>(pos++)].id);
    }
    return out;
}

std::vector<RankRecord> rank_within_bins(const std::vector<ScoreRecord>& scores,
                                         const BinAssignment& bins) {
    std::unordered_map<std::string_view, const ScoreRecord*> by_id;
    by_id.reserve(scores.size());
    for (const auto& r : scores) by_id.emplace(r.sample_id, &r);

    std::vector<RankRecord> out;
    for (std::size_t k = 0; k < bins.bins.size(); k++) {
        const auto& bin = bins.bins[k];
        struct Item {
            double rmi;
            const std::string* id;
        };
        std::vector<Item> items;
        items.reserve(bin.size());
        for (const auto& id : bin) {
            auto it = by_id.find(id);
            if (it == by_id.end() || !it->second->rmi) {
                fail(errc::precondition, "bin references unscored sample: " + id);
            }
            items.push_back({*it->second->rmi, &id});
        }
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
            if (a.rmi != b.rmi) return a.rmi < b.rmi;
            return *a.id < *b.id;
        });
        const auto size = static_cast<std::int64_t>(items.size());
        for (std::int64_t i = 0; i < size; i++) {
            const auto& item = items[static_cast<std::size_t>(i)];
            RankRecord rec;
            rec.sample_id = *item.id;
            rec.model_id = by_id.at(*item.id)->model_id;
            rec.bin_index = static_cast<std::int64_t>(k);
            rec.within_bin_rank = i + 1;
            rec.bin_size = size;
            rec.normalized_rank = static_cast<double>(i + 1) / static_cast<double>(size);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::vector<PairedRanks> pair_ranks(const std::vector<RankRecord>& strong,
                                    const std::vector<RankRecord>& weak) {
    std::map<std::string, const RankRecord*> weak_by_id;
    for (const auto& r : weak) weak_by_id.emplace(r.sample_id, &r);

    std::vector<std::string> missing_in_weak, missing_in_strong;
    std::set<std::string> strong_ids;
    for (const auto& r : strong) strong_ids.insert(r.sample_id);
    for (const auto& r : strong) {
        if (!weak_by_id.count(r.sample_id)) missing_in_weak.push_back(r.sample_id);
    }
    for (const auto& r : weak) {
        if (!strong_ids.count(r.sample_id)) missing_in_strong.push_back(r.sample_id);
    }
    if (!missing_in_weak.empty() || !missing_in_strong.empty()) {
        std::string msg = "rank id sets differ;";
        auto list = [&](const char* label, const std::vector<std::string>& ids) {
            if (ids.empty()) return;
            msg += std::string(" missing in ") + label + ":";
            for (std::size_t i = 0; i < ids.size() && i < 10; i++) msg += " " + ids[i];
            if (ids.size() > 10) msg += " (+" + std::to_string(ids.size() - 10) + " more)";
        };
        list("weak", missing_in_weak);
        list("strong", missing_in_strong);
        fail(errc::precondition, msg);
    }

    std::vector<PairedRanks> out;
    out.reserve(strong.size());
    for (const auto& r : strong) {
        const RankRecord* w = weak_by_id.at(r.sample_id);
        PairedRanks p;
        p.sample_id = r.sample_id;
        p.r_strong = r.normalized_rank;
        p.r_weak = w->normalized_rank;
        p.diff = p.r_strong - p.r_weak;
        p.sum = p.r_strong + p.r_weak;
        out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end(),
              [](const PairedRanks& a, const PairedRanks& b) { return a.sample_id < b.sample_id; });
    return out;
}

// ------------------------------------------------------------ select

namespace {

std::int64_t fraction_count(double fraction, std::size_t n) {
    return std::llround(fraction * static_cast<double>(n));
}

const std::vector<RankRecord>& need_ranks(const SelectionInputs& in, Strategy s) {
    if (!in.ranks) fail(errc::config, std::string(strategy_name(s)) + " needs rank records");
    return *in.ranks;
}

const std::vector<PairedRanks>& need_paired(const SelectionInputs& in, Strategy s) {
    if (!in.paired) fail(errc::config, std::string(strategy_name(s)) + " needs paired ranks");
    return *in.paired;
}

const std::vector<ScoreRecord>& need_scores(const SelectionInputs& in, Strategy s) {
    if (!in.scores) fail(errc::config, std::string(strategy_name(s)) + " needs score records");
    return *in.scores;
}

} // namespace

SelectionResult select(const SelectionSpec& spec, const SelectionInputs& inputs) {
    spec.validate();
    SelectionResult result;

    switch (spec.strategy) {
        case Strategy::DiffHigh:
        case Strategy::DiffLow: {
            const auto& paired = need_paired(inputs, spec.strategy);
            result.universe = static_cast<std::int64_t>(paired.size());
            std::vector<const PairedRanks*> hits;
            for (const auto& p : paired) {
                if (spec.strategy == Strategy::DiffHigh ? p.diff > spec.tau : p.diff < -spec.tau) {
                    hits.push_back(&p);
                }
            }
            const bool descending = spec.strategy == Strategy::DiffHigh;
            std::sort(hits.begin(), hits.end(), [&](const PairedRanks* a, const PairedRanks* b) {
                if (a->diff != b->diff) return descending ? a->diff > b->diff : a->diff < b->diff;
                return a->sample_id < b->sample_id;
            });
            for (const auto* p : hits) result.ids.push_back(p->sample_id);
            break;
        }
        case Strategy::SumHigh:
        case Strategy::SumLow: {
            const auto& paired = need_paired(inputs, spec.strategy);
            result.universe = static_cast<std::int64_t>(paired.size());
            std::vector<const PairedRanks*> all;
            for (const auto& p : paired) all.push_back(&p);
            const bool descending = spec.strategy == Strategy::SumHigh;
            std::sort(all.begin(), all.end(), [&](const PairedRanks* a, const PairedRanks* b) {
                if (a->sum != b->sum) return descending ? a->sum > b->sum : a->sum < b->sum;
                return a->sample_id < b->sample_id;
            });
            auto take = std::min<std::int64_t>(fraction_count(spec.fraction, all.size()),
                                               static_cast<std::int64_t>(all.size()));
            for (std::int64_t i = 0; i < take; i++) result.ids.push_back(all[static_cast<std::size_t>(i)]->sample_id);
            break;
        }
        case Strategy::RmiTopFraction: {
            const auto& ranks = need_ranks(inputs, spec.strategy);
            result.universe = static_cast<std::int64_t>(ranks.size());
            std::vector<const RankRecord*> all;
            for (const auto& r : ranks) all.push_back(&r);
            std::sort(all.begin(), all.end(), [](const RankRecord* a, const RankRecord* b) {
                if (a->normalized_rank != b->normalized_rank) return a->normalized_rank > b->normalized_rank;
                return a->sample_id < b->sample_id;
            });
            auto take = std::min<std::int64_t>(fraction_count(spec.fraction, all.size()),
                                               static_cast<std::int64_t>(all.size()));
            for (std::int64_t i = 0; i < take; i++) result.ids.push_back(all[static_cast<std::size_t>(i)]->sample_id);
            break;
        }
        case Strategy::RmiGlobalTopFraction: {
            const auto& scores = need_scores(inputs, spec.strategy);
            std::vector<const ScoreRecord*> ok;
            for (const auto& r : scores) {
                if (r.status == ScoreStatus::Ok && r.rmi) ok.push_back(&r);
            }
            result.universe = static_cast<std::int64_t>(ok.size());
            std::sort(ok.begin(), ok.end(), [](const ScoreRecord* a, const ScoreRecord* b) {
                if (*a->rmi != *b->rmi) return *a->rmi > *b->rmi;
                return a->sample_id < b->sample_id;
            });
            auto take = std::min<std::int64_t>(fraction_count(spec.fraction, ok.size()),
                                               static_cast<std::int64_t>(ok.size()));
            for (std::int64_t i = 0; i < take; i++) result.ids.push_back(ok[static_cast<std::size_t>(i)]->sample_id);
            break;
        }
        case Strategy::RmiPercentileRange: {
            const auto& ranks = need_ranks(inputs, spec.strategy);
            result.universe = static_cast<std::int64_t>(ranks.size());
            std::vector<const RankRecord*> hits;
            for (const auto& r : ranks) {
                if (r.normalized_rank >= spec.range_lo && r.normalized_rank < spec.range_hi) {
                    hits.push_back(&r);
                }
            }
            std::sort(hits.begin(), hits.end(), [](const RankRecord* a, const RankRecord* b) {
                if (a->normalized_rank != b->normalized_rank) return a->normalized_rank < b->normalized_rank;
                return a->sample_id < b->sample_id;
            });
            for (const auto* r : hits) result.ids.push_back(r->sample_id);
            break;
        }
        case Strategy::IfdClosestToOne: {
            const auto& scores = need_scores(inputs, spec.strategy);
            std::vector<const ScoreRecord*> ok;
            for (const auto& r : scores) {
                if (r.status == ScoreStatus::Ok && r.ifd) ok.push_back(&r);
            }
            if (ok.empty()) fail(errc::config, "ifd-closest-to-one: no records carry an IFD score");
            result.universe = static_cast<std::int64_t>(ok.size());
            std::sort(ok.begin(), ok.end(), [](const ScoreRecord* a, const ScoreRecord* b) {
                double da = std::abs(*a->ifd - 1.0), db = std::abs(*b->ifd - 1.0);
                if (da != db) return da < db;
                // Prefer scores at or below 1 (hard-but-followable) on ties.
                bool a_low = *a->ifd <= 1.0, b_low = *b->ifd <= 1.0;
                if (a_low != b_low) return a_low;
                return a->sample_id < b->sample_id;
            });
            auto take = std::min<std::int64_t>(fraction_count(spec.fraction, ok.size()),
                                               static_cast<std::int64_t>(ok.size()));
            for (std::int64_t i = 0; i < take; i++) result.ids.push_back(ok[static_cast<std::size_t>(i)]->sample_id);
            break;
        }
        case Strategy::Random: {
            // Universe: whichever input table is present, as sorted unique ids.
            std::set<std::string> ids;
            if (inputs.ranks) for (const auto& r : *inputs.ranks) ids.insert(r.sample_id);
            if (inputs.paired) for (const auto& p : *inputs.paired) ids.insert(p.sample_id);
            if (inputs.scores) {
                for (const auto& r : *inputs.scores) {
                    if (r.status == ScoreStatus::Ok) ids.insert(r.sample_id);
                }
            }
            if (ids.empty()) fail(errc::config, "random selection has no input ids");
            std::vector<std::string> pool(ids.begin(), ids.end());
            result.universe = static_cast<std::int64_t>(pool.size());
            auto take = std::min<std::int64_t>(fraction_count(spec.fraction, pool.size()),
                                               static_cast<std::int64_t>(pool.size()));
            DetRng rng(spec.seed);
            for (std::size_t idx : rng.sample_indices(pool.size(), static_cast<std::size_t>(take))) {
                result.ids.push_back(pool[idx]);
            }
            break;
        }
    }

    result.realized_fraction =
        result.universe > 0
            ? static_cast<double>(result.ids.size()) / static_cast<double>(result.universe)
            : 0.0;

    // Per-bin counts when a stratification is available.
    if (inputs.ranks) {
        std::unordered_map<std::string_view, std::int64_t> bin_of;
        std::int64_t max_bin = -1;
        for (const auto& r : *inputs.ranks) {
            bin_of.emplace(r.sample_id, r.bin_index);
            max_bin = std::max(max_bin, r.bin_index);
        }
        std::vector<std::int64_t> counts(static_cast<std::size_t>(max_bin + 1), 0);
        bool all_known = true;
        for (const auto& id : result.ids) {
            auto it = bin_of.find(id);
            if (it == bin_of.end()) {
                all_known = false;
                break;
            }
            counts[static_cast<std::size_t>(it->second)]++;
        }
        if (all_known) result.counts_per_bin = std::move(counts);
    }
    return result;
}

json SelectionResult::manifest(const SelectionSpec& spec, const json& input_digests) const {
    json j;
    j["spec"] = spec.to_json();
    j["input_digests"] = input_digests;
    j["selected"] = static_cast<std::int64_t>(ids.size());
    j["universe"] = universe;
    j["realized_fraction"] = realized_fraction;
    if (counts_per_bin) j["counts_per_bin"] = *counts_per_bin;
    return j;
}

// ------------------------------------------------------------ files

void write_rank_records(const std::filesystem::path& path, const std::vector<RankRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        json j;
        j["sample_id"] = r.sample_id;
        j["model_id"] = r.model_id;
        j["bin_index"] = r.bin_index;
        j["within_bin_rank"] = r.within_bin_rank;
        j["bin_size"] = r.bin_size;
        j["normalized_rank"] = r.normalized_rank;
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

std::vector<RankRecord> read_rank_records(const std::filesystem::path& path) {
    std::vector<RankRecord> out;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        RankRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        r.bin_index = j.at("bin_index").get<std::int64_t>();
        r.within_bin_rank = j.at("within_bin_rank").get<std::int64_t>();
        r.bin_size = j.at("bin_size").get<std::int64_t>();
        r.normalized_rank = j.at("normalized_rank").get<double>();
        out.push_back(std::move(r));
    }
    return out;
}

void write_paired_ranks(const std::filesystem::path& path, const std::vector<PairedRanks>& paired) {
    std::string out;
    for (const auto& p : paired) {
        json j;
        j["sample_id"] = p.sample_id;
        j["r_strong"] = p.r_strong;
        j["r_weak"] = p.r_weak;
        j["diff"] = p.diff;
        j["sum"] = p.sum;
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

std::vector<PairedRanks> read_paired_ranks(const std::filesystem::path& path) {
    std::vector<PairedRanks> out;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        PairedRanks p;
        p.sample_id = j.at("sample_id").get<std::string>();
        p.r_strong = j.at("r_strong").get<double>();
        p.r_weak = j.at("r_weak").get<double>();
        p.diff = j.at("diff").get<double>();
        p.sum = j.at("sum").get<double>();
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace rmisel
