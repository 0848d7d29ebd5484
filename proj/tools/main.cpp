// rmisel command line: exposes each pipeline stage and full runs on top of
// the C API. All artifacts go to files; stdout carries summaries only.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmisel/rmisel.h"

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CLI::ValidationError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw CLI::ValidationError("not valid JSON: " + path);
    return j;
}

int report_failure(rmisel_status status) {
    json err;
    err["error"] = rmisel_last_error();
    err["status"] = static_cast<int>(status);
    std::cerr << err.dump() << "\n";
    return 1;
}

// Runs one C API stage call; prints the summary on success and a
// machine-readable error on stderr otherwise.
int invoke(rmisel_status (*stage)(const char*, char**), const json& options) {
    char* summary = nullptr;
    rmisel_status status = stage(options.dump().c_str(), &summary);
    if (status != RMISEL_OK) return report_failure(status);
    if (summary) {
        std::cout << json::parse(summary).dump(2) << "\n";
        rmisel_string_free(summary);
    }
    return 0;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

json parse_named_paths(const std::vector<std::string>& entries, const char* flag) {
    json out = json::object();
    for (const auto& entry : entries) {
        auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size()) {
            throw CLI::ValidationError(std::string(flag) + " expects name=path");
        }
        out[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RMI scoring and selection pipeline for instruction-tuning corpora"};
    app.require_subcommand(1);

    // ---- score
    auto* score = app.add_subcommand("score", "Score a corpus with a backend");
    std::string score_corpus, score_backend, score_out, score_variant = "standard";
    std::string score_directions = "q,q-given-a";
    std::string score_cache, score_templates, score_length_filter = "joint";
    std::int64_t score_max_tokens = 2048;
    int score_workers = 0;
    score->add_option("--corpus", score_corpus, "Corpus JSONL file")->required();
    score->add_option("--backend", score_backend, "Backend descriptor JSON file")->required();
    score->add_option("--out", score_out, "Output score-records JSONL")->required();
    score->add_option("--variant", score_variant, "Template variant (default standard)");
    score->add_option("--directions", score_directions,
                      "Comma list of q,q-given-a,a,a-given-q (default q,q-given-a)");
    score->add_option("--cache", score_cache, "Score cache JSONL path");
    score->add_option("--templates", score_templates, "Template library JSONL file");
    score->add_option("--max-tokens", score_max_tokens, "Token-length filter (default 2048)");
    score->add_option("--length-filter", score_length_filter, "joint or separate");
    score->add_option("--workers", score_workers, "Concurrent scoring workers");

    // ---- rank
    auto* rank = app.add_subcommand("rank", "Stratify scores and rank RMI within bins");
    std::string rank_scores, rank_out;
    std::int64_t rank_k = 10;
    rank->add_option("--scores", rank_scores, "Score-records JSONL")->required();
    rank->add_option("--out", rank_out, "Output rank-records JSONL")->required();
    rank->add_option("--k", rank_k, "Number of ppl(q) bins (default 10)");

    // ---- select
    auto* select = app.add_subcommand("select", "Apply a selection strategy");
    std::string sel_strategy, sel_out_dir, sel_range;
    std::string sel_ranks, sel_scores, sel_paired, sel_strong_ranks, sel_weak_ranks;
    double sel_tau = 0.1, sel_fraction = 0.25;
    std::uint64_t sel_seed = 0;
    std::int64_t sel_k = 10;
    select->add_option("--strategy", sel_strategy,
                       "diff-high|diff-low|sum-high|sum-low|rmi-top-fraction|"
                       "rmi-global-top-fraction|rmi-percentile-range|ifd-closest-to-one|random")
        ->required();
    select->add_option("--out-dir", sel_out_dir, "Output directory")->required();
    select->add_option("--tau", sel_tau, "Disagreement threshold (default 0.1)");
    select->add_option("--fraction", sel_fraction, "Selection fraction (default 0.25)");
    select->add_option("--range", sel_range, "Percentile range LO:HI, e.g. 0.5:0.75");
    select->add_option("--seed", sel_seed, "Seed for random selection");
    select->add_option("--k", sel_k, "Bins recorded in the manifest (default 10)");
    select->add_option("--ranks", sel_ranks, "Rank-records JSONL (rank-based strategies)");
    select->add_option("--scores", sel_scores, "Score-records JSONL (score-based strategies)");
    select->add_option("--paired", sel_paired, "Paired-ranks JSONL (diff/sum strategies)");
    select->add_option("--strong-ranks", sel_strong_ranks, "Strong-model rank records to pair");
    select->add_option("--weak-ranks", sel_weak_ranks, "Weak-model rank records to pair");

    // ---- analyze
    auto* analyze = app.add_subcommand("analyze", "Correlations, overlaps and scatter data");
    std::string an_scores, an_weak, an_stability, an_out_dir;
    std::vector<std::string> an_variants, an_selections;
    std::int64_t an_k = 10;
    analyze->add_option("--scores", an_scores, "Primary score-records JSONL")->required();
    analyze->add_option("--out-dir", an_out_dir, "Output directory")->required();
    analyze->add_option("--weak-scores", an_weak, "Weak-model score records");
    analyze->add_option("--stability-scores", an_stability,
                        "Same-model re-scored records for the stability correlation");
    analyze->add_option("--variant-scores", an_variants,
                        "name=path of a variant score set (repeatable)");
    analyze->add_option("--selection", an_selections, "name=path of an id list (repeatable)");
    analyze->add_option("--k", an_k, "Bins for the per-bin RMI spread (default 10)");

    // ---- generate-defects
    auto* gen = app.add_subcommand("generate-defects", "Generate a labeled defect corpus");
    std::string gen_spec, gen_out;
    std::int64_t gen_n = 0;
    std::int64_t gen_seed = -1;
    gen->add_option("--n", gen_n, "Number of samples")->required();
    gen->add_option("--out", gen_out, "Output corpus JSONL")->required();
    gen->add_option("--spec", gen_spec, "Defect spec JSON file (default: equal rates)");
    gen->add_option("--seed", gen_seed, "Generation seed (overrides the spec)");

    // ---- run
    auto* run_cmd = app.add_subcommand("run", "Execute a full pipeline run");
    std::string run_config;
    run_cmd->add_option("--config", run_config, "Run config JSON file")->required();

    // ---- compact-cache
    auto* compact = app.add_subcommand("compact-cache", "Rewrite a cache keeping winners only");
    std::string compact_cache;
    compact->add_option("--cache", compact_cache, "Cache JSONL path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    try {
        if (score->parsed()) {
            json options;
            options["corpus"] = score_corpus;
            options["backend"] = read_json_file(score_backend);
            options["out"] = score_out;
            options["variant"] = score_variant;
            options["directions"] = split_csv(score_directions);
            options["max_tokens"] = score_max_tokens;
            options["length_filter"] = score_length_filter;
            if (!score_cache.empty()) options["cache"] = score_cache;
            if (!score_templates.empty()) options["templates"] = score_templates;
            if (score_workers > 0) options["workers"] = score_workers;
            return invoke(rmisel_score, options);
        }
        if (rank->parsed()) {
            json options;
            options["scores"] = rank_scores;
            options["out"] = rank_out;
            options["k"] = rank_k;
            return invoke(rmisel_rank, options);
        }
        if (select->parsed()) {
            json options;
            options["strategy"] = sel_strategy;
            options["out_dir"] = sel_out_dir;
            options["k"] = sel_k;
            options["tau"] = sel_tau;
            options["fraction"] = sel_fraction;
            options["seed"] = sel_seed;
            if (!sel_range.empty()) {
                auto colon = sel_range.find(':');
                if (colon == std::string::npos) throw CLI::ValidationError("--range expects LO:HI");
                options["range"] = {std::stod(sel_range.substr(0, colon)),
                                    std::stod(sel_range.substr(colon + 1))};
            }
            if (!sel_ranks.empty()) options["ranks"] = sel_ranks;
            if (!sel_scores.empty()) options["scores"] = sel_scores;
            if (!sel_paired.empty()) options["paired"] = sel_paired;
            if (!sel_strong_ranks.empty()) options["strong_ranks"] = sel_strong_ranks;
            if (!sel_weak_ranks.empty()) options["weak_ranks"] = sel_weak_ranks;
            return invoke(rmisel_select, options);
        }
        if (analyze->parsed()) {
            json options;
            options["scores"] = an_scores;
            options["out_dir"] = an_out_dir;
            options["k"] = an_k;
            if (!an_weak.empty()) options["weak_scores"] = an_weak;
            if (!an_stability.empty()) options["stability_scores"] = an_stability;
            if (!an_variants.empty()) {
                options["variant_scores"] = parse_named_paths(an_variants, "--variant-scores");
            }
            if (!an_selections.empty()) {
                options["selections"] = parse_named_paths(an_selections, "--selection");
            }
            return invoke(rmisel_analyze, options);
        }
        if (gen->parsed()) {
            json options;
            options["n"] = gen_n;
            options["out"] = gen_out;
            if (!gen_spec.empty()) options["spec_file"] = gen_spec;
            if (gen_seed >= 0) options["seed"] = gen_seed;
            return invoke(rmisel_generate_defects, options);
        }
        if (run_cmd->parsed()) {
            char* summary = nullptr;
            rmisel_status status = rmisel_run(run_config.c_str(), &summary);
            if (status != RMISEL_OK) return report_failure(status);
            if (summary) {
                std::cout << json::parse(summary).dump(2) << "\n";
                rmisel_string_free(summary);
            }
            return 0;
        }
        if (compact->parsed()) {
            char* summary = nullptr;
            rmisel_status status = rmisel_compact_cache(compact_cache.c_str(), &summary);
            if (status != RMISEL_OK) return report_failure(status);
            if (summary) {
                std::cout << json::parse(summary).dump(2) << "\n";
                rmisel_string_free(summary);
            }
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
