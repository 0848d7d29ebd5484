#include "rmisel/rmisel.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "analysis.hpp"
#include "corpus.hpp"
#include "defectlab.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "ranking.hpp"
#include "score_cache.hpp"
#include "scoring.hpp"
#include "util.hpp"

using nlohmann::json;
using namespace rmisel;

namespace {

thread_local std::string g_last_error;

rmisel_status status_of(errc code) {
    switch (code) {
        case errc::io: return RMISEL_ERR_IO;
        case errc::parse: return RMISEL_ERR_PARSE;
        case errc::config: return RMISEL_ERR_CONFIG;
        case errc::precondition: return RMISEL_ERR_PRECONDITION;
        case errc::backend: return RMISEL_ERR_BACKEND;
        case errc::protocol: return RMISEL_ERR_PROTOCOL;
        case errc::internal: return RMISEL_ERR_INTERNAL;
    }
    return RMISEL_ERR_INTERNAL;
}

template <typename Fn>
rmisel_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return RMISEL_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const json::exception& e) {
        g_last_error = e.what();
        return RMISEL_ERR_PARSE;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RMISEL_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit_summary(char** summary_out, const json& j) {
    if (summary_out) *summary_out = dup_string(j.dump());
}

json parse_options(const char* options_json) {
    if (!options_json) fail(errc::config, "options JSON is null");
    json j = json::parse(options_json, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(errc::parse, "options are not a JSON object");
    return j;
}

TemplateLibrary templates_from(const json& options) {
    if (options.contains("templates")) {
        return TemplateLibrary::from_file(options["templates"].get<std::string>());
    }
    return TemplateLibrary::builtin();
}

} // namespace

struct rmisel_corpus {
    Corpus corpus;
};

extern "C" {

const char* rmisel_version(void) { return "0.1.0"; }

const char* rmisel_last_error(void) { return g_last_error.c_str(); }

void rmisel_string_free(char* s) { std::free(s); }

rmisel_status rmisel_corpus_open(const char* path, int64_t max_tokens,
                                 int count_whitespace_tokens, rmisel_corpus** out) {
    return guarded([&] {
        if (!path || !out) fail(errc::precondition, "null argument");
        LoadOptions options;
        options.max_tokens = max_tokens > 0 ? max_tokens : 2048;
        if (count_whitespace_tokens) {
            options.counter = [](std::string_view text) {
                return static_cast<std::int64_t>(whitespace_token_count(text));
            };
        }
        auto handle = std::make_unique<rmisel_corpus>();
        handle->corpus = load_corpus(path, options);
        *out = handle.release();
    });
}

int64_t rmisel_corpus_size(const rmisel_corpus* corpus) {
    return corpus ? static_cast<int64_t>(corpus->corpus.samples.size()) : -1;
}

rmisel_status rmisel_corpus_load_report(const rmisel_corpus* corpus, char** json_out) {
    return guarded([&] {
        if (!corpus || !json_out) fail(errc::precondition, "null argument");
        *json_out = dup_string(corpus->corpus.report.to_json());
    });
}

rmisel_status rmisel_corpus_sample(const rmisel_corpus* corpus, int64_t index, char** json_out) {
    return guarded([&] {
        if (!corpus || !json_out) fail(errc::precondition, "null argument");
        if (index < 0 || index >= static_cast<int64_t>(corpus->corpus.samples.size())) {
            fail(errc::precondition, "sample index out of range");
        }
        const Sample& s = corpus->corpus.samples[static_cast<std::size_t>(index)];
        json j;
        j["id"] = s.id;
        j["query"] = s.query;
        j["answer"] = s.answer;
        if (s.query_tokens) j["query_tokens"] = *s.query_tokens;
        if (s.answer_tokens) j["answer_tokens"] = *s.answer_tokens;
        *json_out = dup_string(j.dump());
    });
}

void rmisel_corpus_close(rmisel_corpus* corpus) { delete corpus; }

rmisel_status rmisel_perplexity(const double* logprobs, size_t count, double* out) {
    return guarded([&] {
        if (!logprobs || !out) fail(errc::precondition, "null argument");
        std::vector<double> v(logprobs, logprobs + count);
        *out = perplexity(v);
    });
}

rmisel_status rmisel_rmi(double ppl_q, double ppl_q_given_a, double* out) {
    return guarded([&] {
        if (!out) fail(errc::precondition, "null argument");
        *out = rmi(ppl_q, ppl_q_given_a);
    });
}

rmisel_status rmisel_ifd(double ppl_a_given_q, double ppl_a, double* out) {
    return guarded([&] {
        if (!out) fail(errc::precondition, "null argument");
        *out = ifd(ppl_a_given_q, ppl_a);
    });
}

rmisel_status rmisel_score(const char* options_json, char** summary_out) {
    return guarded([&] {
        json options = parse_options(options_json);
        if (!options.contains("corpus") || !options.contains("backend") ||
            !options.contains("out")) {
            fail(errc::config, "score needs corpus, backend and out");
        }
        BackendDescriptor descriptor = BackendDescriptor::from_json(options["backend"]);
        std::unique_ptr<Backend> backend = make_backend(descriptor);

        std::int64_t max_tokens =
            options.contains("max_tokens") ? options["max_tokens"].get<std::int64_t>() : 2048;
        LengthFilterMode mode = LengthFilterMode::Joint;
        if (options.contains("length_filter")) {
            std::string m = options["length_filter"].get<std::string>();
            if (m == "separate") mode = LengthFilterMode::Separate;
            else if (m != "joint") fail(errc::config, "length_filter must be joint or separate");
        }
        Corpus corpus = load_for_scoring(options["corpus"].get<std::string>(), max_tokens, mode,
                                         *backend);

        TemplateLibrary templates = templates_from(options);
        ScoreOptions score_options;
        score_options.templates = &templates;
        if (options.contains("variant")) {
            score_options.variant = variant_from_name(options["variant"].get<std::string>());
        }
        if (options.contains("directions")) {
            score_options.directions.clear();
            for (const auto& d : options["directions"]) {
                score_options.directions.insert(direction_from_name(d.get<std::string>()));
            }
        }
        if (options.contains("workers")) score_options.workers = options["workers"].get<int>();
        std::optional<ScoreCache> cache;
        if (options.contains("cache")) {
            cache.emplace(options["cache"].get<std::string>());
            score_options.cache = &*cache;
        }

        std::vector<ScoreRecord> records = score_corpus(corpus.samples, *backend, score_options);
        std::filesystem::path out_path = options["out"].get<std::string>();
        write_score_records(out_path, records);

        json summary;
        std::int64_t ok = 0, partial = 0, failed = 0;
        for (const auto& r : records) {
            if (r.status == ScoreStatus::Ok) ok++;
            else if (r.status == ScoreStatus::Partial) partial++;
            else failed++;
        }
        summary["records"] = static_cast<std::int64_t>(records.size());
        summary["ok"] = ok;
        summary["partial"] = partial;
        summary["failed"] = failed;
        summary["out"] = out_path.string();
        summary["load_report"] = json::parse(corpus.report.to_json());
        emit_summary(summary_out, summary);
    });
}

rmisel_status rmisel_rank(const char* options_json, char** summary_out) {
    return guarded([&] {
        json options = parse_options(options_json);
        if (!options.contains("scores") || !options.contains("out")) {
            fail(errc::config, "rank needs scores and out");
        }
        std::int64_t k = options.contains("k") ? options["k"].get<std::int64_t>() : 10;
        std::vector<ScoreRecord> scores =
            read_score_records(options["scores"].get<std::string>());
        BinAssignment bins = stratify(scores, k);
        std::vector<RankRecord> ranks = rank_within_bins(scores, bins);
        std::filesystem::path out_path = options["out"].get<std::string>();
        write_rank_records(out_path, ranks);

        json summary;
        summary["records"] = static_cast<std::int64_t>(ranks.size());
        summary["k"] = k;
        summary["excluded_failed"] = bins.excluded_failed;
        summary["out"] = out_path.string();
        emit_summary(summary_out, summary);
    });
}

rmisel_status rmisel_select(const char* options_json, char** summary_out) {
    return guarded([&] {
        json options = parse_options(options_json);
        if (!options.contains("strategy") || !options.contains("out_dir")) {
            fail(errc::config, "select needs strategy and out_dir");
        }
        SelectionSpec spec = SelectionSpec::from_json(options);

        SelectionInputs inputs;
        json digests;
        std::vector<RankRecord> ranks, strong_ranks, weak_ranks;
        std::vector<PairedRanks> paired;
        std::vector<ScoreRecord> scores;
        if (options.contains("ranks")) {
            std::string path = options["ranks"].get<std::string>();
            ranks = read_rank_records(path);
            inputs.ranks = &ranks;
            digests["ranks"] = sha256_file_hex(path);
        }
        if (options.contains("paired")) {
            std::string path = options["paired"].get<std::string>();
            paired = read_paired_ranks(path);
            inputs.paired = &paired;
            digests["paired"] = sha256_file_hex(path);
        } else if (options.contains("strong_ranks") && options.contains("weak_ranks")) {
            std::string spath = options["strong_ranks"].get<std::string>();
            std::string wpath = options["weak_ranks"].get<std::string>();
            strong_ranks = read_rank_records(spath);
            weak_ranks = read_rank_records(wpath);
            paired = pair_ranks(strong_ranks, weak_ranks);
            inputs.paired = &paired;
            digests["ranks_strong"] = sha256_file_hex(spath);
            digests["ranks_weak"] = sha256_file_hex(wpath);
        }
        if (options.contains("scores")) {
            std::string path = options["scores"].get<std::string>();
            scores = read_score_records(path);
            inputs.scores = &scores;
            digests["scores"] = sha256_file_hex(path);
        }

        SelectionResult sel = select(spec, inputs);
        std::filesystem::path out_dir = options["out_dir"].get<std::string>();
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        std::string ids_text;
        for (const auto& id : sel.ids) {
            ids_text += id;
            ids_text.push_back('\n');
        }
        write_file(out_dir / "selected_ids.txt", ids_text);
        json manifest = sel.manifest(spec, digests);
        write_file(out_dir / "selection_manifest.json", manifest.dump(2) + "\n");

        json summary = manifest;
        summary["out_dir"] = out_dir.string();
        emit_summary(summary_out, summary);
    });
}

rmisel_status rmisel_analyze(const char* options_json, char** summary_out) {
    return guarded([&] {
        json options = parse_options(options_json);
        if (!options.contains("scores") || !options.contains("out_dir")) {
            fail(errc::config, "analyze needs scores and out_dir");
        }
        AnalysisInputs inputs;
        std::string scores_path = options["scores"].get<std::string>();
        std::vector<ScoreRecord> strong = read_score_records(scores_path);
        inputs.strong_scores = &strong;
        inputs.input_digests["scores_strong"] = sha256_file_hex(scores_path);

        std::vector<ScoreRecord> weak, stability;
        if (options.contains("weak_scores")) {
            std::string path = options["weak_scores"].get<std::string>();
            weak = read_score_records(path);
            inputs.weak_scores = &weak;
            inputs.input_digests["scores_weak"] = sha256_file_hex(path);
        }
        if (options.contains("stability_scores")) {
            std::string path = options["stability_scores"].get<std::string>();
            stability = read_score_records(path);
            inputs.stability_scores = &stability;
            inputs.input_digests["scores_stability"] = sha256_file_hex(path);
        }
        if (options.contains("variant_scores")) {
            for (auto it = options["variant_scores"].begin();
                 it != options["variant_scores"].end(); ++it) {
                std::string path = it.value().get<std::string>();
                inputs.variant_scores[it.key()] = read_score_records(path);
                inputs.input_digests["variant:" + it.key()] = sha256_file_hex(path);
            }
        }
        if (options.contains("selections")) {
            for (auto it = options["selections"].begin(); it != options["selections"].end(); ++it) {
                std::string path = it.value().get<std::string>();
                std::set<std::string> ids;
                for (const auto& line : read_lines(path)) {
                    if (!trim(line).empty()) ids.insert(trim(line));
                }
                inputs.selections[it.key()] = std::move(ids);
                inputs.input_digests["selection:" + it.key()] = sha256_file_hex(path);
            }
        }
        if (options.contains("k")) inputs.k_bins = options["k"].get<std::int64_t>();

        AnalysisReport report = analyze(inputs);
        std::filesystem::path out_dir = options["out_dir"].get<std::string>();
        auto files = emit_report(report, inputs, out_dir);

        json summary;
        summary["out_dir"] = out_dir.string();
        json list = json::array();
        for (const auto& f : files) list.push_back(f.string());
        summary["files"] = list;
        emit_summary(summary_out, summary);
    });
}

rmisel_status rmisel_generate_defects(const char* options_json, char** summary_out) {
    return guarded([&] {
        json options = parse_options(options_json);
        if (!options.contains("n") || !options.contains("out")) {
            fail(errc::config, "generate_defects needs n and out");
        }
        DefectSpec spec;
        if (options.contains("spec_file")) {
            json j = json::parse(read_file(options["spec_file"].get<std::string>()), nullptr, false);
            if (j.is_discarded()) fail(errc::parse, "defect spec file is not valid JSON");
            spec = DefectSpec::from_json(j);
        } else if (options.contains("spec")) {
            spec = DefectSpec::from_json(options["spec"]);
        }
        if (options.contains("seed")) spec.seed = options["seed"].get<std::uint64_t>();

        std::int64_t n = options["n"].get<std::int64_t>();
        GeneratedCorpus generated = generate_corpus(spec, n);

        std::filesystem::path out_path = options["out"].get<std::string>();
        std::filesystem::path labels_path = out_path;
        labels_path.replace_extension(".labels.jsonl");
        write_corpus(out_path, generated.corpus());
        write_labels(labels_path, generated);

        json counts = json::object();
        for (const auto& s : generated.samples) {
            const char* name = defect_mode_name(s.mode);
            counts[name] = counts.value(name, 0) + 1;
        }
        json summary;
        summary["n"] = n;
        summary["out"] = out_path.string();
        summary["labels"] = labels_path.string();
        summary["counts"] = counts;
        summary["spec"] = spec.to_json();
        emit_summary(summary_out, summary);
    });
}

rmisel_status rmisel_run(const char* config_path, char** summary_out) {
    return guarded([&] {
        if (!config_path) fail(errc::config, "config path is null");
        RunConfig config = RunConfig::from_file(config_path);
        RunResult result = run(config);
        emit_summary(summary_out, result.manifest);
    });
}

rmisel_status rmisel_compact_cache(const char* cache_path, char** summary_out) {
    return guarded([&] {
        if (!cache_path) fail(errc::config, "cache path is null");
        ScoreCache cache(cache_path);
        std::size_t removed = cache.compact();
        json summary;
        summary["entries"] = cache.size();
        summary["removed"] = removed;
        summary["corrupted_lines_skipped"] = cache.corrupted_lines();
        emit_summary(summary_out, summary);
    });
}

} // extern "C"
