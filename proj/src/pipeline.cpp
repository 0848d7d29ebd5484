#include "pipeline.hpp"

#include <chrono>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) fail(errc::parse, "run config is not valid JSON: " + path.string());
    return from_json(j);
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) fail(errc::config, "run config must be a JSON object");
    RunConfig c;
    if (!j.contains("corpus")) fail(errc::config, "run config needs a corpus path");
    c.corpus_path = j["corpus"].get<std::string>();
    if (j.contains("max_tokens")) c.max_tokens = j["max_tokens"].get<std::int64_t>();
    if (j.contains("length_filter")) {
        std::string mode = j["length_filter"].get<std::string>();
        if (mode == "joint") c.length_mode = LengthFilterMode::Joint;
        else if (mode == "separate") c.length_mode = LengthFilterMode::Separate;
        else fail(errc::config, "length_filter must be joint or separate");
    }
    if (!j.contains("strong_backend")) fail(errc::config, "run config needs a strong_backend");
    c.strong_backend = BackendDescriptor::from_json(j["strong_backend"]);
    if (j.contains("weak_backend")) {
        c.weak_backend = BackendDescriptor::from_json(j["weak_backend"]);
    }
    if (j.contains("template_variant")) {
        c.variant = variant_from_name(j["template_variant"].get<std::string>());
    }
    if (j.contains("templates")) c.templates_path = j["templates"].get<std::string>();
    if (j.contains("directions")) {
        c.directions.clear();
        for (const auto& d : j["directions"]) {
            c.directions.insert(direction_from_name(d.get<std::string>()));
        }
    }
    if (j.contains("k")) c.k_bins = j["k"].get<std::int64_t>();
    if (j.contains("selections")) {
        for (const auto& s : j["selections"]) {
            SelectionSpec spec = SelectionSpec::from_json(s);
            spec.k_bins = c.k_bins;
            c.selections.push_back(spec);
        }
    }
    if (!j.contains("output_dir")) fail(errc::config, "run config needs an output_dir");
    c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("cache")) c.cache_path = j["cache"].get<std::string>();
    if (j.contains("workers")) c.workers = j["workers"].get<int>();
    c.validate();
    return c;
}

json RunConfig::to_json() const {
    json j;
    j["corpus"] = corpus_path.string();
    j["max_tokens"] = max_tokens;
    j["length_filter"] = length_mode == LengthFilterMode::Joint ? "joint" : "separate";
    j["strong_backend"] = strong_backend.to_json();
    if (weak_backend) j["weak_backend"] = weak_backend->to_json();
    j["template_variant"] = variant_name(variant);
    if (templates_path) j["templates"] = templates_path->string();
    json dirs = json::array();
    for (Direction d : directions) dirs.push_back(direction_name(d));
    j["directions"] = dirs;
    j["k"] = k_bins;
    json sels = json::array();
    for (const auto& s : selections) sels.push_back(s.to_json());
    j["selections"] = sels;
    j["output_dir"] = output_dir.string();
    if (cache_path) j["cache"] = cache_path->string();
    j["workers"] = workers;
    return j;
}

void RunConfig::validate() const {
    if (max_tokens < 1) fail(errc::config, "max_tokens must be positive");
    if (k_bins < 1) fail(errc::config, "k must be >= 1");
    if (directions.empty()) fail(errc::config, "at least one scoring direction is required");
    if (weak_backend && weak_backend->model_id == strong_backend.model_id) {
        fail(errc::config, "strong and weak backends must have distinct model ids");
    }
    bool has_answer_side =
        directions.count(Direction::AUnconditional) && directions.count(Direction::AGivenQ);
    bool has_query_side =
        directions.count(Direction::QUnconditional) && directions.count(Direction::QGivenA);
    for (const auto& spec : selections) {
        spec.validate();
        switch (spec.strategy) {
            case Strategy::DiffHigh:
            case Strategy::DiffLow:
            case Strategy::SumHigh:
            case Strategy::SumLow:
                if (!weak_backend) {
                    fail(errc::config, std::string(strategy_name(spec.strategy)) +
                                           " needs both a strong and a weak backend");
                }
                [[fallthrough]];
            case Strategy::RmiTopFraction:
            case Strategy::RmiGlobalTopFraction:
            case Strategy::RmiPercentileRange:
                if (!has_query_side) {
                    fail(errc::config, std::string(strategy_name(spec.strategy)) +
                                           " needs directions q and q-given-a");
                }
                break;
            case Strategy::IfdClosestToOne:
                if (!has_answer_side) {
                    fail(errc::config, "ifd-closest-to-one needs directions a and a-given-q");
                }
                break;
            case Strategy::Random:
                break;
        }
    }
}

Corpus load_for_scoring(const std::filesystem::path& corpus_path, std::int64_t max_tokens,
                        LengthFilterMode length_mode, Backend& backend) {
    LoadOptions options;
    options.max_tokens = max_tokens;
    options.length_mode = length_mode;
    bool counts_at_load = backend.descriptor().kind == BackendKind::BuiltinNgram;
    if (counts_at_load) {
        options.counter = [&](std::string_view text) { return *backend.count_tokens(text); };
    }
    Corpus corpus = load_corpus(corpus_path, options);
    if (!counts_at_load && backend.count_tokens("probe")) {
        LoadOptions deferred = options;
        deferred.counter = [&](std::string_view text) { return *backend.count_tokens(text); };
        apply_length_filter(corpus, deferred);
    }
    return corpus;
}

SelectionInputKind selection_input_kind(Strategy strategy) {
    switch (strategy) {
        case Strategy::DiffHigh:
        case Strategy::DiffLow:
        case Strategy::SumHigh:
        case Strategy::SumLow:
            return SelectionInputKind::Paired;
        case Strategy::RmiTopFraction:
        case Strategy::RmiPercentileRange:
            return SelectionInputKind::Ranks;
        case Strategy::RmiGlobalTopFraction:
        case Strategy::IfdClosestToOne:
        case Strategy::Random:
            return SelectionInputKind::Scores;
    }
    fail(errc::internal, "unhandled strategy");
}

namespace {

struct StageClock {
    using clock = std::chrono::steady_clock;
    json timings = json::object();
    clock::time_point start = clock::now();

    void lap(const std::string& stage) {
        auto now = clock::now();
        timings[stage] =
            std::chrono::duration_cast<std::chrono::milliseconds>(now - start).count();
        start = now;
    }
};

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
    std::error_code ec;
    auto rel = std::filesystem::relative(p, base, ec);
    return ec ? p.string() : rel.string();
}

} // namespace

RunResult run(const RunConfig& config) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (!std::filesystem::is_directory(config.output_dir)) {
        fail(errc::io, "cannot create output directory " + config.output_dir.string());
    }

    StageClock clock;
    RunResult result;
    auto& outputs = result.outputs;
    json manifest;
    manifest["schema_version"] = 1;
    manifest["config"] = config.to_json();

    TemplateLibrary templates = config.templates_path
                                    ? TemplateLibrary::from_file(*config.templates_path)
                                    : TemplateLibrary::builtin();

    std::unique_ptr<Backend> strong = make_backend(config.strong_backend);
    std::unique_ptr<Backend> weak;
    if (config.weak_backend) weak = make_backend(*config.weak_backend);

    // Token counts come from the strong backend's tokenizer; when it cannot
    // count, filtering falls to scoring time.
    Corpus corpus =
        load_for_scoring(config.corpus_path, config.max_tokens, config.length_mode, *strong);
    if (corpus.samples.empty()) fail(errc::config, "corpus is empty after filtering");

    auto load_report_path = config.output_dir / "load_report.json";
    write_file(load_report_path, corpus.report.to_json() + "\n");
    outputs.push_back(load_report_path);
    manifest["input_digests"]["corpus"] = corpus.source_digest;
    if (config.templates_path) {
        manifest["input_digests"]["templates"] = sha256_file_hex(*config.templates_path);
    }
    manifest["load_report"] = json::parse(corpus.report.to_json());
    clock.lap("load");

    // ---- score
    std::optional<ScoreCache> cache;
    if (config.cache_path) cache.emplace(*config.cache_path);

    ScoreOptions score_options;
    score_options.variant = config.variant;
    score_options.directions = config.directions;
    score_options.templates = &templates;
    score_options.cache = cache ? &*cache : nullptr;
    score_options.workers = config.workers;

    auto summarize = [](const std::vector<ScoreRecord>& records) {
        json j;
        std::int64_t ok = 0, partial = 0, failed = 0;
        for (const auto& r : records) {
            if (r.status == ScoreStatus::Ok) ok++;
            else if (r.status == ScoreStatus::Partial) partial++;
            else failed++;
        }
        j["ok"] = ok;
        j["partial"] = partial;
        j["failed"] = failed;
        return j;
    };

    std::vector<ScoreRecord> strong_scores = score_corpus(corpus.samples, *strong, score_options);
    auto strong_scores_path = config.output_dir / "scores_strong.jsonl";
    write_score_records(strong_scores_path, strong_scores);
    outputs.push_back(strong_scores_path);
    manifest["scoring"]["strong"] = summarize(strong_scores);
    clock.lap("score_strong");

    std::vector<ScoreRecord> weak_scores;
    if (weak) {
        weak_scores = score_corpus(corpus.samples, *weak, score_options);
        auto weak_scores_path = config.output_dir / "scores_weak.jsonl";
        write_score_records(weak_scores_path, weak_scores);
        outputs.push_back(weak_scores_path);
        manifest["scoring"]["weak"] = summarize(weak_scores);
        clock.lap("score_weak");
    }

    // ---- rank (each model stratified on its own ppl_q)
    bool query_side = config.directions.count(Direction::QUnconditional) &&
                      config.directions.count(Direction::QGivenA);
    std::vector<RankRecord> strong_ranks, weak_ranks;
    std::vector<PairedRanks> paired;
    if (query_side) {
        BinAssignment strong_bins = stratify(strong_scores, config.k_bins);
        strong_ranks = rank_within_bins(strong_scores, strong_bins);
        auto path = config.output_dir / "ranks_strong.jsonl";
        write_rank_records(path, strong_ranks);
        outputs.push_back(path);
        manifest["ranking"]["strong"] = {{"excluded_failed", strong_bins.excluded_failed},
                                         {"k", config.k_bins}};
        if (weak) {
            BinAssignment weak_bins = stratify(weak_scores, config.k_bins);
            weak_ranks = rank_within_bins(weak_scores, weak_bins);
            auto wpath = config.output_dir / "ranks_weak.jsonl";
            write_rank_records(wpath, weak_ranks);
            outputs.push_back(wpath);
            manifest["ranking"]["weak"] = {{"excluded_failed", weak_bins.excluded_failed},
                                           {"k", config.k_bins}};
            paired = pair_ranks(strong_ranks, weak_ranks);
            auto ppath = config.output_dir / "paired_ranks.jsonl";
            write_paired_ranks(ppath, paired);
            outputs.push_back(ppath);
        }
        clock.lap("rank");
    }

    // ---- select
    // Digest keys match what a standalone `select` invocation over the same
    // stage files would record, so chained runs reproduce these manifests.
    json selections_json = json::array();
    std::map<std::string, std::set<std::string>> selection_sets;
    for (std::size_t i = 0; i < config.selections.size(); i++) {
        const SelectionSpec& spec = config.selections[i];
        SelectionInputs inputs;
        json digests;
        switch (selection_input_kind(spec.strategy)) {
            case SelectionInputKind::Paired:
                inputs.paired = &paired;
                digests["ranks_strong"] = sha256_file_hex(config.output_dir / "ranks_strong.jsonl");
                digests["ranks_weak"] = sha256_file_hex(config.output_dir / "ranks_weak.jsonl");
                break;
            case SelectionInputKind::Ranks:
                inputs.ranks = &strong_ranks;
                digests["ranks"] = sha256_file_hex(config.output_dir / "ranks_strong.jsonl");
                break;
            case SelectionInputKind::Scores:
                inputs.scores = &strong_scores;
                digests["scores"] = sha256_file_hex(strong_scores_path);
                break;
        }
        SelectionResult sel = select(spec, inputs);

        std::string dir_name =
            "selection_" + std::to_string(i) + "_" + strategy_name(spec.strategy);
        auto sel_dir = config.output_dir / dir_name;
        std::filesystem::create_directories(sel_dir, ec);
        std::string ids_text;
        for (const auto& id : sel.ids) {
            ids_text += id;
            ids_text.push_back('\n');
        }
        auto ids_path = sel_dir / "selected_ids.txt";
        write_file(ids_path, ids_text);
        outputs.push_back(ids_path);

        json sel_manifest = sel.manifest(spec, digests);
        auto manifest_path = sel_dir / "selection_manifest.json";
        write_file(manifest_path, sel_manifest.dump(2) + "\n");
        outputs.push_back(manifest_path);

        json entry = sel_manifest;
        entry["dir"] = dir_name;
        selections_json.push_back(entry);
        selection_sets[dir_name] = std::set<std::string>(sel.ids.begin(), sel.ids.end());
    }
    manifest["selections"] = selections_json;
    clock.lap("select");

    // ---- analyze
    AnalysisInputs analysis_inputs;
    analysis_inputs.strong_scores = &strong_scores;
    if (weak) analysis_inputs.weak_scores = &weak_scores;
    analysis_inputs.selections = selection_sets;
    analysis_inputs.k_bins = config.k_bins;
    analysis_inputs.input_digests["scores_strong"] = sha256_file_hex(strong_scores_path);
    if (weak) {
        analysis_inputs.input_digests["scores_weak"] =
            sha256_file_hex(config.output_dir / "scores_weak.jsonl");
    }
    for (const auto& [name, ids] : selection_sets) {
        analysis_inputs.input_digests["selection:" + name] =
            sha256_file_hex(config.output_dir / name / "selected_ids.txt");
    }
    AnalysisReport report = analyze(analysis_inputs);
    for (const auto& p : emit_report(report, analysis_inputs, config.output_dir / "analysis")) {
        outputs.push_back(p);
    }
    clock.lap("analyze");

    json file_list = json::array();
    for (const auto& p : outputs) file_list.push_back(relative_to(p, config.output_dir));
    manifest["outputs"] = file_list;

    result.manifest_path = config.output_dir / "run_manifest.json";
    write_file(result.manifest_path, manifest.dump(2) + "\n");
    // Wall-clock timings live beside the manifest so the manifest itself
    // stays identical across reruns.
    write_file(config.output_dir / "run_timings.json", clock.timings.dump(2) + "\n");
    result.manifest = manifest;
    return result;
}

} // namespace rmisel
