#include "scoring.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "error.hpp"
#include "http_backend.hpp"
#include "ngram_backend.hpp"
#include "replay_backend.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

const char* score_status_name(ScoreStatus s) {
    switch (s) {
        case ScoreStatus::Ok: return "ok";
        case ScoreStatus::Partial: return "partial";
        case ScoreStatus::Failed: return "failed";
    }
    return "failed";
}

ScoreStatus score_status_from_name(std::string_view name) {
    if (name == "ok") return ScoreStatus::Ok;
    if (name == "partial") return ScoreStatus::Partial;
    if (name == "failed") return ScoreStatus::Failed;
    fail(errc::parse, "unknown score status: " + std::string(name));
}

const char* backend_kind_name(BackendKind k) {
    switch (k) {
        case BackendKind::HttpTeacherForcing: return "http";
        case BackendKind::ReplayFile: return "replay";
        case BackendKind::BuiltinNgram: return "builtin-ngram";
    }
    return "builtin-ngram";
}

BackendKind backend_kind_from_name(std::string_view name) {
    if (name == "http") return BackendKind::HttpTeacherForcing;
    if (name == "replay") return BackendKind::ReplayFile;
    if (name == "builtin-ngram") return BackendKind::BuiltinNgram;
    fail(errc::config, "unknown backend kind: " + std::string(name));
}

BackendDescriptor BackendDescriptor::from_json(const json& j) {
    if (!j.is_object()) fail(errc::config, "backend descriptor must be a JSON object");
    BackendDescriptor d;
    if (!j.contains("model_id") || !j["model_id"].is_string()) {
        fail(errc::config, "backend descriptor needs a model_id");
    }
    d.model_id = j["model_id"].get<std::string>();
    if (j.contains("kind")) d.kind = backend_kind_from_name(j["kind"].get<std::string>());
    if (j.contains("endpoint")) d.endpoint = j["endpoint"].get<std::string>();
    if (j.contains("path")) d.path = j["path"].get<std::string>();
    if (j.contains("family")) d.family = j["family"].get<std::string>();
    if (j.contains("normalized_probs")) d.normalized_probs = j["normalized_probs"].get<bool>();
    if (j.contains("max_in_flight")) {
        d.max_in_flight = j["max_in_flight"].get<int>();
        if (d.max_in_flight < 1) fail(errc::config, "max_in_flight must be >= 1");
    }
    if (j.contains("request_options")) {
        if (!j["request_options"].is_object()) fail(errc::config, "request_options must be an object");
        d.request_options = j["request_options"];
    }
    return d;
}

json BackendDescriptor::to_json() const {
    json j;
    j["model_id"] = model_id;
    j["kind"] = backend_kind_name(kind);
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    if (!path.empty()) j["path"] = path;
    j["family"] = family;
    j["normalized_probs"] = normalized_probs;
    j["max_in_flight"] = max_in_flight;
    j["request_options"] = request_options;
    return j;
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor) {
    switch (descriptor.kind) {
        case BackendKind::HttpTeacherForcing: return std::make_unique<HttpBackend>(descriptor);
        case BackendKind::ReplayFile: return std::make_unique<ReplayBackend>(descriptor);
        case BackendKind::BuiltinNgram: return std::make_unique<NgramBackend>(descriptor);
    }
    fail(errc::internal, "unhandled backend kind");
}

std::string span_request_key(std::string_view sample_id, std::string_view model_id,
                             TemplateVariant variant, Direction direction) {
    return join_key({sample_id, model_id, variant_name(variant), direction_name(direction)});
}

// ------------------------------------------------------------ reductions

double perplexity(const std::vector<double>& logprobs) {
    if (logprobs.empty()) fail(errc::precondition, "perplexity of an empty span");
    double sum = 0.0;
    for (double lp : logprobs) {
        if (!std::isfinite(lp)) fail(errc::precondition, "non-finite logprob");
        sum += lp;
    }
    return std::exp(-sum / static_cast<double>(logprobs.size()));
}

double rmi(double ppl_q, double ppl_q_given_a) {
    if (!(std::isfinite(ppl_q) && ppl_q > 0) || !(std::isfinite(ppl_q_given_a) && ppl_q_given_a > 0)) {
        fail(errc::precondition, "rmi needs finite positive perplexities");
    }
    return std::log(ppl_q) - std::log(ppl_q_given_a);
}

double ifd(double ppl_a_given_q, double ppl_a) {
    if (!(std::isfinite(ppl_a_given_q) && ppl_a_given_q > 0) || !(std::isfinite(ppl_a) && ppl_a > 0)) {
        fail(errc::precondition, "ifd needs finite positive perplexities");
    }
    return ppl_a_given_q / ppl_a;
}

// ------------------------------------------------------------ records

std::string score_record_to_json(const ScoreRecord& r) {
    json j;
    j["sample_id"] = r.sample_id;
    j["model_id"] = r.model_id;
    j["template_variant"] = r.template_variant;
    j["status"] = score_status_name(r.status);
    auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) j[name] = *v;
    };
    put("ppl_q", r.ppl_q);
    put("ppl_q_given_a", r.ppl_q_given_a);
    put("ppl_a", r.ppl_a);
    put("ppl_a_given_q", r.ppl_a_given_q);
    put("rmi", r.rmi);
    put("ifd", r.ifd);
    if (r.ifd) j["ifd_hinders"] = r.ifd_hinders;
    if (r.query_tokens) j["query_tokens"] = *r.query_tokens;
    if (r.answer_tokens) j["answer_tokens"] = *r.answer_tokens;
    if (!r.reason.empty()) j["reason"] = r.reason;
    return j.dump();
}

ScoreRecord score_record_from_json(std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(errc::parse, "score record is not a JSON object");
    ScoreRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.template_variant = j.at("template_variant").get<std::string>();
    r.status = score_status_from_name(j.at("status").get<std::string>());
    auto get = [&](const char* name, std::optional<double>& out) {
        if (j.contains(name)) out = j[name].get<double>();
    };
    get("ppl_q", r.ppl_q);
    get("ppl_q_given_a", r.ppl_q_given_a);
    get("ppl_a", r.ppl_a);
    get("ppl_a_given_q", r.ppl_a_given_q);
    get("rmi", r.rmi);
    get("ifd", r.ifd);
    if (j.contains("ifd_hinders")) r.ifd_hinders = j["ifd_hinders"].get<bool>();
    if (j.contains("query_tokens")) r.query_tokens = j["query_tokens"].get<std::int64_t>();
    if (j.contains("answer_tokens")) r.answer_tokens = j["answer_tokens"].get<std::int64_t>();
    if (j.contains("reason")) r.reason = j["reason"].get<std::string>();
    return r;
}

void write_score_records(const std::filesystem::path& path, const std::vector<ScoreRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += score_record_to_json(r);
        out.push_back('\n');
    }
    write_file(path, out);
}

std::vector<ScoreRecord> read_score_records(const std::filesystem::path& path) {
    std::vector<ScoreRecord> out;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        out.push_back(score_record_from_json(line));
    }
    return out;
}

// ------------------------------------------------------------ scoring

namespace {

std::optional<double>* ppl_slot(ScoreCacheEntry& e, Direction d) {
    switch (d) {
        case Direction::QUnconditional: return &e.ppl_q;
        case Direction::QGivenA: return &e.ppl_q_given_a;
        case Direction::AUnconditional: return &e.ppl_a;
        case Direction::AGivenQ: return &e.ppl_a_given_q;
    }
    return nullptr;
}

} // namespace

ScoreRecord score_sample(const Sample& sample, Backend& backend, const ScoreOptions& options) {
    const BackendDescriptor& desc = backend.descriptor();
    const TemplateLibrary* lib = options.templates;
    static const TemplateLibrary builtin_lib = TemplateLibrary::builtin();
    if (!lib) lib = &builtin_lib;
    const FamilyTemplate& family = lib->family(desc.family);
    const std::string variant = variant_name(options.variant);

    ScoreRecord record;
    record.sample_id = sample.id;
    record.model_id = desc.model_id;
    record.template_variant = variant;
    record.query_tokens = sample.query_tokens;
    record.answer_tokens = sample.answer_tokens;

    ScoreCacheEntry entry;
    entry.sample_id = sample.id;
    entry.model_id = desc.model_id;
    entry.template_variant = variant;
    if (options.cache) {
        if (auto cached = options.cache->get(sample.id, desc.model_id, variant)) entry = *cached;
    }

    bool wrote_new = false;
    std::size_t failed_directions = 0;
    for (Direction dir : options.directions) {
        std::optional<double>& slot = *ppl_slot(entry, dir);
        if (slot) continue;  // cache hit for this direction
        try {
            PromptPlan plan = plan_for(sample, dir, options.variant, family, *lib);
            std::string key = span_request_key(sample.id, desc.model_id, options.variant, dir);
            TokenLogProbs lp = backend.score_span(plan, key);
            if (desc.normalized_probs) {
                for (double v : lp.logprobs) {
                    if (v > 0.0) {
                        fail(errc::protocol,
                             "backend declares normalized probabilities but returned a positive logprob");
                    }
                }
            }
            slot = perplexity(lp.logprobs);
            wrote_new = true;
            auto count = static_cast<std::int64_t>(lp.logprobs.size());
            if (dir == Direction::QUnconditional || dir == Direction::QGivenA) {
                if (!record.query_tokens || dir == Direction::QUnconditional) {
                    record.query_tokens = count;
                }
            } else {
                if (!record.answer_tokens) record.answer_tokens = count;
            }
        } catch (const Error& e) {
            if (e.code() == errc::config) throw;  // bad request shape, not a scoring failure
            failed_directions++;
            if (!record.reason.empty()) record.reason += "; ";
            record.reason += std::string(direction_name(dir)) + ": " + e.what();
        }
    }

    if (options.cache && wrote_new) options.cache->put(entry, desc.normalized_probs);

    record.ppl_q = entry.ppl_q;
    record.ppl_q_given_a = entry.ppl_q_given_a;
    record.ppl_a = entry.ppl_a;
    record.ppl_a_given_q = entry.ppl_a_given_q;
    if (record.ppl_q && record.ppl_q_given_a) {
        record.rmi = rmi(*record.ppl_q, *record.ppl_q_given_a);
    }
    if (record.ppl_a && record.ppl_a_given_q) {
        record.ifd = ifd(*record.ppl_a_given_q, *record.ppl_a);
        record.ifd_hinders = *record.ifd > 1.0;
    }

    if (failed_directions == 0) {
        record.status = ScoreStatus::Ok;
    } else if (failed_directions == options.directions.size()) {
        record.status = ScoreStatus::Failed;
    } else {
        record.status = ScoreStatus::Partial;
    }
    return record;
}

std::vector<ScoreRecord> score_corpus(const std::vector<Sample>& samples, Backend& backend,
                                      const ScoreOptions& options) {
    if (options.directions.empty()) fail(errc::config, "no scoring directions requested");
    backend.prepare(samples);

    int workers = options.workers > 0 ? options.workers : backend.descriptor().max_in_flight;
    workers = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));

    std::vector<ScoreRecord> records(samples.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= samples.size()) return;
            try {
                records[i] = score_sample(samples[i], backend, options);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; w++) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return records;
}

} // namespace rmisel
