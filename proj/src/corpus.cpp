#include "corpus.hpp"

#include <unordered_set>

#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

std::string LoadReport::to_json() const {
    json j;
    j["kept"] = kept;
    j["dropped_length"] = dropped_length;
    j["dropped_malformed"] = dropped_malformed;
    j["deferred"] = deferred;
    json rj = json::array();
    for (const auto& r : rejections) {
        rj.push_back({{"line", r.line}, {"id", r.id}, {"reason", r.reason}});
    }
    j["rejections"] = rj;
    return j.dump();
}

namespace {

bool passes_length(std::int64_t q, std::int64_t a, const LoadOptions& opt) {
    if (opt.length_mode == LengthFilterMode::Joint) return q + a <= opt.max_tokens;
    return q <= opt.max_tokens && a <= opt.max_tokens;
}

} // namespace

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
    std::string content = read_file(path);

    Corpus corpus;
    corpus.source_digest = sha256_hex(content);

    std::unordered_set<std::string> seen_ids;
    std::int64_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        if (pos == content.size()) break;
        std::size_t nl = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (nl == std::string::npos ? content.size() : nl) - pos);
        pos = (nl == std::string::npos) ? content.size() : nl + 1;
        line_no++;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;

        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            corpus.report.dropped_malformed++;
            corpus.report.rejections.push_back({line_no, "", "not a JSON object"});
            continue;
        }

        Sample s;
        if (j.contains("id")) {
            if (!j["id"].is_string()) {
                corpus.report.dropped_malformed++;
                corpus.report.rejections.push_back({line_no, "", "id is not a string"});
                continue;
            }
            s.id = j["id"].get<std::string>();
        } else {
            s.id = "line-" + std::to_string(line_no);
        }
        if (!j.contains("query") || !j["query"].is_string() ||
            !j.contains("answer") || !j["answer"].is_string()) {
            corpus.report.dropped_malformed++;
            corpus.report.rejections.push_back({line_no, s.id, "missing query/answer string fields"});
            continue;
        }
        s.query = j["query"].get<std::string>();
        s.answer = j["answer"].get<std::string>();

        if (trim(s.query).empty()) {
            corpus.report.dropped_malformed++;
            corpus.report.rejections.push_back({line_no, s.id, "empty query"});
            continue;
        }
        if (trim(s.answer).empty()) {
            corpus.report.dropped_malformed++;
            corpus.report.rejections.push_back({line_no, s.id, "empty answer"});
            continue;
        }
        if (!seen_ids.insert(s.id).second) {
            corpus.report.dropped_malformed++;
            corpus.report.rejections.push_back({line_no, s.id, "duplicate id"});
            continue;
        }

        if (options.counter) {
            s.query_tokens = options.counter(s.query);
            s.answer_tokens = options.counter(s.answer);
            if (!passes_length(*s.query_tokens, *s.answer_tokens, options)) {
                corpus.report.dropped_length++;
                corpus.report.rejections.push_back(
                    {line_no, s.id,
                     "token length " + std::to_string(*s.query_tokens) + "+" +
                         std::to_string(*s.answer_tokens) + " exceeds max " +
                         std::to_string(options.max_tokens)});
                continue;
            }
        } else {
            corpus.report.deferred++;
        }
        corpus.report.kept++;
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

void apply_length_filter(Corpus& corpus, const LoadOptions& options) {
    if (!options.counter) fail(errc::precondition, "apply_length_filter needs a token counter");
    std::vector<Sample> kept;
    kept.reserve(corpus.samples.size());
    for (auto& s : corpus.samples) {
        if (!s.query_tokens) s.query_tokens = options.counter(s.query);
        if (!s.answer_tokens) s.answer_tokens = options.counter(s.answer);
        if (passes_length(*s.query_tokens, *s.answer_tokens, options)) {
            kept.push_back(std::move(s));
        } else {
            corpus.report.kept--;
            corpus.report.dropped_length++;
            corpus.report.rejections.push_back(
                {-1, s.id,
                 "token length " + std::to_string(*s.query_tokens) + "+" +
                     std::to_string(*s.answer_tokens) + " exceeds max " +
                     std::to_string(options.max_tokens)});
        }
    }
    corpus.report.deferred = 0;
    corpus.samples = std::move(kept);
}

void write_corpus(const std::filesystem::path& path, const std::vector<Sample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        json j;
        j["id"] = s.id;
        j["query"] = s.query;
        j["answer"] = s.answer;
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

} // namespace rmisel
