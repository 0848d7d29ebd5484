#include "replay_backend.hpp"

#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

ReplayBackend::ReplayBackend(BackendDescriptor descriptor) : Backend(std::move(descriptor)) {
    if (descriptor_.path.empty()) fail(errc::config, "replay backend needs a file path");
    int line_no = 0;
    for (const auto& line : read_lines(descriptor_.path)) {
        line_no++;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j.contains("logprobs")) {
            fail(errc::parse, "replay file line " + std::to_string(line_no) + " is malformed");
        }
        table_[j["key"].get<std::string>()] = j["logprobs"].get<std::vector<double>>();
    }
}

TokenLogProbs ReplayBackend::score_span(const PromptPlan& plan, const std::string& request_key) {
    if (whitespace_token_count(plan.target_text) == 0) {
        fail(errc::precondition, "empty target span");
    }
    auto it = table_.find(request_key);
    if (it == table_.end()) {
        fail(errc::backend, "replay file has no entry for key: " + request_key);
    }
    TokenLogProbs out;
    out.logprobs = it->second;
    if (out.logprobs.empty()) fail(errc::protocol, "replay entry has zero logprobs: " + request_key);
    out.context_token_count = 0;
    return out;
}

} // namespace rmisel
