#include "http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

HttpBackend::HttpBackend(BackendDescriptor descriptor) : Backend(std::move(descriptor)) {
    if (descriptor_.endpoint.empty()) fail(errc::config, "http backend needs an endpoint");
    host_ = descriptor_.endpoint;

    forward_options_ = json::object();
    for (auto it = descriptor_.request_options.begin(); it != descriptor_.request_options.end(); ++it) {
        const std::string& k = it.key();
        if (k == "protocol") {
            std::string proto = it.value().get<std::string>();
            if (proto == "openai-echo") openai_echo_ = true;
            else if (proto != "native") fail(errc::config, "unknown http protocol: " + proto);
        } else if (k == "path") {
            request_path_ = it.value().get<std::string>();
        } else if (k == "retry_max") {
            retry_max_ = it.value().get<int>();
        } else if (k == "retry_base_ms") {
            retry_base_ms_ = it.value().get<int>();
        } else if (k == "timeout_s") {
            timeout_s_ = it.value().get<int>();
        } else {
            forward_options_[k] = it.value();
        }
    }
    if (request_path_.empty()) request_path_ = openai_echo_ ? "/v1/completions" : "/score_span";
}

std::string HttpBackend::post_json(const std::string& body, const std::string& request_key) {
    httplib::Client client(host_);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);

    httplib::Headers headers;
    headers.emplace("X-Request-Id", sha256_hex(request_key));
    if (const char* token = std::getenv("RMISEL_BACKEND_TOKEN")) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= retry_max_; attempt++) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(retry_base_ms_ << (attempt - 1)));
        }
        auto res = client.Post(request_path_, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) return res->body;
        if (res->status == 429 || res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;  // transient, retry
        }
        fail(errc::backend, "server status " + std::to_string(res->status) + ": " + res->body);
    }
    fail(errc::backend, "backend unreachable after " + std::to_string(retry_max_ + 1) +
                            " attempts: " + last_error);
}

TokenLogProbs HttpBackend::score_span(const PromptPlan& plan, const std::string& request_key) {
    if (plan.target_text.empty()) fail(errc::precondition, "empty target span");
    return openai_echo_ ? score_openai_echo(plan, request_key) : score_native(plan, request_key);
}

TokenLogProbs HttpBackend::score_native(const PromptPlan& plan, const std::string& request_key) {
    json req;
    req["model"] = descriptor_.model_id;
    req["context"] = plan.context_text;
    req["target"] = plan.target_text;
    req["options"] = forward_options_;

    json res = json::parse(post_json(req.dump(), request_key), nullptr, false);
    if (res.is_discarded() || !res.is_object()) fail(errc::protocol, "response is not a JSON object");
    if (!res.contains("target_tokens") || !res.contains("logprobs")) {
        fail(errc::protocol, "response missing target_tokens/logprobs");
    }

    TokenLogProbs out;
    out.token_texts = res["target_tokens"].get<std::vector<std::string>>();
    out.logprobs = res["logprobs"].get<std::vector<double>>();
    if (res.contains("context_token_count")) {
        out.context_token_count = res["context_token_count"].get<std::int64_t>();
    }
    if (out.logprobs.empty()) fail(errc::protocol, "server returned zero logprobs");
    if (out.logprobs.size() != out.token_texts.size()) {
        fail(errc::protocol, "logprobs count " + std::to_string(out.logprobs.size()) +
                                 " != target token count " + std::to_string(out.token_texts.size()));
    }
    // The span the server scored must be the span we asked about.
    std::string joined;
    for (const auto& t : out.token_texts) joined += t;
    if (joined != plan.target_text) {
        fail(errc::protocol, "echoed target tokens do not reassemble the target span");
    }
    return out;
}

TokenLogProbs HttpBackend::score_openai_echo(const PromptPlan& plan, const std::string& request_key) {
    json req = forward_options_;
    req["model"] = descriptor_.model_id;
    req["prompt"] = plan.context_text + plan.target_text;
    req["max_tokens"] = 0;
    req["echo"] = true;
    req["logprobs"] = 0;

    json res = json::parse(post_json(req.dump(), request_key), nullptr, false);
    if (res.is_discarded() || !res.is_object()) fail(errc::protocol, "response is not a JSON object");
    if (!res.contains("choices") || !res["choices"].is_array() || res["choices"].empty()) {
        fail(errc::protocol, "response has no choices");
    }
    const json& lp = res["choices"][0]["logprobs"];
    if (!lp.is_object() || !lp.contains("tokens") || !lp.contains("token_logprobs") ||
        !lp.contains("text_offset")) {
        fail(errc::protocol, "choice lacks echo logprobs with text offsets");
    }
    auto tokens = lp["tokens"].get<std::vector<std::string>>();
    auto offsets = lp["text_offset"].get<std::vector<std::int64_t>>();
    const json& tlp = lp["token_logprobs"];
    if (tokens.size() != offsets.size() || tokens.size() != tlp.size()) {
        fail(errc::protocol, "echo arrays disagree in length");
    }

    // Locate the context/target boundary; it must fall exactly on a token
    // edge or the span was tokenized across the split.
    const auto boundary = static_cast<std::int64_t>(plan.context_text.size());
    std::size_t first = tokens.size();
    for (std::size_t i = 0; i < offsets.size(); i++) {
        if (offsets[i] == boundary) {
            first = i;
            break;
        }
        if (offsets[i] > boundary) break;
    }
    if (first == tokens.size()) {
        fail(errc::protocol, "no token boundary aligns with the context/target split");
    }

    TokenLogProbs out;
    out.context_token_count = static_cast<std::int64_t>(first);
    std::string joined;
    for (std::size_t i = first; i < tokens.size(); i++) {
        if (tlp[i].is_null()) {
            fail(errc::protocol, "server cannot score token " + std::to_string(i) +
                                     " (null logprob; first token of an empty context?)");
        }
        out.token_texts.push_back(tokens[i]);
        out.logprobs.push_back(tlp[i].get<double>());
        joined += tokens[i];
    }
    if (out.logprobs.empty()) fail(errc::protocol, "target span maps to zero tokens");
    if (joined != plan.target_text) {
        fail(errc::protocol, "echoed span does not reassemble the target text");
    }
    return out;
}

std::optional<std::int64_t> HttpBackend::count_tokens(std::string_view text) {
    if (text.empty()) return 0;
    std::string key = "count:" + sha256_hex(text);
    if (!openai_echo_) {
        PromptPlan probe;
        probe.target_text = std::string(text);
        TokenLogProbs lp = score_native(probe, key);
        return static_cast<std::int64_t>(lp.logprobs.size());
    }
    // Echo servers cannot score a first token with no context, but the token
    // list alone carries the count.
    json req = forward_options_;
    req["model"] = descriptor_.model_id;
    req["prompt"] = std::string(text);
    req["max_tokens"] = 0;
    req["echo"] = true;
    req["logprobs"] = 0;
    json res = json::parse(post_json(req.dump(), key), nullptr, false);
    if (res.is_discarded() || !res.contains("choices") || res["choices"].empty() ||
        !res["choices"][0].contains("logprobs") ||
        !res["choices"][0]["logprobs"].contains("tokens")) {
        fail(errc::protocol, "echo response lacks a token list");
    }
    return static_cast<std::int64_t>(res["choices"][0]["logprobs"]["tokens"].size());
}

} // namespace rmisel
