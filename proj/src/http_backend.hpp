#pragma once

#include "scoring.hpp"

namespace rmisel {

// Client for the HTTP teacher-forcing protocol:
//
//   POST <endpoint><path>  {"model", "context", "target", "options"}
//   -> {"target_tokens": [...], "logprobs": [...], "context_token_count": n}
//
// logprobs are natural-log, one per target token, in order. When the server
// only speaks OpenAI-style echo+logprobs completions, set
// request_options.protocol = "openai-echo" and the adapter reconstructs the
// target span from text offsets, failing loudly when no token boundary
// aligns with the context/target split.
//
// request_options understood by the client itself (everything else is
// forwarded to the server):
//   protocol      "native" (default) or "openai-echo"
//   path          request path, default "/score_span" or "/v1/completions"
//   retry_max     attempts on transient failures, default 4
//   retry_base_ms backoff base, doubled per attempt, default 100
//   timeout_s     per-request timeout, default 120
//
// The RMISEL_BACKEND_TOKEN environment variable, when set, is sent as a
// bearer token and never logged.
class HttpBackend : public Backend {
  public:
    explicit HttpBackend(BackendDescriptor descriptor);

    TokenLogProbs score_span(const PromptPlan& plan, const std::string& request_key) override;
    std::optional<std::int64_t> count_tokens(std::string_view text) override;

  private:
    std::string host_;
    std::string request_path_;
    bool openai_echo_ = false;
    int retry_max_ = 4;
    int retry_base_ms_ = 100;
    int timeout_s_ = 120;
    nlohmann::json forward_options_;

    std::string post_json(const std::string& body, const std::string& request_key);
    TokenLogProbs score_native(const PromptPlan& plan, const std::string& request_key);
    TokenLogProbs score_openai_echo(const PromptPlan& plan, const std::string& request_key);
};

} // namespace rmisel
