#pragma once

#include <unordered_map>

#include "scoring.hpp"

namespace rmisel {

// Replays logprobs recorded in a line-delimited JSON file of
// {"key": <span request key>, "logprobs": [...]} objects. Deterministic by
// construction; used for tests and offline reruns against captured traces.
class ReplayBackend : public Backend {
  public:
    explicit ReplayBackend(BackendDescriptor descriptor);

    TokenLogProbs score_span(const PromptPlan& plan, const std::string& request_key) override;

    std::size_t entries() const { return table_.size(); }

  private:
    std::unordered_map<std::string, std::vector<double>> table_;
};

} // namespace rmisel
