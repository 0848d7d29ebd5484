#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "corpus.hpp"

namespace rmisel {

enum class TemplateVariant {
    Standard,
    SimplifiedTask,
    SystemPrefix,
    PrefixOnly,
    PureRaw,
    RawConcat,
};

enum class Direction {
    QUnconditional,  // PPL(Q)
    QGivenA,         // PPL(Q|A)
    AUnconditional,  // PPL(A)
    AGivenQ,         // PPL(A|Q)
};

const char* variant_name(TemplateVariant v);
TemplateVariant variant_from_name(std::string_view name);
const char* direction_name(Direction d);
Direction direction_from_name(std::string_view name);

// Role markers for one model family. `system_block` is the fully rendered
// system segment (prompt plus whatever markers the family's chat format
// wraps it in), so families with structurally different system turns need
// no extra fields.
struct FamilyTemplate {
    std::string family;
    std::string system_block;
    std::string user_open;
    std::string user_close;
    std::string assistant_open;
    std::string assistant_close;
    nlohmann::json request_options = nlohmann::json::object();
};

// The rendered scoring request: the model conditions on `context_text` and
// per-token logprobs are taken over `target_text` only. `closing_text` is
// what would follow the target in a complete prompt; it is never scored.
struct PromptPlan {
    std::string context_text;
    std::string target_text;
    std::string closing_text;
    TemplateVariant variant = TemplateVariant::Standard;
    Direction direction = Direction::QUnconditional;
    std::string family;

    std::string complete_render() const { return context_text + target_text + closing_text; }
};

class TemplateLibrary {
  public:
    // Built-in family set (deepseek-coder, qwen3, plain).
    static TemplateLibrary builtin();
    // Parses a template file: one JSON document per line, each with fields
    // family, system_prompt, user_open, user_close, assistant_open,
    // assistant_close, request_options.
    static TemplateLibrary from_file(const std::filesystem::path& path);
    static TemplateLibrary from_jsonl(std::string_view content);

    const FamilyTemplate& family(std::string_view name) const;
    bool has_family(std::string_view name) const { return families_.count(std::string(name)) > 0; }

    // Reverse-generation task instruction (domain-constrained, with the
    // INVALID refusal clause) and its general variant.
    const std::string& reverse_task_instruction() const { return reverse_task_; }
    const std::string& simplified_task_instruction() const { return simplified_task_; }
    const std::string& question_prefix() const { return question_prefix_; }

  private:
    std::map<std::string, FamilyTemplate> families_;
    std::string reverse_task_;
    std::string simplified_task_;
    std::string question_prefix_;

    TemplateLibrary();
};

// The JSONL shipped at share/templates.jsonl, embedded so the library works
// without locating the file at runtime.
std::string_view default_templates_jsonl();

// PPL(Q): the query scored inside the context the variant prescribes.
// Permitted variants: Standard, SystemPrefix, PrefixOnly, PureRaw.
PromptPlan plan_ppl_q(const Sample& sample, TemplateVariant variant,
                      const FamilyTemplate& family, const TemplateLibrary& lib);

// PPL(Q|A): the query scored as the assistant turn of the reverse
// generation task. Permitted variants: Standard, SimplifiedTask.
PromptPlan plan_ppl_q_given_a(const Sample& sample, TemplateVariant variant,
                              const FamilyTemplate& family, const TemplateLibrary& lib);

// PPL(A) / PPL(A|Q) for the IFD baseline. Permitted variants: Standard,
// RawConcat. Direction must be AUnconditional or AGivenQ.
PromptPlan plan_ifd(const Sample& sample, TemplateVariant variant,
                    const FamilyTemplate& family, const TemplateLibrary& lib,
                    Direction direction);

// Dispatches to the planner for `direction`, mapping the requested variant
// onto the construction it actually alters: a variant overrides only its
// own directions and all others fall back to Standard. RawConcat defines
// answer-side plans only; asking it for a query-side plan is an error.
PromptPlan plan_for(const Sample& sample, Direction direction, TemplateVariant variant,
                    const FamilyTemplate& family, const TemplateLibrary& lib);

} // namespace rmisel
