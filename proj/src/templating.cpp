#include "templating.hpp"

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

const char* variant_name(TemplateVariant v) {
    switch (v) {
        case TemplateVariant::Standard: return "standard";
        case TemplateVariant::SimplifiedTask: return "simplified-task";
        case TemplateVariant::SystemPrefix: return "system-prefix";
        case TemplateVariant::PrefixOnly: return "prefix-only";
        case TemplateVariant::PureRaw: return "pure-raw";
        case TemplateVariant::RawConcat: return "raw-concat";
    }
    return "standard";
}

TemplateVariant variant_from_name(std::string_view name) {
    if (name == "standard") return TemplateVariant::Standard;
    if (name == "simplified-task") return TemplateVariant::SimplifiedTask;
    if (name == "system-prefix") return TemplateVariant::SystemPrefix;
    if (name == "prefix-only") return TemplateVariant::PrefixOnly;
    if (name == "pure-raw") return TemplateVariant::PureRaw;
    if (name == "raw-concat") return TemplateVariant::RawConcat;
    fail(errc::config, "unknown template variant: " + std::string(name));
}

const char* direction_name(Direction d) {
    switch (d) {
        case Direction::QUnconditional: return "q";
        case Direction::QGivenA: return "q-given-a";
        case Direction::AUnconditional: return "a";
        case Direction::AGivenQ: return "a-given-q";
    }
    return "q";
}

Direction direction_from_name(std::string_view name) {
    if (name == "q") return Direction::QUnconditional;
    if (name == "q-given-a") return Direction::QGivenA;
    if (name == "a") return Direction::AUnconditional;
    if (name == "a-given-q") return Direction::AGivenQ;
    fail(errc::config, "unknown direction: " + std::string(name));
}

TemplateLibrary::TemplateLibrary()
    : reverse_task_(
          "TASK: Given an answer, generate the most likely computer science "
          "question that this answer is responding to. If the inferred question "
          "is outside computer science, respond with \"INVALID\"."),
      simplified_task_(
          "TASK: Given an answer, generate the most likely question that this "
          "answer is responding to."),
      question_prefix_("Question:") {}

TemplateLibrary TemplateLibrary::builtin() {
    return from_jsonl(default_templates_jsonl());
}

TemplateLibrary TemplateLibrary::from_file(const std::filesystem::path& path) {
    return from_jsonl(read_file(path));
}

TemplateLibrary TemplateLibrary::from_jsonl(std::string_view content) {
    TemplateLibrary lib;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        std::string_view line = content.substr(pos, (nl == std::string_view::npos ? content.size() : nl) - pos);
        pos = (nl == std::string_view::npos) ? content.size() : nl + 1;
        line_no++;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            fail(errc::parse, "templates line " + std::to_string(line_no) + ": not a JSON object");
        }
        FamilyTemplate t;
        try {
            t.family = j.at("family").get<std::string>();
            t.system_block = j.at("system_prompt").get<std::string>();
            t.user_open = j.at("user_open").get<std::string>();
            t.user_close = j.at("user_close").get<std::string>();
            t.assistant_open = j.at("assistant_open").get<std::string>();
            t.assistant_close = j.at("assistant_close").get<std::string>();
        } catch (const json::exception& e) {
            fail(errc::parse, "templates line " + std::to_string(line_no) + ": " + e.what());
        }
        if (j.contains("request_options")) t.request_options = j["request_options"];
        lib.families_[t.family] = std::move(t);
    }
    if (lib.families_.empty()) fail(errc::config, "template file defines no families");
    return lib;
}

const FamilyTemplate& TemplateLibrary::family(std::string_view name) const {
    auto it = families_.find(std::string(name));
    if (it == families_.end()) fail(errc::config, "unknown model family: " + std::string(name));
    return it->second;
}

PromptPlan plan_ppl_q(const Sample& sample, TemplateVariant variant,
                      const FamilyTemplate& family, const TemplateLibrary& lib) {
    PromptPlan plan;
    plan.variant = variant;
    plan.direction = Direction::QUnconditional;
    plan.family = family.family;
    plan.target_text = sample.query;
    switch (variant) {
        case TemplateVariant::Standard:
            plan.context_text = family.system_block + family.user_open;
            plan.closing_text = family.user_close;
            break;
        case TemplateVariant::SystemPrefix:
            plan.context_text = family.system_block;
            break;
        case TemplateVariant::PrefixOnly:
            plan.context_text = lib.question_prefix() + "\n";
            break;
        case TemplateVariant::PureRaw:
            plan.context_text.clear();
            break;
        default:
            fail(errc::config, std::string("variant ") + variant_name(variant) +
                                   " does not define a PPL(Q) construction");
    }
    return plan;
}

PromptPlan plan_ppl_q_given_a(const Sample& sample, TemplateVariant variant,
                              const FamilyTemplate& family, const TemplateLibrary& lib) {
    const std::string* task = nullptr;
    switch (variant) {
        case TemplateVariant::Standard: task = &lib.reverse_task_instruction(); break;
        case TemplateVariant::SimplifiedTask: task = &lib.simplified_task_instruction(); break;
        default:
            fail(errc::config, std::string("variant ") + variant_name(variant) +
                                   " does not define a PPL(Q|A) construction");
    }
    PromptPlan plan;
    plan.variant = variant;
    plan.direction = Direction::QGivenA;
    plan.family = family.family;
    plan.context_text = family.system_block + family.user_open + *task + " Answer: " +
                        sample.answer + family.user_close + family.assistant_open;
    plan.target_text = sample.query;
    plan.closing_text = family.assistant_close;
    return plan;
}

PromptPlan plan_ifd(const Sample& sample, TemplateVariant variant,
                    const FamilyTemplate& family, const TemplateLibrary& lib,
                    Direction direction) {
    (void)lib;
    if (direction != Direction::AUnconditional && direction != Direction::AGivenQ) {
        fail(errc::config, "plan_ifd direction must be answer-side");
    }
    PromptPlan plan;
    plan.variant = variant;
    plan.direction = direction;
    plan.family = family.family;
    plan.target_text = sample.answer;
    switch (variant) {
        case TemplateVariant::Standard:
            if (direction == Direction::AGivenQ) {
                plan.context_text = family.system_block + family.user_open + sample.query +
                                    family.user_close + family.assistant_open;
            } else {
                // User: [None] — an empty user turn ahead of the assistant turn.
                plan.context_text = family.system_block + family.user_open +
                                    family.user_close + family.assistant_open;
            }
            plan.closing_text = family.assistant_close;
            break;
        case TemplateVariant::RawConcat:
            // Plain text concatenation, no system prompt or role markers.
            plan.context_text = (direction == Direction::AGivenQ) ? sample.query : std::string();
            break;
        default:
            fail(errc::config, std::string("variant ") + variant_name(variant) +
                                   " does not define an IFD construction");
    }
    return plan;
}

PromptPlan plan_for(const Sample& sample, Direction direction, TemplateVariant variant,
                    const FamilyTemplate& family, const TemplateLibrary& lib) {
    switch (direction) {
        case Direction::QUnconditional:
            switch (variant) {
                case TemplateVariant::Standard:
                case TemplateVariant::SystemPrefix:
                case TemplateVariant::PrefixOnly:
                case TemplateVariant::PureRaw:
                    return plan_ppl_q(sample, variant, family, lib);
                case TemplateVariant::SimplifiedTask:
                    return plan_ppl_q(sample, TemplateVariant::Standard, family, lib);
                case TemplateVariant::RawConcat:
                    fail(errc::config, "raw-concat defines answer-side plans only");
            }
            break;
        case Direction::QGivenA:
            switch (variant) {
                case TemplateVariant::Standard:
                case TemplateVariant::SimplifiedTask:
                    return plan_ppl_q_given_a(sample, variant, family, lib);
                case TemplateVariant::SystemPrefix:
                case TemplateVariant::PrefixOnly:
                case TemplateVariant::PureRaw:
                    // These variants alter the PPL(Q) side only; the reverse
                    // task stays standard.
                    return plan_ppl_q_given_a(sample, TemplateVariant::Standard, family, lib);
                case TemplateVariant::RawConcat:
                    fail(errc::config, "raw-concat defines answer-side plans only");
            }
            break;
        case Direction::AUnconditional:
        case Direction::AGivenQ:
            switch (variant) {
                case TemplateVariant::Standard:
                case TemplateVariant::RawConcat:
                    return plan_ifd(sample, variant, family, lib, direction);
                default:
                    return plan_ifd(sample, TemplateVariant::Standard, family, lib, direction);
            }
    }
    fail(errc::internal, "unhandled plan dispatch");
}

} // namespace rmisel
