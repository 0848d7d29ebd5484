#include "templating.hpp"

namespace rmisel {

// Keep in sync with share/templates.jsonl (a test compares the two).
std::string_view default_templates_jsonl() {
    static const std::string_view content = R"({"family":"deepseek-coder","system_prompt":"You are an AI programming assistant, utilizing the Deepseek Coder model, developed by Deepseek Company, and you only answer questions related to computer science. For politically sensitive questions, security and privacy issues, and other non-computer science questions, you will refuse to answer.\n","user_open":"### Instruction:\n","user_close":"\n","assistant_open":"### Response:\n","assistant_close":"\n<|EOT|>","request_options":{}}
{"family":"qwen3","system_prompt":"<|im_start|>system\nYou are an AI programming assistant, and you only answer questions related to computer science. For politically sensitive questions, security and privacy issues, and other non-computer science questions, you will refuse to answer.<|im_end|>\n","user_open":"<|im_start|>user\n","user_close":"<|im_end|>\n","assistant_open":"<|im_start|>assistant\n","assistant_close":"<|im_end|>\n","request_options":{"disable_extended_reasoning":true}}
{"family":"plain","system_prompt":"","user_open":"User: ","user_close":"\n","assistant_open":"Assistant: ","assistant_close":"\n","request_options":{}}
)";
    return content;
}

} // namespace rmisel
