#include "score_cache.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

std::string ScoreCacheEntry::key() const {
    return join_key({sample_id, model_id, template_variant});
}

std::string cache_entry_to_json(const ScoreCacheEntry& entry) {
    json j;
    j["sample_id"] = entry.sample_id;
    j["model_id"] = entry.model_id;
    j["template_variant"] = entry.template_variant;
    auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) j[name] = double_to_string(*v);
    };
    put("ppl_q", entry.ppl_q);
    put("ppl_q_given_a", entry.ppl_q_given_a);
    put("ppl_a", entry.ppl_a);
    put("ppl_a_given_q", entry.ppl_a_given_q);
    return j.dump();
}

std::optional<ScoreCacheEntry> cache_entry_from_json(std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("sample_id") || !j["sample_id"].is_string() ||
        !j.contains("model_id") || !j["model_id"].is_string() ||
        !j.contains("template_variant") || !j["template_variant"].is_string()) {
        return std::nullopt;
    }
    ScoreCacheEntry e;
    e.sample_id = j["sample_id"].get<std::string>();
    e.model_id = j["model_id"].get<std::string>();
    e.template_variant = j["template_variant"].get<std::string>();
    auto read = [&](const char* name, std::optional<double>& out) -> bool {
        if (!j.contains(name)) return true;
        if (!j[name].is_string()) return false;
        auto v = string_to_double(j[name].get<std::string>());
        if (!v) return false;
        out = *v;
        return true;
    };
    if (!read("ppl_q", e.ppl_q) || !read("ppl_q_given_a", e.ppl_q_given_a) ||
        !read("ppl_a", e.ppl_a) || !read("ppl_a_given_q", e.ppl_a_given_q)) {
        return std::nullopt;
    }
    return e;
}

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
    load();
}

void ScoreCache::load() {
    if (!std::filesystem::exists(path_)) return;
    for (const auto& line : read_lines(path_)) {
        if (trim(line).empty()) continue;
        auto entry = cache_entry_from_json(line);
        if (!entry) {
            corrupted_++;
            continue;
        }
        entries_[entry->key()] = std::move(*entry);
    }
}

std::optional<ScoreCacheEntry> ScoreCache::get(std::string_view sample_id,
                                               std::string_view model_id,
                                               std::string_view template_variant) const {
    std::string key = join_key({sample_id, model_id, template_variant});
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ScoreCache::validate(const ScoreCacheEntry& entry, bool normalized_probs) {
    if (entry.sample_id.empty()) fail(errc::precondition, "cache entry without sample_id");
    if (entry.model_id.empty()) fail(errc::precondition, "cache entry without model_id");
    if (entry.template_variant.empty()) fail(errc::precondition, "cache entry without template_variant");
    for (auto [name, v] : {std::pair{"ppl_q", entry.ppl_q},
                           {"ppl_q_given_a", entry.ppl_q_given_a},
                           {"ppl_a", entry.ppl_a},
                           {"ppl_a_given_q", entry.ppl_a_given_q}}) {
        if (!v) continue;
        if (!std::isfinite(*v) || *v <= 0) {
            fail(errc::precondition, std::string(name) + " must be finite and positive");
        }
        if (normalized_probs && *v < 1.0) {
            fail(errc::precondition,
                 std::string(name) + " = " + double_to_string(*v) +
                     " violates perplexity >= 1 for a normalized backend");
        }
    }
}

void ScoreCache::put(const ScoreCacheEntry& entry, bool normalized_probs) {
    validate(entry, normalized_probs);
    std::unique_lock lock(mutex_);
    append_line(entry);
    entries_[entry.key()] = entry;
}

void ScoreCache::append_line(const ScoreCacheEntry& entry) {
    if (path_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
    }
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) fail(errc::io, "cannot append to cache: " + path_.string());
    out << cache_entry_to_json(entry) << '\n';
    if (!out) fail(errc::io, "cache write failed: " + path_.string());
}

std::size_t ScoreCache::compact() {
    std::unique_lock lock(mutex_);
    std::size_t before = 0;
    if (std::filesystem::exists(path_)) {
        for (const auto& line : read_lines(path_)) {
            if (!trim(line).empty()) before++;
        }
    }
    std::string out;
    for (const auto& [key, entry] : entries_) {
        out += cache_entry_to_json(entry);
        out.push_back('\n');
    }
    write_file(path_, out);
    return before - entries_.size();
}

std::size_t ScoreCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

} // namespace rmisel
