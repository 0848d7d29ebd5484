#include "defectlab.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "ranking.hpp"
#include "util.hpp"

namespace rmisel {

using nlohmann::json;

const char* defect_mode_name(DefectMode m) {
    switch (m) {
        case DefectMode::Clean: return "clean";
        case DefectMode::KeywordEcho: return "keyword-echo";
        case DefectMode::Misalignment: return "misalignment";
        case DefectMode::OffTopicQuery: return "off-topic-query";
    }
    return "clean";
}

DefectMode defect_mode_from_name(std::string_view name) {
    if (name == "clean") return DefectMode::Clean;
    if (name == "keyword-echo") return DefectMode::KeywordEcho;
    if (name == "misalignment") return DefectMode::Misalignment;
    if (name == "off-topic-query") return DefectMode::OffTopicQuery;
    fail(errc::config, "unknown defect mode: " + std::string(name));
}

namespace {

constexpr std::int64_t kBlockWords = 12;   // words per topic block
constexpr std::int64_t kEchoRepeats = 3;   // restatement passes in echo answers

const std::vector<std::string>& greetings() {
    static const std::vector<std::string> list = {
        "hi", "hello there", "hey", "good morning", "thanks a lot", "how are you doing",
    };
    return list;
}

} // namespace

const std::vector<std::string>& default_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        const std::vector<std::string> prefixes = {
            "bit",   "hash",  "byte",  "lex",    "graph", "node",  "heap",  "stack",
            "queue", "trie",  "shard", "chunk",  "tensor","probe", "flux",  "lattice",
            "kernel","packet","branch","cipher", "vertex","orbit", "prism", "quanta",
        };
        const std::vector<std::string> suffixes = {
            "fold", "walk", "gate", "mapper", "bridge", "loom", "forge", "spire", "mesh", "drift",
        };
        std::vector<std::string> out;
        out.reserve(prefixes.size() * suffixes.size());
        for (const auto& p : prefixes) {
            for (const auto& s : suffixes) out.push_back(p + s);
        }
        return out;
    }();
    return vocab;
}

void DefectSpec::validate() const {
    double total = 0.0;
    for (const auto& [mode, rate] : rates) {
        if (rate < 0.0) fail(errc::config, "defect rate must be nonnegative");
        total += rate;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(errc::config, "defect rates must sum to 1");
    if (query_words_min < 1 || query_words_min > query_words_max) {
        fail(errc::config, "bad query length range");
    }
    if (answer_words_min < 1 || answer_words_min > answer_words_max) {
        fail(errc::config, "bad answer length range");
    }
    const auto& vocab = vocabulary.empty() ? default_vocabulary() : vocabulary;
    const auto v = static_cast<std::int64_t>(vocab.size());
    std::int64_t topic_words = v * 2 / 3;
    // Need one full topic block with room for non-query filler, and a
    // non-empty disjoint pool for misaligned answers.
    if (topic_words / kBlockWords < 1 || kBlockWords <= query_words_max || v - topic_words < 1) {
        fail(errc::config, "vocabulary too small for the requested lengths");
    }
}

DefectSpec DefectSpec::from_json(const json& j) {
    DefectSpec spec;
    if (j.contains("rates")) {
        spec.rates.clear();
        for (auto it = j["rates"].begin(); it != j["rates"].end(); ++it) {
            spec.rates[defect_mode_from_name(it.key())] = it.value().get<double>();
        }
    }
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("vocabulary")) spec.vocabulary = j["vocabulary"].get<std::vector<std::string>>();
    if (j.contains("query_words")) {
        spec.query_words_min = j["query_words"].at(0).get<std::int64_t>();
        spec.query_words_max = j["query_words"].at(1).get<std::int64_t>();
    }
    if (j.contains("answer_words")) {
        spec.answer_words_min = j["answer_words"].at(0).get<std::int64_t>();
        spec.answer_words_max = j["answer_words"].at(1).get<std::int64_t>();
    }
    spec.validate();
    return spec;
}

json DefectSpec::to_json() const {
    json j;
    json rates_json = json::object();
    for (const auto& [mode, rate] : rates) rates_json[defect_mode_name(mode)] = rate;
    j["rates"] = rates_json;
    j["seed"] = seed;
    if (!vocabulary.empty()) j["vocabulary"] = vocabulary;
    j["query_words"] = {query_words_min, query_words_max};
    j["answer_words"] = {answer_words_min, answer_words_max};
    return j;
}

std::vector<Sample> GeneratedCorpus::corpus() const {
    std::vector<Sample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.sample);
    return out;
}

std::map<std::string, DefectMode> GeneratedCorpus::labels() const {
    std::map<std::string, DefectMode> out;
    for (const auto& s : samples) out.emplace(s.sample.id, s.mode);
    return out;
}

namespace {

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); i++) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

// Largest-remainder allocation of n samples over the mode rates.
std::vector<std::pair<DefectMode, std::int64_t>> allocate_counts(const DefectSpec& spec,
                                                                 std::int64_t n) {
    std::vector<std::pair<DefectMode, std::int64_t>> counts;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::int64_t assigned = 0;
    for (const auto& [mode, rate] : spec.rates) {
        double exact = rate * static_cast<double>(n);
        auto base = static_cast<std::int64_t>(std::floor(exact));
        counts.emplace_back(mode, base);
        remainders.emplace_back(exact - std::floor(exact), counts.size() - 1);
        assigned += base;
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; i = (i + 1) % remainders.size()) {
        counts[remainders[i].second].second++;
        assigned++;
    }
    return counts;
}

} // namespace

GeneratedCorpus generate_corpus(const DefectSpec& spec, std::int64_t n) {
    if (n < 1) fail(errc::precondition, "generate_corpus needs n >= 1");
    spec.validate();

    const auto& vocab = spec.vocabulary.empty() ? default_vocabulary() : spec.vocabulary;
    const auto v = static_cast<std::int64_t>(vocab.size());
    const std::int64_t topic_words = v * 2 / 3;
    const std::int64_t num_blocks = topic_words / kBlockWords;
    // Disjoint pool for misaligned/off-topic answers.
    std::vector<std::string> off_pool(vocab.begin() + topic_words, vocab.end());

    // Mode sequence: exact counts per rate, order shuffled by the seed.
    std::vector<DefectMode> modes;
    modes.reserve(static_cast<std::size_t>(n));
    for (const auto& [mode, count] : allocate_counts(spec, n)) {
        for (std::int64_t i = 0; i < count; i++) modes.push_back(mode);
    }
    DetRng shuffle_rng(mix_seed(spec.seed, 0));
    for (std::size_t i = modes.size(); i > 1; i--) {
        std::size_t j = static_cast<std::size_t>(shuffle_rng.next_below(i));
        std::swap(modes[i - 1], modes[j]);
    }

    int id_width = 1;
    for (std::int64_t rest = n; rest >= 10; rest /= 10) id_width++;

    GeneratedCorpus out;
    out.samples.reserve(static_cast<std::size_t>(n));
    for (std::int64_t index = 0; index < n; index++) {
        DetRng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(index) + 1));
        DefectMode mode = modes[static_cast<std::size_t>(index)];

        const std::int64_t block =
            static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(num_blocks)));
        auto block_word = [&](std::int64_t i) -> const std::string& {
            return vocab[static_cast<std::size_t>(block * kBlockWords + i)];
        };

        const std::int64_t m =
            spec.query_words_min +
            static_cast<std::int64_t>(rng.next_below(
                static_cast<std::uint64_t>(spec.query_words_max - spec.query_words_min + 1)));
        const std::int64_t a_len =
            spec.answer_words_min +
            static_cast<std::int64_t>(rng.next_below(
                static_cast<std::uint64_t>(spec.answer_words_max - spec.answer_words_min + 1)));

        // m distinct content words from the topic block.
        std::vector<std::int64_t> block_indices(static_cast<std::size_t>(kBlockWords));
        for (std::int64_t i = 0; i < kBlockWords; i++) block_indices[static_cast<std::size_t>(i)] = i;
        for (std::int64_t i = 0; i < m; i++) {
            std::int64_t j = i + static_cast<std::int64_t>(
                                     rng.next_below(static_cast<std::uint64_t>(kBlockWords - i)));
            std::swap(block_indices[static_cast<std::size_t>(i)], block_indices[static_cast<std::size_t>(j)]);
        }
        std::vector<std::string> q_words;
        for (std::int64_t i = 0; i < m; i++) q_words.push_back(block_word(block_indices[static_cast<std::size_t>(i)]));
        std::vector<std::string> non_q_words;  // topic filler that avoids the query words
        for (std::int64_t i = m; i < kBlockWords; i++) non_q_words.push_back(block_word(block_indices[static_cast<std::size_t>(i)]));

        auto fill_from = [&](std::vector<std::string>& dest, const std::vector<std::string>& pool,
                             std::int64_t count) {
            for (std::int64_t i = 0; i < count; i++) {
                dest.push_back(pool[static_cast<std::size_t>(rng.next_below(pool.size()))]);
            }
        };

        Sample sample;
        std::string id = std::to_string(index + 1);
        sample.id = "gen-" + std::string(static_cast<std::size_t>(id_width) - id.size(), '0') + id;

        std::vector<std::string> a_words;
        switch (mode) {
            case DefectMode::Clean: {
                // ceil(m/2) query words appear exactly once; the rest never do.
                std::int64_t included = (m + 1) / 2;
                std::int64_t filler = std::max<std::int64_t>(a_len - included, 0);
                fill_from(a_words, non_q_words, filler);
                for (std::int64_t i = 0; i < included; i++) {
                    std::size_t pos = static_cast<std::size_t>(rng.next_below(a_words.size() + 1));
                    a_words.insert(a_words.begin() + static_cast<std::ptrdiff_t>(pos), q_words[static_cast<std::size_t>(i)]);
                }
                sample.query = "how to " + join_words(q_words);
                break;
            }
            case DefectMode::KeywordEcho: {
                for (std::int64_t r = 0; r < kEchoRepeats; r++) {
                    for (const auto& w : q_words) a_words.push_back(w);
                }
                fill_from(a_words, non_q_words,
                          std::max<std::int64_t>(a_len - static_cast<std::int64_t>(a_words.size()), 0));
                sample.query = "how to " + join_words(q_words);
                break;
            }
            case DefectMode::Misalignment: {
                fill_from(a_words, off_pool, a_len);
                sample.query = "how to " + join_words(q_words);
                break;
            }
            case DefectMode::OffTopicQuery: {
                sample.query = greetings()[static_cast<std::size_t>(
                    rng.next_below(greetings().size()))];
                fill_from(a_words, off_pool, a_len);
                break;
            }
        }
        sample.answer = join_words(a_words);
        out.samples.push_back({std::move(sample), mode});
    }
    return out;
}

void write_labels(const std::filesystem::path& path, const GeneratedCorpus& corpus) {
    std::string out;
    for (const auto& s : corpus.samples) {
        json j;
        j["id"] = s.sample.id;
        j["mode"] = defect_mode_name(s.mode);
        out += j.dump();
        out.push_back('\n');
    }
    write_file(path, out);
}

std::map<std::string, DefectMode> read_labels(const std::filesystem::path& path) {
    std::map<std::string, DefectMode> out;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        out[j.at("id").get<std::string>()] = defect_mode_from_name(j.at("mode").get<std::string>());
    }
    return out;
}

std::vector<ModeSummary> separation_metrics(const std::vector<ScoreRecord>& scores,
                                            const std::map<std::string, DefectMode>& labels,
                                            std::int64_t k_bins) {
    for (const auto& r : scores) {
        if (r.status == ScoreStatus::Ok && !labels.count(r.sample_id)) {
            fail(errc::precondition, "unlabeled sample: " + r.sample_id);
        }
    }

    BinAssignment bins = stratify(scores, k_bins);
    std::vector<RankRecord> ranks = rank_within_bins(scores, bins);
    std::map<std::string_view, const RankRecord*> rank_of;
    for (const auto& r : ranks) rank_of.emplace(r.sample_id, &r);

    std::map<DefectMode, std::vector<double>> rmi_by_mode;
    std::map<DefectMode, std::array<std::int64_t, 10>> decile_by_mode;
    for (const auto& r : scores) {
        if (r.status != ScoreStatus::Ok || !r.rmi) continue;
        DefectMode mode = labels.at(r.sample_id);
        rmi_by_mode[mode].push_back(*r.rmi);
        const RankRecord* rank = rank_of.at(r.sample_id);
        auto decile = static_cast<std::size_t>((rank->within_bin_rank - 1) * 10 / rank->bin_size);
        decile_by_mode[mode][decile]++;
    }

    std::vector<ModeSummary> out;
    for (auto& [mode, values] : rmi_by_mode) {
        ModeSummary s;
        s.mode = mode;
        s.count = static_cast<std::int64_t>(values.size());
        std::sort(values.begin(), values.end());
        s.min_rmi = values.front();
        s.max_rmi = values.back();
        double sum = 0.0;
        for (double x : values) sum += x;
        s.mean_rmi = sum / static_cast<double>(values.size());
        const std::size_t mid = values.size() / 2;
        s.median_rmi = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
        for (std::size_t d = 0; d < 10; d++) {
            s.decile_fractions[d] =
                static_cast<double>(decile_by_mode[mode][d]) / static_cast<double>(values.size());
        }
        out.push_back(s);
    }
    return out;
}

json mode_summaries_to_json(const std::vector<ModeSummary>& summaries) {
    json j = json::object();
    for (const auto& s : summaries) {
        json m;
        m["count"] = s.count;
        m["mean_rmi"] = s.mean_rmi;
        m["median_rmi"] = s.median_rmi;
        m["min_rmi"] = s.min_rmi;
        m["max_rmi"] = s.max_rmi;
        m["decile_fractions"] = s.decile_fractions;
        j[defect_mode_name(s.mode)] = m;
    }
    return j;
}

} // namespace rmisel
