#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rmisel {

// ---------------------------------------------------------------- strings

std::string trim(std::string_view s);

// Whitespace tokenization (runs of non-space bytes). This is the token
// definition used by the builtin n-gram backend and its token counts.
std::vector<std::string> whitespace_tokens(std::string_view text);
std::size_t whitespace_token_count(std::string_view text);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view s, std::string_view needle);

// Joins components into a single key string, escaping the separator so
// distinct tuples can never collide.
std::string join_key(const std::vector<std::string_view>& parts);

// ---------------------------------------------------------------- numbers

// Shortest decimal text that parses back to the identical double.
std::string double_to_string(double v);
// Strict parse of the full string; nullopt on trailing junk or empty input.
std::optional<double> string_to_double(std::string_view s);

// ---------------------------------------------------------------- files

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
// Each element is one line without its trailing newline.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// ---------------------------------------------------------------- sha-256

// FIPS 180-4 SHA-256, hex-encoded. Used for corpus digests and request ids.
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

// ---------------------------------------------------------------- rng

// Deterministic RNG for everything that must reproduce byte-exactly across
// platforms. mt19937_64 output is fully specified by the standard; the
// bounded draw uses rejection sampling instead of std::uniform_int_distribution,
// whose mapping is implementation-defined.
class DetRng {
  public:
    explicit DetRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n), n >= 1.
    std::uint64_t next_below(std::uint64_t n);

    // Uniform in [0, 1) with 53 random bits.
    double next_double();

    // Partial Fisher-Yates: the first k slots of a uniformly drawn
    // k-permutation of [0, n).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

  private:
    std::mt19937_64 engine_;
};

// Mixes a base seed with a stream index into an independent per-item seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

} // namespace rmisel
