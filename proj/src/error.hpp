#pragma once

#include <stdexcept>
#include <string>

namespace rmisel {

enum class errc {
    io,            // unreadable/unwritable files
    parse,         // malformed input that is fatal at this level
    config,        // invalid configuration or flag combination
    precondition,  // caller violated an operation precondition
    backend,       // backend unreachable or failed after retries
    protocol,      // backend reachable but response violates the wire contract
    internal,
};

class Error : public std::runtime_error {
  public:
    Error(errc code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    errc code() const { return code_; }

  private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, std::string message) {
    throw Error(code, std::move(message));
}

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::io: return "io";
        case errc::parse: return "parse";
        case errc::config: return "config";
        case errc::precondition: return "precondition";
        case errc::backend: return "backend";
        case errc::protocol: return "protocol";
        case errc::internal: return "internal";
    }
    return "unknown";
}

} // namespace rmisel
