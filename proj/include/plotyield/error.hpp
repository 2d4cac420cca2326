#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace plotyield {

// Runtime error with a short machine-readable code next to the human
// message, so the CLI can emit single-line parsable failures.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool cond, const std::string& code, const std::string& message) {
    if (!cond) fail(code, message);
}

}  // namespace plotyield
