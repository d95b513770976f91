#include "favheat/error.hpp"

namespace favheat {

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

int exit_code(const Error& e) noexcept {
    if (dynamic_cast<const InfeasibleError*>(&e)) return 4;
    if (dynamic_cast<const ParseError*>(&e)) return 3;
    return 2;
}

}  // namespace favheat
