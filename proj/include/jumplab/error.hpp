#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace jumplab {

enum class ErrorKind {
    config,
    shape,
    label,
    numeric,
    io,
    parse,
    capacity,
    encoding,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so the CLI can map it
/// onto an exit code and a machine-parsable prefix.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace jumplab
