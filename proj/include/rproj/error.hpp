#pragma once

#include <stdexcept>
#include <string>

namespace rproj {

// Every failure raised by the library derives from Error. The CLI maps the
// category onto its exit code.
enum class ErrorKind {
    invalid_dimension,
    invalid_input,
    degenerate,
    parse,
    config,
    out_of_regime,
    numerical,
    size_limit,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::out_of_regime:
        return 3;
    case ErrorKind::numerical:
        return 4;
    default:
        return 2;
    }
}

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) {
        fail(kind, what);
    }
}

} // namespace detail
} // namespace rproj
