#pragma once

#include <stdexcept>
#include <sstream>
#include <string>

namespace kerl {

// I/O and file-format failures (CLI exit code 3).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents; carries file/line context in the message.
struct ParseError : IoError {
    ParseError(const std::string& file, long line, const std::string& msg)
        : IoError(file + ":" + std::to_string(line) + ": " + msg) {}
    explicit ParseError(const std::string& msg) : IoError(msg) {}
};

// Non-finite values, divergence, out-of-range numerics (CLI exit code 4).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void msg_cat(std::ostringstream&) {}
template <class T, class... Rest>
void msg_cat(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    msg_cat(os, rest...);
}
}  // namespace detail

template <class... Parts>
std::string msg(const Parts&... parts) {
    std::ostringstream os;
    detail::msg_cat(os, parts...);
    return os.str();
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace kerl
