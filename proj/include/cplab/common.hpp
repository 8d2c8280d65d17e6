#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cplab {

template <typename... Ts>
std::string cat(const Ts&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    return os.str();
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <typename... Ts>
[[noreturn]] void fail(const Ts&... parts) {
    throw std::invalid_argument(cat(parts...));
}

template <typename... Ts>
void check(bool ok, const Ts&... parts) {
    if (!ok) fail(parts...);
}

}  // namespace cplab
