#include "anomet/text.hpp"

#include <charconv>
#include <cmath>

#include "anomet/errors.hpp"

namespace anomet {

std::string fmt_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw NumericalError("failed to format real value");
    return std::string(buf, end);
}

namespace {

template <typename T>
T parse_whole(const std::string& s, const char* what) {
    T v{};
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end) {
        throw ValidationError("'" + s + "' is not " + what);
    }
    return v;
}

} // namespace

double parse_real(const std::string& s) {
    const double v = parse_whole<double>(s, "a real number");
    if (!std::isfinite(v)) throw ValidationError("'" + s + "' is not finite");
    return v;
}

int64_t parse_int(const std::string& s) { return parse_whole<int64_t>(s, "an integer"); }

uint64_t parse_uint(const std::string& s) {
    return parse_whole<uint64_t>(s, "a non-negative integer");
}

std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> fields;
    size_t start = 0;
    for (;;) {
        const size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(const std::string& s) {
    size_t begin = 0;
    size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

} // namespace anomet
