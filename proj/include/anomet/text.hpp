#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace anomet {

// Shortest decimal form that parses back to the same bits.
std::string fmt_real(double v);

// Strict whole-string parsers; failures raise ValidationError naming the
// offending token.
double parse_real(const std::string& s); // finite values only
int64_t parse_int(const std::string& s);
uint64_t parse_uint(const std::string& s);

std::vector<std::string> split_on(const std::string& line, char sep);

std::string trim(const std::string& s);

} // namespace anomet
