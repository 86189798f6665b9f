#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace comove::csv {

// General format with 17 significant digits; round-trips every double.
std::string fmt17(double x);

// Splits on commas; no quoting (none of the file formats need it).
std::vector<std::string_view> split(std::string_view line);

std::string_view trim(std::string_view s);

// Reads the next line, dropping a trailing '\r'. Returns false at EOF.
bool next_line(std::istream& in, std::string& line);

double parse_double(std::string_view field, const std::string& source, std::size_t line,
                    const char* what);
long long parse_int(std::string_view field, const std::string& source, std::size_t line,
                    const char* what);

// Throws ParseError unless `line` equals `expected` (after trimming).
void expect_header(std::string_view line, std::string_view expected, const std::string& source);

}  // namespace comove::csv
