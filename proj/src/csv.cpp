#include "comove/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "comove/error.hpp"

namespace comove::csv {

std::string fmt17(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

double parse_double(std::string_view field, const std::string& source, std::size_t line,
                    const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v))
        throw ParseError(source, line, std::string("malformed ") + what + " '" + std::string(field) + "'");
    return v;
}

long long parse_int(std::string_view field, const std::string& source, std::size_t line,
                    const char* what) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
        throw ParseError(source, line, std::string("malformed ") + what + " '" + std::string(field) + "'");
    return v;
}

void expect_header(std::string_view line, std::string_view expected, const std::string& source) {
    if (trim(line) != expected)
        throw ParseError(source, 1, "expected header '" + std::string(expected) + "', got '" +
                                        std::string(line) + "'");
}

}  // namespace comove::csv
