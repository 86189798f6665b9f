#pragma once

#include <string>

namespace comove {

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace comove
