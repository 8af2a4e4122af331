#pragma once

#include <string>
#include <string_view>

namespace hara {

inline constexpr const char* kHashAlgorithm = "SHA-256";
inline constexpr const char* kZeroHash =
    "0000000000000000000000000000000000000000000000000000000000000000";

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace hara
