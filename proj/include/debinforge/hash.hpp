#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace debinforge {

std::string sha256_hex(std::string_view data);

// First 16 hex characters of the SHA-256 digest.
std::string short_id(std::string_view data);

std::uint64_t fnv1a64(std::string_view data);

} // namespace debinforge
