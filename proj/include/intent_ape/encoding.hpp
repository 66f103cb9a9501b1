#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace intent_ape {

[[nodiscard]] std::string base64_encode(std::span<const std::uint8_t> bytes);
[[nodiscard]] std::string sha256_hex(std::string_view data);

/// 64-bit mix used to derive independent seeds from (seed, key) pairs.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::string_view key);

}  // namespace intent_ape
