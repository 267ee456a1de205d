#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace l1c {

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Accepts padded or unpadded input; whitespace is ignored. Throws
/// Error(InvalidArgument) on characters outside the alphabet.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace l1c
