#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hwdetect {

/// Splits UTF-8 text on Unicode whitespace and emits every punctuation or
/// symbol character (general categories P* and S*) as its own token. Case is
/// preserved. Throws Error(kUsage) on malformed UTF-8.
std::vector<std::string> split_words(std::string_view text);

/// Number of Unicode scalar values in a UTF-8 string.
std::size_t count_scalar_values(std::string_view text);

bool is_valid_utf8(std::string_view text);

}  // namespace hwdetect
