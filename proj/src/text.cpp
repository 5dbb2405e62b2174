#include "hwdetect/text.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstdint>

#include "hwdetect/error.hpp"

namespace hwdetect {
namespace {

template <typename Fn>
void for_each_code_point(std::string_view text, Fn&& fn) {
    const auto* s = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        const int32_t start = i;
        UChar32 c = 0;
        U8_NEXT(s, i, length, c);
        if (c < 0) {
            throw Error(ErrorCode::kUsage,
                        "invalid UTF-8 at byte offset " + std::to_string(start));
        }
        fn(c, static_cast<std::size_t>(start), static_cast<std::size_t>(i - start));
    }
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    };
    for_each_code_point(text, [&](UChar32 c, std::size_t offset, std::size_t len) {
        const std::string_view bytes = text.substr(offset, len);
        if (u_isUWhiteSpace(c)) {
            flush();
        } else if ((U_GET_GC_MASK(c) & (U_GC_P_MASK | U_GC_S_MASK)) != 0) {
            flush();
            words.emplace_back(bytes);
        } else {
            current.append(bytes);
        }
    });
    flush();
    return words;
}

std::size_t count_scalar_values(std::string_view text) {
    std::size_t n = 0;
    for_each_code_point(text, [&](UChar32, std::size_t, std::size_t) { ++n; });
    return n;
}

bool is_valid_utf8(std::string_view text) {
    try {
        count_scalar_values(text);
        return true;
    } catch (const Error&) {
        return false;
    }
}

}  // namespace hwdetect
