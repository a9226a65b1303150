// Deterministic text tokenization shared by all n-gram metrics.
// Splitting is on Unicode whitespace; lowercasing (when asked for) is
// ASCII-only so results never depend on locale.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace uqgen {

namespace detail {

// Decodes one UTF-8 code point starting at `i`; on malformed input consumes a
// single byte and reports it as a non-space character.
inline std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int extra = 0;
    std::uint32_t cp = 0;
    if ((b0 & 0xe0) == 0xc0) {
        extra = 1;
        cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
        extra = 2;
        cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xfffd;
    }
    if (i + static_cast<std::size_t>(extra) >= s.size()) {
        ++i;
        return 0xfffd;
    }
    for (int k = 1; k <= extra; ++k) {
        unsigned char b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xc0) != 0x80) {
            ++i;
            return 0xfffd;
        }
        cp = (cp << 6) | (b & 0x3f);
    }
    i += static_cast<std::size_t>(extra) + 1;
    return cp;
}

inline bool is_unicode_space(std::uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d: case 0x20:
        case 0x85: case 0xa0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202f: case 0x205f: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200a;
    }
}

} // namespace detail

// Whitespace-delimited tokens. `lowercase` folds ASCII A-Z only.
inline std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        std::uint32_t cp = detail::decode_utf8(text, i);
        if (detail::is_unicode_space(cp)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            for (std::size_t k = start; k < i; ++k) {
                char c = text[k];
                if (lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
                cur.push_back(c);
            }
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace uqgen
