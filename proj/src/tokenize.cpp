#include "finrag/tokenize.hpp"

#include <cstdint>

namespace finrag {

namespace {

inline bool ascii_alnum(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline char ascii_lower(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

// Length of the UTF-8 sequence starting at a lead byte, 0 for continuation
// or invalid lead bytes.
inline int utf8_len(unsigned char c) {
    if (c < 0x80) return 1;
    if ((c & 0xE0) == 0xC0) return 2;
    if ((c & 0xF0) == 0xE0) return 3;
    if ((c & 0xF8) == 0xF0) return 4;
    return 0;
}

uint32_t decode_codepoint(std::string_view bytes) {
    unsigned char c = static_cast<unsigned char>(bytes[0]);
    switch (bytes.size()) {
        case 1: return c;
        case 2:
            return ((c & 0x1Fu) << 6) | (static_cast<unsigned char>(bytes[1]) & 0x3Fu);
        case 3:
            return ((c & 0x0Fu) << 12) |
                   ((static_cast<unsigned char>(bytes[1]) & 0x3Fu) << 6) |
                   (static_cast<unsigned char>(bytes[2]) & 0x3Fu);
        default:
            return ((c & 0x07u) << 18) |
                   ((static_cast<unsigned char>(bytes[1]) & 0x3Fu) << 12) |
                   ((static_cast<unsigned char>(bytes[2]) & 0x3Fu) << 6) |
                   (static_cast<unsigned char>(bytes[3]) & 0x3Fu);
    }
}

// Non-ASCII codepoints count as word characters except the common punctuation
// and symbol blocks below (dashes, bullets, typographic quotes, currency and
// math signs). Financial filings use these heavily, so "2019–2021" must split.
bool is_word_codepoint(uint32_t cp) {
    if ((cp >= 0x0080 && cp <= 0x00BF) || cp == 0x00D7 || cp == 0x00F7) return false;
    if (cp >= 0x2000 && cp <= 0x206F) return false; // general punctuation
    if (cp >= 0x20A0 && cp <= 0x20CF) return false; // currency symbols
    if (cp >= 0x2100 && cp <= 0x2BFF) return false; // letterlike, arrows, math, misc
    if (cp >= 0x3000 && cp <= 0x303F) return false; // CJK punctuation
    if (cp >= 0xFE30 && cp <= 0xFE4F) return false; // CJK compatibility forms
    if (cp >= 0xFF01 && cp <= 0xFF0F) return false; // fullwidth punctuation
    return true;
}

} // namespace

std::vector<TokenSpan> tokenize_spans(std::string_view text) {
    std::vector<TokenSpan> out;
    TokenSpan cur;
    bool in_token = false;

    auto flush = [&] {
        if (in_token) {
            out.push_back(std::move(cur));
            cur = TokenSpan{};
            in_token = false;
        }
    };

    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            if (ascii_alnum(c)) {
                cur.surface.push_back(static_cast<char>(c));
                cur.lower.push_back(ascii_lower(c));
                in_token = true;
            } else {
                flush();
            }
            ++i;
            continue;
        }
        int len = utf8_len(c);
        if (len == 0 || i + static_cast<size_t>(len) > n) {
            // stray continuation or truncated sequence: acts as a separator
            flush();
            ++i;
            continue;
        }
        auto bytes = text.substr(i, static_cast<size_t>(len));
        if (is_word_codepoint(decode_codepoint(bytes))) {
            // kept verbatim; no case folding outside ASCII
            cur.surface.append(bytes);
            cur.lower.append(bytes);
            in_token = true;
        } else {
            flush();
        }
        i += static_cast<size_t>(len);
    }
    flush();
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (auto& span : tokenize_spans(text))
        out.push_back(std::move(span.lower));
    return out;
}

} // namespace finrag
