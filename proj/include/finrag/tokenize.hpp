#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace finrag {

/// A token with its original surface form plus the lowercased form used for
/// matching. Segmentation splits on anything that is not a letter or digit.
struct TokenSpan {
    std::string surface;
    std::string lower;
};

/// Segments text into maximal runs of letters/digits, UTF-8 aware: multi-byte
/// codepoints are kept intact and treated as word characters. Lowercasing is
/// ASCII-only. No stemming, no stopword removal; digits are kept.
std::vector<TokenSpan> tokenize_spans(std::string_view text);

/// Lowercased token stream (the form indexed and scored everywhere).
std::vector<std::string> tokenize(std::string_view text);

} // namespace finrag
