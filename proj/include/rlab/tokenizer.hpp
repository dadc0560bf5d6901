#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rlab {

using TokenId = std::uint32_t;

// FNV-1a, 64-bit. Used for token bucketing and content fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Lowercased word pieces of `text`, split on whitespace and punctuation.
//
// Input is decoded as UTF-8. Unicode whitespace (White_Space property) and
// punctuation (ASCII punctuation, Latin-1 punctuation, General Punctuation,
// CJK Symbols and Punctuation, fullwidth ASCII punctuation) separate words and
// are dropped. Case folding covers ASCII, Latin-1, basic Greek and Cyrillic.
// Malformed UTF-8 bytes are kept verbatim as word characters.
std::vector<std::string> split_words(std::string_view text);

// fnv1a64(word) mod vocab_size for every word of split_words(text).
std::vector<TokenId> tokenize(std::string_view text, std::size_t vocab_size);

}  // namespace rlab
