#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace blm::text {

// Decodes one UTF-8 codepoint starting at `pos`. Invalid bytes are returned
// as-is (one byte, codepoint = byte value | 0xDC00 is NOT used; we keep the
// raw byte as a codepoint in [0x80,0xFF] with length 1).
struct Decoded {
    uint32_t cp;
    int len;
};
Decoded decode_utf8(std::string_view s, size_t pos);

void append_utf8(std::string& out, uint32_t cp);
std::string encode_utf8(const std::vector<uint32_t>& cps);
std::vector<uint32_t> to_codepoints(std::string_view s);

// Unicode simple lowercase over the common blocks (ASCII, Latin-1,
// Latin Extended-A, Greek, Cyrillic). Codepoints outside those blocks pass
// through unchanged.
uint32_t simple_lower(uint32_t cp);
std::string casefold(std::string_view s);

// Canonical composition for the frequent precomposed forms (Latin letters
// with acute/grave/circumflex/tilde/diaeresis, Arabic hamza forms). Input
// already in NFC passes through unchanged.
std::string compose_nfc(std::string_view s);

bool is_ascii_space(char c);

uint64_t fnv1a64(std::string_view s, uint64_t seed = 14695981039346656037ull);
std::string fnv1a64_hex(std::string_view s);

}  // namespace blm::text
