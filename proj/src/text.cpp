#include "blm/text.hpp"

#include <array>
#include <cstdio>
#include <unordered_map>

namespace blm::text {

Decoded decode_utf8(std::string_view s, size_t pos) {
    auto byte = [&](size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char b0 = byte(pos);
    if (b0 < 0x80) return {b0, 1};
    auto cont = [&](size_t i) {
        return i < s.size() && (byte(i) & 0xC0) == 0x80;
    };
    if ((b0 & 0xE0) == 0xC0 && cont(pos + 1)) {
        uint32_t cp = (uint32_t(b0 & 0x1F) << 6) | (byte(pos + 1) & 0x3F);
        if (cp >= 0x80) return Decoded{cp, 2};
    } else if ((b0 & 0xF0) == 0xE0 && cont(pos + 1) && cont(pos + 2)) {
        uint32_t cp = (uint32_t(b0 & 0x0F) << 12) |
                      (uint32_t(byte(pos + 1) & 0x3F) << 6) |
                      (byte(pos + 2) & 0x3F);
        if (cp >= 0x800 && !(cp >= 0xD800 && cp <= 0xDFFF)) return Decoded{cp, 3};
    } else if ((b0 & 0xF8) == 0xF0 && cont(pos + 1) && cont(pos + 2) && cont(pos + 3)) {
        uint32_t cp = (uint32_t(b0 & 0x07) << 18) |
                      (uint32_t(byte(pos + 1) & 0x3F) << 12) |
                      (uint32_t(byte(pos + 2) & 0x3F) << 6) |
                      (byte(pos + 3) & 0x3F);
        if (cp >= 0x10000 && cp <= 0x10FFFF) return Decoded{cp, 4};
    }
    // Invalid sequence: surface the raw byte.
    return {b0, 1};
}

void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode_utf8(const std::vector<uint32_t>& cps) {
    std::string out;
    for (uint32_t cp : cps) append_utf8(out, cp);
    return out;
}

std::vector<uint32_t> to_codepoints(std::string_view s) {
    std::vector<uint32_t> out;
    size_t i = 0;
    while (i < s.size()) {
        auto [cp, len] = decode_utf8(s, i);
        out.push_back(cp);
        i += len;
    }
    return out;
}

uint32_t simple_lower(uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1
    if (cp == 0x178) return 0xFF;                                  // Ÿ
    if (cp >= 0x100 && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x179 || cp == 0x17B || cp == 0x17D) return cp + 1;  // Ź Ż Ž
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;  // Cyrillic А..Я
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;  // Ѐ..Џ
    return cp;
}

std::string casefold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        auto [cp, len] = decode_utf8(s, i);
        if (len == 1 && cp >= 0x80) {
            out.push_back(s[i]);  // raw invalid byte, keep
        } else {
            append_utf8(out, simple_lower(cp));
        }
        i += len;
    }
    return out;
}

namespace {

// (base << 32 | combining) -> composed
const std::unordered_map<uint64_t, uint32_t>& composition_table() {
    static const std::unordered_map<uint64_t, uint32_t> table = [] {
        std::unordered_map<uint64_t, uint32_t> t;
        auto add = [&](uint32_t base, uint32_t comb, uint32_t composed) {
            t[(uint64_t(base) << 32) | comb] = composed;
        };
        struct Row { uint32_t base; std::array<uint32_t, 5> c; };
        // combining order: grave, acute, circumflex, tilde, diaeresis
        const uint32_t marks[5] = {0x300, 0x301, 0x302, 0x303, 0x308};
        const Row rows[] = {
            {'a', {0xE0, 0xE1, 0xE2, 0xE3, 0xE4}},
            {'e', {0xE8, 0xE9, 0xEA, 0, 0xEB}},
            {'i', {0xEC, 0xED, 0xEE, 0, 0xEF}},
            {'o', {0xF2, 0xF3, 0xF4, 0xF5, 0xF6}},
            {'u', {0xF9, 0xFA, 0xFB, 0, 0xFC}},
            {'n', {0, 0xF1, 0, 0, 0}},
            {'y', {0, 0xFD, 0, 0, 0xFF}},
            {'A', {0xC0, 0xC1, 0xC2, 0xC3, 0xC4}},
            {'E', {0xC8, 0xC9, 0xCA, 0, 0xCB}},
            {'I', {0xCC, 0xCD, 0xCE, 0, 0xCF}},
            {'O', {0xD2, 0xD3, 0xD4, 0xD5, 0xD6}},
            {'U', {0xD9, 0xDA, 0xDB, 0, 0xDC}},
            {'N', {0, 0xD1, 0, 0, 0}},
            {'c', {0, 0x107, 0x109, 0, 0}},
            {'C', {0, 0x106, 0x108, 0, 0}},
        };
        for (const auto& r : rows)
            for (int k = 0; k < 5; ++k)
                if (r.c[k]) add(r.base, marks[k], r.c[k]);
        add('c', 0x327, 0xE7);   // cedilla
        add('C', 0x327, 0xC7);
        // Arabic hamza compositions
        add(0x627, 0x653, 0x622);  // alef + madda
        add(0x627, 0x654, 0x623);  // alef + hamza above
        add(0x648, 0x654, 0x624);  // waw + hamza above
        add(0x627, 0x655, 0x625);  // alef + hamza below
        add(0x64A, 0x654, 0x626);  // yeh + hamza above
        return t;
    }();
    return table;
}

}  // namespace

std::string compose_nfc(std::string_view s) {
    const auto& table = composition_table();
    std::vector<uint32_t> cps = to_codepoints(s);
    std::vector<uint32_t> out;
    out.reserve(cps.size());
    for (uint32_t cp : cps) {
        if (!out.empty()) {
            auto it = table.find((uint64_t(out.back()) << 32) | cp);
            if (it != table.end()) {
                out.back() = it->second;
                continue;
            }
        }
        out.push_back(cp);
    }
    return encode_utf8(out);
}

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

uint64_t fnv1a64(std::string_view s, uint64_t seed) {
    uint64_t h = seed;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view s) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(s)));
    return buf;
}

}  // namespace blm::text
