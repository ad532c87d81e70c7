#include "doctest.h"

#include "blm/text.hpp"

using namespace blm;

TEST_CASE("utf8 round trip through codepoints") {
    std::string s = "salam dunya \xD8\xB3\xD9\x84\xD8\xA7\xD9\x85 ۔";
    CHECK(text::encode_utf8(text::to_codepoints(s)) == s);
}

TEST_CASE("casefold covers ascii, latin-1, greek, cyrillic") {
    CHECK(text::casefold("Hello WORLD") == "hello world");
    CHECK(text::casefold("Über Straße") == "über straße");
    CHECK(text::casefold("ΑΒΓΔ") == "αβγδ");
    CHECK(text::casefold("МОСКВА") == "москва");
}

TEST_CASE("casefold is idempotent") {
    std::string inputs[] = {"MiXeD CaSe", "ÀÉÎÕÜ", "ЖЗИ", "ΣΩ", "already lower"};
    for (const auto& s : inputs) {
        std::string once = text::casefold(s);
        CHECK(text::casefold(once) == once);
    }
}

TEST_CASE("nfc composition of common sequences") {
    // "e" + combining acute -> é
    CHECK(text::compose_nfc("caf\x65\xCC\x81") == "café");
    // already composed passes through
    CHECK(text::compose_nfc("café") == "café");
    // alef + madda above -> alef with madda
    CHECK(text::compose_nfc("\xD8\xA7\xD9\x93") == "\xD8\xA2");
}

TEST_CASE("fnv1a64 matches reference vectors") {
    // Known FNV-1a test vectors.
    CHECK(text::fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(text::fnv1a64("foobar") == 0x85944171f73967e8ull);
}
