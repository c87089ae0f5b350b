#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "gridrag/errors.hpp"
#include "gridrag/util/base64.hpp"
#include "gridrag/util/sha256.hpp"
#include "gridrag/util/strings.hpp"
#include "gridrag/util/xml.hpp"
#include "gridrag/util/zip.hpp"

using namespace gridrag;

TEST_CASE("sha256 known vectors") {
    CHECK(util::Sha256::hex_of("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(util::Sha256::hex_of("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // incremental feeding agrees with one-shot
    util::Sha256 h;
    h.update("a");
    h.update("bc");
    CHECK(h.hex() == util::Sha256::hex_of("abc"));
}

TEST_CASE("base64 round trip and bad input") {
    std::vector<std::uint8_t> bytes{0x00, 0x01, 0xfe, 0xff, 0x80};
    std::string enc = util::base64_encode(bytes);
    CHECK(util::base64_decode(enc) == bytes);
    CHECK(util::base64_encode(std::vector<std::uint8_t>{}) == "");
    CHECK_THROWS_AS(util::base64_decode("not base64!!"), ParseError);
}

TEST_CASE("tokenize keeps digit-internal separators") {
    auto toks = util::tokenize("Total: 1,200.00 USD (Q3)");
    CHECK(toks == std::vector<std::string>{"total", "1,200.00", "usd", "q3"});
    CHECK(util::tokenize("") == std::vector<std::string>{});
    // trailing punctuation stripped from numbers
    CHECK(util::tokenize("5.") == std::vector<std::string>{"5"});
}

TEST_CASE("read_file missing path") {
    CHECK_THROWS_AS(util::read_file("/nonexistent/file.txt"), FileNotFound);
}

TEST_CASE("replace_all") {
    CHECK(util::replace_all("a-b-c", "-", "+") == "a+b+c");
    CHECK(util::replace_all("aaa", "aa", "b") == "ba");
    CHECK(util::replace_all("x", "y", "z") == "x");
}

TEST_CASE("zip write then read round trip") {
    std::string path = std::filesystem::temp_directory_path() / "gridrag_test.zip";
    util::ZipWriter w;
    w.add("dir/a.txt", "hello");
    w.add("b.bin", std::string(10000, 'x'));  // compressible, exercises deflate
    w.write_to(path);

    util::ZipReader r(path);
    CHECK(r.has("dir/a.txt"));
    CHECK(r.read("dir/a.txt") == "hello");
    CHECK(r.read("b.bin") == std::string(10000, 'x'));
    CHECK_FALSE(r.has("missing"));

    // deterministic output: identical content produces identical bytes
    std::string path2 = std::filesystem::temp_directory_path() / "gridrag_test2.zip";
    util::ZipWriter w2;
    w2.add("dir/a.txt", "hello");
    w2.add("b.bin", std::string(10000, 'x'));
    w2.write_to(path2);
    CHECK(util::read_file(path) == util::read_file(path2));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("xml parsing essentials") {
    auto root = util::parse_xml(
        "<?xml version=\"1.0\"?><a:root xmlns:a=\"ns\" k=\"v\">"
        "<!-- comment --><b attr=\"1&amp;2\">text &#65;</b>"
        "<a:c><![CDATA[<raw>]]></a:c></a:root>");
    CHECK(root->attr("k") == "v");
    const util::XmlNode* b = root->child("b");
    REQUIRE(b != nullptr);
    CHECK(b->attr("attr") == "1&2");
    CHECK(b->text == "text A");
    // namespace prefixes are matched on local names
    const util::XmlNode* c = root->child("c");
    REQUIRE(c != nullptr);
    CHECK(c->text == "<raw>");
    CHECK_THROWS_AS(util::parse_xml("<a><b></a>"), ParseError);
}

TEST_CASE("xml escape") {
    CHECK(util::xml_escape("a<b>&\"'") == "a&lt;b&gt;&amp;&quot;&apos;");
}
