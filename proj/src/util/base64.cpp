#include "gridrag/util/base64.hpp"

#include <array>
#include <cstdint>

#include "gridrag/errors.hpp"

namespace gridrag::util {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::array<int, 256> decode_table() {
    std::array<int, 256> t;
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[std::uint8_t(kAlphabet[i])] = i;
    return t;
}
}  // namespace

static std::string encode_impl(const std::uint8_t* p, std::size_t n) {
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= n; i += 3) {
        std::uint32_t v = (p[i] << 16) | (p[i + 1] << 8) | p[i + 2];
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back(kAlphabet[v & 63]);
    }
    std::size_t rem = n - i;
    if (rem == 1) {
        std::uint32_t v = p[i] << 16;
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        std::uint32_t v = (p[i] << 16) | (p[i + 1] << 8);
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(kAlphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    return encode_impl(data.data(), data.size());
}

std::string base64_encode(std::string_view data) {
    return encode_impl(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    static const auto table = decode_table();
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    std::size_t pad = 0;
    for (char c : text) {
        if (c == '\n' || c == '\r') continue;
        if (c == '=') {
            ++pad;
            continue;
        }
        if (pad > 0) throw ParseError("base64: data after padding");
        int v = table[std::uint8_t(c)];
        if (v < 0) throw ParseError(std::string("base64: invalid character '") + c + "'");
        acc = (acc << 6) | std::uint32_t(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(std::uint8_t(acc >> bits));
        }
    }
    if (pad > 2) throw ParseError("base64: too much padding");
    return out;
}

}  // namespace gridrag::util
