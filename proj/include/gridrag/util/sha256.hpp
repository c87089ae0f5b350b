#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace gridrag::util {

// Incremental SHA-256 (FIPS 180-4). Used for workbook ids, index checksums
// and image digests in exported traces.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::array<std::uint8_t, 32> digest();
    std::string hex();

    static std::string hex_of(std::string_view data) {
        Sha256 h;
        h.update(data);
        return h.hex();
    }

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t bitlen_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buflen_ = 0;
};

}  // namespace gridrag::util
