#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gridrag::util {

// Minimal ZIP container support for the OOXML adapter: store + deflate
// entries only, central-directory driven. Not a general archiver.

class ZipReader {
public:
    explicit ZipReader(const std::string& path);  // throws UnsupportedFormat / FileNotFound

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    std::vector<std::string> names() const;
    std::string read(const std::string& name) const;  // decompressed bytes

private:
    struct Entry {
        std::uint16_t method;
        std::uint32_t compressed_size;
        std::uint32_t uncompressed_size;
        std::uint32_t local_offset;
    };
    std::string data_;
    std::map<std::string, Entry> entries_;
};

class ZipWriter {
public:
    void add(const std::string& name, const std::string& content);
    void write_to(const std::string& path) const;  // atomic

private:
    struct Entry {
        std::string name;
        std::string deflated;
        std::uint32_t crc;
        std::uint32_t uncompressed_size;
        std::uint16_t method;
    };
    std::vector<Entry> entries_;
};

}  // namespace gridrag::util
