#include "gridrag/util/zip.hpp"

#include <zlib.h>

#include <cstring>

#include "gridrag/errors.hpp"
#include "gridrag/util/strings.hpp"

namespace gridrag::util {

namespace {

std::uint16_t rd16(const std::string& d, std::size_t off) {
    return std::uint16_t(std::uint8_t(d[off])) | (std::uint16_t(std::uint8_t(d[off + 1])) << 8);
}

std::uint32_t rd32(const std::string& d, std::size_t off) {
    return std::uint32_t(std::uint8_t(d[off])) | (std::uint32_t(std::uint8_t(d[off + 1])) << 8) |
           (std::uint32_t(std::uint8_t(d[off + 2])) << 16) |
           (std::uint32_t(std::uint8_t(d[off + 3])) << 24);
}

void wr16(std::string& d, std::uint16_t v) {
    d.push_back(char(v & 0xff));
    d.push_back(char(v >> 8));
}

void wr32(std::string& d, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) d.push_back(char((v >> (i * 8)) & 0xff));
}

std::string inflate_raw(const char* src, std::size_t src_len, std::size_t out_len) {
    std::string out(out_len, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK) throw Error("zlib init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(src));
    zs.avail_in = uInt(src_len);
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = uInt(out_len);
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END && !(rc == Z_OK && zs.avail_out == 0))
        throw UnsupportedFormat("zip entry failed to inflate");
    out.resize(out_len - zs.avail_out);
    return out;
}

std::string deflate_raw(const std::string& src) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("zlib init failed");
    std::string out(deflateBound(&zs, uLong(src.size())), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(src.data()));
    zs.avail_in = uInt(src.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = uInt(out.size());
    int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error("zlib deflate failed");
    out.resize(out.size() - zs.avail_out);
    return out;
}

}  // namespace

ZipReader::ZipReader(const std::string& path) : data_(read_file(path)) {
    if (data_.size() < 22 || data_.compare(0, 2, "PK") != 0)
        throw UnsupportedFormat(path + " is not a ZIP container");
    // locate End of Central Directory record
    std::size_t eocd = std::string::npos;
    std::size_t scan_from = data_.size() >= 22 + 65536 ? data_.size() - 22 - 65536 : 0;
    for (std::size_t i = data_.size() - 22 + 1; i-- > scan_from;) {
        if (rd32(data_, i) == 0x06054b50) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) throw UnsupportedFormat(path + ": no ZIP central directory");
    std::uint16_t count = rd16(data_, eocd + 10);
    std::size_t off = rd32(data_, eocd + 16);
    for (std::uint16_t i = 0; i < count; ++i) {
        if (off + 46 > data_.size() || rd32(data_, off) != 0x02014b50)
            throw UnsupportedFormat(path + ": bad central directory entry");
        Entry e;
        e.method = rd16(data_, off + 10);
        e.compressed_size = rd32(data_, off + 20);
        e.uncompressed_size = rd32(data_, off + 24);
        std::uint16_t name_len = rd16(data_, off + 28);
        std::uint16_t extra_len = rd16(data_, off + 30);
        std::uint16_t comment_len = rd16(data_, off + 32);
        e.local_offset = rd32(data_, off + 42);
        std::string name = data_.substr(off + 46, name_len);
        entries_[name] = e;
        off += 46 + name_len + extra_len + comment_len;
    }
}

std::vector<std::string> ZipReader::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

std::string ZipReader::read(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UnsupportedFormat("zip entry missing: " + name);
    const Entry& e = it->second;
    std::size_t off = e.local_offset;
    if (off + 30 > data_.size() || rd32(data_, off) != 0x04034b50)
        throw UnsupportedFormat("bad local header for " + name);
    std::uint16_t name_len = rd16(data_, off + 26);
    std::uint16_t extra_len = rd16(data_, off + 28);
    std::size_t data_off = off + 30 + name_len + extra_len;
    if (data_off + e.compressed_size > data_.size())
        throw UnsupportedFormat("truncated zip entry " + name);
    if (e.method == 0) return data_.substr(data_off, e.compressed_size);
    if (e.method == 8)
        return inflate_raw(data_.data() + data_off, e.compressed_size, e.uncompressed_size);
    throw UnsupportedFormat("zip compression method " + std::to_string(e.method));
}

void ZipWriter::add(const std::string& name, const std::string& content) {
    Entry e;
    e.name = name;
    e.crc = std::uint32_t(
        crc32(0L, reinterpret_cast<const Bytef*>(content.data()), uInt(content.size())));
    e.uncompressed_size = std::uint32_t(content.size());
    std::string deflated = deflate_raw(content);
    if (deflated.size() < content.size()) {
        e.method = 8;
        e.deflated = std::move(deflated);
    } else {
        e.method = 0;
        e.deflated = content;
    }
    entries_.push_back(std::move(e));
}

void ZipWriter::write_to(const std::string& path) const {
    std::string out;
    std::vector<std::uint32_t> offsets;
    for (const auto& e : entries_) {
        offsets.push_back(std::uint32_t(out.size()));
        wr32(out, 0x04034b50);
        wr16(out, 20);        // version needed
        wr16(out, 0);         // flags
        wr16(out, e.method);
        wr16(out, 0);         // mod time
        wr16(out, 0x21);      // mod date (fixed for determinism)
        wr32(out, e.crc);
        wr32(out, std::uint32_t(e.deflated.size()));
        wr32(out, e.uncompressed_size);
        wr16(out, std::uint16_t(e.name.size()));
        wr16(out, 0);  // extra
        out += e.name;
        out += e.deflated;
    }
    std::uint32_t cd_start = std::uint32_t(out.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        wr32(out, 0x02014b50);
        wr16(out, 20);  // version made by
        wr16(out, 20);  // version needed
        wr16(out, 0);
        wr16(out, e.method);
        wr16(out, 0);
        wr16(out, 0x21);
        wr32(out, e.crc);
        wr32(out, std::uint32_t(e.deflated.size()));
        wr32(out, e.uncompressed_size);
        wr16(out, std::uint16_t(e.name.size()));
        wr16(out, 0);  // extra
        wr16(out, 0);  // comment
        wr16(out, 0);  // disk
        wr16(out, 0);  // internal attrs
        wr32(out, 0);  // external attrs
        wr32(out, offsets[i]);
        out += e.name;
    }
    std::uint32_t cd_size = std::uint32_t(out.size()) - cd_start;
    wr32(out, 0x06054b50);
    wr16(out, 0);
    wr16(out, 0);
    wr16(out, std::uint16_t(entries_.size()));
    wr16(out, std::uint16_t(entries_.size()));
    wr32(out, cd_size);
    wr32(out, cd_start);
    wr16(out, 0);
    write_file_atomic(path, out);
}

}  // namespace gridrag::util
