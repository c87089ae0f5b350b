#include "gridrag/util/strings.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridrag/errors.hpp"

namespace gridrag::util {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        // strip trailing '.'/',' so sentence punctuation is not part of a token
        while (!cur.empty() && (cur.back() == '.' || cur.back() == ',')) cur.pop_back();
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
    };
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(char(std::tolower(u)));
        } else if ((c == '.' || c == ',') && !cur.empty() &&
                   std::isdigit(static_cast<unsigned char>(cur.back()))) {
            cur.push_back(c);  // keep "1,200.00" together; trailing ones stripped at flush
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for write: " + path);
    out.write(content.data(), std::streamsize(content.size()));
    if (!out) throw Error("short write: " + path);
}

void write_file_atomic(const std::string& path, std::string_view content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    write_file(tmp.string(), content);
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("atomic rename failed: " + path + ": " + ec.message());
    }
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

}  // namespace gridrag::util
