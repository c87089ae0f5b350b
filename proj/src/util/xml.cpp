#include "gridrag/util/xml.hpp"

#include <cctype>
#include <cstring>

#include "gridrag/errors.hpp"

namespace gridrag::util {

namespace {

std::string local_name(const std::string& qualified) {
    auto pos = qualified.rfind(':');
    return pos == std::string::npos ? qualified : qualified.substr(pos + 1);
}

struct Cursor {
    const std::string& s;
    std::size_t pos = 0;

    bool eof() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }
    bool consume(const char* lit) {
        std::size_t n = std::strlen(lit);
        if (s.compare(pos, n, lit) == 0) {
            pos += n;
            return true;
        }
        return false;
    }
    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
};

std::string decode_entities(const std::string& in) {
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] != '&') {
            out.push_back(in[i]);
            continue;
        }
        auto semi = in.find(';', i);
        if (semi == std::string::npos) throw ParseError("xml: unterminated entity");
        std::string ent = in.substr(i + 1, semi - i - 1);
        if (ent == "amp") out.push_back('&');
        else if (ent == "lt") out.push_back('<');
        else if (ent == "gt") out.push_back('>');
        else if (ent == "quot") out.push_back('"');
        else if (ent == "apos") out.push_back('\'');
        else if (!ent.empty() && ent[0] == '#') {
            long code = ent[1] == 'x' || ent[1] == 'X' ? std::stol(ent.substr(2), nullptr, 16)
                                                       : std::stol(ent.substr(1));
            // UTF-8 encode
            if (code < 0x80) out.push_back(char(code));
            else if (code < 0x800) {
                out.push_back(char(0xC0 | (code >> 6)));
                out.push_back(char(0x80 | (code & 0x3F)));
            } else if (code < 0x10000) {
                out.push_back(char(0xE0 | (code >> 12)));
                out.push_back(char(0x80 | ((code >> 6) & 0x3F)));
                out.push_back(char(0x80 | (code & 0x3F)));
            } else {
                out.push_back(char(0xF0 | (code >> 18)));
                out.push_back(char(0x80 | ((code >> 12) & 0x3F)));
                out.push_back(char(0x80 | ((code >> 6) & 0x3F)));
                out.push_back(char(0x80 | (code & 0x3F)));
            }
        } else {
            throw ParseError("xml: unknown entity &" + ent + ";");
        }
        i = semi;
    }
    return out;
}

std::string parse_name(Cursor& c) {
    std::size_t start = c.pos;
    while (!c.eof()) {
        char ch = c.peek();
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == ':' || ch == '_' || ch == '-' ||
            ch == '.')
            ++c.pos;
        else
            break;
    }
    if (c.pos == start) throw ParseError("xml: expected name at offset " + std::to_string(c.pos));
    return c.s.substr(start, c.pos - start);
}

void parse_attrs(Cursor& c, XmlNode& node) {
    for (;;) {
        c.skip_ws();
        if (c.eof()) throw ParseError("xml: unterminated tag");
        if (c.peek() == '>' || c.peek() == '/' || c.peek() == '?') return;
        std::string name = parse_name(c);
        c.skip_ws();
        if (!c.consume("=")) throw ParseError("xml: attribute without value: " + name);
        c.skip_ws();
        char quote = c.peek();
        if (quote != '"' && quote != '\'') throw ParseError("xml: unquoted attribute " + name);
        ++c.pos;
        auto end = c.s.find(quote, c.pos);
        if (end == std::string::npos) throw ParseError("xml: unterminated attribute " + name);
        node.attrs[name] = decode_entities(c.s.substr(c.pos, end - c.pos));
        c.pos = end + 1;
    }
}

std::unique_ptr<XmlNode> parse_element(Cursor& c);

void parse_content(Cursor& c, XmlNode& node) {
    for (;;) {
        if (c.eof()) throw ParseError("xml: unterminated element " + node.name);
        if (c.peek() == '<') {
            if (c.consume("<![CDATA[")) {
                auto end = c.s.find("]]>", c.pos);
                if (end == std::string::npos) throw ParseError("xml: unterminated CDATA");
                node.text += c.s.substr(c.pos, end - c.pos);
                c.pos = end + 3;
            } else if (c.consume("<!--")) {
                auto end = c.s.find("-->", c.pos);
                if (end == std::string::npos) throw ParseError("xml: unterminated comment");
                c.pos = end + 3;
            } else if (c.s.compare(c.pos, 2, "</") == 0) {
                c.pos += 2;
                std::string name = parse_name(c);
                if (name != node.name) throw ParseError("xml: mismatched close tag " + name);
                c.skip_ws();
                if (!c.consume(">")) throw ParseError("xml: malformed close tag " + name);
                return;
            } else {
                node.children.push_back(parse_element(c));
            }
        } else {
            auto next = c.s.find('<', c.pos);
            if (next == std::string::npos) throw ParseError("xml: text outside element");
            node.text += decode_entities(c.s.substr(c.pos, next - c.pos));
            c.pos = next;
        }
    }
}

std::unique_ptr<XmlNode> parse_element(Cursor& c) {
    if (!c.consume("<")) throw ParseError("xml: expected '<'");
    auto node = std::make_unique<XmlNode>();
    node->name = parse_name(c);
    parse_attrs(c, *node);
    if (c.consume("/>")) return node;
    if (!c.consume(">")) throw ParseError("xml: malformed tag " + node->name);
    parse_content(c, *node);
    return node;
}

}  // namespace

const XmlNode* XmlNode::child(const std::string& name_arg) const {
    for (const auto& ch : children)
        if (local_name(ch->name) == name_arg) return ch.get();
    return nullptr;
}

std::vector<const XmlNode*> XmlNode::children_named(const std::string& name_arg) const {
    std::vector<const XmlNode*> out;
    for (const auto& ch : children)
        if (local_name(ch->name) == name_arg) out.push_back(ch.get());
    return out;
}

std::string XmlNode::attr(const std::string& name_arg, const std::string& fallback) const {
    for (const auto& [k, v] : attrs)
        if (local_name(k) == name_arg) return v;
    return fallback;
}

bool XmlNode::has_attr(const std::string& name_arg) const {
    for (const auto& [k, v] : attrs)
        if (local_name(k) == name_arg) return true;
    return false;
}

void XmlNode::visit(const std::string& name_arg,
                    const std::function<void(const XmlNode&)>& fn) const {
    if (local_name(name) == name_arg) fn(*this);
    for (const auto& ch : children) ch->visit(name_arg, fn);
}

std::unique_ptr<XmlNode> parse_xml(const std::string& text) {
    Cursor c{text};
    for (;;) {
        c.skip_ws();
        if (c.consume("<?")) {  // declaration / processing instruction
            auto end = c.s.find("?>", c.pos);
            if (end == std::string::npos) throw ParseError("xml: unterminated declaration");
            c.pos = end + 2;
        } else if (c.consume("<!--")) {
            auto end = c.s.find("-->", c.pos);
            if (end == std::string::npos) throw ParseError("xml: unterminated comment");
            c.pos = end + 3;
        } else {
            break;
        }
    }
    return parse_element(c);
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace gridrag::util
