#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace gridrag::util {

// Small DOM parser for machine-generated OOXML parts. Element names keep
// their namespace prefix as written; no DTD, CDATA only, standard entities.
struct XmlNode {
    std::string name;
    std::map<std::string, std::string> attrs;
    std::vector<std::unique_ptr<XmlNode>> children;
    std::string text;  // concatenated character data directly under this node

    const XmlNode* child(const std::string& local_name) const;
    std::vector<const XmlNode*> children_named(const std::string& local_name) const;
    std::string attr(const std::string& local_name, const std::string& fallback = "") const;
    bool has_attr(const std::string& local_name) const;

    // depth-first over the whole subtree
    void visit(const std::string& local_name,
               const std::function<void(const XmlNode&)>& fn) const;
};

// Throws gridrag::ParseError on malformed input.
std::unique_ptr<XmlNode> parse_xml(const std::string& text);

std::string xml_escape(const std::string& s);

}  // namespace gridrag::util
