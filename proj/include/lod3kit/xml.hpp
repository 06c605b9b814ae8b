#pragma once

#include <cctype>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lod3kit {

/// One element of a parsed XML document. Names keep the prefix exactly as
/// written; matching is done on local names. `src_begin`/`src_end` delimit
/// the element (including its tags) in the source buffer, which lets a
/// writer pass elements through verbatim. The `raw` member, when set on a
/// hand-built node, is emitted as-is instead of tag/children/text.
struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<XmlNode> children;
  std::string text;  // direct character data, concatenated
  std::string raw;   // verbatim serialization override
  size_t src_begin = 0;
  size_t src_end = 0;

  const std::string* attr(std::string_view local) const;
  const XmlNode* child(std::string_view local) const;
  std::vector<const XmlNode*> all(std::string_view local) const;
};

inline std::string_view xml_local_name(std::string_view qualified) {
  size_t colon = qualified.rfind(':');
  return colon == std::string_view::npos ? qualified : qualified.substr(colon + 1);
}

inline const std::string* XmlNode::attr(std::string_view local) const {
  for (const auto& [k, v] : attrs)
    if (xml_local_name(k) == local) return &v;
  return nullptr;
}

inline const XmlNode* XmlNode::child(std::string_view local) const {
  for (const auto& c : children)
    if (xml_local_name(c.name) == local) return &c;
  return nullptr;
}

inline std::vector<const XmlNode*> XmlNode::all(std::string_view local) const {
  std::vector<const XmlNode*> out;
  for (const auto& c : children)
    if (xml_local_name(c.name) == local) out.push_back(&c);
  return out;
}

struct XmlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

class XmlParser {
 public:
  explicit XmlParser(std::string_view src) : src_(src) {}

  XmlNode parse_document() {
    if (src_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;  // BOM
    skip_misc();
    if (pos_ >= src_.size()) fail("document has no root element");
    XmlNode root = parse_element();
    skip_misc();
    if (pos_ < src_.size()) fail("trailing content after root element");
    return root;
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;
  std::vector<std::string> path_;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "XML error at byte " << pos_;
    if (!path_.empty()) {
      os << " in ";
      for (const auto& p : path_) os << '/' << p;
    }
    os << ": " << what;
    throw XmlError(os.str());
  }

  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  void skip_until(std::string_view terminator, const char* what) {
    size_t at = src_.find(terminator, pos_);
    if (at == std::string_view::npos) fail(std::string("unterminated ") + what);
    pos_ = at + terminator.size();
  }

  // prolog / epilog junk: declarations, comments, doctype, whitespace
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<?"))
        skip_until("?>", "processing instruction");
      else if (starts_with("<!--"))
        skip_until("-->", "comment");
      else if (starts_with("<!"))
        skip_until(">", "declaration");
      else
        return;
    }
  }

  std::string read_name() {
    size_t start = pos_;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '>' || c == '/' || c == '=') break;
      ++pos_;
    }
    if (pos_ == start) fail("expected a name");
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
      if (s[i] != '&') {
        out += s[i++];
        continue;
      }
      size_t semi = s.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity reference");
      std::string_view ent = s.substr(i + 1, semi - i - 1);
      if (ent == "amp")
        out += '&';
      else if (ent == "lt")
        out += '<';
      else if (ent == "gt")
        out += '>';
      else if (ent == "quot")
        out += '"';
      else if (ent == "apos")
        out += '\'';
      else if (!ent.empty() && ent[0] == '#') {
        int base = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')) ? 16 : 10;
        unsigned long code =
            std::stoul(std::string(ent.substr(base == 16 ? 2 : 1)), nullptr, base);
        if (code > 0x7F) fail("non-ASCII character reference");
        out += static_cast<char>(code);
      } else {
        fail("unknown entity '&" + std::string(ent) + ";'");
      }
      i = semi + 1;
    }
    return out;
  }

  XmlNode parse_element() {
    XmlNode node;
    node.src_begin = pos_;
    if (!starts_with("<")) fail("expected '<'");
    ++pos_;
    node.name = read_name();
    path_.push_back(node.name);
    // attributes
    for (;;) {
      skip_ws();
      if (pos_ >= src_.size()) fail("unexpected end of input in start tag");
      if (starts_with("/>")) {
        pos_ += 2;
        node.src_end = pos_;
        path_.pop_back();
        return node;
      }
      if (src_[pos_] == '>') {
        ++pos_;
        break;
      }
      std::string key = read_name();
      skip_ws();
      if (pos_ >= src_.size() || src_[pos_] != '=') fail("expected '=' after attribute name");
      ++pos_;
      skip_ws();
      if (pos_ >= src_.size() || (src_[pos_] != '"' && src_[pos_] != '\''))
        fail("expected quoted attribute value");
      char quote = src_[pos_++];
      size_t vstart = pos_;
      size_t vend = src_.find(quote, pos_);
      if (vend == std::string_view::npos) fail("unterminated attribute value");
      pos_ = vend + 1;
      node.attrs.emplace_back(std::move(key), decode_entities(src_.substr(vstart, vend - vstart)));
    }
    // content
    for (;;) {
      size_t text_start = pos_;
      size_t lt = src_.find('<', pos_);
      if (lt == std::string_view::npos) fail("unexpected end of input inside element");
      if (lt > text_start) node.text += decode_entities(src_.substr(text_start, lt - text_start));
      pos_ = lt;
      if (starts_with("</")) {
        pos_ += 2;
        std::string closing = read_name();
        if (closing != node.name)
          fail("mismatched end tag </" + closing + "> (expected </" + node.name + ">)");
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != '>') fail("malformed end tag");
        ++pos_;
        node.src_end = pos_;
        path_.pop_back();
        return node;
      }
      if (starts_with("<!--")) {
        skip_until("-->", "comment");
      } else if (starts_with("<![CDATA[")) {
        pos_ += 9;
        size_t close = src_.find("]]>", pos_);
        if (close == std::string_view::npos) fail("unterminated CDATA section");
        node.text += std::string(src_.substr(pos_, close - pos_));
        pos_ = close + 3;
      } else if (starts_with("<?")) {
        skip_until("?>", "processing instruction");
      } else {
        node.children.push_back(parse_element());
      }
    }
  }
};

}  // namespace detail

inline XmlNode xml_parse(std::string_view source) {
  return detail::XmlParser(source).parse_document();
}

inline std::string xml_escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string xml_escape_attr(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace detail {

inline void xml_write_node(std::ostringstream& os, const XmlNode& node, int depth) {
  std::string indent(static_cast<size_t>(depth) * 2, ' ');
  if (!node.raw.empty()) {
    os << indent << node.raw << '\n';
    return;
  }
  os << indent << '<' << node.name;
  for (const auto& [k, v] : node.attrs) os << ' ' << k << "=\"" << xml_escape_attr(v) << '"';
  if (node.children.empty() && node.text.empty()) {
    os << "/>\n";
    return;
  }
  os << '>';
  if (node.children.empty()) {
    os << xml_escape_text(node.text) << "</" << node.name << ">\n";
    return;
  }
  os << '\n';
  for (const auto& c : node.children) xml_write_node(os, c, depth + 1);
  os << indent << "</" << node.name << ">\n";
}

}  // namespace detail

/// Serializes a tree built in memory. Elements with `raw` set are emitted
/// byte-for-byte (used to pass through geometry this library does not
/// interpret). Text and children are mutually exclusive per element.
inline std::string xml_write(const XmlNode& root) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  detail::xml_write_node(os, root, 0);
  return os.str();
}

}  // namespace lod3kit
