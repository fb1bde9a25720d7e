#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "semihmer/common.hpp"
#include "semihmer/raster.hpp"
#include "semihmer/tensor.hpp"

namespace semihmer {

// Stroke trajectories plus the optional ground-truth annotation.
struct InkDocument {
    std::vector<std::vector<Point2>> strokes;
    std::string annotation;
    bool has_annotation = false;
};

namespace xml {

struct Node {
    std::string name;  // local name, namespace prefix stripped
    std::vector<std::pair<std::string, std::string>> attrs;
    std::vector<Node> children;
    std::string text;  // character data directly inside this element

    const std::string* attr(const std::string& key) const {
        for (const auto& kv : attrs)
            if (kv.first == key) return &kv.second;
        return nullptr;
    }
};

// Recursive-descent parser for the element/attribute/text subset of XML.
// Tracks line and column for error messages.
class Parser {
public:
    explicit Parser(const std::string& text) : s_(text) {}

    Node parse_document() {
        skip_misc();
        Node root = parse_element();
        skip_misc();
        if (pos_ != s_.size()) err("trailing content after root element");
        return root;
    }

private:
    const std::string& s_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;

    [[noreturn]] void err(const std::string& msg) const {
        fail(strfmt("xml parse error at line %d, column %d: %s", line_, col_, msg.c_str()));
    }

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }

    char take() {
        if (eof()) err("unexpected end of input");
        char c = s_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void expect(char c) {
        if (peek() != c) err(strfmt("expected '%c'", c));
        take();
    }

    bool try_take(const char* lit) {
        size_t n = std::strlen(lit);
        if (s_.compare(pos_, n, lit) != 0) return false;
        for (size_t i = 0; i < n; ++i) take();
        return true;
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r'))
            take();
    }

    // Whitespace, the XML declaration, comments and DOCTYPE before/after the root.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (try_take("<?")) {
                while (!try_take("?>")) take();
            } else if (try_take("<!--")) {
                while (!try_take("-->")) take();
            } else if (try_take("<!DOCTYPE")) {
                while (peek() != '>') take();
                take();
            } else {
                return;
            }
        }
    }

    static bool name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
               c == ':';
    }

    std::string parse_name() {
        if (!name_char(peek())) err("expected a name");
        std::string n;
        while (!eof() && name_char(peek())) n.push_back(take());
        size_t colon = n.rfind(':');
        return colon == std::string::npos ? n : n.substr(colon + 1);
    }

    std::string parse_entity() {
        std::string e;
        while (peek() != ';') e.push_back(take());
        take();
        if (e == "amp") return "&";
        if (e == "lt") return "<";
        if (e == "gt") return ">";
        if (e == "quot") return "\"";
        if (e == "apos") return "'";
        if (e.size() > 1 && e[0] == '#') {
            long code = e[1] == 'x' ? std::strtol(e.c_str() + 2, nullptr, 16)
                                    : std::strtol(e.c_str() + 1, nullptr, 10);
            if (code <= 0 || code > 127) err("unsupported character reference &" + e + ";");
            return std::string(1, static_cast<char>(code));
        }
        err("unknown entity &" + e + ";");
    }

    std::string parse_attr_value() {
        char q = peek();
        if (q != '"' && q != '\'') err("expected a quoted attribute value");
        take();
        std::string v;
        while (peek() != q) {
            if (peek() == '&') {
                take();
                v += parse_entity();
            } else {
                v.push_back(take());
            }
        }
        take();
        return v;
    }

    Node parse_element() {
        expect('<');
        Node node;
        node.name = parse_name();
        for (;;) {
            skip_ws();
            if (try_take("/>")) return node;
            if (peek() == '>') {
                take();
                break;
            }
            std::string key = parse_name();
            skip_ws();
            expect('=');
            skip_ws();
            node.attrs.emplace_back(std::move(key), parse_attr_value());
        }
        parse_content(node);
        return node;
    }

    void parse_content(Node& node) {
        for (;;) {
            if (eof()) err("unterminated element <" + node.name + ">");
            if (peek() == '<') {
                if (try_take("<!--")) {
                    while (!try_take("-->")) take();
                } else if (try_take("<![CDATA[")) {
                    while (!try_take("]]>")) node.text.push_back(take());
                } else if (s_.compare(pos_, 2, "</") == 0) {
                    take();
                    take();
                    std::string close = parse_name();
                    if (close != node.name)
                        err("mismatched closing tag </" + close + "> for <" + node.name + ">");
                    skip_ws();
                    expect('>');
                    return;
                } else {
                    node.children.push_back(parse_element());
                }
            } else if (peek() == '&') {
                take();
                node.text += parse_entity();
            } else {
                node.text.push_back(take());
            }
        }
    }
};

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace xml

namespace inkml_detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<Point2> parse_trace_points(const std::string& text, const std::string& trace_name) {
    std::vector<Point2> pts;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        std::string group = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::string g = trim(group);
        if (!g.empty()) {
            const char* p = g.c_str();
            char* end = nullptr;
            double x = std::strtod(p, &end);
            if (end == p) fail("trace " + trace_name + ": cannot parse coordinate '" + g + "'");
            p = end;
            double y = std::strtod(p, &end);
            if (end == p) fail("trace " + trace_name + ": point '" + g + "' has fewer than 2 coordinates");
            if (!std::isfinite(x) || !std::isfinite(y))
                fail("trace " + trace_name + ": non-finite coordinate in '" + g + "'");
            pts.push_back({x, y});
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (pts.empty()) fail("trace " + trace_name + ": no points");
    return pts;
}

inline void collect(const xml::Node& n, InkDocument& doc) {
    if (n.name == "trace") {
        const std::string* id = n.attr("id");
        std::string name = id ? *id : strfmt("#%d", static_cast<int>(doc.strokes.size()));
        doc.strokes.push_back(parse_trace_points(n.text, name));
        return;
    }
    if (n.name == "annotation" && !doc.has_annotation) {
        const std::string* type = n.attr("type");
        if (type && *type == "truth") {
            doc.annotation = trim(n.text);
            doc.has_annotation = true;
            return;
        }
    }
    for (const xml::Node& c : n.children) collect(c, doc);
}

}  // namespace inkml_detail

inline InkDocument parse_inkml(const std::string& text) {
    xml::Parser parser(text);
    xml::Node root = parser.parse_document();
    InkDocument doc;
    inkml_detail::collect(root, doc);
    return doc;
}

inline std::string serialize_inkml(const InkDocument& doc) {
    std::string out = "<ink xmlns=\"http://www.w3.org/2003/InkML\">\n";
    if (doc.has_annotation)
        out += "  <annotation type=\"truth\">" + xml::escape(doc.annotation) + "</annotation>\n";
    for (size_t i = 0; i < doc.strokes.size(); ++i) {
        out += strfmt("  <trace id=\"%d\">", static_cast<int>(i));
        for (size_t j = 0; j < doc.strokes[i].size(); ++j) {
            if (j) out += ", ";
            out += strfmt("%.17g %.17g", doc.strokes[i][j].x, doc.strokes[i][j].y);
        }
        out += "</trace>\n";
    }
    out += "</ink>\n";
    return out;
}

// Scales strokes to the target height (aspect preserved, 4 px margins) and
// draws them as connected segments. Ink = 1 on background = 0.
inline Tensor render_strokes(const InkDocument& doc, int target_height, int thickness = 0) {
    if (doc.strokes.empty()) fail("cannot render a document with no strokes");
    if (target_height < 8) fail("target height must be at least 8");
    for (const auto& s : doc.strokes)
        if (s.empty()) fail("cannot render an empty stroke");
    if (thickness <= 0) thickness = std::max(1, target_height / 32);

    double minx = doc.strokes[0][0].x, maxx = minx;
    double miny = doc.strokes[0][0].y, maxy = miny;
    for (const auto& s : doc.strokes)
        for (const Point2& p : s) {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
    const double bw = maxx - minx, bh = maxy - miny;
    const int margin = 4;
    const double inner = target_height - 2.0 * margin;
    double s = 1.0;
    if (bh > 0.0)
        s = inner / bh;
    else if (bw > 0.0)
        s = inner / bw;
    // cap extreme aspect ratios so width stays bounded
    const int max_w = 4096;
    if (bw * s + 2 * margin > max_w) s = (max_w - 2.0 * margin) / bw;

    const int H = target_height;
    const int W = std::max(8, static_cast<int>(std::lround(bw * s)) + 2 * margin + 1);
    Tensor img({H, W});

    const double r = std::max(thickness * 0.5, 0.75);
    const double y0 = (H - s * bh) / 2.0;
    for (const auto& stroke : doc.strokes) {
        auto px = [&](const Point2& p) { return margin + (p.x - minx) * s; };
        auto py = [&](const Point2& p) { return y0 + (p.y - miny) * s; };
        if (stroke.size() == 1) {
            stamp_disk(img, px(stroke[0]), py(stroke[0]), r);
            continue;
        }
        for (size_t j = 0; j + 1 < stroke.size(); ++j)
            draw_segment(img, px(stroke[j]), py(stroke[j]), px(stroke[j + 1]), py(stroke[j + 1]), r);
    }
    return img;
}

}  // namespace semihmer
