#pragma once

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "semihmer/common.hpp"

namespace semihmer {

// Token inventory with ids assigned in list order. "pad", "sos" and "eos"
// are required members; all other tokens are formula content.
class Vocabulary {
public:
    Vocabulary() = default;

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool has(const std::string& tok) const { return ids_.count(tok) != 0; }

    int id_of(const std::string& tok) const {
        auto it = ids_.find(tok);
        if (it == ids_.end()) fail("unknown token '" + tok + "'");
        return it->second;
    }

    const std::string& token_of(int id) const {
        if (id < 0 || id >= size()) fail(strfmt("token id %d out of range [0, %d)", id, size()));
        return tokens_[static_cast<size_t>(id)];
    }

    int pad_id() const { return pad_id_; }
    int sos_id() const { return sos_id_; }
    int eos_id() const { return eos_id_; }

    bool is_special(int id) const { return id == pad_id_ || id == sos_id_ || id == eos_id_; }

    friend Vocabulary build_vocabulary(const std::vector<std::string>& token_list);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    int pad_id_ = -1, sos_id_ = -1, eos_id_ = -1;
};

inline Vocabulary build_vocabulary(const std::vector<std::string>& token_list) {
    if (token_list.empty()) fail("vocabulary token list is empty");
    Vocabulary v;
    v.tokens_ = token_list;
    for (int i = 0; i < static_cast<int>(token_list.size()); ++i) {
        const std::string& tok = token_list[static_cast<size_t>(i)];
        if (tok.empty()) fail(strfmt("vocabulary entry %d is empty", i));
        if (!v.ids_.emplace(tok, i).second) fail("duplicate token '" + tok + "'");
    }
    auto need = [&](const char* tok) {
        auto it = v.ids_.find(tok);
        if (it == v.ids_.end()) fail(std::string("vocabulary is missing required token '") + tok + "'");
        return it->second;
    };
    v.pad_id_ = need("pad");
    v.sos_id_ = need("sos");
    v.eos_id_ = need("eos");
    return v;
}

// CROHME-style symbol set: 3 specials + 108 content tokens = 111 classes.
inline std::vector<std::string> default_token_list() {
    std::vector<std::string> t = {"pad", "sos", "eos"};
    for (char c = '0'; c <= '9'; ++c) t.push_back(std::string(1, c));
    for (char c = 'a'; c <= 'z'; ++c) t.push_back(std::string(1, c));
    for (const char* s : {"A", "B", "C", "E", "F", "G", "H", "I", "L", "M", "N", "P", "R", "S",
                          "T", "V", "X", "Y"})
        t.push_back(s);
    for (const char* s : {"\\alpha", "\\beta", "\\gamma", "\\Delta", "\\theta", "\\lambda",
                          "\\mu", "\\phi", "\\pi", "\\sigma"})
        t.push_back(s);
    for (const char* s : {"+", "-", "\\times", "\\div", "=", "\\neq", "\\leq", "\\geq", "<", ">",
                          "\\pm", "\\rightarrow", "\\in"})
        t.push_back(s);
    for (const char* s : {"^", "_", "{", "}", "\\frac", "\\sqrt", "(", ")", "[", "]", "|",
                          "\\{", "\\}"})
        t.push_back(s);
    for (const char* s : {"\\sin", "\\cos", "\\tan", "\\log", "\\lim", "\\sum", "\\int",
                          "\\prod"})
        t.push_back(s);
    for (const char* s : {"\\ldots", "\\cdot", "\\prime", "\\infty", "!", ",", ".", "\\exists",
                          "\\forall", "\\partial"})
        t.push_back(s);
    return t;
}

// One token per line; line number = id.
inline void save_vocabulary(const Vocabulary& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open '" + path + "' for writing");
    for (const std::string& tok : v.tokens()) out << tok << '\n';
    if (!out) fail("write failed for '" + path + "'");
}

inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open vocabulary file '" + path + "'");
    std::vector<std::string> toks;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        toks.push_back(line);
    }
    return build_vocabulary(toks);
}

}  // namespace semihmer
