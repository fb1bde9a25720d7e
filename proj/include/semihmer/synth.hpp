#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "semihmer/common.hpp"
#include "semihmer/data.hpp"
#include "semihmer/raster.hpp"
#include "semihmer/tensor.hpp"
#include "semihmer/vocab.hpp"

namespace semihmer {

enum class TokenKind { atom, op, script };

inline TokenKind synth_token_kind(const std::string& tok) {
    if (tok == "^" || tok == "_") return TokenKind::script;
    for (const char* s : {"+", "-", "\\times", "\\div", "=", "\\neq", "\\leq", "\\geq", "<", ">",
                          "\\pm", "\\cdot", "\\rightarrow", "\\in"})
        if (tok == s) return TokenKind::op;
    return TokenKind::atom;
}

// Generator settings. Lengths count content tokens; eos is appended on top.
struct SynthConfig {
    std::vector<std::string> tokens;  // content inventory (atoms, operators, ^ and _)
    int min_len = 1;
    int max_len = 8;
    int image_height = 32;
    bool style_variation = true;  // per-sample slant, thickness and jitter
};

inline SynthConfig default_synth_config() {
    SynthConfig cfg;
    cfg.tokens = {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
                  "a", "b", "c", "x", "y", "z", "n", "k",
                  "+", "-", "=", "\\times", "<", ">",
                  "^", "_"};
    return cfg;
}

namespace synth_detail {

// Token-sequence language, as a 5-state machine:
//   Start -atom-> Base; Base -atom-> Base, -op-> Opst, -script-> Scr;
//   Opst -atom-> Base; Scr -atom-> Post; Post -atom-> Base, -op-> Opst.
// Accepting states: Base, Post. Every length >= 1 is reachable via atom runs.
enum class State { start, base, opst, scr, post };

inline bool step(State& s, TokenKind k) {
    switch (s) {
        case State::start:
            if (k != TokenKind::atom) return false;
            s = State::base;
            return true;
        case State::base:
            if (k == TokenKind::atom) return true;
            if (k == TokenKind::op) { s = State::opst; return true; }
            s = State::scr;
            return true;
        case State::opst:
            if (k != TokenKind::atom) return false;
            s = State::base;
            return true;
        case State::scr:
            if (k != TokenKind::atom) return false;
            s = State::post;
            return true;
        case State::post:
            if (k == TokenKind::atom) { s = State::base; return true; }
            if (k == TokenKind::op) { s = State::opst; return true; }
            return false;
    }
    return false;
}

inline bool accepting(State s) { return s == State::base || s == State::post; }

inline int min_to_accept(State s) {
    switch (s) {
        case State::base:
        case State::post: return 0;
        default: return 1;
    }
}

struct Inventory {
    std::vector<std::string> atoms, ops;
    bool has_sup = false, has_sub = false;
};

inline Inventory split_inventory(const std::vector<std::string>& tokens) {
    Inventory inv;
    for (const std::string& t : tokens) {
        switch (synth_token_kind(t)) {
            case TokenKind::atom: inv.atoms.push_back(t); break;
            case TokenKind::op: inv.ops.push_back(t); break;
            case TokenKind::script: (t == "^" ? inv.has_sup : inv.has_sub) = true; break;
        }
    }
    return inv;
}

inline std::vector<std::string> gen_tokens(Rng& rng, const SynthConfig& cfg) {
    Inventory inv = split_inventory(cfg.tokens);
    if (inv.atoms.empty()) fail("synthetic grammar needs at least one atom token");
    const int len = rng.uniform_int(cfg.min_len, cfg.max_len);

    std::vector<std::string> out;
    State st = State::start;
    while (static_cast<int>(out.size()) < len) {
        const int remaining = len - static_cast<int>(out.size());
        // a move is legal if the machine allows it and the rest can still
        // reach an accepting state within the remaining budget
        auto fits = [&](TokenKind k) {
            State tmp = st;
            if (!step(tmp, k)) return false;
            return 1 + min_to_accept(tmp) <= remaining;
        };
        bool can_atom = fits(TokenKind::atom);
        bool can_op = !inv.ops.empty() && fits(TokenKind::op);
        bool can_script = (inv.has_sup || inv.has_sub) && fits(TokenKind::script);

        double w_atom = can_atom ? 0.55 : 0.0;
        double w_op = can_op ? 0.25 : 0.0;
        double w_script = can_script ? 0.20 : 0.0;
        double total = w_atom + w_op + w_script;
        if (total == 0.0) fail("synthetic grammar is stuck; inventory too small for length");
        double u = rng.unit() * total;

        TokenKind pick;
        if (u < w_atom)
            pick = TokenKind::atom;
        else if (u < w_atom + w_op)
            pick = TokenKind::op;
        else
            pick = TokenKind::script;

        std::string tok;
        if (pick == TokenKind::atom)
            tok = inv.atoms[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(inv.atoms.size()) - 1))];
        else if (pick == TokenKind::op)
            tok = inv.ops[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(inv.ops.size()) - 1))];
        else if (inv.has_sup && inv.has_sub)
            tok = rng.unit() < 0.5 ? "^" : "_";
        else
            tok = inv.has_sup ? "^" : "_";
        step(st, pick == TokenKind::atom ? TokenKind::atom
                                         : pick == TokenKind::op ? TokenKind::op : TokenKind::script);
        out.push_back(tok);
    }
    if (!accepting(st)) fail("synthetic grammar produced a non-accepted sequence");
    return out;
}

// Canonical glyph shape: a short polyline over anchor points of a 4x4 grid
// inside the unit box, derived deterministically from the token string.
inline std::vector<Point2> glyph_polyline(const std::string& tok) {
    Rng g(mix_seed(0x67C1F5u, fnv1a(tok)));
    const int n = 4 + static_cast<int>(g.next_u64() % 3);  // 4..6 anchors
    std::vector<Point2> pts;
    int prev = -1;
    for (int i = 0; i < n; ++i) {
        int cell;
        do {
            cell = static_cast<int>(g.next_u64() % 16);
        } while (cell == prev);
        prev = cell;
        double gx = (cell % 4) / 3.0, gy = (cell / 4) / 3.0;
        pts.push_back({0.08 + 0.84 * gx, 0.08 + 0.84 * gy});
    }
    return pts;
}

struct Style {
    double slant = 0.0;        // shear applied around the baseline
    double thickness = 0.5;    // stroke radius in px
    double jitter = 0.0;       // anchor displacement amplitude in glyph units
    double baseline_amp = 0.0; // per-glyph vertical wobble in px
    double spacing = 1.0;      // extra gap between glyphs in px
};

inline Style draw_style(Rng& rng, bool vary) {
    Style st;
    if (!vary) return st;
    st.slant = rng.uniform(-0.18, 0.18);
    st.thickness = rng.unit() < 0.7 ? 0.5 : 0.9;
    st.jitter = rng.uniform(0.0, 0.05);
    st.baseline_amp = rng.uniform(0.0, 1.2);
    st.spacing = rng.uniform(0.5, 2.0);
    return st;
}

inline void stamp_glyph(Tensor& img, const std::string& tok, double x0, double y_top, double gh,
                        double gw, const Style& style, Rng& rng) {
    std::vector<Point2> pts = glyph_polyline(tok);
    const double y_base = y_top + gh;
    for (Point2& p : pts) {
        if (style.jitter > 0.0) {
            p.x += rng.uniform(-style.jitter, style.jitter);
            p.y += rng.uniform(-style.jitter, style.jitter);
        }
        double py = y_top + p.y * gh;
        double px = x0 + p.x * gw + style.slant * (y_base - py);
        p = {px, py};
    }
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        draw_segment(img, pts[i].x, pts[i].y, pts[i + 1].x, pts[i + 1].y, style.thickness);
}

}  // namespace synth_detail

// Deterministic synthetic formula image + label. The label is the generated
// content sequence with eos appended. Scripted atoms are drawn raised or
// lowered at reduced scale; the "^"/"_" tokens themselves occupy no width.
inline Sample synth_sample(uint64_t seed, const SynthConfig& cfg, const Vocabulary& vocab) {
    using namespace synth_detail;
    if (cfg.min_len < 1 || cfg.max_len < cfg.min_len) fail("bad synthetic length range");
    if (cfg.image_height < 16) fail("synthetic image height must be at least 16");
    for (const std::string& t : cfg.tokens)
        if (!vocab.has(t)) fail("grammar token '" + t + "' is not in the vocabulary");

    Rng rng(mix_seed(0x5EED5A17u, seed));
    std::vector<std::string> toks = gen_tokens(rng, cfg);
    Style style = draw_style(rng, cfg.style_variation);

    const int H = cfg.image_height;
    const double gh = 0.52 * H;           // nominal glyph height
    const double gw = 0.62 * gh;          // nominal glyph width
    const double base_top = (H - gh) / 2.0;

    // generous canvas; cropped to ink extent afterwards
    const int canvas_w = 8 + static_cast<int>(toks.size()) * (static_cast<int>(gw) + 6) + 8;
    Tensor canvas = Tensor::zeros({H, canvas_w});

    double pen_x = 4.0;
    int script = 0;  // -1 sub, +1 sup, 0 none, applies to the next atom
    for (const std::string& tok : toks) {
        TokenKind kind = synth_token_kind(tok);
        if (kind == TokenKind::script) {
            script = tok == "^" ? 1 : -1;
            continue;
        }
        double scale = 1.0, dy = 0.0, gap = style.spacing;
        if (kind == TokenKind::op) {
            scale = 0.85;
            dy = 0.08 * gh;
            gap += 1.5;
            pen_x += 1.5;
        }
        if (script != 0) {
            scale = 0.60;
            dy = script > 0 ? -0.42 * gh : 0.55 * gh;
            script = 0;
        }
        double wobble = style.baseline_amp > 0.0
                            ? rng.uniform(-style.baseline_amp, style.baseline_amp)
                            : 0.0;
        stamp_glyph(canvas, tok, pen_x, base_top + dy + wobble, gh * scale, gw * scale, style, rng);
        pen_x += gw * scale + gap;
    }

    // crop trailing background columns, keep a small right margin
    int last_ink = 0;
    for (int x = 0; x < canvas_w; ++x)
        for (int y = 0; y < H; ++y)
            if (canvas.at(y, x) > 0.0) {
                last_ink = std::max(last_ink, x);
                break;
            }
    const int W = std::max(8, std::min(canvas_w, last_ink + 5));
    Sample s;
    s.image = Tensor({H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) s.image.at(y, x) = canvas.at(y, x);
    for (const std::string& t : toks) s.label.push_back(vocab.id_of(t));
    s.label.push_back(vocab.eos_id());
    s.source = Source::labeled;
    return s;
}

}  // namespace semihmer
