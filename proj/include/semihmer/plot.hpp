#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "semihmer/common.hpp"
#include "semihmer/metrics.hpp"
#include "semihmer/png_io.hpp"
#include "semihmer/tensor.hpp"

namespace semihmer {

namespace plot_detail {

struct Rgb {
    double r, g, b;
};

class Canvas {
public:
    Canvas(int h, int w) : img_({3, h, w}) { img_.fill(1.0); }

    int height() const { return img_.dim(1); }
    int width() const { return img_.dim(2); }

    void put(int y, int x, Rgb c) {
        if (y < 0 || y >= height() || x < 0 || x >= width()) return;
        img_.at(0, y, x) = c.r;
        img_.at(1, y, x) = c.g;
        img_.at(2, y, x) = c.b;
    }

    void line(double y0, double x0, double y1, double x1, Rgb c) {
        const double len = std::max(std::fabs(y1 - y0), std::fabs(x1 - x0));
        const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
        for (int i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / steps;
            put(static_cast<int>(std::lround(y0 + t * (y1 - y0))),
                static_cast<int>(std::lround(x0 + t * (x1 - x0))), c);
        }
    }

    void text(int y, int x, const std::string& s, Rgb c);

    const Tensor& image() const { return img_; }

private:
    Tensor img_;  // (3, H, W) in [0,1]
};

// 5x7 glyphs; '#' marks set pixels. Unknown characters render blank.
inline const std::map<char, std::array<const char*, 7>>& font() {
    static const std::map<char, std::array<const char*, 7>> f = {
        {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
        {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
        {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
        {'3', {" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "}},
        {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
        {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
        {'6', {" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "}},
        {'7', {"#####", "    #", "   # ", "  #  ", "  #  ", "  #  ", "  #  "}},
        {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
        {'9', {" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "}},
        {'a', {"     ", "     ", " ####", "#   #", "#   #", "#  ##", " ## #"}},
        {'c', {"     ", "     ", " ### ", "#    ", "#    ", "#   #", " ### "}},
        {'d', {"    #", "    #", " ####", "#   #", "#   #", "#   #", " ####"}},
        {'e', {"     ", "     ", " ### ", "#   #", "#####", "#    ", " ### "}},
        {'g', {"     ", " ####", "#   #", "#   #", " ####", "    #", " ### "}},
        {'h', {"#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#   #"}},
        {'i', {"  #  ", "     ", " ##  ", "  #  ", "  #  ", "  #  ", " ### "}},
        {'l', {" ##  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
        {'m', {"     ", "     ", "## # ", "# # #", "# # #", "# # #", "# # #"}},
        {'n', {"     ", "     ", "#### ", "#   #", "#   #", "#   #", "#   #"}},
        {'o', {"     ", "     ", " ### ", "#   #", "#   #", "#   #", " ### "}},
        {'p', {"     ", "     ", "#### ", "#   #", "#### ", "#    ", "#    "}},
        {'r', {"     ", "     ", "# ## ", "##   ", "#    ", "#    ", "#    "}},
        {'s', {"     ", "     ", " ####", "#    ", " ### ", "    #", "#### "}},
        {'t', {"  #  ", "  #  ", "#####", "  #  ", "  #  ", "  #  ", "   ##"}},
        {'u', {"     ", "     ", "#   #", "#   #", "#   #", "#  ##", " ## #"}},
        {'x', {"     ", "     ", "#   #", " # # ", "  #  ", " # # ", "#   #"}},
        {'.', {"     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "}},
        {'_', {"     ", "     ", "     ", "     ", "     ", "     ", "#####"}},
        {'-', {"     ", "     ", "     ", "#####", "     ", "     ", "     "}},
        {'=', {"     ", "     ", "#####", "     ", "#####", "     ", "     "}},
        {'+', {"     ", "  #  ", "  #  ", "#####", "  #  ", "  #  ", "     "}},
    };
    return f;
}

inline void Canvas::text(int y, int x, const std::string& s, Rgb c) {
    const auto& f = font();
    for (char ch : s) {
        auto it = f.find(ch);
        if (it != f.end())
            for (int r = 0; r < 7; ++r)
                for (int col = 0; col < 5; ++col)
                    if (it->second[static_cast<size_t>(r)][col] == '#') put(y + r, x + col, c);
        x += 6;
    }
}

inline std::string compact_number(double v) {
    std::string s = strfmt("%.3g", v);
    // the glyph table has no 'e'-exponent digits problem, but keep it plain
    return s;
}

}  // namespace plot_detail

// One figure: every loss component plus the learning-rate schedule (its own
// vertical scale), one point per logged iteration.
inline void plot_metrics(const std::vector<IterationRecord>& records, const std::string& out_png) {
    if (records.empty()) fail("plot: metrics log is empty");
    using plot_detail::Canvas;
    using plot_detail::Rgb;

    const int W = 840, H = 480;
    const int x0 = 56, x1 = W - 16, y0 = 16, y1 = H - 48;
    Canvas cv(H, W);

    struct Series {
        const char* name;
        Rgb color;
        std::vector<double> v;
    };
    std::vector<Series> losses = {
        {"sup", {0.85, 0.1, 0.1}, {}},      {"cross_l", {0.1, 0.6, 0.1}, {}},
        {"cross_u", {0.1, 0.1, 0.85}, {}},  {"counting", {0.7, 0.1, 0.7}, {}},
        {"total", {0.0, 0.0, 0.0}, {}},
    };
    Series lr{"lr", {0.9, 0.55, 0.0}, {}};
    for (const IterationRecord& r : records) {
        losses[0].v.push_back(r.loss.sup);
        losses[1].v.push_back(r.loss.cross_labeled);
        losses[2].v.push_back(r.loss.cross_unlabeled);
        losses[3].v.push_back(r.loss.counting);
        losses[4].v.push_back(r.loss.total);
        lr.v.push_back(r.lr);
    }

    double loss_max = 1e-12, lr_max = 1e-12;
    for (const auto& s : losses)
        for (double v : s.v) loss_max = std::max(loss_max, v);
    for (double v : lr.v) lr_max = std::max(lr_max, v);

    const Rgb axis{0.25, 0.25, 0.25};
    cv.line(y0, x0, y1, x0, axis);
    cv.line(y1, x0, y1, x1, axis);

    const size_t n = records.size();
    auto px = [&](size_t i) {
        return n == 1 ? x0 : x0 + static_cast<double>(i) * (x1 - 1 - x0) / static_cast<double>(n - 1);
    };
    auto py = [&](double v, double vmax) { return y1 - (v / vmax) * (y1 - 1 - y0); };

    auto draw_series = [&](const Series& s, double vmax) {
        if (n == 1) {
            cv.put(static_cast<int>(py(s.v[0], vmax)), static_cast<int>(px(0)), s.color);
            return;
        }
        for (size_t i = 0; i + 1 < n; ++i)
            cv.line(py(s.v[i], vmax), px(i), py(s.v[i + 1], vmax), px(i + 1), s.color);
    };
    for (const auto& s : losses) draw_series(s, loss_max);
    draw_series(lr, lr_max);

    // legend row under the x axis
    int lx = x0;
    auto legend = [&](const char* name, Rgb c) {
        cv.line(H - 28, lx, H - 28, lx + 10, c);
        cv.line(H - 29, lx, H - 29, lx + 10, c);
        cv.text(H - 33, lx + 14, name, {0, 0, 0});
        lx += 14 + 6 * (static_cast<int>(std::string(name).size()) + 2);
    };
    for (const auto& s : losses) legend(s.name, s.color);
    legend(lr.name, lr.color);

    cv.text(y0, x0 + 4, "max=" + plot_detail::compact_number(loss_max), {0, 0, 0});
    cv.text(y0 + 10, x0 + 4, "lr max=" + plot_detail::compact_number(lr_max), lr.color);
    cv.text(y1 + 4, x1 - 6 * 8, "iter=" + std::to_string(n), {0, 0, 0});

    write_png_rgb(out_png, cv.image());
}

}  // namespace semihmer
