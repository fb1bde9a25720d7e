#pragma once

#include <algorithm>
#include <cmath>

#include "semihmer/tensor.hpp"

namespace semihmer {

struct Point2 {
    double x = 0.0, y = 0.0;
};

// Inks every pixel within radius r of (cx, cy). Coordinates are in pixel
// units with pixel (y, x) centered at (x, y).
inline void stamp_disk(Tensor& img, double cx, double cy, double r) {
    const int h = img.dim(0), w = img.dim(1);
    int lo_y = std::max(0, static_cast<int>(std::floor(cy - r)));
    int hi_y = std::min(h - 1, static_cast<int>(std::ceil(cy + r)));
    int lo_x = std::max(0, static_cast<int>(std::floor(cx - r)));
    int hi_x = std::min(w - 1, static_cast<int>(std::ceil(cx + r)));
    for (int iy = lo_y; iy <= hi_y; ++iy)
        for (int ix = lo_x; ix <= hi_x; ++ix) {
            double dx = ix - cx, dy = iy - cy;
            if (dx * dx + dy * dy <= r * r) img.at(iy, ix) = 1.0;
        }
}

// Draws a solid segment of the given radius by stamping along its length.
// The radius floor keeps diagonal staircases 4-connected: with stamps every
// 0.3 px, the nearest stamp to an off-diagonal neighbor pixel can be up to
// sqrt(0.5 + 0.15^2) ~ 0.723 away.
inline void draw_segment(Tensor& img, double ax, double ay, double bx, double by, double radius) {
    const double r = std::max(radius, 0.75);
    double len = std::hypot(bx - ax, by - ay);
    int steps = std::max(1, static_cast<int>(std::ceil(len / 0.3)));
    for (int k = 0; k <= steps; ++k) {
        double t = static_cast<double>(k) / steps;
        stamp_disk(img, ax + t * (bx - ax), ay + t * (by - ay), r);
    }
}

}  // namespace semihmer
