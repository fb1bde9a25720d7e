#pragma once

#include <algorithm>
#include <cmath>

#include "semihmer/common.hpp"
#include "semihmer/tensor.hpp"

namespace semihmer {

// Weak = identity. Strong applies elastic distortion, axis stretch and
// perspective jitter, each with its own probability.
struct AugmentationPolicy {
    enum class Kind { weak, strong };
    Kind kind = Kind::weak;
    double p_distort = 0.0;
    double p_stretch = 0.0;
    double p_perspective = 0.0;
    int grid = 4;                 // elastic control grid cells per axis
    double max_disp_frac = 0.08;  // elastic displacement cap, fraction of height
    double stretch_lo = 0.75, stretch_hi = 1.25;
    double persp_frac = 0.10;     // corner jitter, fraction of each dimension
};

inline AugmentationPolicy make_weak_policy() { return {}; }

inline AugmentationPolicy make_strong_policy() {
    AugmentationPolicy p;
    p.kind = AugmentationPolicy::Kind::strong;
    p.p_distort = 1.0;
    p.p_stretch = 0.5;
    p.p_perspective = 0.3;
    return p;
}

inline Tensor weak_augment(const Tensor& image) { return image; }

namespace aug_detail {

inline double bilinear(const Tensor& img, double y, double x) {
    const int h = img.dim(0), w = img.dim(1);
    int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    double fy = y - y0, fx = x - x0;
    auto px = [&](int yy, int xx) {
        return (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0.0 : img.at(yy, xx);
    };
    return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
           fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
}

inline Tensor elastic(const Tensor& img, Rng& rng, const AugmentationPolicy& p) {
    const int h = img.dim(0), w = img.dim(1), g = p.grid;
    const double cap = p.max_disp_frac * h;
    std::vector<double> dy(static_cast<size_t>((g + 1) * (g + 1)));
    std::vector<double> dx(dy.size());
    for (size_t i = 0; i < dy.size(); ++i) {
        dy[i] = rng.uniform(-cap, cap);
        dx[i] = rng.uniform(-cap, cap);
    }
    auto node = [&](const std::vector<double>& d, int gy, int gx) {
        return d[static_cast<size_t>(gy * (g + 1) + gx)];
    };
    Tensor out({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gy = h > 1 ? static_cast<double>(y) * g / (h - 1) : 0.0;
            double gx = w > 1 ? static_cast<double>(x) * g / (w - 1) : 0.0;
            int iy = std::min(g - 1, static_cast<int>(gy)), ix = std::min(g - 1, static_cast<int>(gx));
            double fy = gy - iy, fx = gx - ix;
            double ddy = (1 - fy) * ((1 - fx) * node(dy, iy, ix) + fx * node(dy, iy, ix + 1)) +
                         fy * ((1 - fx) * node(dy, iy + 1, ix) + fx * node(dy, iy + 1, ix + 1));
            double ddx = (1 - fy) * ((1 - fx) * node(dx, iy, ix) + fx * node(dx, iy, ix + 1)) +
                         fy * ((1 - fx) * node(dx, iy + 1, ix) + fx * node(dx, iy + 1, ix + 1));
            out.at(y, x) = bilinear(img, y + ddy, x + ddx);
        }
    return out;
}

inline Tensor stretch(const Tensor& img, Rng& rng, const AugmentationPolicy& p) {
    const int h = img.dim(0), w = img.dim(1);
    double sy = rng.uniform(p.stretch_lo, p.stretch_hi);
    double sx = rng.uniform(p.stretch_lo, p.stretch_hi);
    const int h2 = std::max(8, static_cast<int>(std::lround(h * sy)));
    const int w2 = std::max(8, static_cast<int>(std::lround(w * sx)));
    Tensor out({h2, w2});
    for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x) {
            double src_y = h2 > 1 ? static_cast<double>(y) * (h - 1) / (h2 - 1) : 0.0;
            double src_x = w2 > 1 ? static_cast<double>(x) * (w - 1) / (w2 - 1) : 0.0;
            out.at(y, x) = bilinear(img, src_y, src_x);
        }
    return out;
}

// Gaussian elimination with partial pivoting for the 8x8 homography system.
inline void solve8(double a[8][9]) {
    for (int col = 0; col < 8; ++col) {
        int piv = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-12) fail("degenerate perspective corner layout");
        if (piv != col)
            for (int c = 0; c <= 8; ++c) std::swap(a[piv][c], a[col][c]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            for (int c = col; c <= 8; ++c) a[r][c] -= f * a[col][c];
        }
    }
    for (int r = 0; r < 8; ++r) a[r][8] /= a[r][r];
}

inline Tensor perspective(const Tensor& img, Rng& rng, const AugmentationPolicy& p) {
    const int h = img.dim(0), w = img.dim(1);
    const double jx = p.persp_frac * w, jy = p.persp_frac * h;
    // output rectangle corners map to a jittered source quad
    double dst[4][2] = {{0, 0}, {w - 1.0, 0}, {w - 1.0, h - 1.0}, {0, h - 1.0}};
    double src[4][2];
    for (int i = 0; i < 4; ++i) {
        src[i][0] = dst[i][0] + rng.uniform(-jx, jx);
        src[i][1] = dst[i][1] + rng.uniform(-jy, jy);
    }
    // homography H with H * (dst, 1) ~ (src, 1), h33 = 1
    double a[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        double X = dst[i][0], Y = dst[i][1], u = src[i][0], v = src[i][1];
        double* r1 = a[2 * i];
        double* r2 = a[2 * i + 1];
        r1[0] = X; r1[1] = Y; r1[2] = 1; r1[6] = -u * X; r1[7] = -u * Y; r1[8] = u;
        r2[3] = X; r2[4] = Y; r2[5] = 1; r2[6] = -v * X; r2[7] = -v * Y; r2[8] = v;
    }
    solve8(a);
    double H[9] = {a[0][8], a[1][8], a[2][8], a[3][8], a[4][8], a[5][8], a[6][8], a[7][8], 1.0};
    Tensor out({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d = H[6] * x + H[7] * y + H[8];
            double sx = (H[0] * x + H[1] * y + H[2]) / d;
            double sy = (H[3] * x + H[4] * y + H[5]) / d;
            out.at(y, x) = bilinear(img, sy, sx);
        }
    return out;
}

}  // namespace aug_detail

// Which transforms actually fired; lets callers measure application
// frequencies without reverse-engineering the pixel output.
struct AppliedOps {
    bool distort = false, stretch = false, perspective = false;
};

// Deterministic in (image, seed, policy). The three acceptance draws happen
// first, in a fixed order, so each transform's application frequency matches
// its probability independently of the others.
inline Tensor strong_augment(const Tensor& image, uint64_t seed, const AugmentationPolicy& policy,
                             AppliedOps* ops = nullptr) {
    if (policy.kind != AugmentationPolicy::Kind::strong) fail("strong_augment needs a strong policy");
    if (image.ndim() != 2) fail("augmentation expects a rank-2 image");
    Rng rng(mix_seed(0xA0693E11u, seed));
    const double u_distort = rng.unit();
    const double u_stretch = rng.unit();
    const double u_persp = rng.unit();
    AppliedOps applied;
    applied.distort = u_distort < policy.p_distort;
    applied.stretch = u_stretch < policy.p_stretch;
    applied.perspective = u_persp < policy.p_perspective;
    Tensor out = image;
    if (applied.distort) out = aug_detail::elastic(out, rng, policy);
    if (applied.stretch) out = aug_detail::stretch(out, rng, policy);
    if (applied.perspective) out = aug_detail::perspective(out, rng, policy);
    for (long long i = 0; i < out.numel(); ++i)
        out[i] = out[i] < 0.0 ? 0.0 : (out[i] > 1.0 ? 1.0 : out[i]);
    if (ops) *ops = applied;
    return out;
}

inline Tensor apply_policy(const Tensor& image, uint64_t seed, const AugmentationPolicy& policy) {
    return policy.kind == AugmentationPolicy::Kind::weak ? weak_augment(image)
                                                         : strong_augment(image, seed, policy);
}

struct BranchAssignment {
    int epoch = 0;
    AugmentationPolicy policy_for_decoder1;
    AugmentationPolicy policy_for_decoder2;
};

// Fixed (weak, strong) during warmup; afterwards the pair alternates with
// period 2, starting from (weak, strong) at the first post-warmup epoch.
inline BranchAssignment assign_branch_policies(int epoch, int warmup_epochs,
                                               const AugmentationPolicy& strong = make_strong_policy()) {
    if (epoch < 0) fail("epoch must be non-negative");
    BranchAssignment a;
    a.epoch = epoch;
    const bool swapped = epoch >= warmup_epochs && (epoch - warmup_epochs) % 2 == 1;
    a.policy_for_decoder1 = swapped ? strong : make_weak_policy();
    a.policy_for_decoder2 = swapped ? make_weak_policy() : strong;
    return a;
}

// Per-sample augmentation seed; reproducible regardless of evaluation order.
inline uint64_t augment_seed(uint64_t global_seed, int epoch, long long sample_index, int branch_index) {
    return mix_seed(global_seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(sample_index),
                    static_cast<uint64_t>(branch_index));
}

}  // namespace semihmer
