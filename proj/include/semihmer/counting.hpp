#pragma once

#include <string>

#include "semihmer/autograd.hpp"
#include "semihmer/encoder.hpp"
#include "semihmer/params.hpp"

namespace semihmer {

// Two conv scales (3x3 and 5x5), each projected 1x1 to C density channels.
struct CountingWeights {
    Param* w3;
    Param* b3;
    Param* p3w;
    Param* p3b;
    Param* w5;
    Param* b5;
    Param* p5w;
    Param* p5b;
    int classes = 0;
};

inline CountingWeights build_counting(ParamSet& ps, int feat_channels, int classes,
                                      const std::string& prefix) {
    CountingWeights w;
    w.classes = classes;
    const int mid = std::max(8, feat_channels / 2);
    auto nm = [&](const char* s) { return prefix + "." + s; };
    w.w3 = &ps.add(nm("k3.w"), {mid, feat_channels, 3, 3}, Init::he_conv);
    w.b3 = &ps.add(nm("k3.b"), {mid}, Init::zeros);
    w.p3w = &ps.add(nm("k3.proj.w"), {classes, mid, 1, 1}, Init::he_conv);
    w.p3b = &ps.add(nm("k3.proj.b"), {classes}, Init::zeros);
    w.w5 = &ps.add(nm("k5.w"), {mid, feat_channels, 5, 5}, Init::he_conv);
    w.b5 = &ps.add(nm("k5.b"), {mid}, Init::zeros);
    w.p5w = &ps.add(nm("k5.proj.w"), {classes, mid, 1, 1}, Init::he_conv);
    w.p5b = &ps.add(nm("k5.proj.b"), {classes}, Init::zeros);
    return w;
}

// Sigmoid density per class per position, summed over valid positions, the
// two scales averaged. Entries are nonnegative by construction.
inline Var predict_counts(Tape& t, const EncodedSample& enc, const CountingWeights& w) {
    auto scale = [&](Param* cw, Param* cb, Param* pw, Param* pb, int pad) {
        Var h = t.conv2d(enc.features, t.param(*cw), t.param(*cb), 1, pad);
        h = t.relu(h);
        Var density = t.sigmoid(t.conv2d(h, t.param(*pw), t.param(*pb), 1, 0));
        return t.masked_sum_spatial(density, enc.mask);
    };
    Var c3 = scale(w.w3, w.b3, w.p3w, w.p3b, 1);
    Var c5 = scale(w.w5, w.b5, w.p5w, w.p5b, 2);
    return t.axpby(c3, c5, 0.5, 0.5);
}

}  // namespace semihmer
