#pragma once

#include <string>
#include <vector>

#include "semihmer/autograd.hpp"
#include "semihmer/common.hpp"
#include "semihmer/params.hpp"
#include "semihmer/tensor.hpp"

namespace semihmer {

// Densely connected backbone, desk scale. Downsampling: one stride-2 stem
// conv plus one stride-2 pool per transition.
struct EncoderConfig {
    int growth = 12;
    std::vector<int> block_depths = {4, 4, 4};
    int initial_channels = 32;

    // stem stride 2 plus one stride-2 pool per block's transition
    int downsample_factor() const { return 1 << (1 + static_cast<int>(block_depths.size())); }

    int output_channels() const {
        int ch = initial_channels;
        for (int depth : block_depths) ch = (ch + depth * growth) / 2;
        return ch;
    }
};

// Parameter handles for one encoder; tensors live in the ParamSet.
struct EncoderWeights {
    struct NormConv {
        Param* gamma;
        Param* beta;
        Param* w;
        Param* b;
    };
    Param* stem_w;
    Param* stem_b;
    Param* stem_gamma;
    Param* stem_beta;
    std::vector<std::vector<NormConv>> blocks;  // 3x3 dense layers
    std::vector<NormConv> transitions;          // 1x1 compressions
    Param* final_gamma;
    Param* final_beta;
    EncoderConfig cfg;
};

inline EncoderWeights build_encoder(ParamSet& ps, const EncoderConfig& cfg,
                                    const std::string& prefix = "enc") {
    EncoderWeights w;
    w.cfg = cfg;
    auto nm = [&](const std::string& s) { return prefix + "." + s; };
    w.stem_w = &ps.add(nm("stem.w"), {cfg.initial_channels, 1, 7, 7}, Init::he_conv);
    w.stem_b = &ps.add(nm("stem.b"), {cfg.initial_channels}, Init::zeros);
    w.stem_gamma = &ps.add(nm("stem.gamma"), {cfg.initial_channels}, Init::ones);
    w.stem_beta = &ps.add(nm("stem.beta"), {cfg.initial_channels}, Init::zeros);

    int ch = cfg.initial_channels;
    for (size_t b = 0; b < cfg.block_depths.size(); ++b) {
        std::vector<EncoderWeights::NormConv> layers;
        for (int l = 0; l < cfg.block_depths[static_cast<size_t>(b)]; ++l) {
            std::string base = strfmt("b%d.l%d", static_cast<int>(b), l);
            EncoderWeights::NormConv nc;
            nc.gamma = &ps.add(nm(base + ".gamma"), {ch}, Init::ones);
            nc.beta = &ps.add(nm(base + ".beta"), {ch}, Init::zeros);
            nc.w = &ps.add(nm(base + ".w"), {cfg.growth, ch, 3, 3}, Init::he_conv);
            nc.b = &ps.add(nm(base + ".b"), {cfg.growth}, Init::zeros);
            layers.push_back(nc);
            ch += cfg.growth;
        }
        w.blocks.push_back(std::move(layers));
        std::string base = strfmt("t%d", static_cast<int>(b));
        EncoderWeights::NormConv nc;
        nc.gamma = &ps.add(nm(base + ".gamma"), {ch}, Init::ones);
        nc.beta = &ps.add(nm(base + ".beta"), {ch}, Init::zeros);
        int out = ch / 2;
        nc.w = &ps.add(nm(base + ".w"), {out, ch, 1, 1}, Init::he_conv);
        nc.b = &ps.add(nm(base + ".b"), {out}, Init::zeros);
        w.transitions.push_back(nc);
        ch = out;
    }
    w.final_gamma = &ps.add(nm("final.gamma"), {ch}, Init::ones);
    w.final_beta = &ps.add(nm("final.beta"), {ch}, Init::zeros);
    return w;
}

// "Any valid input in the window" pooling of a binary mask; ceil-mode shapes
// matching the stride-2 convolutions and pools of the feature path.
inline Tensor pool_mask_any(const Tensor& mask, int k = 2, int stride = 2) {
    const int h = mask.dim(0), w = mask.dim(1);
    const int oh = (h + stride - 1) / stride, ow = (w + stride - 1) / stride;
    Tensor out({oh, ow});
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double v = 0.0;
            for (int dy = 0; dy < k; ++dy)
                for (int dx = 0; dx < k; ++dx) {
                    int iy = y * stride + dy, ix = x * stride + dx;
                    if (iy < h && ix < w && mask.at(iy, ix) > 0.0) v = 1.0;
                }
            out.at(y, x) = v;
        }
    return out;
}

// Spatial features plus the matching validity mask for one sample.
struct EncodedSample {
    Var features;  // (D, H', W')
    Tensor mask;   // (H', W')
};

// Encodes one sample on the tape. Every intermediate is re-masked after the
// norm/activation so padded regions stay exactly zero; combined with the
// fixed-divisor pooling this makes features at valid positions independent
// of padding.
inline EncodedSample encode_sample(Tape& t, const Tensor& image, const Tensor& mask,
                                   const EncoderWeights& w) {
    if (image.ndim() != 2) fail("encoder expects a rank-2 image");
    if (!image.same_shape(mask)) fail("image and mask shapes differ");
    const int ds = w.cfg.downsample_factor();
    if (image.dim(0) < ds || image.dim(1) < ds)
        fail(strfmt("image %dx%d smaller than downsample factor %d", image.dim(0), image.dim(1), ds));

    Tensor x0({1, image.dim(0), image.dim(1)});
    for (long long i = 0; i < image.numel(); ++i) x0[i] = image[i] * mask[i];
    Var x = t.constant(x0);

    Tensor m = pool_mask_any(mask);
    x = t.conv2d(x, t.param(*w.stem_w), t.param(*w.stem_b), 2, 3);
    x = t.mul_mask(x, m);
    x = t.masked_instance_norm(x, m, t.param(*w.stem_gamma), t.param(*w.stem_beta));
    x = t.relu(x);
    x = t.mul_mask(x, m);

    for (size_t b = 0; b < w.blocks.size(); ++b) {
        for (const auto& layer : w.blocks[b]) {
            Var h = t.masked_instance_norm(x, m, t.param(*layer.gamma), t.param(*layer.beta));
            h = t.relu(h);
            h = t.mul_mask(h, m);
            h = t.conv2d(h, t.param(*layer.w), t.param(*layer.b), 1, 1);
            h = t.mul_mask(h, m);
            x = t.concat_ch(x, h);
        }
        if (b < w.transitions.size()) {
            const auto& tr = w.transitions[b];
            Var h = t.masked_instance_norm(x, m, t.param(*tr.gamma), t.param(*tr.beta));
            h = t.relu(h);
            h = t.mul_mask(h, m);
            h = t.conv2d(h, t.param(*tr.w), t.param(*tr.b), 1, 0);
            x = t.avgpool2d(h, 2, 2);
            m = pool_mask_any(m);
            x = t.mul_mask(x, m);
        }
    }
    x = t.masked_instance_norm(x, m, t.param(*w.final_gamma), t.param(*w.final_beta));
    x = t.relu(x);
    x = t.mul_mask(x, m);
    return {x, m};
}

}  // namespace semihmer
