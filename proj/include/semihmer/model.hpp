#pragma once

#include <memory>
#include <string>

#include "semihmer/config.hpp"
#include "semihmer/counting.hpp"
#include "semihmer/decoder.hpp"
#include "semihmer/encoder.hpp"
#include "semihmer/params.hpp"

namespace semihmer {

struct ModelConfig {
    EncoderConfig enc;
    DecoderConfig dec;
    int classes = 0;

    static ModelConfig from(const Config& cfg, int classes) {
        ModelConfig m;
        m.enc.growth = cfg.get_int("enc.growth");
        m.enc.block_depths = cfg.get_int_list("enc.depths");
        m.enc.initial_channels = cfg.get_int("enc.init_channels");
        m.dec.hidden = cfg.get_int("dec.hidden");
        m.dec.embed = cfg.get_int("dec.embed");
        m.dec.attn = cfg.get_int("dec.attn");
        m.dec.fusion = cfg.get_int("dec.fusion");
        m.dec.coverage_kernel = cfg.get_int("dec.coverage_kernel");
        m.dec.clamp_residual = cfg.get_bool("dec.clamp_residual");
        m.classes = classes;
        return m;
    }
};

// Shared encoder, two counting heads, two decoder branches. The weight
// structs hold pointers into `params`, which owns all tensors; parameter
// names (and thus the checkpoint layout) are fixed by the build order here.
struct Model {
    ModelConfig cfg;
    ParamSet params;
    EncoderWeights encoder;
    CountingWeights counting1, counting2;
    DecoderWeights decoder1, decoder2;

    Model(const ModelConfig& c, uint64_t seed) : cfg(c), params(seed) {
        const int d = cfg.enc.output_channels();
        encoder = build_encoder(params, cfg.enc, "enc");
        counting1 = build_counting(params, d, cfg.classes, "cnt1");
        counting2 = build_counting(params, d, cfg.classes, "cnt2");
        decoder1 = build_decoder(params, d, cfg.classes, cfg.dec, "dec1");
        decoder2 = build_decoder(params, d, cfg.classes, cfg.dec, "dec2");
    }

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const CountingWeights& counting(int branch) const { return branch == 1 ? counting1 : counting2; }
    const DecoderWeights& decoder(int branch) const { return branch == 1 ? decoder1 : decoder2; }
};

}  // namespace semihmer
