#pragma once

#include <string>
#include <vector>

#include "semihmer/autograd.hpp"
#include "semihmer/encoder.hpp"
#include "semihmer/params.hpp"
#include "semihmer/vocab.hpp"

namespace semihmer {

struct DecoderConfig {
    int hidden = 64;       // recurrent state size
    int embed = 32;        // token embedding size
    int attn = 32;         // additive attention size
    int fusion = 64;       // fusion vector size before the output projection
    int coverage_kernel = 5;
    bool clamp_residual = false;  // clamp the dynamic count residual at 0
};

struct DecoderWeights {
    DecoderConfig cfg;
    int classes = 0, feat = 0;
    Param* embedding;  // (C, d_e)
    // init projection
    Param* init_w;
    Param* init_b;
    // gated recurrence over [embedding; context]
    Param* gru_wz;
    Param* gru_uz;
    Param* gru_bz;
    Param* gru_wr;
    Param* gru_ur;
    Param* gru_br;
    Param* gru_wn;
    Param* gru_un;
    Param* gru_bn;
    // coverage attention
    Param* attn_uf;   // 1x1 conv features -> attn space
    Param* attn_wh;   // query projection
    Param* attn_uc;   // coverage conv
    Param* attn_ucb;
    Param* attn_v;    // (1, attn, 1, 1) score projection
    // fusion (preliminary logits)
    Param* fuse_wc;   // context
    Param* fuse_wv;   // dynamic count residual
    Param* fuse_wt;   // hidden
    Param* fuse_we;   // embedding
    Param* fuse_wo;   // (C, fusion)
    Param* fuse_bo;   // (C)
    // dynamic counting refinement
    Param* refine_wk;  // (C, C)
    Param* refine_bk;  // (C)
};

inline DecoderWeights build_decoder(ParamSet& ps, int feat_channels, int classes,
                                    const DecoderConfig& cfg, const std::string& prefix) {
    DecoderWeights w;
    w.cfg = cfg;
    w.classes = classes;
    w.feat = feat_channels;
    auto nm = [&](const char* s) { return prefix + "." + s; };
    const int du = cfg.embed + feat_channels;  // recurrence input size
    w.embedding = &ps.add(nm("embed"), {classes, cfg.embed}, Init::embed);
    w.init_w = &ps.add(nm("init.w"), {cfg.hidden, feat_channels}, Init::glorot);
    w.init_b = &ps.add(nm("init.b"), {cfg.hidden}, Init::zeros);
    w.gru_wz = &ps.add(nm("gru.wz"), {cfg.hidden, du}, Init::glorot);
    w.gru_uz = &ps.add(nm("gru.uz"), {cfg.hidden, cfg.hidden}, Init::glorot);
    w.gru_bz = &ps.add(nm("gru.bz"), {cfg.hidden}, Init::zeros);
    w.gru_wr = &ps.add(nm("gru.wr"), {cfg.hidden, du}, Init::glorot);
    w.gru_ur = &ps.add(nm("gru.ur"), {cfg.hidden, cfg.hidden}, Init::glorot);
    w.gru_br = &ps.add(nm("gru.br"), {cfg.hidden}, Init::zeros);
    w.gru_wn = &ps.add(nm("gru.wn"), {cfg.hidden, du}, Init::glorot);
    w.gru_un = &ps.add(nm("gru.un"), {cfg.hidden, cfg.hidden}, Init::glorot);
    w.gru_bn = &ps.add(nm("gru.bn"), {cfg.hidden}, Init::zeros);
    w.attn_uf = &ps.add(nm("attn.uf"), {cfg.attn, feat_channels, 1, 1}, Init::he_conv);
    w.attn_wh = &ps.add(nm("attn.wh"), {cfg.attn, cfg.hidden}, Init::glorot);
    w.attn_uc = &ps.add(nm("attn.uc"), {cfg.attn, 1, cfg.coverage_kernel, cfg.coverage_kernel},
                        Init::he_conv);
    w.attn_ucb = &ps.add(nm("attn.ucb"), {cfg.attn}, Init::zeros);
    w.attn_v = &ps.add(nm("attn.v"), {1, cfg.attn, 1, 1}, Init::he_conv);
    w.fuse_wc = &ps.add(nm("fuse.wc"), {cfg.fusion, feat_channels}, Init::glorot);
    w.fuse_wv = &ps.add(nm("fuse.wv"), {cfg.fusion, classes}, Init::glorot);
    w.fuse_wt = &ps.add(nm("fuse.wt"), {cfg.fusion, cfg.hidden}, Init::glorot);
    w.fuse_we = &ps.add(nm("fuse.we"), {cfg.fusion, cfg.embed}, Init::glorot);
    w.fuse_wo = &ps.add(nm("fuse.wo"), {classes, cfg.fusion}, Init::glorot);
    w.fuse_bo = &ps.add(nm("fuse.bo"), {classes}, Init::zeros);
    w.refine_wk = &ps.add(nm("refine.wk"), {classes, classes}, Init::glorot);
    w.refine_bk = &ps.add(nm("refine.bk"), {classes}, Init::zeros);
    return w;
}

// Live decoding state on a tape.
struct DecoderState {
    Var h;         // (d_h)
    Var coverage;  // (H', W'), sum of past attention maps
    Var residual;  // (C), dynamic count residual R_t
    int t = 1;
    int prev_token = -1;
};

struct StepOutput {
    Var preliminary_logits;  // (C)
    Var refined_logits;      // (C)
    Var attention;           // (H', W')
    Var context;             // (D)
};

// h_0 = tanh(W_i . masked mean of features + b_i); coverage 0; R_1 = V.
inline DecoderState init_state(Tape& t, const EncodedSample& enc, Var v_count,
                               const DecoderWeights& w, int sos_id) {
    double n_valid = enc.mask.sum();
    Var mean = t.scale(t.masked_sum_spatial(enc.features, enc.mask),
                       n_valid > 0.0 ? 1.0 / n_valid : 0.0);
    Var h0 = t.tanh_(t.add(t.matvec(t.param(*w.init_w), mean), t.param(*w.init_b)));
    DecoderState st;
    st.h = h0;
    st.coverage = t.constant(Tensor::zeros({enc.mask.dim(0), enc.mask.dim(1)}));
    st.residual = v_count;
    st.t = 1;
    st.prev_token = sos_id;
    return st;
}

// Additive coverage attention over valid positions; returns the context and
// updates coverage in the state.
inline std::pair<Var, Var> attention_step(Tape& t, DecoderState& st, const EncodedSample& enc,
                                          const DecoderWeights& w, Var uf_pre) {
    const int hp = enc.mask.dim(0), wp = enc.mask.dim(1);
    Var cov_in = t.reshape(st.coverage, {1, hp, wp});
    Var cov_f = t.conv2d(cov_in, t.param(*w.attn_uc), t.param(*w.attn_ucb), 1,
                         (w.cfg.coverage_kernel - 1) / 2);
    Var query = t.matvec(t.param(*w.attn_wh), st.h);
    Var pre = t.tanh_(t.add_cvec(t.add(uf_pre, cov_f), query));
    Var score = t.reshape(t.conv2d(pre, t.param(*w.attn_v), Var{}, 1, 0), {hp, wp});
    Var attn = t.masked_softmax2d(score, enc.mask);
    Var context = t.attn_context(enc.features, attn);
    st.coverage = t.add(st.coverage, attn);
    return {context, attn};
}

// Gated recurrence on [embedding; context].
inline Var gru_step(Tape& t, Var h, Var u, const DecoderWeights& w) {
    auto gate = [&](Param* wu, Param* uh, Param* b) {
        return t.add(t.add(t.matvec(t.param(*wu), u), t.matvec(t.param(*uh), h)), t.param(*b));
    };
    Var z = t.sigmoid(gate(w.gru_wz, w.gru_uz, w.gru_bz));
    Var r = t.sigmoid(gate(w.gru_wr, w.gru_ur, w.gru_br));
    Var n = t.tanh_(t.add(t.add(t.matvec(t.param(*w.gru_wn), u),
                                t.matvec(t.param(*w.gru_un), t.mul(r, h))),
                          t.param(*w.gru_bn)));
    // h' = (1-z) h + z n
    return t.add(h, t.mul(z, t.sub(n, h)));
}

// Affine fusion of context, dynamic count residual, hidden state and the
// previous embedding, projected to class logits.
inline Var fuse_preliminary(Tape& t, Var context, Var residual, Var hidden, Var embedding,
                            const DecoderWeights& w) {
    Var f = t.add(t.add(t.matvec(t.param(*w.fuse_wc), context),
                        t.matvec(t.param(*w.fuse_wv), residual)),
                  t.add(t.matvec(t.param(*w.fuse_wt), hidden),
                        t.matvec(t.param(*w.fuse_we), embedding)));
    return t.add(t.matvec(t.param(*w.fuse_wo), f), t.param(*w.fuse_bo));
}

// refined = preliminary + W_k R_t + b_k; R_{t+1} = R_t - softmax(preliminary).
// The soft decrement keeps the update differentiable.
inline std::pair<Var, Var> gdcm_refine(Tape& t, Var preliminary, Var residual,
                                       const DecoderWeights& w) {
    Var refined = t.add(preliminary,
                        t.add(t.matvec(t.param(*w.refine_wk), residual), t.param(*w.refine_bk)));
    Var next = t.sub(residual, t.softmax_vec(preliminary));
    if (w.cfg.clamp_residual) next = t.relu(next);
    return {refined, next};
}

// One full decode step: attend with the current hidden state as query,
// advance the recurrence on [embedding; context], fuse, refine, update R.
inline StepOutput decode_step(Tape& t, DecoderState& st, const EncodedSample& enc,
                              const DecoderWeights& w, Var uf_pre) {
    Var emb = t.row(t.param(*w.embedding), st.prev_token);
    auto [context, attn] = attention_step(t, st, enc, w, uf_pre);
    st.h = gru_step(t, st.h, t.concat_vec(emb, context), w);
    Var prelim = fuse_preliminary(t, context, st.residual, st.h, emb, w);
    auto [refined, next_r] = gdcm_refine(t, prelim, st.residual, w);
    st.residual = next_r;
    st.t += 1;
    StepOutput out;
    out.preliminary_logits = prelim;
    out.refined_logits = refined;
    out.attention = attn;
    out.context = context;
    return out;
}

// Precomputed 1x1 projection of the features into attention space; shared by
// every step of one decode.
inline Var attn_feature_proj(Tape& t, const EncodedSample& enc, const DecoderWeights& w) {
    return t.conv2d(enc.features, t.param(*w.attn_uf), Var{}, 1, 0);
}

// Teacher forcing: one StepOutput per label position; the input token at
// step t is label[t-2] (sos at t=1).
inline std::vector<StepOutput> decode_teacher_forced(Tape& t, const EncodedSample& enc, Var v_count,
                                                     const std::vector<int>& label,
                                                     const DecoderWeights& w, int sos_id,
                                                     DecoderState* final_state = nullptr) {
    if (label.empty()) fail("teacher forcing needs a non-empty label");
    DecoderState st = init_state(t, enc, v_count, w, sos_id);
    Var uf = attn_feature_proj(t, enc, w);
    std::vector<StepOutput> outs;
    for (size_t i = 0; i < label.size(); ++i) {
        outs.push_back(decode_step(t, st, enc, w, uf));
        st.prev_token = label[i];
    }
    if (final_state) *final_state = st;
    return outs;
}

// Greedy decode: argmax of the refined logits each step, stop at eos or
// max_len. Returns token ids (no sos; eos included when produced).
inline std::vector<int> decode_greedy(Tape& t, const EncodedSample& enc, Var v_count,
                                      const DecoderWeights& w, int sos_id, int eos_id,
                                      int max_len) {
    if (max_len < 1) fail("max_len must be at least 1");
    DecoderState st = init_state(t, enc, v_count, w, sos_id);
    Var uf = attn_feature_proj(t, enc, w);
    std::vector<int> out;
    for (int i = 0; i < max_len; ++i) {
        StepOutput step = decode_step(t, st, enc, w, uf);
        const Tensor& logits = t.val(step.refined_logits);
        int best = 0;
        for (int c = 1; c < w.classes; ++c)
            if (logits.at(c) > logits.at(best)) best = c;
        out.push_back(best);
        if (best == eos_id) break;
        st.prev_token = best;
    }
    return out;
}

}  // namespace semihmer
