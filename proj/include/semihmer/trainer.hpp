#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "semihmer/augment.hpp"
#include "semihmer/checkpoint.hpp"
#include "semihmer/config.hpp"
#include "semihmer/data.hpp"
#include "semihmer/losses.hpp"
#include "semihmer/metrics.hpp"
#include "semihmer/model.hpp"
#include "semihmer/optimizer.hpp"
#include "semihmer/vocab.hpp"

namespace semihmer {

struct TrainSettings {
    int epochs = 120;
    int warmup_epochs = 60;  // no cross terms before this epoch
    int batch_size = 4;
    int unlabeled_ratio = 1;  // unlabeled samples per labeled sample per iteration
    double lambda = 1e-3;
    double peak_lr_warmup = 1.0;
    double peak_lr_cross = 0.1;
    double rho = 0.95;
    double eps = 1e-6;
    uint64_t seed = 0;
    int max_len = 48;
    std::string checkpoint_path;  // empty: no checkpoints
    std::string metrics_path;     // empty: history kept in memory only
    AugmentationPolicy strong_policy = make_strong_policy();
    std::string config_snapshot;  // stored verbatim in each checkpoint

    static TrainSettings from(const Config& cfg) {
        TrainSettings ts;
        ts.epochs = cfg.get_int("train.epochs");
        ts.warmup_epochs = cfg.get_int("train.warmup_epochs");
        ts.batch_size = cfg.get_int("train.batch_size");
        ts.unlabeled_ratio = cfg.get_int("train.unlabeled_ratio");
        ts.lambda = cfg.get_double("train.lambda");
        ts.peak_lr_warmup = cfg.get_double("train.peak_lr_warmup");
        ts.peak_lr_cross = cfg.get_double("train.peak_lr_cross");
        ts.rho = cfg.get_double("train.rho");
        ts.eps = cfg.get_double("train.eps");
        ts.seed = cfg.get_u64("train.seed");
        ts.max_len = cfg.get_int("train.max_len");
        ts.checkpoint_path = cfg.get("train.checkpoint");
        ts.metrics_path = cfg.get("train.metrics");
        ts.strong_policy = make_strong_policy();
        ts.strong_policy.p_distort = cfg.get_double("aug.distort_p");
        ts.strong_policy.p_stretch = cfg.get_double("aug.stretch_p");
        ts.strong_policy.p_perspective = cfg.get_double("aug.perspective_p");
        ts.config_snapshot = cfg.serialize();
        return ts;
    }

    void validate() const {
        if (epochs < 0) fail("epochs must be non-negative");
        if (warmup_epochs < 0 || warmup_epochs > epochs)
            fail("warmup_epochs must lie in [0, epochs]");
        if (batch_size < 1) fail("batch_size must be at least 1");
        if (unlabeled_ratio < 0) fail("unlabeled_ratio must be non-negative");
        if (!(lambda > 0.0)) fail("lambda must be positive");
        if (max_len < 1) fail("max_len must be at least 1");
    }
};

// Linear 0 -> peak over the first epoch of a phase, then cosine peak -> 0
// over the remaining steps. The last step of the phase lands exactly on 0.
inline double lr_at(long long step, long long steps_per_epoch, long long phase_epochs,
                    double peak) {
    if (steps_per_epoch < 1 || phase_epochs < 1) fail("lr_at: empty phase");
    const long long total = steps_per_epoch * phase_epochs;
    if (step < 0 || step >= total) fail("lr_at: step outside the phase");
    if (step < steps_per_epoch)
        return peak * static_cast<double>(step) / static_cast<double>(steps_per_epoch);
    const long long denom = total - 1 - steps_per_epoch;
    if (denom <= 0) return peak;  // single-step cosine region
    const double tau = static_cast<double>(step - steps_per_epoch) / static_cast<double>(denom);
    return peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * tau));
}

namespace train_detail {

struct Indexed {
    const Sample* sample;
    long long corpus_index;  // stable across epochs; keys the augmentation seed
};

inline Tensor branch_view(const Sample& s, const TrainSettings& ts, int epoch, long long idx,
                          int branch, const AugmentationPolicy& policy) {
    return apply_policy(s.image, augment_seed(ts.seed, epoch, idx, branch), policy);
}

// Encode + count + teacher-forced decode of one branch on one image.
struct BranchPass {
    Var counts;
    std::vector<StepOutput> steps;
};

inline BranchPass branch_forward(Tape& t, const Model& m, const Tensor& raw_image,
                                 const std::vector<int>& targets, int branch, int sos_id) {
    const int ds = m.cfg.enc.downsample_factor();
    Tensor image = pad_canvas(raw_image, ds, ds);
    Tensor mask = Tensor::full({image.dim(0), image.dim(1)}, 1.0);
    EncodedSample enc = encode_sample(t, image, mask, m.encoder);
    BranchPass bp;
    bp.counts = predict_counts(t, enc, m.counting(branch));
    bp.steps = decode_teacher_forced(t, enc, bp.counts, targets, m.decoder(branch), sos_id);
    return bp;
}

}  // namespace train_detail

// One gradient step over one labeled batch plus one unlabeled batch.
// Weak-to-strong: the weakly augmented branch produces hard pseudo-labels
// that supervise the strongly augmented branch; the reverse direction does
// not exist, and the pseudo-labels are plain integers, so no gradient can
// reach the weak branch through the cross terms.
inline LossBreakdown train_iteration(Model& model, Adadelta& opt, const TrainSettings& ts,
                                     const std::vector<train_detail::Indexed>& labeled,
                                     const std::vector<train_detail::Indexed>& unlabeled,
                                     const BranchAssignment& assignment, bool cross_enabled,
                                     double lr, int epoch, const Vocabulary& vocab) {
    using train_detail::branch_forward;
    using train_detail::branch_view;
    if (labeled.empty()) fail("train_iteration needs a labeled batch");

    const int weak_branch =
        assignment.policy_for_decoder1.kind == AugmentationPolicy::Kind::weak ? 1 : 2;
    const int strong_branch = weak_branch == 1 ? 2 : 1;
    const AugmentationPolicy& pol1 = assignment.policy_for_decoder1;
    const AugmentationPolicy& pol2 = assignment.policy_for_decoder2;

    model.params.zero_grads();
    double sup = 0.0, cross_l = 0.0, cross_u = 0.0, counting = 0.0;
    const double inv_l = 1.0 / static_cast<double>(labeled.size());

    for (const auto& [sp, idx] : labeled) {
        const Sample& s = *sp;
        Tape t;
        Tensor img1 = branch_view(s, ts, epoch, idx, 1, pol1);
        Tensor img2 = branch_view(s, ts, epoch, idx, 2, pol2);
        auto b1 = branch_forward(t, model, img1, s.label, 1, vocab.sos_id());
        auto b2 = branch_forward(t, model, img2, s.label, 2, vocab.sos_id());

        Var sup_s = t.add(seq_ce_from_logits(t, b1.steps, s.label),
                          seq_ce_from_logits(t, b2.steps, s.label));
        Tensor v_gt = counting_ground_truth(s.label, vocab);
        Var cnt_s = t.add(t.smooth_l1_mean(b1.counts, v_gt), t.smooth_l1_mean(b2.counts, v_gt));
        Var root = t.add(sup_s, cnt_s);

        if (cross_enabled) {
            const auto& weak_steps = weak_branch == 1 ? b1.steps : b2.steps;
            const auto& strong_steps = weak_branch == 1 ? b2.steps : b1.steps;
            std::vector<char> all(s.label.size(), 1);
            std::vector<int> pseudo = make_pseudo_labels(step_distributions(t, weak_steps), all);
            Var cl_s = seq_ce_from_logits(t, strong_steps, pseudo);
            cross_l += t.val(cl_s).at(0) * inv_l;
            root = t.axpby(root, cl_s, 1.0, ts.lambda);
        }
        sup += t.val(sup_s).at(0) * inv_l;
        counting += t.val(cnt_s).at(0) * inv_l;
        t.backward(t.scale(root, inv_l));
    }

    if (cross_enabled && !unlabeled.empty()) {
        const double inv_u = 1.0 / static_cast<double>(unlabeled.size());
        for (const auto& [sp, idx] : unlabeled) {
            const Sample& s = *sp;
            Tensor img_w =
                branch_view(s, ts, epoch, idx, weak_branch, make_weak_policy());
            Tensor img_s = branch_view(s, ts, epoch, idx, strong_branch, ts.strong_policy);

            // the weak pass only yields integers, so it runs gradient-free
            std::vector<int> pseudo;
            {
                Tape tw;
                const int ds = model.cfg.enc.downsample_factor();
                img_w = pad_canvas(img_w, ds, ds);
                Tensor mask = Tensor::full({img_w.dim(0), img_w.dim(1)}, 1.0);
                EncodedSample enc = encode_sample(tw, img_w, mask, model.encoder);
                Var counts = predict_counts(tw, enc, model.counting(weak_branch));
                pseudo = decode_greedy(tw, enc, counts, model.decoder(weak_branch),
                                       vocab.sos_id(), vocab.eos_id(), ts.max_len);
            }
            Tape t;
            auto bs = branch_forward(t, model, img_s, pseudo, strong_branch, vocab.sos_id());
            Var cu_s = seq_ce_from_logits(t, bs.steps, pseudo);
            cross_u += t.val(cu_s).at(0) * inv_u;
            t.backward(t.scale(cu_s, ts.lambda * inv_u));
        }
    }

    // NaN anywhere aborts before the weights can be poisoned
    LossBreakdown breakdown;
    try {
        breakdown = total_loss(sup, cross_l, cross_u, counting, ts.lambda);
    } catch (const Error& e) {
        fail(strfmt("%s (sup=%g cross_l=%g cross_u=%g counting=%g)", e.what(), sup, cross_l,
                    cross_u, counting));
    }
    opt.step(lr);
    return breakdown;
}

struct TrainResult {
    std::vector<IterationRecord> history;
    std::vector<BranchAssignment> assignments;  // one per epoch actually run
    int final_epoch = 0;                        // first epoch NOT run
};

// Full schedule: warmup phase (supervised + counting) then cross phase
// (full objective with per-epoch branch alternation). Checkpoints after
// every epoch; all randomness is position-keyed, so a reloaded checkpoint
// continues the identical trajectory. stop_epoch < 0 means run to ts.epochs;
// an explicit stop pauses after that epoch without altering the lr schedule.
inline TrainResult run_training(Model& model, Adadelta& opt, const TrainSettings& ts,
                                const std::vector<Sample>& labeled,
                                const std::vector<Sample>& unlabeled, const Vocabulary& vocab,
                                int start_epoch = 0, int stop_epoch = -1) {
    ts.validate();
    if (labeled.empty()) fail("training needs a non-empty labeled corpus");
    for (const Sample& s : labeled) {
        if (s.source != Source::labeled) fail("labeled corpus contains an unlabeled sample");
        validate_sample(s, vocab);
    }
    for (const Sample& s : unlabeled) {
        if (s.source != Source::unlabeled) fail("unlabeled corpus contains a labeled sample");
        validate_sample(s, vocab);
    }

    const long long nl = static_cast<long long>(labeled.size());
    const long long nu = static_cast<long long>(unlabeled.size());
    const long long spe = (nl + ts.batch_size - 1) / ts.batch_size;

    TrainResult result;
    MetricsWriter metrics(ts.metrics_path);

    auto save = [&](int next_epoch) {
        if (!ts.checkpoint_path.empty())
            save_checkpoint(ts.checkpoint_path, model, opt, next_epoch, ts.config_snapshot);
    };
    const int stop = stop_epoch < 0 ? ts.epochs : std::min(stop_epoch, ts.epochs);
    if (ts.epochs == 0 || start_epoch >= stop) {
        save(start_epoch);
        result.final_epoch = start_epoch;
        return result;
    }

    for (int epoch = start_epoch; epoch < stop; ++epoch) {
        const bool cross = epoch >= ts.warmup_epochs;
        BranchAssignment assignment =
            assign_branch_policies(epoch, ts.warmup_epochs, ts.strong_policy);
        result.assignments.push_back(assignment);

        std::vector<long long> perm_l(static_cast<size_t>(nl));
        std::iota(perm_l.begin(), perm_l.end(), 0);
        {
            Rng rng(mix_seed(ts.seed, static_cast<uint64_t>(epoch), 0xD1));
            for (long long i = nl - 1; i > 0; --i)
                std::swap(perm_l[static_cast<size_t>(i)],
                          perm_l[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
        }
        std::vector<long long> perm_u(static_cast<size_t>(nu));
        std::iota(perm_u.begin(), perm_u.end(), 0);
        if (nu > 0) {
            Rng rng(mix_seed(ts.seed, static_cast<uint64_t>(epoch), 0xD2));
            for (long long i = nu - 1; i > 0; --i)
                std::swap(perm_u[static_cast<size_t>(i)],
                          perm_u[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
        }

        for (long long it = 0; it < spe; ++it) {
            std::vector<train_detail::Indexed> lbatch;
            for (long long j = it * ts.batch_size; j < std::min(nl, (it + 1) * ts.batch_size); ++j)
                lbatch.push_back({&labeled[static_cast<size_t>(perm_l[static_cast<size_t>(j)])],
                                  perm_l[static_cast<size_t>(j)]});

            std::vector<train_detail::Indexed> ubatch;
            if (cross && nu > 0) {
                const long long bu = static_cast<long long>(lbatch.size()) * ts.unlabeled_ratio;
                for (long long j = 0; j < bu; ++j) {
                    long long k = perm_u[static_cast<size_t>((it * bu + j) % nu)];
                    // offset keeps unlabeled augmentation seeds disjoint from labeled ones
                    ubatch.push_back({&unlabeled[static_cast<size_t>(k)], nl + k});
                }
            }

            const bool in_warmup = epoch < ts.warmup_epochs;
            const long long phase_start = in_warmup ? 0 : static_cast<long long>(ts.warmup_epochs) * spe;
            const long long phase_epochs = in_warmup ? ts.warmup_epochs : ts.epochs - ts.warmup_epochs;
            const long long global_step = static_cast<long long>(epoch) * spe + it;
            const double lr = lr_at(global_step - phase_start, spe, phase_epochs,
                                    in_warmup ? ts.peak_lr_warmup : ts.peak_lr_cross);

            LossBreakdown b = train_iteration(model, opt, ts, lbatch, ubatch, assignment, cross,
                                              lr, epoch, vocab);
            IterationRecord rec;
            rec.epoch = epoch;
            rec.iter = static_cast<int>(global_step);
            rec.lr = lr;
            rec.loss = b;
            rec.branch1_strong =
                assignment.policy_for_decoder1.kind == AugmentationPolicy::Kind::strong ? 1 : 0;
            metrics.write(rec);
        }
        save(epoch + 1);
    }
    result.history = metrics.history();
    result.final_epoch = stop;
    return result;
}

}  // namespace semihmer
