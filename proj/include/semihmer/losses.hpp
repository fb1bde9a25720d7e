#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semihmer/autograd.hpp"
#include "semihmer/common.hpp"
#include "semihmer/decoder.hpp"
#include "semihmer/tensor.hpp"

namespace semihmer {

struct LossBreakdown {
    double sup = 0.0;
    double cross_labeled = 0.0;
    double cross_unlabeled = 0.0;
    double counting = 0.0;
    double total = 0.0;
};

// Mean over valid positions of -log p(target). Each distribution row must
// be normalized.
inline double seq_cross_entropy(const std::vector<Tensor>& step_distributions,
                                const std::vector<int>& targets, const std::vector<char>& mask) {
    if (step_distributions.size() != targets.size() || targets.size() != mask.size())
        fail("seq_cross_entropy: length mismatch");
    double total = 0.0;
    int n = 0;
    for (size_t i = 0; i < step_distributions.size(); ++i) {
        if (!mask[i]) continue;
        const Tensor& p = step_distributions[i];
        double s = p.sum();
        if (std::fabs(s - 1.0) > 1e-4)
            fail(strfmt("seq_cross_entropy: step %d distribution sums to %.6f", static_cast<int>(i), s));
        int tgt = targets[i];
        if (tgt < 0 || tgt >= p.dim(0)) fail("seq_cross_entropy: target out of range");
        total += -std::log(p.at(tgt));
        ++n;
    }
    if (n == 0) fail("seq_cross_entropy: no valid positions");
    return total / n;
}

// Hard argmax per valid position; ties break toward the lowest id. The
// output is plain integers, so no gradient can flow back to the source.
inline std::vector<int> make_pseudo_labels(const std::vector<Tensor>& step_distributions,
                                           const std::vector<char>& mask) {
    if (step_distributions.size() != mask.size()) fail("make_pseudo_labels: length mismatch");
    std::vector<int> out(step_distributions.size(), -1);
    for (size_t i = 0; i < step_distributions.size(); ++i) {
        if (!mask[i]) continue;
        const Tensor& p = step_distributions[i];
        int best = 0;
        for (int c = 1; c < p.dim(0); ++c)
            if (p.at(c) > p.at(best)) best = c;
        out[i] = best;
    }
    return out;
}

// Eq-style cross pseudo-supervision: the weak branch's argmax supervises the
// strong branch's distribution.
inline double cross_pseudo_loss(const std::vector<Tensor>& strong_distributions,
                                const std::vector<Tensor>& weak_distributions,
                                const std::vector<char>& mask) {
    if (strong_distributions.size() != weak_distributions.size())
        fail("cross_pseudo_loss: branch length mismatch");
    return seq_cross_entropy(strong_distributions, make_pseudo_labels(weak_distributions, mask),
                             mask);
}

// Ground-truth cross-entropy of both branches, summed.
inline double supervised_loss(const std::vector<Tensor>& weak_distributions,
                              const std::vector<Tensor>& strong_distributions,
                              const std::vector<int>& label, const std::vector<char>& mask) {
    return seq_cross_entropy(weak_distributions, label, mask) +
           seq_cross_entropy(strong_distributions, label, mask);
}

inline double smooth_l1(double x) {
    const double ax = std::fabs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

// Mean-over-classes smooth L1 of each branch's count prediction against the
// ground-truth count vector, summed over the two branches.
inline double counting_loss(const Tensor& v1, const Tensor& v2, const Tensor& v_gt) {
    if (!v1.same_shape(v_gt) || !v2.same_shape(v_gt)) fail("counting_loss: shape mismatch");
    double a = 0.0, b = 0.0;
    for (long long i = 0; i < v_gt.numel(); ++i) {
        a += smooth_l1(v1[i] - v_gt[i]);
        b += smooth_l1(v2[i] - v_gt[i]);
    }
    return (a + b) / static_cast<double>(v_gt.numel());
}

// total = sup + lambda (cross_labeled + cross_unlabeled) + counting.
inline LossBreakdown total_loss(double sup, double cross_labeled, double cross_unlabeled,
                                double counting, double lambda) {
    auto check = [](double v, const char* name) {
        if (std::isnan(v)) fail(std::string("total_loss: NaN in ") + name);
    };
    check(sup, "sup");
    check(cross_labeled, "cross_labeled");
    check(cross_unlabeled, "cross_unlabeled");
    check(counting, "counting");
    LossBreakdown b;
    b.sup = sup;
    b.cross_labeled = cross_labeled;
    b.cross_unlabeled = cross_unlabeled;
    b.counting = counting;
    b.total = sup + lambda * cross_labeled + lambda * cross_unlabeled + counting;
    if (std::isnan(b.total)) fail("total_loss: NaN in total");
    return b;
}

// ---- tape-side builders used by the training path ----

// Mean over positions of cross-entropy from logits; identical in value to
// seq_cross_entropy on the softmaxed logits with a full mask.
inline Var seq_ce_from_logits(Tape& t, const std::vector<StepOutput>& steps,
                              const std::vector<int>& targets) {
    if (steps.size() != targets.size()) fail("seq_ce_from_logits: length mismatch");
    std::vector<Var> terms;
    for (size_t i = 0; i < steps.size(); ++i)
        terms.push_back(t.ce_logits(steps[i].refined_logits, targets[i]));
    return t.mean_scalars(terms);
}

// Softmaxed refined logits of every step, lifted off the tape as plain data.
inline std::vector<Tensor> step_distributions(Tape& t, const std::vector<StepOutput>& steps) {
    std::vector<Tensor> out;
    for (const StepOutput& s : steps) out.push_back(t.val(t.softmax_vec(s.refined_logits)));
    return out;
}

}  // namespace semihmer
