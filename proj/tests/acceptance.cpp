// End-to-end acceptance checks. Each numbered check prints one PASS/FAIL
// line; the process exits 0 only if every check passes. The heavy
// semi-supervised comparisons (checks 8 and 9) share one corpus and print
// progress as they go.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "semihmer/augment.hpp"
#include "semihmer/checkpoint.hpp"
#include "semihmer/eval.hpp"
#include "semihmer/synth.hpp"
#include "semihmer/trainer.hpp"

namespace fs = std::filesystem;
using namespace semihmer;
using train_detail::BranchPass;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void verdict(int number, const std::string& name, bool ok, const std::string& detail) {
    std::cout << "[" << number << "/10] " << name << ": " << (ok ? "PASS" : "FAIL") << " ("
              << detail << ")" << std::endl;
    if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path work_dir() {
    static fs::path p = [] {
        fs::path d = fs::temp_directory_path() / "semihmer_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    fs::path dir = work_dir();
    fs::path out = dir / "_stdout.txt";
    std::string cmd = "cd '" + dir.string() + "' && '" + SEMIHMER_CLI_PATH + "' " + args + " > '" +
                      out.string() + "' 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- small shared model/data helpers -------------------------------------

Vocabulary tiny_vocab() {
    return build_vocabulary({"pad", "sos", "eos", "1", "2", "x", "+"});
}

ModelConfig tiny_model_cfg(int classes) {
    ModelConfig mc;
    mc.enc.growth = 2;
    mc.enc.block_depths = {2};
    mc.enc.initial_channels = 4;
    mc.dec.hidden = 7;
    mc.dec.embed = 4;
    mc.dec.attn = 5;
    mc.dec.fusion = 6;
    mc.classes = classes;
    return mc;
}

Sample tiny_sample(uint64_t seed, const Vocabulary& v, bool labeled) {
    SynthConfig sc = default_synth_config();
    sc.tokens = {"1", "2", "x", "+"};
    sc.image_height = 24;
    sc.min_len = 2;
    sc.max_len = 3;
    Sample s = synth_sample(seed, sc, v);
    if (!labeled) {
        s.label.clear();
        s.source = Source::unlabeled;
    }
    return s;
}

// Total objective on one labeled and one unlabeled image with the pseudo
// targets held fixed, mirroring the stop-gradient semantics. Returns the
// scalar root; `targets` must stay constant across calls so central
// differences probe a smooth function.
Var total_objective(Tape& t, const Model& m, const Vocabulary& v, const Tensor& img_l,
                    const std::vector<int>& label, const Tensor& img_u,
                    const std::vector<int>& pseudo_l, const std::vector<int>& pseudo_u,
                    double lambda) {
    using train_detail::branch_forward;
    BranchPass w1 = branch_forward(t, m, img_l, label, 1, v.sos_id());
    BranchPass s1 = branch_forward(t, m, img_l, label, 2, v.sos_id());
    Var sup = t.add(seq_ce_from_logits(t, w1.steps, label),
                    seq_ce_from_logits(t, s1.steps, label));

    Tensor v_gt = counting_ground_truth(label, v);
    Var cnt = t.scale(t.add(t.smooth_l1_mean(w1.counts, v_gt), t.smooth_l1_mean(s1.counts, v_gt)),
                      0.5);

    Var cross_l = seq_ce_from_logits(t, s1.steps, pseudo_l);

    BranchPass su = branch_forward(t, m, img_u, pseudo_u, 2, v.sos_id());
    Var cross_u = seq_ce_from_logits(t, su.steps, pseudo_u);

    return t.add(t.add(sup, cnt), t.scale(t.add(cross_l, cross_u), lambda));
}

// ---- criterion 1: overfit oracle ------------------------------------------

void check_overfit() {
    auto t0 = Clock::now();
    RunResult r = run_cli("overfit-check --seed 0 --steps 2000");
    double secs = seconds_since(t0);
    int steps = -1;
    if (size_t pos = r.out.find("after "); pos != std::string::npos)
        steps = std::atoi(r.out.c_str() + pos + 6);
    bool ok = r.exit_code == 0 && r.out.find("exprate 1.0") != std::string::npos && steps > 0 &&
              steps <= 2000 && secs < 600.0;
    verdict(1, "overfit oracle", ok,
            strfmt("exit %d, %d steps, %.1f s", r.exit_code, steps, secs));
}

// ---- criterion 2: gradient correctness ------------------------------------

void check_gradients() {
    Vocabulary v = tiny_vocab();
    Model m(tiny_model_cfg(v.size()), 5);
    size_t n_params = 0;
    m.params.for_each([&](const Param& p) { n_params += p.value.numel(); });

    Sample lab = tiny_sample(100, v, true);
    Sample unl = tiny_sample(101, v, false);
    const double lambda = 1e-3;

    // fixed pseudo targets from the unperturbed model
    std::vector<int> pseudo_l, pseudo_u;
    {
        Tape t;
        BranchPass w1 = train_detail::branch_forward(t, m, lab.image, lab.label, 1, v.sos_id());
        std::vector<Tensor> dists = step_distributions(t, w1.steps);
        std::vector<char> mask(lab.label.size(), 1);
        pseudo_l = make_pseudo_labels(dists, mask);

        Tape tg;
        const int ds = m.cfg.enc.downsample_factor();
        Tensor image = pad_canvas(unl.image, ds, ds);
        Tensor msk = Tensor::full({image.dim(0), image.dim(1)}, 1.0);
        EncodedSample enc = encode_sample(tg, image, msk, m.encoder);
        Var counts = predict_counts(tg, enc, m.counting(1));
        pseudo_u = decode_greedy(tg, enc, counts, m.decoder(1), v.sos_id(), v.eos_id(), 8);
    }

    auto loss_value = [&]() {
        Tape t;
        Var root = total_objective(t, m, v, lab.image, lab.label, unl.image, pseudo_l, pseudo_u,
                                   lambda);
        return t.val(root).at(0);
    };

    m.params.zero_grads();
    {
        Tape t;
        Var root = total_objective(t, m, v, lab.image, lab.label, unl.image, pseudo_l, pseudo_u,
                                   lambda);
        t.backward(root);
    }

    // a few coordinates from every tensor, so fusion, refinement, attention,
    // counting, encoder and embedding paths are all probed
    Rng rng(4242);
    double worst = 0.0;
    std::string worst_name;
    int checked = 0;
    m.params.for_each([&](Param& p) {
        std::vector<long long> idx;
        size_t n = p.value.numel();
        for (int k = 0; k < 3 && static_cast<size_t>(k) < n; ++k)
            idx.push_back(rng.uniform_int(0, static_cast<int>(n) - 1));
        oracles::GradCheckResult g = oracles::grad_check(p.value, p.grad, loss_value, idx);
        checked += static_cast<int>(idx.size());
        if (g.max_rel_err > worst) {
            worst = g.max_rel_err;
            worst_name = p.name;
        }
    });
    bool ok = n_params <= 5000 && checked >= 100 && worst < 1e-3;
    verdict(2, "gradient correctness", ok,
            strfmt("%d params, %d coords, worst rel err %.2e (%s)", static_cast<int>(n_params),
                   checked, worst, worst_name.c_str()));
}

// ---- criterion 3: GDCM invariants ------------------------------------------

void check_gdcm() {
    Vocabulary v = tiny_vocab();
    Model m(tiny_model_cfg(v.size()), 7);
    Sample s = tiny_sample(300, v, true);

    const int T = 20;
    Rng rng(33);
    std::vector<int> label;
    for (int i = 0; i < T; ++i) label.push_back(rng.uniform_int(3, v.size() - 1));

    Tape t;
    const int ds = m.cfg.enc.downsample_factor();
    Tensor image = pad_canvas(s.image, ds, ds);
    Tensor msk = Tensor::full({image.dim(0), image.dim(1)}, 1.0);
    EncodedSample enc = encode_sample(t, image, msk, m.encoder);
    Var counts = predict_counts(t, enc, m.counting(1));
    const double sum_v = t.val(counts).sum();

    DecoderState st = init_state(t, enc, counts, m.decoder(1), v.sos_id());
    Var uf = attn_feature_proj(t, enc, m.decoder(1));
    double worst = 0.0;
    for (int i = 0; i < T; ++i) {
        // before emitting token t+1, sum(R) = sum(V) - t
        double expect = sum_v - i;
        worst = std::max(worst, std::fabs(t.val(st.residual).sum() - expect));
        st.prev_token = label[static_cast<size_t>(i)];
        decode_step(t, st, enc, m.decoder(1), uf);
    }

    // zeroed refinement must leave logits untouched, bit for bit
    m.params.get("dec1.refine.wk").value.zero();
    m.params.get("dec1.refine.bk").value.zero();
    Tape t2;
    EncodedSample enc2 = encode_sample(t2, image, msk, m.encoder);
    Var counts2 = predict_counts(t2, enc2, m.counting(1));
    std::vector<StepOutput> steps =
        decode_teacher_forced(t2, enc2, counts2, label, m.decoder(1), v.sos_id());
    bool bit_equal = true;
    for (const StepOutput& so : steps) {
        const std::vector<double>& a = t2.val(so.refined_logits).raw();
        const std::vector<double>& b = t2.val(so.preliminary_logits).raw();
        if (a != b) bit_equal = false;
    }

    bool ok = worst < 1e-5 && bit_equal;
    verdict(3, "gdcm invariants", ok,
            strfmt("T=%d, worst residual-sum error %.2e, zeroed refinement bit-equal %s", T, worst,
                   bit_equal ? "yes" : "no"));
}

// ---- criterion 4: stop-gradient --------------------------------------------

void check_stop_gradient() {
    Vocabulary v = tiny_vocab();
    Model m(tiny_model_cfg(v.size()), 9);
    Sample lab = tiny_sample(400, v, true);
    Sample unl = tiny_sample(401, v, false);

    // cross terms only, pseudo targets recomputed from scratch every call:
    // the argmax is locally constant, so the true function is flat in the
    // weak branch's parameters
    auto cross_value = [&]() {
        Tape t;
        BranchPass w1 = train_detail::branch_forward(t, m, lab.image, lab.label, 1, v.sos_id());
        std::vector<Tensor> dists = step_distributions(t, w1.steps);
        std::vector<char> mask(lab.label.size(), 1);
        std::vector<int> pseudo_l = make_pseudo_labels(dists, mask);
        BranchPass s1 = train_detail::branch_forward(t, m, lab.image, pseudo_l, 2, v.sos_id());
        Var cl = seq_ce_from_logits(t, s1.steps, pseudo_l);

        Tape tg;
        const int ds = m.cfg.enc.downsample_factor();
        Tensor image = pad_canvas(unl.image, ds, ds);
        Tensor msk = Tensor::full({image.dim(0), image.dim(1)}, 1.0);
        EncodedSample enc = encode_sample(tg, image, msk, m.encoder);
        Var counts = predict_counts(tg, enc, m.counting(1));
        std::vector<int> pseudo_u =
            decode_greedy(tg, enc, counts, m.decoder(1), v.sos_id(), v.eos_id(), 8);
        BranchPass su = train_detail::branch_forward(t, m, unl.image, pseudo_u, 2, v.sos_id());
        Var cu = seq_ce_from_logits(t, su.steps, pseudo_u);
        return t.val(t.add(cl, cu)).at(0);
    };

    // analytic side: backward of the cross-only root
    m.params.zero_grads();
    {
        Tape t;
        BranchPass w1 = train_detail::branch_forward(t, m, lab.image, lab.label, 1, v.sos_id());
        std::vector<Tensor> dists = step_distributions(t, w1.steps);
        std::vector<char> mask(lab.label.size(), 1);
        std::vector<int> pseudo_l = make_pseudo_labels(dists, mask);
        BranchPass s1 = train_detail::branch_forward(t, m, lab.image, pseudo_l, 2, v.sos_id());
        Var cl = seq_ce_from_logits(t, s1.steps, pseudo_l);

        Tape tg;
        const int ds = m.cfg.enc.downsample_factor();
        Tensor image = pad_canvas(unl.image, ds, ds);
        Tensor msk = Tensor::full({image.dim(0), image.dim(1)}, 1.0);
        EncodedSample enc = encode_sample(tg, image, msk, m.encoder);
        Var counts = predict_counts(tg, enc, m.counting(1));
        std::vector<int> pseudo_u =
            decode_greedy(tg, enc, counts, m.decoder(1), v.sos_id(), v.eos_id(), 8);
        BranchPass su = train_detail::branch_forward(t, m, unl.image, pseudo_u, 2, v.sos_id());
        Var cu = seq_ce_from_logits(t, su.steps, pseudo_u);
        t.backward(t.add(cl, cu));
    }

    double worst_analytic = 0.0, worst_fd = 0.0;
    int checked = 0;
    Rng rng(77);
    const double h = 1e-5;
    m.params.for_each([&](Param& p) {
        if (p.name.rfind("dec1.", 0) != 0 && p.name.rfind("cnt1.", 0) != 0) return;
        for (double g : p.grad.raw()) worst_analytic = std::max(worst_analytic, std::fabs(g));
        for (int k = 0; k < 2; ++k) {
            int i = rng.uniform_int(0, static_cast<int>(p.value.numel()) - 1);
            double saved = p.value.at(i);
            p.value.at(i) = saved + h;
            double up = cross_value();
            p.value.at(i) = saved - h;
            double dn = cross_value();
            p.value.at(i) = saved;
            worst_fd = std::max(worst_fd, std::fabs(up - dn) / (2 * h));
            ++checked;
        }
    });
    bool ok = worst_analytic == 0.0 && worst_fd == 0.0 && checked >= 40;
    verdict(4, "stop-gradient", ok,
            strfmt("weak-side analytic max |g| = %g, central-difference max = %g over %d coords",
                   worst_analytic, worst_fd, checked));
}

// ---- criterion 5: loss algebra ---------------------------------------------

void check_loss_algebra() {
    Rng rng(55);
    double worst_rel = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double sup = rng.uniform(0.0, 10.0), cl = rng.uniform(0.0, 10.0);
        double cu = rng.uniform(0.0, 10.0), cnt = rng.uniform(0.0, 10.0);
        double lambda = std::pow(10.0, rng.uniform(-4.0, -1.0));
        LossBreakdown b = total_loss(sup, cl, cu, cnt, lambda);
        double expect = sup + lambda * cl + lambda * cu + cnt;
        worst_rel = std::max(worst_rel, std::fabs(b.total - expect) / expect);
    }

    bool grid_exact = true;
    for (int i = -3000; i <= 3000; ++i) {
        double x = static_cast<double>(i) * 1e-3;
        double ax = std::fabs(x);
        double closed = ax < 1.0 ? 0.5 * x * x : ax - 0.5;
        if (smooth_l1(x) != closed) grid_exact = false;
    }
    bool ok = worst_rel < 1e-12 && grid_exact;
    verdict(5, "loss algebra", ok,
            strfmt("composition worst rel err %.2e, smooth_l1 grid exact %s", worst_rel,
                   grid_exact ? "yes" : "no"));
}

// ---- criterion 6: metric oracle --------------------------------------------

void check_metrics() {
    // every sequence of length <= 6 over a 3-token alphabet
    std::vector<std::vector<int>> seqs = {{}};
    std::vector<std::vector<int>> frontier = {{}};
    for (int len = 1; len <= 6; ++len) {
        std::vector<std::vector<int>> next;
        for (const auto& s : frontier)
            for (int tok = 0; tok < 3; ++tok) {
                auto e = s;
                e.push_back(tok);
                next.push_back(e);
            }
        seqs.insert(seqs.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    bool exhaustive_ok = true;
    for (const auto& a : seqs)
        for (const auto& b : seqs)
            if (edit_distance(a, b) != oracles::edit_distance_recursive(a, b))
                exhaustive_ok = false;

    Rng rng(66);
    std::vector<EvalSample> pairs;
    for (int i = 0; i < 1000; ++i) {
        EvalSample es;
        int la = rng.uniform_int(0, 8), lb = rng.uniform_int(0, 8);
        for (int k = 0; k < la; ++k) es.predicted.push_back(rng.uniform_int(0, 4));
        for (int k = 0; k < lb; ++k) es.reference.push_back(rng.uniform_int(0, 4));
        es.distance = edit_distance(es.predicted, es.reference);
        pairs.push_back(std::move(es));
    }
    EvalReport r = aggregate_report(std::move(pairs));
    bool order_ok = r.exprate <= r.leq1 && r.leq1 <= r.leq2;
    bool ok = exhaustive_ok && order_ok;
    verdict(6, "metric oracle", ok,
            strfmt("%d sequences exhaustive %s; exprate %.3f <= leq1 %.3f <= leq2 %.3f",
                   static_cast<int>(seqs.size()), exhaustive_ok ? "ok" : "MISMATCH", r.exprate,
                   r.leq1, r.leq2));
}

// ---- criterion 7: augmentation schedule ------------------------------------

void check_schedule() {
    Vocabulary v = tiny_vocab();
    Model m(tiny_model_cfg(v.size()), 11);
    Adadelta opt(m.params);
    std::vector<Sample> lab, unl;
    for (int i = 0; i < 4; ++i) lab.push_back(tiny_sample(mix_seed(700, i), v, true));
    for (int i = 0; i < 4; ++i) unl.push_back(tiny_sample(mix_seed(701, i), v, false));

    TrainSettings ts;
    ts.epochs = 20;
    ts.warmup_epochs = 10;
    ts.batch_size = 4;
    ts.seed = 13;
    ts.max_len = 8;
    TrainResult r = run_training(m, opt, ts, lab, unl, v);

    bool alternation_ok = r.assignments.size() == 20;
    for (int e = 10; e < 20 && alternation_ok; ++e) {
        const BranchAssignment& a = r.assignments[static_cast<size_t>(e)];
        bool b1_strong = a.policy_for_decoder1.kind == AugmentationPolicy::Kind::strong;
        bool b2_strong = a.policy_for_decoder2.kind == AugmentationPolicy::Kind::strong;
        if (b1_strong == b2_strong) alternation_ok = false;          // exactly one strong
        if (b1_strong != ((e - 10) % 2 == 1)) alternation_ok = false;  // period 2
    }
    bool warmup_ok = true;
    for (const IterationRecord& rec : r.history)
        if (rec.epoch < 10 && (rec.loss.cross_labeled != 0.0 || rec.loss.cross_unlabeled != 0.0))
            warmup_ok = false;

    // Monte-Carlo application rates of the strong policy
    AugmentationPolicy strong = make_strong_policy();
    Tensor probe = tiny_sample(702, v, true).image;
    int stretched = 0, perspectived = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        AppliedOps ops;
        strong_augment(probe, mix_seed(0xAC5u, static_cast<uint64_t>(i)), strong, &ops);
        stretched += ops.stretch ? 1 : 0;
        perspectived += ops.perspective ? 1 : 0;
    }
    double sr = static_cast<double>(stretched) / n, pr = static_cast<double>(perspectived) / n;
    bool rates_ok = std::fabs(sr - 0.5) <= 0.02 && std::fabs(pr - 0.3) <= 0.02;

    bool ok = alternation_ok && warmup_ok && rates_ok;
    verdict(7, "augmentation schedule", ok,
            strfmt("alternation %s, warmup cross terms zero %s, stretch rate %.3f, perspective "
                   "rate %.3f",
                   alternation_ok ? "ok" : "BROKEN", warmup_ok ? "ok" : "BROKEN", sr, pr));
}

// ---- criteria 8 and 9: semi-supervised gain and lambda sensitivity ---------

struct Corpus {
    std::vector<Sample> labeled, unlabeled, test;
};

// Every split carries a per-sample geometric deformation (mild stretch and
// perspective) so that 200 labeled images undersample the style space and
// augmentation-based methods have headroom; the 800 unlabeled images carry
// the information the cross terms are supposed to mine.
Corpus experiment_corpus(uint64_t seed, const Vocabulary& v) {
    SynthConfig sc = default_synth_config();
    sc.tokens.resize(10);
    sc.image_height = 32;
    sc.min_len = 2;
    sc.max_len = 3;
    AugmentationPolicy bake = make_strong_policy();
    bake.p_distort = 0.0;
    bake.p_stretch = 1.0;
    bake.p_perspective = 1.0;
    bake.stretch_lo = 0.88;
    bake.stretch_hi = 1.12;
    bake.persp_frac = 0.04;
    auto gen = [&](uint64_t split, int i) {
        Sample s = synth_sample(mix_seed(seed, split, i), sc, v);
        s.image = strong_augment(s.image, mix_seed(seed, split + 10, i), bake, nullptr);
        return s;
    };
    Corpus c;
    for (int i = 0; i < 200; ++i) c.labeled.push_back(gen(1, i));
    for (int i = 0; i < 800; ++i) {
        Sample s = gen(2, i);
        s.label.clear();
        s.source = Source::unlabeled;
        c.unlabeled.push_back(std::move(s));
    }
    for (int i = 0; i < 150; ++i) c.test.push_back(gen(3, i));
    return c;
}

ModelConfig experiment_model_cfg(int classes) {
    ModelConfig mc;
    mc.enc.growth = 6;
    mc.enc.block_depths = {2, 2};
    mc.enc.initial_channels = 12;
    mc.dec.hidden = 32;
    mc.dec.embed = 16;
    mc.dec.attn = 16;
    mc.dec.fusion = 32;
    mc.classes = classes;
    return mc;
}

struct VariantSpec {
    const char* name;
    int epochs;       // total budget; cross epochs are those past the shared warmup
    bool strong_aug;  // keep the strong policy; otherwise neutralize it
    double lambda = 1e-3;
};

// Supervised variants run one full cosine to saturation (training ExpRate
// reaches 1.0 and the schedule ends at lr 0, so a longer budget adds nothing
// — the parity run below demonstrates that). The cross variant's warmup is
// that same saturating schedule, step-for-step identical to the strong-sup
// run, followed by a lower-peak fine-tuning phase where the unlabeled pool
// and the cross terms join. All variants are read on decoder 1, which in the
// supervised variants only ever trains on weak (identity) views, so the chain
// isolates strong augmentation reaching decoder 1 through the shared encoder,
// then the cross terms on top of that.
double run_variant(const VariantSpec& vs, const Corpus& c, const Vocabulary& v, uint64_t seed,
                   int warmup) {
    Model m(experiment_model_cfg(v.size()), seed);
    Adadelta opt(m.params);
    TrainSettings ts;
    ts.epochs = vs.epochs;
    ts.warmup_epochs = std::min(vs.epochs, warmup);
    ts.batch_size = 8;
    ts.lambda = vs.lambda;
    ts.seed = seed;
    ts.max_len = 12;
    if (!vs.strong_aug) {
        ts.strong_policy.p_distort = 0.0;
        ts.strong_policy.p_stretch = 0.0;
        ts.strong_policy.p_perspective = 0.0;
    }
    const bool cross = vs.epochs > ts.warmup_epochs;
    run_training(m, opt, ts, c.labeled, cross ? c.unlabeled : std::vector<Sample>{}, v);
    return evaluate(m, c.test, v, ts.max_len, 1).exprate;
}

void check_gain_and_lambda() {
    auto t0 = Clock::now();
    Vocabulary v = build_vocabulary(default_token_list());
    const uint64_t seeds[3] = {1, 2, 3};
    const int warmup = 120;

    VariantSpec none{"no-aug", 120, false};
    VariantSpec strong{"strong-sup", 120, true};
    VariantSpec cps{"weak-to-strong", 180, true, 1e-3};

    double mean_none = 0, mean_strong = 0, mean_cps = 0;
    double cps_rate[3], other_best[3];
    for (int i = 0; i < 3; ++i) {
        Corpus c = experiment_corpus(seeds[i], v);
        double rn = run_variant(none, c, v, seeds[i], warmup);
        double rs = run_variant(strong, c, v, seeds[i], warmup);
        double rc = run_variant(cps, c, v, seeds[i], warmup);
        std::cout << "    seed " << seeds[i] << ": no-aug " << rn << ", strong-sup " << rs
                  << ", weak-to-strong " << rc << "  [" << strfmt("%.0f", seconds_since(t0))
                  << " s]" << std::endl;
        mean_none += rn / 3;
        mean_strong += rs / 3;
        mean_cps += rc / 3;
        cps_rate[i] = rc;
        other_best[i] = std::max(rn, rs);
    }
    // budget parity: the supervised baseline gains nothing from the cross
    // variant's extra epochs, so the comparison is method vs method
    VariantSpec none_long{"no-aug-180", 180, false};
    {
        Corpus c = experiment_corpus(seeds[0], v);
        double rp = run_variant(none_long, c, v, seeds[0], 180);
        std::cout << "    parity: no-aug at the cross budget (seed 1): " << rp << std::endl;
    }
    int strictly_best = 0;
    for (int i = 0; i < 3; ++i)
        if (cps_rate[i] > other_best[i]) ++strictly_best;
    bool ok8 = mean_cps >= mean_strong && mean_strong >= mean_none && strictly_best >= 2 &&
               seconds_since(t0) < 7200.0;
    verdict(8, "directional semi-supervised gain", ok8,
            strfmt("mean exprate: no-aug %.3f <= strong-sup %.3f <= weak-to-strong %.3f; strictly "
                   "best on %d/3 seeds; %.0f s",
                   mean_none, mean_strong, mean_cps, strictly_best, seconds_since(t0)));

    // lambda sweep on the same corpus and schedule; the 1e-3 runs are the
    // criterion-8 cross runs, so only the other two settings train here
    double mean_by_lambda[3] = {0, mean_cps, 0};  // 1e-2, 1e-3, 1e-4
    const double lambdas[2] = {1e-2, 1e-4};
    const int slot[2] = {0, 2};
    for (int i = 0; i < 3; ++i) {
        Corpus c = experiment_corpus(seeds[i], v);
        for (int k = 0; k < 2; ++k) {
            VariantSpec vs = cps;
            vs.lambda = lambdas[k];
            double r = run_variant(vs, c, v, seeds[i], warmup);
            mean_by_lambda[slot[k]] += r / 3;
            std::cout << "    seed " << seeds[i] << " lambda " << lambdas[k] << ": " << r << " ["
                      << strfmt("%.0f", seconds_since(t0)) << " s]" << std::endl;
        }
    }
    bool ok9 = mean_by_lambda[0] <= std::max(mean_by_lambda[1], mean_by_lambda[2]);
    verdict(9, "lambda sensitivity", ok9,
            strfmt("mean exprate: 1e-2 %.3f vs best(1e-3 %.3f, 1e-4 %.3f)", mean_by_lambda[0],
                   mean_by_lambda[1], mean_by_lambda[2]));
}

// ---- criterion 10: determinism ----------------------------------------------

void check_determinism() {
    fs::path dir = work_dir() / "det";
    fs::create_directories(dir);
    RunResult synth = run_cli("synth --out det/c --n-labeled 6 --n-unlabeled 4 --seed 21 "
                              "--max-len 3");
    std::ofstream cfg(dir / "t.cfg");
    cfg << "enc.growth = 3\nenc.depths = 2\nenc.init_channels = 4\n"
           "dec.hidden = 8\ndec.embed = 5\ndec.attn = 6\ndec.fusion = 7\n"
           "train.batch_size = 2\ntrain.max_len = 8\ntrain.epochs = 4\n"
           "train.warmup_epochs = 2\n"
           "data.labeled = det/c/labeled.tsv\ndata.unlabeled = det/c/unlabeled.tsv\n"
           "data.vocab = det/c/vocab.txt\n";
    cfg.close();

    RunResult a = run_cli("train --config det/t.cfg --train.metrics det/a.log "
                          "--train.checkpoint det/a.bin");
    RunResult b = run_cli("train --config det/t.cfg --train.metrics det/b.log "
                          "--train.checkpoint det/b.bin");
    bool logs_equal = !slurp(dir / "a.log").empty() && slurp(dir / "a.log") == slurp(dir / "b.log");

    // stop at epoch 2, reload, continue: the final checkpoint must match the
    // uninterrupted run byte for byte
    RunResult half = run_cli("train --config det/t.cfg --train.epochs 2 --train.warmup_epochs 2 "
                             "--train.metrics det/h.log --train.checkpoint det/r.bin");
    RunResult rest = run_cli("train --config det/t.cfg --resume --train.metrics det/r.log "
                             "--train.checkpoint det/r.bin");
    bool resume_equal = slurp(dir / "r.bin") == slurp(dir / "a.bin") &&
                        !slurp(dir / "r.bin").empty();

    bool ok = synth.exit_code == 0 && a.exit_code == 0 && b.exit_code == 0 &&
              half.exit_code == 0 && rest.exit_code == 0 && logs_equal && resume_equal;
    verdict(10, "determinism", ok,
            strfmt("identical metrics logs %s, resumed checkpoint byte-equal %s",
                   logs_equal ? "yes" : "NO", resume_equal ? "yes" : "NO"));
}

}  // namespace

int main() {
    auto t0 = Clock::now();
    try {
        check_overfit();
        check_gradients();
        check_gdcm();
        check_stop_gradient();
        check_loss_algebra();
        check_metrics();
        check_schedule();
        check_gain_and_lambda();
        check_determinism();
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << strfmt("acceptance: %d/10 passed, %.0f s total", 10 - g_failures,
                        seconds_since(t0))
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
