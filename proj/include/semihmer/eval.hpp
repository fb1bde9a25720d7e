#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "semihmer/data.hpp"
#include "semihmer/model.hpp"
#include "semihmer/vocab.hpp"

namespace semihmer {

// Token-level Levenshtein distance, unit costs, two-row DP.
inline int edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

struct EvalSample {
    int distance = 0;
    std::vector<int> predicted;  // eos stripped
    std::vector<int> reference;  // eos stripped
};

struct EvalReport {
    double exprate = 0.0;
    double leq1 = 0.0;
    double leq2 = 0.0;
    std::vector<EvalSample> per_sample;
};

inline std::vector<int> strip_eos(std::vector<int> seq, int eos_id) {
    while (!seq.empty() && seq.back() == eos_id) seq.pop_back();
    return seq;
}

inline EvalReport aggregate_report(std::vector<EvalSample> per_sample) {
    if (per_sample.empty()) fail("evaluation needs at least one sample");
    EvalReport r;
    int e0 = 0, e1 = 0, e2 = 0;
    for (const EvalSample& s : per_sample) {
        e0 += s.distance == 0 ? 1 : 0;
        e1 += s.distance <= 1 ? 1 : 0;
        e2 += s.distance <= 2 ? 1 : 0;
    }
    const double n = static_cast<double>(per_sample.size());
    r.exprate = e0 / n;
    r.leq1 = e1 / n;
    r.leq2 = e2 / n;
    r.per_sample = std::move(per_sample);
    return r;
}

// Greedy-decodes one branch (default 1) on every sample; distances on
// eos-stripped sequences.
inline EvalReport evaluate(const Model& model, const std::vector<Sample>& data,
                           const Vocabulary& vocab, int max_len, int branch = 1) {
    if (data.empty()) fail("evaluation needs at least one sample");
    std::vector<EvalSample> per_sample;
    for (size_t i = 0; i < data.size(); ++i) {
        const Sample& s = data[i];
        if (s.label.empty()) fail(strfmt("evaluation sample %d has no label", static_cast<int>(i)));
        Tape t;
        const int ds = model.cfg.enc.downsample_factor();
        Tensor image = pad_canvas(s.image, ds, ds);
        Tensor mask = Tensor::full({image.dim(0), image.dim(1)}, 1.0);
        EncodedSample enc = encode_sample(t, image, mask, model.encoder);
        Var counts = predict_counts(t, enc, model.counting(branch));
        std::vector<int> pred = decode_greedy(t, enc, counts, model.decoder(branch),
                                              vocab.sos_id(), vocab.eos_id(), max_len);
        EvalSample es;
        es.predicted = strip_eos(std::move(pred), vocab.eos_id());
        es.reference = strip_eos(s.label, vocab.eos_id());
        es.distance = edit_distance(es.predicted, es.reference);
        per_sample.push_back(std::move(es));
    }
    return aggregate_report(std::move(per_sample));
}

inline std::string format_report_line(const EvalReport& r) {
    return strfmt("exprate=%.6f leq1=%.6f leq2=%.6f n=%d", r.exprate, r.leq1, r.leq2,
                  static_cast<int>(r.per_sample.size()));
}

inline std::string format_report_table(const EvalReport& r) {
    std::string out;
    out += strfmt("  samples        %d\n", static_cast<int>(r.per_sample.size()));
    out += strfmt("  ExpRate        %.2f%%\n", 100.0 * r.exprate);
    out += strfmt("  <= 1 error     %.2f%%\n", 100.0 * r.leq1);
    out += strfmt("  <= 2 errors    %.2f%%\n", 100.0 * r.leq2);
    return out;
}

}  // namespace semihmer
