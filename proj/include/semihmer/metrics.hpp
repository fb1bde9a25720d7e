#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "semihmer/common.hpp"
#include "semihmer/losses.hpp"

namespace semihmer {

struct IterationRecord {
    int epoch = 0;
    int iter = 0;  // global iteration index
    double lr = 0.0;
    LossBreakdown loss;
    int branch1_strong = 0;  // 1 when decoder branch 1 receives strong augmentation
};

inline std::string format_metrics_line(const IterationRecord& r) {
    return strfmt("epoch=%d iter=%d lr=%.10g sup=%.10g cross_l=%.10g cross_u=%.10g "
                  "counting=%.10g total=%.10g branch1_strong=%d",
                  r.epoch, r.iter, r.lr, r.loss.sup, r.loss.cross_labeled, r.loss.cross_unlabeled,
                  r.loss.counting, r.loss.total, r.branch1_strong);
}

inline IterationRecord parse_metrics_line(const std::string& line, int lineno = 0) {
    IterationRecord r;
    std::istringstream in(line);
    std::string pair;
    int seen = 0;
    while (in >> pair) {
        size_t eq = pair.find('=');
        if (eq == std::string::npos)
            fail(strfmt("metrics line %d: token '%s' is not name=value", lineno, pair.c_str()));
        std::string name = pair.substr(0, eq);
        std::string value = pair.substr(eq + 1);
        try {
            size_t pos = 0;
            double v = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            ++seen;
            if (name == "epoch") r.epoch = static_cast<int>(v);
            else if (name == "iter") r.iter = static_cast<int>(v);
            else if (name == "lr") r.lr = v;
            else if (name == "sup") r.loss.sup = v;
            else if (name == "cross_l") r.loss.cross_labeled = v;
            else if (name == "cross_u") r.loss.cross_unlabeled = v;
            else if (name == "counting") r.loss.counting = v;
            else if (name == "total") r.loss.total = v;
            else if (name == "branch1_strong") r.branch1_strong = static_cast<int>(v);
            else --seen;  // unknown pairs are tolerated for forward compatibility
        } catch (const std::exception&) {
            fail(strfmt("metrics line %d: bad value in '%s'", lineno, pair.c_str()));
        }
    }
    if (seen < 8) fail(strfmt("metrics line %d: missing required fields", lineno));
    return r;
}

inline std::vector<IterationRecord> read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open metrics file '" + path + "'");
    std::vector<IterationRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_metrics_line(line, lineno));
    }
    return out;
}

// Append-only sink; one line per iteration.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path) : path_(path) {
        if (path_.empty()) return;
        out_.open(path_, std::ios::app);
        if (!out_) fail("cannot open metrics file '" + path_ + "' for append");
    }

    void write(const IterationRecord& r) {
        history_.push_back(r);
        if (!out_.is_open()) return;
        out_ << format_metrics_line(r) << "\n";
        out_.flush();
    }

    const std::vector<IterationRecord>& history() const { return history_; }

private:
    std::string path_;
    std::ofstream out_;
    std::vector<IterationRecord> history_;
};

}  // namespace semihmer
