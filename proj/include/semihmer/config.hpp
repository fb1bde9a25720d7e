#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "semihmer/common.hpp"

namespace semihmer {

// Flat key=value configuration. Every key has a documented default; parsing
// rejects keys outside the table, so typos fail loudly.
class Config {
public:
    Config() {
        // training schedule and loss weights
        def("train.epochs", "120", "total epochs (warmup + cross phases)");
        def("train.warmup_epochs", "60", "epochs before cross-training starts");
        def("train.batch_size", "4", "labeled samples per iteration");
        def("train.unlabeled_ratio", "1", "unlabeled samples per labeled sample");
        def("train.lambda", "0.001", "weight of both cross pseudo-supervision terms");
        def("train.peak_lr_warmup", "1.0", "schedule peak during the warmup phase");
        def("train.peak_lr_cross", "0.1", "schedule peak during the cross phase");
        def("train.rho", "0.95", "adadelta decay");
        def("train.eps", "1e-6", "adadelta epsilon");
        def("train.seed", "0", "master seed; fixes init, shuffling and augmentation");
        def("train.max_len", "48", "greedy decode cap for pseudo-sequences");
        def("train.checkpoint", "checkpoint.bin", "checkpoint file, rewritten each epoch");
        def("train.metrics", "metrics.log", "append-only iteration log");
        // strong augmentation policy
        def("aug.distort_p", "1.0", "probability of elastic distortion");
        def("aug.stretch_p", "0.5", "probability of horizontal stretch");
        def("aug.perspective_p", "0.3", "probability of perspective warp");
        // encoder size
        def("enc.growth", "12", "dense layer growth rate");
        def("enc.depths", "4,4,4", "layers per dense block, comma separated");
        def("enc.init_channels", "32", "stem output channels");
        // decoder size
        def("dec.hidden", "64", "recurrent state size");
        def("dec.embed", "32", "token embedding size");
        def("dec.attn", "32", "attention space size");
        def("dec.fusion", "64", "fusion vector size");
        def("dec.coverage_kernel", "5", "coverage convolution kernel");
        def("dec.clamp_residual", "false", "clamp the count residual at zero");
        // data locations
        def("data.labeled", "", "labeled manifest path");
        def("data.unlabeled", "", "unlabeled manifest path (may be empty)");
        def("data.test", "", "held-out manifest path for eval");
        def("data.vocab", "", "vocabulary file; empty means the built-in list");
    }

    void set(const std::string& key, const std::string& value) {
        auto it = values_.find(key);
        if (it == values_.end()) fail("unknown config key '" + key + "'");
        it->second = value;
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) fail("unknown config key '" + key + "'");
        return it->second;
    }

    int get_int(const std::string& key) const {
        const std::string& s = get(key);
        try {
            size_t pos = 0;
            int v = std::stoi(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail("config key '" + key + "': '" + s + "' is not an integer");
        }
    }

    double get_double(const std::string& key) const {
        const std::string& s = get(key);
        try {
            size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail("config key '" + key + "': '" + s + "' is not a number");
        }
    }

    bool get_bool(const std::string& key) const {
        const std::string& s = get(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        fail("config key '" + key + "': '" + s + "' is not a boolean");
    }

    uint64_t get_u64(const std::string& key) const {
        const std::string& s = get(key);
        try {
            size_t pos = 0;
            unsigned long long v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return static_cast<uint64_t>(v);
        } catch (const std::exception&) {
            fail("config key '" + key + "': '" + s + "' is not an unsigned integer");
        }
    }

    std::vector<int> get_int_list(const std::string& key) const {
        const std::string& s = get(key);
        std::vector<int> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                size_t pos = 0;
                out.push_back(std::stoi(item, &pos));
                if (pos != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                fail("config key '" + key + "': '" + s + "' is not a comma-separated int list");
            }
        }
        if (out.empty()) fail("config key '" + key + "': empty list");
        return out;
    }

    const std::string& describe(const std::string& key) const {
        auto it = docs_.find(key);
        if (it == docs_.end()) fail("unknown config key '" + key + "'");
        return it->second;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    // `key = value` lines; '#' starts a comment; blank lines skipped.
    void load_text(const std::string& text, const std::string& origin = "<config>") {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            size_t a = line.find_first_not_of(" \t\r");
            if (a == std::string::npos) continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                fail(strfmt("%s:%d: expected key = value", origin.c_str(), lineno));
            auto trim = [](std::string s) {
                size_t b = s.find_first_not_of(" \t\r");
                size_t e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) fail(strfmt("%s:%d: empty key", origin.c_str(), lineno));
            if (!values_.count(key))
                fail(strfmt("%s:%d: unknown config key '%s'", origin.c_str(), lineno, key.c_str()));
            values_[key] = value;
        }
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        load_text(ss.str(), path);
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

private:
    void def(const std::string& key, const std::string& value, const std::string& doc) {
        values_[key] = value;
        docs_[key] = doc;
    }

    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> docs_;
};

}  // namespace semihmer
