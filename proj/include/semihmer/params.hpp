#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "semihmer/autograd.hpp"
#include "semihmer/common.hpp"
#include "semihmer/tensor.hpp"

namespace semihmer {

enum class Init { zeros, ones, he_conv, glorot, embed };

// Owns every trainable tensor of a model. Iteration order is insertion
// order, which fixes the optimizer and checkpoint layouts. Each parameter's
// initial values depend only on (seed, name), never on creation order.
class ParamSet {
public:
    explicit ParamSet(uint64_t seed = 0) : seed_(seed) {}

    Param& add(const std::string& name, std::vector<int> dims, Init init) {
        if (by_name_.count(name)) fail("duplicate parameter '" + name + "'");
        auto p = std::make_unique<Param>(name, Tensor(dims));
        initialize(p->value, init, mix_seed(seed_, fnv1a(name)));
        Param& ref = *p;
        by_name_[name] = p.get();
        params_.push_back(std::move(p));
        return ref;
    }

    Param& get(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) fail("unknown parameter '" + name + "'");
        return *it->second;
    }

    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& p : params_) fn(*p);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& p : params_) fn(*p);
    }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

    long long count() const {
        long long n = 0;
        for (const auto& p : params_) n += p->value.numel();
        return n;
    }

    int size() const { return static_cast<int>(params_.size()); }

private:
    static void initialize(Tensor& t, Init init, uint64_t seed) {
        Rng rng(seed);
        switch (init) {
            case Init::zeros:
                t.zero();
                break;
            case Init::ones:
                t.fill(1.0);
                break;
            case Init::he_conv: {
                // fan_in = in_channels * kh * kw for (out, in, kh, kw)
                long long fan = t.numel() / t.dim(0);
                double std = std::sqrt(2.0 / static_cast<double>(fan));
                for (long long i = 0; i < t.numel(); ++i) t[i] = rng.normal() * std;
                break;
            }
            case Init::glorot: {
                // (out, in) matrices
                double lim = std::sqrt(6.0 / (t.dim(0) + t.dim(t.ndim() - 1)));
                for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-lim, lim);
                break;
            }
            case Init::embed:
                for (long long i = 0; i < t.numel(); ++i) t[i] = rng.normal() * 0.1;
                break;
        }
    }

    uint64_t seed_;
    std::vector<std::unique_ptr<Param>> params_;
    std::unordered_map<std::string, Param*> by_name_;
};

}  // namespace semihmer
