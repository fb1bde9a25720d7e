#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "semihmer/common.hpp"

namespace semihmer {

// Dense row-major double tensor, rank <= 4. Plain data; autograd lives in
// autograd.hpp on top of this.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        v_.assign(static_cast<size_t>(numel_of(dims_)), 0.0);
    }
    Tensor(std::initializer_list<int> dims) : Tensor(std::vector<int>(dims)) {}

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
    static Tensor full(std::vector<int> dims, double value) {
        Tensor t(std::move(dims));
        std::fill(t.v_.begin(), t.v_.end(), value);
        return t;
    }
    static Tensor scalar(double value) {
        Tensor t(std::vector<int>{});
        t.v_.assign(1, value);
        return t;
    }

    int ndim() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int>& dims() const { return dims_; }
    long long numel() const { return static_cast<long long>(v_.size()); }
    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double& at(int i) { return v_[static_cast<size_t>(i)]; }
    double at(int i) const { return v_[static_cast<size_t>(i)]; }
    double& at(int i, int j) { return v_[static_cast<size_t>(i) * dims_[1] + j]; }
    double at(int i, int j) const { return v_[static_cast<size_t>(i) * dims_[1] + j]; }
    double& at(int i, int j, int k) {
        return v_[(static_cast<size_t>(i) * dims_[1] + j) * dims_[2] + k];
    }
    double at(int i, int j, int k) const {
        return v_[(static_cast<size_t>(i) * dims_[1] + j) * dims_[2] + k];
    }
    double& at(int i, int j, int k, int l) {
        return v_[((static_cast<size_t>(i) * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }
    double at(int i, int j, int k, int l) const {
        return v_[((static_cast<size_t>(i) * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
    }

    void fill(double value) { std::fill(v_.begin(), v_.end(), value); }
    void zero() { fill(0.0); }

    double min() const { return v_.empty() ? 0.0 : *std::min_element(v_.begin(), v_.end()); }
    double max() const { return v_.empty() ? 0.0 : *std::max_element(v_.begin(), v_.end()); }
    double sum() const { return std::accumulate(v_.begin(), v_.end(), 0.0); }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::vector<double>& raw() { return v_; }
    const std::vector<double>& raw() const { return v_; }

private:
    static long long numel_of(const std::vector<int>& dims) {
        long long n = 1;
        for (int d : dims) {
            if (d < 0) fail("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::vector<int> dims_;
    std::vector<double> v_;
};

inline Tensor random_uniform(std::vector<int> dims, double lo, double hi, Rng& rng) {
    Tensor t(std::move(dims));
    for (long long i = 0; i < t.numel(); ++i) t[static_cast<size_t>(i)] = rng.uniform(lo, hi);
    return t;
}

}  // namespace semihmer
