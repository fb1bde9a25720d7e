#pragma once

#include <cmath>
#include <vector>

#include "semihmer/params.hpp"

namespace semihmer {

// Adadelta: per-coordinate step sizes from running averages of squared
// gradients and squared updates, scaled by an external learning rate so the
// warmup/cosine schedule still applies.
class Adadelta {
public:
    Adadelta(ParamSet& ps, double rho = 0.95, double eps = 1e-6) : ps_(&ps), rho_(rho), eps_(eps) {
        ps.for_each([&](Param& p) {
            acc_grad_.push_back(Tensor(p.value.dims()));
            acc_update_.push_back(Tensor(p.value.dims()));
        });
    }

    void step(double lr) {
        size_t k = 0;
        ps_->for_each([&](Param& p) {
            Tensor& eg = acc_grad_[k];
            Tensor& eu = acc_update_[k];
            ++k;
            for (long long i = 0; i < p.value.numel(); ++i) {
                const double g = p.grad[i];
                eg[i] = rho_ * eg[i] + (1.0 - rho_) * g * g;
                const double dx = -std::sqrt(eu[i] + eps_) / std::sqrt(eg[i] + eps_) * g;
                eu[i] = rho_ * eu[i] + (1.0 - rho_) * dx * dx;
                p.value[i] += lr * dx;
            }
        });
    }

    double rho() const { return rho_; }
    double eps() const { return eps_; }
    std::vector<Tensor>& acc_grad() { return acc_grad_; }
    std::vector<Tensor>& acc_update() { return acc_update_; }
    const std::vector<Tensor>& acc_grad() const { return acc_grad_; }
    const std::vector<Tensor>& acc_update() const { return acc_update_; }

private:
    ParamSet* ps_;
    double rho_, eps_;
    std::vector<Tensor> acc_grad_;    // E[g^2], insertion order of the ParamSet
    std::vector<Tensor> acc_update_;  // E[dx^2]
};

}  // namespace semihmer
