#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "corefsum/ops.hpp"
#include "corefsum/tensor.hpp"

namespace corefsum {

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam update with bias correction, t counted from 1.
inline void adam_step(Tensor& value, const Tensor& grad, Tensor& m, Tensor& v, double lr,
                      double beta1, double beta2, double eps, std::size_t t) {
    require_same_shape(value, grad, "adam_step");
    require_same_shape(value, m, "adam_step");
    require_same_shape(value, v, "adam_step");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad.at(i);
        m.at(i) = beta1 * m.at(i) + (1.0 - beta1) * g;
        v.at(i) = beta2 * v.at(i) + (1.0 - beta2) * g * g;
        const double mhat = m.at(i) / bc1;
        const double vhat = v.at(i) / bc2;
        value.at(i) -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// Adam over named parameter groups, each with its own learning rate. The
// trainer puts fusion parameters in one group and the backbone in another.
class Adam {
public:
    explicit Adam(AdamSettings settings = {}) : settings_(settings) {}

    void add_group(std::vector<Parameter*> params, double lr) {
        for (Parameter* p : params) {
            slots_.push_back(Slot{p, Tensor::zeros(p->value.shape()),
                                  Tensor::zeros(p->value.shape()), lr});
        }
    }

    std::size_t step_count() const { return t_; }

    void step() {
        ++t_;
        for (Slot& s : slots_) {
            adam_step(s.param->value, s.param->grad, s.m, s.v, s.lr, settings_.beta1,
                      settings_.beta2, settings_.eps, t_);
        }
    }

    void zero_grad() {
        for (Slot& s : slots_) s.param->zero_grad();
    }

private:
    struct Slot {
        Parameter* param;
        Tensor m;
        Tensor v;
        double lr;
    };

    AdamSettings settings_;
    std::vector<Slot> slots_;
    std::size_t t_ = 0;
};

}  // namespace corefsum
