#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "corefsum/rng.hpp"
#include "corefsum/tensor.hpp"

namespace corefsum {

// Named trainable tensor. Gradients accumulate across backward passes and are
// zeroed by the optimizer (or by hand) before the next one.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() { grad = Tensor::zeros(value.shape()); }
};

inline Parameter make_uniform_parameter(const std::string& name,
                                        std::vector<std::size_t> shape, RngState& rng,
                                        double radius = 0.08) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-radius, radius);
    return Parameter(name, std::move(t));
}

// y = x W + b with x [n x k], W [k x m], b [m].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rows(matmul(x, w), b);
}

inline Tensor linear(const Tensor& x, const Parameter& w, const Parameter& b) {
    return linear(x, w.value, b.value);
}

inline Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y.at(i) < 0.0) y.at(i) = 0.0;
    }
    return y;
}

// Normalizes over the last dimension of a 2-D tensor (each row), then applies
// the affine transform gamma, beta (both of row length).
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
    if (x.ndim() != 2 || x.shape()[1] < 1) {
        throw ValidationError("layer_norm: expects 2-D input with at least one column");
    }
    if (gamma.size() != x.shape()[1] || beta.size() != x.shape()[1]) {
        throw ValidationError("layer_norm: gamma/beta length mismatch");
    }
    const std::size_t n = x.shape()[0], m = x.shape()[1];
    Tensor y({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * m;
        double mean = 0.0;
        for (std::size_t j = 0; j < m; ++j) mean += row[j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < m; ++j) {
            y.at(i * m + j) = gamma.at(j) * (row[j] - mean) * inv + beta.at(j);
        }
    }
    return y;
}

inline Tensor layer_norm(const Tensor& x, const Parameter& gamma, const Parameter& beta,
                         double eps = 1e-5) {
    return layer_norm(x, gamma.value, beta.value, eps);
}

// Row-wise softmax with row-max subtraction.
inline Tensor softmax_rows(const Tensor& x) {
    if (x.ndim() != 2) throw ValidationError("softmax_rows: expects 2-D input");
    const std::size_t n = x.shape()[0], m = x.shape()[1];
    Tensor y({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * m;
        double mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double e = std::exp(row[j] - mx);
            y.at(i * m + j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < m; ++j) y.at(i * m + j) /= sum;
    }
    return y;
}

// Inverted dropout: kept entries are scaled by 1/(1-p) at training time so
// inference is exactly the identity. Returns the mask used (1/(1-p) or 0 per
// entry) through *mask_out when requested.
inline Tensor dropout(const Tensor& x, double p, RngState& rng, bool training,
                      Tensor* mask_out = nullptr) {
    if (p < 0.0 || p >= 1.0) throw ValidationError("dropout: p must be in [0, 1)");
    if (!training || p == 0.0) {
        if (mask_out) *mask_out = Tensor::full(x.shape(), 1.0);
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    Tensor y = x;
    Tensor mask = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (rng.bernoulli(p)) {
            y.at(i) = 0.0;
        } else {
            y.at(i) *= keep_scale;
            mask.at(i) = keep_scale;
        }
    }
    if (mask_out) *mask_out = std::move(mask);
    return y;
}

// log(sum(exp(row))) per row, stabilized; used by the cross-entropy loss.
inline std::vector<double> log_sum_exp_rows(const Tensor& x) {
    const std::size_t n = x.shape()[0], m = x.shape()[1];
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * m;
        double mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += std::exp(row[j] - mx);
        out[i] = mx + std::log(s);
    }
    return out;
}

}  // namespace corefsum
