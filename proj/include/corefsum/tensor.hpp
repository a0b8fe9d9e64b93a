#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "corefsum/errors.hpp"

namespace corefsum {

// Dense row-major tensor of 64-bit floats. Immutable by convention once a
// layer has produced it; the few mutating call sites own their copy.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_)) {
            throw ValidationError("tensor data length does not match shape");
        }
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    // 2-D identity.
    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const {
        if (shape_.size() == 1) return shape_[0];
        return shape_.size() >= 2 ? shape_[1] : 0;
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) os << "x";
            os << shape_[i];
        }
        os << "]";
        return os.str();
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ValidationError(std::string(what) + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
    }
}

// C = A[n x k] * B[k x m], accumulated in ikj order.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ValidationError("matmul: incompatible shapes " + a.shape_str() + " * " + b.shape_str());
    }
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    Tensor c({n, m});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * m;
            double* crow = pc + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// C = A[n x k] * B^T where B is [m x k].
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[1]) {
        throw ValidationError("matmul_nt: incompatible shapes " + a.shape_str() + " * " +
                              b.shape_str() + "^T");
    }
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[0];
    Tensor c({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.data() + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = b.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            c(i, j) = s;
        }
    }
    return c;
}

// C = A^T * B where A is [k x n], B is [k x m].
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[0] != b.shape()[0]) {
        throw ValidationError("matmul_tn: incompatible shapes " + a.shape_str() + "^T * " +
                              b.shape_str());
    }
    const std::size_t k = a.shape()[0], n = a.shape()[1], m = b.shape()[1];
    Tensor c({n, m});
    double* pc = c.data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a.data() + p * n;
        const double* brow = b.data() + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = pc + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.at(i) += b.at(i);
    return c;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.at(i) -= b.at(i);
    return c;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.at(i) *= b.at(i);
    return c;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.at(i) *= s;
    return c;
}

inline void add_in_place(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) a.at(i) += b.at(i);
}

inline void add_scaled_in_place(Tensor& a, const Tensor& b, double s) {
    require_same_shape(a, b, "add_scaled_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) a.at(i) += s * b.at(i);
}

// Adds row vector b[m] to every row of a[n x m].
inline Tensor add_rows(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.size() != a.shape()[1]) {
        throw ValidationError("add_rows: bias length " + b.shape_str() + " does not match " +
                              a.shape_str());
    }
    Tensor c = a;
    const std::size_t n = a.shape()[0], m = a.shape()[1];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) c.at(i * m + j) += b.at(j);
    }
    return c;
}

inline double dot_flat(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot_flat");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i) * b.at(i);
    return s;
}

inline double norm_flat(const Tensor& a) { return std::sqrt(dot_flat(a, a)); }

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a.at(i) - b.at(i)));
    }
    return m;
}

}  // namespace corefsum
