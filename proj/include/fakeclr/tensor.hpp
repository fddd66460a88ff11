#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "fakeclr/errors.hpp"

namespace fakeclr {

// Dense float64 array with an optional gradient buffer of the same shape.
// Tensors are plain values; copying one copies its storage.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), values_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != count(shape_))
            throw invalid_parameter("tensor: value count does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.values_.begin(), t.values_.end(), v);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }

    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool has_grad() const { return grad_.size() == values_.size() && !values_.empty(); }
    void enable_grad() { grad_.assign(values_.size(), 0.0); }
    void disable_grad() { grad_.clear(); }
    void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }
    std::vector<double>& grad() { return grad_; }
    const std::vector<double>& grad() const { return grad_; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> values_;
    std::vector<double> grad_;
};

// ---------------------------------------------------------------------------
// Raw tensor kernels. The autodiff layer calls these for its forward values,
// so the taped and untaped paths stay bit-identical.
// ---------------------------------------------------------------------------

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw contract_violation(std::string(op) + ": shape mismatch");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

// C[m,n] = A[m,k] * B[k,n]; ikj order so the inner loop vectorizes.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
        throw contract_violation("matmul: incompatible shapes");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = pa[i * k + l];
            const double* brow = pb + l * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return out;
}

// C[m,n] = A[m,k] * B[n,k]^T; rows of both operands are contiguous.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols())
        throw contract_violation("matmul_nt: incompatible shapes");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* br = b.data() + j * k;
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) s += ar[l] * br[l];
            out.at(i, j) = s;
        }
    }
    return out;
}

// C[k,n] = A[m,k]^T * B[m,n]; used by matmul backward.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.rows() != b.rows())
        throw contract_violation("matmul_tn: incompatible shapes");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({k, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a.data() + i * k;
        const double* br = b.data() + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ar[l];
            double* crow = out.data() + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * br[j];
        }
    }
    return out;
}

inline Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (a.ndim() != 2 || v.size() != a.cols())
        throw contract_violation("add_rowvec: incompatible shapes");
    Tensor out = a;
    const std::size_t m = a.rows(), n = a.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += v[j];
    return out;
}

inline Tensor tanh_map(const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return out;
}

inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline Tensor softplus_map(const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus(out[i]);
    return out;
}

inline double sum_all(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    return s;
}

inline Tensor rows_dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "rows_dot");
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * b[i * n + j];
        out[i] = s;
    }
    return out;
}

inline Tensor row_l2_normalize_map(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = a;
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * a[i * n + j];
        const double norm = std::sqrt(s);
        if (norm == 0.0)
            throw degenerate_input("row_l2_normalize: zero row");
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= norm;
    }
    return out;
}

inline Tensor logsumexp_rows_map(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = a[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a[i * n + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(a[i * n + j] - mx);
        out[i] = mx + std::log(s);
    }
    return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw contract_violation("concat_cols: row count mismatch");
    const std::size_t m = a.rows(), na = a.cols(), nb = b.cols();
    Tensor out({m, na + nb});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < na; ++j) out.at(i, j) = a[i * na + j];
        for (std::size_t j = 0; j < nb; ++j) out.at(i, na + j) = b[i * nb + j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vector numerics with the documented error contracts.
// ---------------------------------------------------------------------------

// Temperature softmax with max-subtraction. Output is positive and sums to 1.
inline std::vector<double> softmax(const std::vector<double>& v, double tau) {
    if (tau <= 0.0)
        throw invalid_parameter("softmax: temperature must be positive");
    if (v.empty())
        throw invalid_parameter("softmax: empty input");
    double mx = v[0] / tau;
    for (double x : v) mx = std::max(mx, x / tau);
    std::vector<double> out(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] / tau - mx);
        s += out[i];
    }
    for (double& x : out) x /= s;
    return out;
}

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline std::vector<double> l2_normalize(const std::vector<double>& v) {
    const double n = norm2(v);
    if (n == 0.0)
        throw degenerate_input("l2_normalize: zero vector");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace fakeclr
