#include "odcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odcast/errors.hpp"

namespace odcast {

Tensor2::Tensor2(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw InternalError("Tensor2: negative dimension");
    data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Tensor2 Tensor2::full(int rows, int cols, double value) {
    Tensor2 t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor2 Tensor2::identity(int n) {
    Tensor2 t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor2::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols() != b.rows()) throw InternalError("matmul: inner dimensions disagree");
    Tensor2 out(a.rows(), b.cols());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        const double* arow = a.data() + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.data() + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw InternalError("add: shape mismatch");
    Tensor2 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw InternalError("sub: shape mismatch");
    Tensor2 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw InternalError("hadamard: shape mismatch");
    Tensor2 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

Tensor2 scale(const Tensor2& a, double s) {
    Tensor2 out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return out;
}

std::vector<double> softmax(const std::vector<double>& v) {
    if (v.empty()) return {};
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    // log(1 + e^x) without overflow on either tail
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

}  // namespace odcast
