#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace odcast {

// Dense row-major matrix of doubles. Column vectors are n x 1 tensors.
// All model math is 64-bit; finite-difference gradient checks are not
// trustworthy in single precision.
class Tensor2 {
  public:
    Tensor2() = default;
    Tensor2(int rows, int cols);

    static Tensor2 full(int rows, int cols, double value);
    static Tensor2 identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::span<double> row(int r) { return {data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int r) const {
        return {data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
    }

    bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool all_finite() const;

    bool operator==(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);
Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
Tensor2 scale(const Tensor2& a, double s);

// Max-subtracted softmax. Empty input stays empty.
std::vector<double> softmax(const std::vector<double>& v);

double leaky_relu(double x, double slope);
double sigmoid(double x);
double softplus(double x);

}  // namespace odcast
