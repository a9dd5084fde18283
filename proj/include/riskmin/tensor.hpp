#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace riskmin::num {

// Dense row-major tensor of 64-bit floats. Invariant: product of the extents
// equals the length of the flat buffer (empty extents = scalar of size 1).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor full(std::vector<std::size_t> shape, double v);
    static Tensor vec(std::initializer_list<double> values);
    static Tensor vec(std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& at(std::size_t flat) { return data_[flat]; }
    double at(std::size_t flat) const { return data_[flat]; }
    double& at2(std::size_t i, std::size_t j) { return data_[i * dim(1) + j]; }
    double at2(std::size_t i, std::size_t j) const { return data_[i * dim(1) + j]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_str() const;  // e.g. "[2,3]"

    // Flat views for 2-D use; callers check rank where it matters.
    std::size_t rows() const { return rank() == 0 ? 1 : shape_[0]; }
    std::size_t cols() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

bool operator==(const Tensor& a, const Tensor& b);

// Throws on mismatch, naming both operand shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace riskmin::num
