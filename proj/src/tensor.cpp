#include "riskmin/tensor.hpp"

#include <cmath>
#include <sstream>

#include "riskmin/error.hpp"

namespace riskmin::num {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        fail(ErrorCode::ShapeMismatch,
             "tensor: shape " + shape_str() + " implies " + std::to_string(shape_product(shape_)) +
                 " values, got " + std::to_string(data_.size()));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
}

Tensor Tensor::vec(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vec(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        fail(ErrorCode::ShapeMismatch,
             "tensor: axis " + std::to_string(axis) + " out of range for " + shape_str());
    }
    return shape_[axis];
}

std::size_t Tensor::cols() const {
    if (rank() == 0) return 1;
    return shape_.back();
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ',';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && a.values() == b.values();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        fail(ErrorCode::ShapeMismatch,
             std::string(op) + ": operand shapes " + a.shape_str() + " and " + b.shape_str() +
                 " differ");
    }
}

}  // namespace riskmin::num
