#include "moce/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "moce/errors.hpp"

namespace moce::num {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    }
    storage_ = std::make_shared<Storage>();
    storage_->shape = std::move(shape);
    storage_->values = std::move(values);
    set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
    if (!storage_) throw ContractError("use of undefined tensor");
    return storage_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const {
    const auto& s = shape();
    if (s.size() == 2) return s[0];
    if (s.size() <= 1) return 1;
    throw ShapeError("rows() needs rank <= 2, got " + shape_str(s));
}

std::size_t Tensor::cols() const {
    const auto& s = shape();
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    if (s.empty()) return 1;
    throw ShapeError("cols() needs rank <= 2, got " + shape_str(s));
}

std::span<const double> Tensor::values() const {
    if (!storage_) throw ContractError("use of undefined tensor");
    return storage_->values;
}

std::span<double> Tensor::mutable_values() const {
    if (!storage_) throw ContractError("use of undefined tensor");
    return storage_->values;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return storage_->values[0];
}

bool Tensor::requires_grad() const { return storage_ && storage_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    storage_->requires_grad = on;
    if (on) {
        storage_->grad.assign(storage_->values.size(), 0.0);
    } else {
        storage_->grad.clear();
    }
}

std::span<const double> Tensor::grad() const {
    if (!requires_grad()) throw ContractError("tensor is not differentiable");
    return storage_->grad;
}

std::span<double> Tensor::mutable_grad() const {
    if (!requires_grad()) throw ContractError("tensor is not differentiable");
    return storage_->grad;
}

void Tensor::zero_grad() const {
    if (requires_grad()) std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    return Tensor(shape(), storage_->values, storage_->requires_grad);
}

Tensor Tensor::detach() const { return Tensor(shape(), storage_->values, false); }

bool Tensor::all_finite() const {
    const auto v = values();
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() needs a scalar loss, got " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward() loss was not produced on a tape");
    }
    Tensor seed = loss;
    seed.mutable_grad()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
}

bool needs_grad(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (tape == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

}  // namespace moce::num
