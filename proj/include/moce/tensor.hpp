#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace moce::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles.
///
/// `Tensor` is a handle: copies share the same storage, which is what lets a
/// model parameter appear on a tape and receive its gradient. Use `clone()`
/// for an independent copy. A rank-0 tensor (empty shape) holds one scalar.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);

    bool defined() const { return storage_ != nullptr; }
    bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    /// Rows/cols of a rank-2 tensor; a rank-1 tensor reads as a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    std::span<double> mutable_values() const;
    double at(std::size_t flat) const { return values()[flat]; }
    double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }
    /// Value of a single-element tensor.
    double item() const;

    bool requires_grad() const;
    /// Marks the tensor differentiable and allocates a zeroed gradient buffer.
    void set_requires_grad(bool on);
    std::span<const double> grad() const;
    std::span<double> mutable_grad() const;
    void zero_grad() const;

    Tensor clone() const;
    Tensor detach() const;

    bool all_finite() const;

private:
    struct Storage {
        Shape shape;
        std::vector<double> values;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Storage> storage_;
};

/// Ordered record of the backward rules of executed differentiable ops.
///
/// Ops append their rule after computing their output, so the record is in
/// topological order and a reverse sweep visits every node once.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
    /// accumulate into every differentiable tensor reached; the tape is
    /// consumed.
    void backward(const Tensor& loss);

private:
    std::vector<BackwardFn> nodes_;
};

/// True when `tape` is live and any input is differentiable, i.e. the op
/// must record a backward rule.
bool needs_grad(const Tape* tape, std::initializer_list<const Tensor*> inputs);

}  // namespace moce::num
