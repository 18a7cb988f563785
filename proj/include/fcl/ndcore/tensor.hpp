#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fcl/ndcore/kernels.hpp"

namespace fcl::nd {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Storage {
    Shape shape;
    std::vector<real> data;
    std::vector<real> grad;  // empty until first accumulation / zero_grad
    bool requires_grad = false;

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), real(0));
    }
};

}  // namespace detail

// Dense row-major tensor with value handle semantics: copying a Tensor
// aliases the underlying storage (parameters stay shared between the model,
// the optimizer and recorded backward closures). Use clone() for a deep copy.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, real value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<real> data, bool requires_grad = false);
    static Tensor scalar(real value, bool requires_grad = false);

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return st_->shape; }
    std::size_t rank() const { return st_->shape.size(); }
    std::size_t dim(std::size_t i) const { return st_->shape[i]; }
    std::size_t size() const { return st_->data.size(); }

    real* data() { return st_->data.data(); }
    const real* data() const { return st_->data.data(); }
    real& at(std::size_t i) { return st_->data[i]; }
    real at(std::size_t i) const { return st_->data[i]; }
    // 2-D convenience index.
    real& at2(std::size_t i, std::size_t j) { return st_->data[i * dim(1) + j]; }
    real at2(std::size_t i, std::size_t j) const { return st_->data[i * dim(1) + j]; }
    // Value of a single-element tensor.
    real value() const;

    bool requires_grad() const { return st_->requires_grad; }
    bool has_grad() const { return defined() && !st_->grad.empty(); }
    real* grad() { return st_->grad.data(); }
    const real* grad() const { return st_->grad.data(); }
    real grad_at(std::size_t i) const { return st_->grad[i]; }

    // Allocates (zeroed) grad storage if missing, then zeroes it.
    void zero_grad();

    // Deep copy of the data with requires_grad = false: the stop-gradient
    // marker. The result is disconnected from any tape.
    Tensor detach() const;

    // Deep copy of data and the requires_grad flag (grad not copied).
    Tensor clone() const;

    void copy_data_from(const Tensor& other);

    const std::shared_ptr<detail::Storage>& st() const { return st_; }

  private:
    explicit Tensor(std::shared_ptr<detail::Storage> st) : st_(std::move(st)) {}
    std::shared_ptr<detail::Storage> st_;
};

// Record of one forward pass: backward closures pushed in execution order,
// replayed in reverse by backward(). Single-use.
class Tape {
  public:
    Tape() = default;
    static Tape inference() {
        Tape t;
        t.recording_ = false;
        return t;
    }

    bool recording() const { return recording_; }
    std::size_t num_ops() const { return ops_.size(); }

    void record(std::function<void()> backward_fn) {
        if (recording_) ops_.push_back(std::move(backward_fn));
    }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse, accumulating
    // gradients into every reachable tensor with requires_grad == true.
    // Throws TapeError on reuse, on a non-scalar loss, or when the loss does
    // not require grad.
    void backward(Tensor& loss);

  private:
    std::vector<std::function<void()>> ops_;
    bool recording_ = true;
    bool used_ = false;
};

}  // namespace fcl::nd
