#include "fcl/ndcore/tensor.hpp"

#include <sstream>

#include "fcl/errors.hpp"

namespace fcl::nd {

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto st = std::make_shared<detail::Storage>();
    st->data.assign(shape_size(shape), real(0));
    st->shape = std::move(shape);
    st->requires_grad = requires_grad;
    return Tensor(std::move(st));
}

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = value;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<real> data, bool requires_grad) {
    if (shape_size(shape) != data.size())
        throw DimensionError("tensor: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    auto st = std::make_shared<detail::Storage>();
    st->shape = std::move(shape);
    st->data = std::move(data);
    st->requires_grad = requires_grad;
    return Tensor(std::move(st));
}

Tensor Tensor::scalar(real value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

real Tensor::value() const {
    if (size() != 1) throw DimensionError("tensor: value() on non-scalar " + shape_str(shape()));
    return st_->data[0];
}

void Tensor::zero_grad() {
    st_->ensure_grad();
    std::fill(st_->grad.begin(), st_->grad.end(), real(0));
}

Tensor Tensor::detach() const {
    return from_data(st_->shape, st_->data, false);
}

Tensor Tensor::clone() const {
    return from_data(st_->shape, st_->data, st_->requires_grad);
}

void Tensor::copy_data_from(const Tensor& other) {
    if (st_->shape != other.shape())
        throw DimensionError("tensor: copy_data_from shape mismatch " + shape_str(st_->shape) +
                             " vs " + shape_str(other.shape()));
    st_->data = other.st()->data;
}

void Tape::backward(Tensor& loss) {
    if (!recording_) throw TapeError("tape: backward on an inference tape");
    if (used_) throw TapeError("tape: backward invoked twice on one tape");
    if (loss.size() != 1) throw TapeError("tape: loss must be a scalar tensor");
    if (!loss.requires_grad()) throw TapeError("tape: loss does not require grad");
    used_ = true;
    loss.zero_grad();
    loss.grad()[0] = real(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace fcl::nd
