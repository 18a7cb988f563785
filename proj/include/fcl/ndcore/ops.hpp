#pragma once

#include <span>
#include <vector>

#include "fcl/ndcore/tensor.hpp"

namespace fcl::nd {

// Forward ops. Every op validates shapes, computes the result through the
// active kernel backend and, when the tape is recording and any input
// requires grad, records a backward closure. Ops never mutate their inputs.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, real c);
Tensor add_scalar(Tape& tape, const Tensor& x, real c);

Tensor relu(Tape& tape, const Tensor& x);
Tensor exp(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);

// v / ||v||_2 for a 1-D tensor; throws DegenerateVectorError when
// ||v||_2 < 1e-12 instead of emitting NaN.
Tensor l2_normalize(Tape& tape, const Tensor& v);
// Row-wise variant for [B, D].
Tensor l2_normalize_rows(Tape& tape, const Tensor& x);

// x[B, n] + b[n] broadcast over rows (bias add).
Tensor add_rowvec(Tape& tape, const Tensor& x, const Tensor& b);

Tensor row_sum(Tape& tape, const Tensor& x);        // [B, n] -> [B]
Tensor row_logsumexp(Tape& tape, const Tensor& x);  // [B, n] -> [B]
Tensor sum_all(Tape& tape, const Tensor& x);        // -> [1]
Tensor mean_all(Tape& tape, const Tensor& x);       // -> [1]

// Copying reshape (row-major order preserved).
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// x[B,C,H,W] (*) w[OC,C,kh,kw] + bias[OC], zero padding, square stride.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t stride, std::size_t pad);

// Mean softmax cross-entropy of logits[B,C] against integer labels.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

// p <- p - lr*grad - lr*weight_decay*p for every parameter. Throws
// NotBackpropagatedError when a parameter has no accumulated gradient.
void sgd_step(std::span<Tensor> params, real lr, real weight_decay);

// Plain data helpers (no tape, no grad).
Tensor transposed(const Tensor& a);

constexpr real kNormEpsilon = 1e-12;

}  // namespace fcl::nd
