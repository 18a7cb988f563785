#pragma once

#include <cstddef>
#include <string>

namespace fcl::nd {

// Element type of all tensors. Test builds require 64-bit (finite-difference
// gradient checks are meaningless at 32-bit); experiment builds may select
// 32-bit with -DFCL_REAL32.
#ifdef FCL_REAL32
using real = float;
#else
using real = double;
#endif

namespace kern {

// Flat table of the data-parallel inner loops. Every entry has a scalar
// reference implementation and, on capable x86 hosts, an AVX2 variant.
// Elementwise entries are bit-identical across backends; dot/sum use
// lane-parallel accumulators and may differ from the scalar reference in
// the last ulps.
struct Kernels {
    const char* name;

    void (*add)(const real* a, const real* b, real* out, std::size_t n);
    void (*sub)(const real* a, const real* b, real* out, std::size_t n);
    void (*mul)(const real* a, const real* b, real* out, std::size_t n);
    // out = c * x
    void (*scale)(const real* x, real c, real* out, std::size_t n);
    // y += alpha * x
    void (*axpy)(real alpha, const real* x, real* y, std::size_t n);
    real (*dot)(const real* a, const real* b, std::size_t n);
    real (*sum)(const real* x, std::size_t n);
    void (*relu)(const real* x, real* out, std::size_t n);
    // dx += g where x > 0
    void (*relu_grad_acc)(const real* x, const real* g, real* dx, std::size_t n);
    // p <- p - lr*g - lr_wd*p   (lr_wd = lr * weight_decay, precomputed once)
    void (*sgd_update)(real* p, const real* g, real lr, real lr_wd, std::size_t n);
    // t <- tau*t + (1-tau)*o
    void (*ema_lerp)(real* t, const real* o, real tau, std::size_t n);
};

enum class Backend { Auto, Scalar, Avx2 };

const Kernels& scalar_kernels();

// nullptr when the binary or the host CPU lacks AVX2.
const Kernels* avx2_kernels();

// Currently selected table. Defaults to the best available backend.
const Kernels& active();

// Force a backend (tests, --kernels flag). Throws fcl::Error if unavailable.
void select_backend(Backend b);
Backend parse_backend(const std::string& name);

// C[m x n] = A[m x k] * B[k x n], row-major, built on the table's axpy so the
// accumulation order (i, l, j) is identical for every backend.
void matmul(const Kernels& k, const real* a, const real* b, real* c,
            std::size_t m, std::size_t kk, std::size_t n);

inline void matmul(const real* a, const real* b, real* c, std::size_t m,
                   std::size_t kk, std::size_t n) {
    matmul(active(), a, b, c, m, kk, n);
}

}  // namespace kern
}  // namespace fcl::nd
