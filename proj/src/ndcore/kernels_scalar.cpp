#include "fcl/ndcore/kernels.hpp"

namespace fcl::nd::kern {
namespace {

void s_add(const real* a, const real* b, real* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const real* a, const real* b, real* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const real* a, const real* b, real* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(const real* x, real c, real* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = c * x[i];
}

void s_axpy(real alpha, const real* x, real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

real s_dot(const real* a, const real* b, std::size_t n) {
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

real s_sum(const real* x, std::size_t n) {
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void s_relu(const real* x, real* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > real(0) ? x[i] : real(0);
}

void s_relu_grad_acc(const real* x, const real* g, real* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > real(0)) dx[i] += g[i];
}

void s_sgd_update(real* p, const real* g, real lr, real lr_wd, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = p[i] - lr * g[i] - lr_wd * p[i];
}

void s_ema_lerp(real* t, const real* o, real tau, std::size_t n) {
    const real om = real(1) - tau;
    for (std::size_t i = 0; i < n; ++i) t[i] = tau * t[i] + om * o[i];
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        "scalar", s_add,  s_sub,           s_mul,        s_scale,     s_axpy,
        s_dot,    s_sum,  s_relu,          s_relu_grad_acc, s_sgd_update, s_ema_lerp,
    };
    return k;
}

}  // namespace fcl::nd::kern
