// AVX2 variants of the kernel table. Compiled with -mavx2 for this file only;
// callers must gate on avx2_kernels() != nullptr (runtime cpuid check).
//
// Elementwise kernels perform the same per-element operation sequence as the
// scalar reference (mul+add, no FMA contraction), so their results are
// bit-identical. dot/sum reduce over vector lanes and differ from the scalar
// reference only in summation order.

#include "fcl/ndcore/kernels.hpp"

#if defined(__AVX2__) && (defined(__x86_64__) || defined(__i386__))

#include <immintrin.h>

namespace fcl::nd::kern {
namespace {

template <class T>
struct Pack;

template <>
struct Pack<double> {
    using reg = __m256d;
    static constexpr std::size_t width = 4;
    static reg load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
    static reg set1(double v) { return _mm256_set1_pd(v); }
    static reg zero() { return _mm256_setzero_pd(); }
    static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
    static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
    static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
    static reg gt_mask(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
    static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
    static double reduce_add(reg v) {
        __m128d lo = _mm256_castpd256_pd128(v);
        __m128d hi = _mm256_extractf128_pd(v, 1);
        lo = _mm_add_pd(lo, hi);
        return _mm_cvtsd_f64(_mm_add_pd(lo, _mm_unpackhi_pd(lo, lo)));
    }
};

template <>
struct Pack<float> {
    using reg = __m256;
    static constexpr std::size_t width = 8;
    static reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
    static reg set1(float v) { return _mm256_set1_ps(v); }
    static reg zero() { return _mm256_setzero_ps(); }
    static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
    static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
    static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
    static reg gt_mask(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
    static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
    static float reduce_add(reg v) {
        __m128 lo = _mm256_castps256_ps128(v);
        __m128 hi = _mm256_extractf128_ps(v, 1);
        lo = _mm_add_ps(lo, hi);
        lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
        lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
        return _mm_cvtss_f32(lo);
    }
};

using P = Pack<real>;
constexpr std::size_t W = P::width;

void v_add(const real* a, const real* b, real* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + W <= n; i += W) P::store(out + i, P::add(P::load(a + i), P::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const real* a, const real* b, real* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + W <= n; i += W) P::store(out + i, P::sub(P::load(a + i), P::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const real* a, const real* b, real* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + W <= n; i += W) P::store(out + i, P::mul(P::load(a + i), P::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_scale(const real* x, real c, real* out, std::size_t n) {
    const auto vc = P::set1(c);
    std::size_t i = 0;
    for (; i + W <= n; i += W) P::store(out + i, P::mul(vc, P::load(x + i)));
    for (; i < n; ++i) out[i] = c * x[i];
}

void v_axpy(real alpha, const real* x, real* y, std::size_t n) {
    const auto va = P::set1(alpha);
    std::size_t i = 0;
    for (; i + W <= n; i += W)
        P::store(y + i, P::add(P::load(y + i), P::mul(va, P::load(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

real v_dot(const real* a, const real* b, std::size_t n) {
    auto acc0 = P::zero();
    auto acc1 = P::zero();
    std::size_t i = 0;
    for (; i + 2 * W <= n; i += 2 * W) {
        acc0 = P::add(acc0, P::mul(P::load(a + i), P::load(b + i)));
        acc1 = P::add(acc1, P::mul(P::load(a + i + W), P::load(b + i + W)));
    }
    for (; i + W <= n; i += W)
        acc0 = P::add(acc0, P::mul(P::load(a + i), P::load(b + i)));
    real acc = P::reduce_add(P::add(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

real v_sum(const real* x, std::size_t n) {
    auto acc0 = P::zero();
    auto acc1 = P::zero();
    std::size_t i = 0;
    for (; i + 2 * W <= n; i += 2 * W) {
        acc0 = P::add(acc0, P::load(x + i));
        acc1 = P::add(acc1, P::load(x + i + W));
    }
    for (; i + W <= n; i += W) acc0 = P::add(acc0, P::load(x + i));
    real acc = P::reduce_add(P::add(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

void v_relu(const real* x, real* out, std::size_t n) {
    const auto z = P::zero();
    std::size_t i = 0;
    for (; i + W <= n; i += W) P::store(out + i, P::max(P::load(x + i), z));
    for (; i < n; ++i) out[i] = x[i] > real(0) ? x[i] : real(0);
}

void v_relu_grad_acc(const real* x, const real* g, real* dx, std::size_t n) {
    const auto z = P::zero();
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        auto mask = P::gt_mask(P::load(x + i), z);
        auto gated = P::and_(P::load(g + i), mask);
        P::store(dx + i, P::add(P::load(dx + i), gated));
    }
    for (; i < n; ++i)
        if (x[i] > real(0)) dx[i] += g[i];
}

void v_sgd_update(real* p, const real* g, real lr, real lr_wd, std::size_t n) {
    const auto vlr = P::set1(lr);
    const auto vwd = P::set1(lr_wd);
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        auto vp = P::load(p + i);
        auto upd = P::sub(P::sub(vp, P::mul(vlr, P::load(g + i))), P::mul(vwd, vp));
        P::store(p + i, upd);
    }
    for (; i < n; ++i) p[i] = p[i] - lr * g[i] - lr_wd * p[i];
}

void v_ema_lerp(real* t, const real* o, real tau, std::size_t n) {
    const real om = real(1) - tau;
    const auto vt = P::set1(tau);
    const auto vo = P::set1(om);
    std::size_t i = 0;
    for (; i + W <= n; i += W)
        P::store(t + i, P::add(P::mul(vt, P::load(t + i)), P::mul(vo, P::load(o + i))));
    for (; i < n; ++i) t[i] = tau * t[i] + om * o[i];
}

}  // namespace

const Kernels* avx2_kernels() {
    if (!__builtin_cpu_supports("avx2")) return nullptr;
    static const Kernels k = {
        "avx2", v_add,  v_sub,           v_mul,        v_scale,     v_axpy,
        v_dot,  v_sum,  v_relu,          v_relu_grad_acc, v_sgd_update, v_ema_lerp,
    };
    return &k;
}

}  // namespace fcl::nd::kern

#else  // no AVX2 at compile time

namespace fcl::nd::kern {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace fcl::nd::kern

#endif
