#include "fcl/ndcore/kernels.hpp"

#include <atomic>
#include <cstring>

#include "fcl/errors.hpp"

namespace fcl::nd::kern {
namespace {

const Kernels* pick_default() {
    if (const Kernels* a = avx2_kernels()) return a;
    return &scalar_kernels();
}

std::atomic<const Kernels*>& current() {
    static std::atomic<const Kernels*> cur{pick_default()};
    return cur;
}

}  // namespace

const Kernels& active() { return *current().load(std::memory_order_relaxed); }

void select_backend(Backend b) {
    switch (b) {
        case Backend::Auto:
            current().store(pick_default(), std::memory_order_relaxed);
            return;
        case Backend::Scalar:
            current().store(&scalar_kernels(), std::memory_order_relaxed);
            return;
        case Backend::Avx2: {
            const Kernels* a = avx2_kernels();
            if (!a) throw Error("kernels: avx2 backend not available on this host");
            current().store(a, std::memory_order_relaxed);
            return;
        }
    }
    throw Error("kernels: unknown backend");
}

Backend parse_backend(const std::string& name) {
    if (name == "auto") return Backend::Auto;
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2") return Backend::Avx2;
    throw Error("kernels: unknown backend name '" + name + "'");
}

void matmul(const Kernels& k, const real* a, const real* b, real* c,
            std::size_t m, std::size_t kk, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(real));
    for (std::size_t i = 0; i < m; ++i) {
        real* crow = c + i * n;
        const real* arow = a + i * kk;
        for (std::size_t l = 0; l < kk; ++l) k.axpy(arow[l], b + l * n, crow, n);
    }
}

}  // namespace fcl::nd::kern
