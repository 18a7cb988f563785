#include "fcl/ndcore/ops.hpp"

#include <cmath>
#include <cstring>

#include "fcl/errors.hpp"

namespace fcl::nd {

namespace {

using detail::Storage;
using SP = std::shared_ptr<Storage>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

bool out_requires_grad(const Tape& tape, std::initializer_list<const Tensor*> ins) {
    if (!tape.recording()) return false;
    for (const Tensor* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

// Output grad may be unallocated when the tensor turned out to be a dead end
// of the graph; treat as all-zero and skip.
bool has_out_grad(const SP& so) { return !so->grad.empty(); }

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    if (a.dim(1) != b.dim(0))
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n}, out_requires_grad(tape, {&a, &b}));
    kern::matmul(a.data(), b.data(), out.data(), m, k, n);
    if (out.requires_grad()) {
        SP sa = a.st(), sb = b.st(), so = out.st();
        tape.record([sa, sb, so, m, k, n] {
            if (!has_out_grad(so)) return;
            const auto& K = kern::active();
            const real* g = so->grad.data();
            if (sa->requires_grad) {
                sa->ensure_grad();
                // da[i,l] += <g[i,:], b[l,:]>
                for (std::size_t i = 0; i < m; ++i) {
                    real* darow = sa->grad.data() + i * k;
                    const real* grow = g + i * n;
                    for (std::size_t l = 0; l < k; ++l)
                        darow[l] += K.dot(grow, sb->data.data() + l * n, n);
                }
            }
            if (sb->requires_grad) {
                sb->ensure_grad();
                // db[l,:] += a[i,l] * g[i,:]
                for (std::size_t i = 0; i < m; ++i) {
                    const real* arow = sa->data.data() + i * k;
                    const real* grow = g + i * n;
                    for (std::size_t l = 0; l < k; ++l)
                        K.axpy(arow[l], grow, sb->grad.data() + l * n, n);
                }
            }
        });
    }
    return out;
}

namespace {

template <class Fwd, class Bwd>
Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 Bwd bwd) {
    check_same_shape(a, b, name);
    Tensor out = Tensor::zeros(a.shape(), out_requires_grad(tape, {&a, &b}));
    fwd(a.data(), b.data(), out.data(), a.size());
    if (out.requires_grad()) {
        SP sa = a.st(), sb = b.st(), so = out.st();
        tape.record([sa, sb, so, bwd] {
            if (!has_out_grad(so)) return;
            bwd(sa, sb, so);
        });
    }
    return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_op(
        tape, a, b, "add",
        [](const real* x, const real* y, real* o, std::size_t n) { kern::active().add(x, y, o, n); },
        [](const SP& sa, const SP& sb, const SP& so) {
            const auto& K = kern::active();
            const std::size_t n = so->size();
            if (sa->requires_grad) {
                sa->ensure_grad();
                K.axpy(real(1), so->grad.data(), sa->grad.data(), n);
            }
            if (sb->requires_grad) {
                sb->ensure_grad();
                K.axpy(real(1), so->grad.data(), sb->grad.data(), n);
            }
        });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_op(
        tape, a, b, "sub",
        [](const real* x, const real* y, real* o, std::size_t n) { kern::active().sub(x, y, o, n); },
        [](const SP& sa, const SP& sb, const SP& so) {
            const auto& K = kern::active();
            const std::size_t n = so->size();
            if (sa->requires_grad) {
                sa->ensure_grad();
                K.axpy(real(1), so->grad.data(), sa->grad.data(), n);
            }
            if (sb->requires_grad) {
                sb->ensure_grad();
                K.axpy(real(-1), so->grad.data(), sb->grad.data(), n);
            }
        });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    return binary_op(
        tape, a, b, "mul",
        [](const real* x, const real* y, real* o, std::size_t n) { kern::active().mul(x, y, o, n); },
        [](const SP& sa, const SP& sb, const SP& so) {
            const std::size_t n = so->size();
            const real* g = so->grad.data();
            if (sa->requires_grad) {
                sa->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) sa->grad[i] += g[i] * sb->data[i];
            }
            if (sb->requires_grad) {
                sb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) sb->grad[i] += g[i] * sa->data[i];
            }
        });
}

Tensor scale(Tape& tape, const Tensor& x, real c) {
    Tensor out = Tensor::zeros(x.shape(), out_requires_grad(tape, {&x}));
    kern::active().scale(x.data(), c, out.data(), x.size());
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so, c] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            kern::active().axpy(c, so->grad.data(), sx->grad.data(), so->size());
        });
    }
    return out;
}

Tensor add_scalar(Tape& tape, const Tensor& x, real c) {
    Tensor out = Tensor::zeros(x.shape(), out_requires_grad(tape, {&x}));
    for (std::size_t i = 0; i < x.size(); ++i) out.at(i) = x.at(i) + c;
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            kern::active().axpy(real(1), so->grad.data(), sx->grad.data(), so->size());
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), out_requires_grad(tape, {&x}));
    kern::active().relu(x.data(), out.data(), x.size());
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            kern::active().relu_grad_acc(sx->data.data(), so->grad.data(), sx->grad.data(),
                                         so->size());
        });
    }
    return out;
}

Tensor exp(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), out_requires_grad(tape, {&x}));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const real v = std::exp(x.at(i));
        if (!std::isfinite(v))
            throw DomainError("exp: non-finite result for input " + std::to_string(x.at(i)));
        out.at(i) = v;
    }
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            for (std::size_t i = 0; i < so->size(); ++i)
                sx->grad[i] += so->grad[i] * so->data[i];
        });
    }
    return out;
}

Tensor log(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), out_requires_grad(tape, {&x}));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x.at(i) > real(0)))
            throw DomainError("log: non-positive entry " + std::to_string(x.at(i)));
        out.at(i) = std::log(x.at(i));
    }
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            for (std::size_t i = 0; i < so->size(); ++i)
                sx->grad[i] += so->grad[i] / sx->data[i];
        });
    }
    return out;
}

namespace {

// Shared forward/backward for vector and row-wise l2 normalization.
// Backward of y = x/r with r = ||x||: dx = (g - y * <y, g>) / r.
void l2n_forward_row(const real* x, real* y, real& r_out, std::size_t d) {
    const real sq = kern::active().dot(x, x, d);
    const real r = std::sqrt(sq);
    if (!(r >= kNormEpsilon))
        throw DegenerateVectorError("l2_normalize: vector norm " + std::to_string(r) +
                                    " below epsilon");
    for (std::size_t j = 0; j < d; ++j) y[j] = x[j] / r;
    r_out = r;
}

void l2n_backward_row(const real* y, const real* g, real r, real* dx, std::size_t d) {
    const real yg = kern::active().dot(y, g, d);
    for (std::size_t j = 0; j < d; ++j) dx[j] += (g[j] - y[j] * yg) / r;
}

}  // namespace

Tensor l2_normalize(Tape& tape, const Tensor& v) {
    if (v.rank() != 1)
        throw DimensionError("l2_normalize: expects a 1-D tensor, got " + shape_str(v.shape()));
    Tensor out = Tensor::zeros(v.shape(), out_requires_grad(tape, {&v}));
    real r = 0;
    l2n_forward_row(v.data(), out.data(), r, v.size());
    if (out.requires_grad()) {
        SP sv = v.st(), so = out.st();
        tape.record([sv, so, r] {
            if (!has_out_grad(so)) return;
            sv->ensure_grad();
            l2n_backward_row(so->data.data(), so->grad.data(), r, sv->grad.data(), so->size());
        });
    }
    return out;
}

Tensor l2_normalize_rows(Tape& tape, const Tensor& x) {
    if (x.rank() != 2)
        throw DimensionError("l2_normalize_rows: expects [B,D], got " + shape_str(x.shape()));
    const std::size_t b = x.dim(0), d = x.dim(1);
    Tensor out = Tensor::zeros(x.shape(), out_requires_grad(tape, {&x}));
    std::vector<real> norms(b);
    for (std::size_t i = 0; i < b; ++i)
        l2n_forward_row(x.data() + i * d, out.data() + i * d, norms[i], d);
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so, norms, b, d] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            for (std::size_t i = 0; i < b; ++i)
                l2n_backward_row(so->data.data() + i * d, so->grad.data() + i * d, norms[i],
                                 sx->grad.data() + i * d, d);
        });
    }
    return out;
}

Tensor add_rowvec(Tape& tape, const Tensor& x, const Tensor& b) {
    if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(1))
        throw DimensionError("add_rowvec: incompatible shapes " + shape_str(x.shape()) + " and " +
                             shape_str(b.shape()));
    const std::size_t rows = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros(x.shape(), out_requires_grad(tape, {&x, &b}));
    for (std::size_t i = 0; i < rows; ++i)
        kern::active().add(x.data() + i * n, b.data(), out.data() + i * n, n);
    if (out.requires_grad()) {
        SP sx = x.st(), sb = b.st(), so = out.st();
        tape.record([sx, sb, so, rows, n] {
            if (!has_out_grad(so)) return;
            const auto& K = kern::active();
            if (sx->requires_grad) {
                sx->ensure_grad();
                K.axpy(real(1), so->grad.data(), sx->grad.data(), rows * n);
            }
            if (sb->requires_grad) {
                sb->ensure_grad();
                for (std::size_t i = 0; i < rows; ++i)
                    K.axpy(real(1), so->grad.data() + i * n, sb->grad.data(), n);
            }
        });
    }
    return out;
}

Tensor row_sum(Tape& tape, const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("row_sum: expects [B,n], got " + shape_str(x.shape()));
    const std::size_t b = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({b}, out_requires_grad(tape, {&x}));
    for (std::size_t i = 0; i < b; ++i) out.at(i) = kern::active().sum(x.data() + i * n, n);
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so, b, n] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < n; ++j) sx->grad[i * n + j] += so->grad[i];
        });
    }
    return out;
}

Tensor row_logsumexp(Tape& tape, const Tensor& x) {
    if (x.rank() != 2)
        throw DimensionError("row_logsumexp: expects [B,n], got " + shape_str(x.shape()));
    const std::size_t b = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({b}, out_requires_grad(tape, {&x}));
    for (std::size_t i = 0; i < b; ++i) {
        const real* row = x.data() + i * n;
        real m = row[0];
        for (std::size_t j = 1; j < n; ++j) m = std::max(m, row[j]);
        real s = 0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - m);
        out.at(i) = m + std::log(s);
    }
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so, b, n] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            for (std::size_t i = 0; i < b; ++i) {
                const real lse = so->data[i];
                const real g = so->grad[i];
                for (std::size_t j = 0; j < n; ++j)
                    sx->grad[i * n + j] += g * std::exp(sx->data[i * n + j] - lse);
            }
        });
    }
    return out;
}

Tensor sum_all(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros({1}, out_requires_grad(tape, {&x}));
    out.at(0) = kern::active().sum(x.data(), x.size());
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            const real g = so->grad[0];
            for (std::size_t i = 0; i < sx->size(); ++i) sx->grad[i] += g;
        });
    }
    return out;
}

Tensor mean_all(Tape& tape, const Tensor& x) {
    Tensor s = sum_all(tape, x);
    return scale(tape, s, real(1) / real(x.size()));
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size())
        throw DimensionError("reshape: cannot reshape " + shape_str(x.shape()) + " to " +
                             shape_str(shape));
    Tensor out = Tensor::zeros(std::move(shape), out_requires_grad(tape, {&x}));
    std::memcpy(out.data(), x.data(), x.size() * sizeof(real));
    if (out.requires_grad()) {
        SP sx = x.st(), so = out.st();
        tape.record([sx, so] {
            if (!has_out_grad(so)) return;
            sx->ensure_grad();
            kern::active().axpy(real(1), so->grad.data(), sx->grad.data(), so->size());
        });
    }
    return out;
}

namespace {

struct ConvDims {
    std::size_t batch, cin, h, w, cout, kh, kw, oh, ow, ckk, owh;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
    if (x.rank() != 4 || w.rank() != 4)
        throw DimensionError("conv2d: expects x[B,C,H,W] and w[OC,C,kh,kw]");
    if (x.dim(1) != w.dim(1))
        throw DimensionError("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
                             shape_str(w.shape()));
    ConvDims d{};
    d.batch = x.dim(0);
    d.cin = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.cout = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw)
        throw DimensionError("conv2d: kernel larger than padded input");
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    d.ckk = d.cin * d.kh * d.kw;
    d.owh = d.oh * d.ow;
    return d;
}

// col[(c*kh+di)*kw+dj, oy*ow+ox] = x[c, oy*stride+di-pad, ox*stride+dj-pad]
void im2col(const real* x, const ConvDims& d, std::size_t stride, std::size_t pad, real* col) {
    for (std::size_t c = 0; c < d.cin; ++c) {
        const real* plane = x + c * d.h * d.w;
        for (std::size_t di = 0; di < d.kh; ++di) {
            for (std::size_t dj = 0; dj < d.kw; ++dj) {
                real* crow = col + ((c * d.kh + di) * d.kw + dj) * d.owh;
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const std::ptrdiff_t iy = std::ptrdiff_t(oy * stride + di) - std::ptrdiff_t(pad);
                    for (std::size_t ox = 0; ox < d.ow; ++ox) {
                        const std::ptrdiff_t ix =
                            std::ptrdiff_t(ox * stride + dj) - std::ptrdiff_t(pad);
                        real v = 0;
                        if (iy >= 0 && iy < std::ptrdiff_t(d.h) && ix >= 0 &&
                            ix < std::ptrdiff_t(d.w))
                            v = plane[std::size_t(iy) * d.w + std::size_t(ix)];
                        crow[oy * d.ow + ox] = v;
                    }
                }
            }
        }
    }
}

void col2im_acc(const real* col, const ConvDims& d, std::size_t stride, std::size_t pad, real* dx) {
    for (std::size_t c = 0; c < d.cin; ++c) {
        real* plane = dx + c * d.h * d.w;
        for (std::size_t di = 0; di < d.kh; ++di) {
            for (std::size_t dj = 0; dj < d.kw; ++dj) {
                const real* crow = col + ((c * d.kh + di) * d.kw + dj) * d.owh;
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const std::ptrdiff_t iy = std::ptrdiff_t(oy * stride + di) - std::ptrdiff_t(pad);
                    if (iy < 0 || iy >= std::ptrdiff_t(d.h)) continue;
                    for (std::size_t ox = 0; ox < d.ow; ++ox) {
                        const std::ptrdiff_t ix =
                            std::ptrdiff_t(ox * stride + dj) - std::ptrdiff_t(pad);
                        if (ix < 0 || ix >= std::ptrdiff_t(d.w)) continue;
                        plane[std::size_t(iy) * d.w + std::size_t(ix)] += crow[oy * d.ow + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
    const ConvDims d = conv_dims(x, w, stride, pad);
    if (bias.rank() != 1 || bias.dim(0) != d.cout)
        throw DimensionError("conv2d: bias shape " + shape_str(bias.shape()));
    const bool rg = out_requires_grad(tape, {&x, &w, &bias});
    Tensor out = Tensor::zeros({d.batch, d.cout, d.oh, d.ow}, rg);

    // Saved im2col buffers for the backward pass.
    auto cols = std::make_shared<std::vector<real>>(d.batch * d.ckk * d.owh);
    for (std::size_t bi = 0; bi < d.batch; ++bi) {
        real* col = cols->data() + bi * d.ckk * d.owh;
        im2col(x.data() + bi * d.cin * d.h * d.w, d, stride, pad, col);
        real* yb = out.data() + bi * d.cout * d.owh;
        kern::matmul(w.data(), col, yb, d.cout, d.ckk, d.owh);
        for (std::size_t oc = 0; oc < d.cout; ++oc) {
            const real bv = bias.at(oc);
            real* row = yb + oc * d.owh;
            for (std::size_t p = 0; p < d.owh; ++p) row[p] += bv;
        }
    }
    if (!rg) return out;

    SP sx = x.st(), sw = w.st(), sb = bias.st(), so = out.st();
    tape.record([sx, sw, sb, so, cols, d, stride, pad] {
        if (!has_out_grad(so)) return;
        const auto& K = kern::active();
        std::vector<real> dcol(d.ckk * d.owh);
        for (std::size_t bi = 0; bi < d.batch; ++bi) {
            const real* g = so->grad.data() + bi * d.cout * d.owh;
            const real* col = cols->data() + bi * d.ckk * d.owh;
            if (sw->requires_grad) {
                sw->ensure_grad();
                // dW[oc, q] += <g[oc,:], col[q,:]>
                for (std::size_t oc = 0; oc < d.cout; ++oc) {
                    real* dwrow = sw->grad.data() + oc * d.ckk;
                    const real* grow = g + oc * d.owh;
                    for (std::size_t q = 0; q < d.ckk; ++q)
                        dwrow[q] += K.dot(grow, col + q * d.owh, d.owh);
                }
            }
            if (sb->requires_grad) {
                sb->ensure_grad();
                for (std::size_t oc = 0; oc < d.cout; ++oc)
                    sb->grad[oc] += K.sum(g + oc * d.owh, d.owh);
            }
            if (sx->requires_grad) {
                sx->ensure_grad();
                // dcol = W^T * g, then scatter back to dx.
                std::fill(dcol.begin(), dcol.end(), real(0));
                for (std::size_t oc = 0; oc < d.cout; ++oc) {
                    const real* wrow = sw->data.data() + oc * d.ckk;
                    const real* grow = g + oc * d.owh;
                    for (std::size_t q = 0; q < d.ckk; ++q)
                        K.axpy(wrow[q], grow, dcol.data() + q * d.owh, d.owh);
                }
                col2im_acc(dcol.data(), d, stride, pad,
                           sx->grad.data() + bi * d.cin * d.h * d.w);
            }
        }
    });
    return out;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw DimensionError("softmax_cross_entropy: expects [B,C], got " +
                             shape_str(logits.shape()));
    const std::size_t b = logits.dim(0), c = logits.dim(1);
    if (labels.size() != b)
        throw DimensionError("softmax_cross_entropy: label count " + std::to_string(labels.size()) +
                             " != batch " + std::to_string(b));
    auto probs = std::make_shared<std::vector<real>>(b * c);
    real loss = 0;
    for (std::size_t i = 0; i < b; ++i) {
        const real* row = logits.data() + i * c;
        if (labels[i] < 0 || std::size_t(labels[i]) >= c)
            throw DomainError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                              " out of range");
        real m = row[0];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        real s = 0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - m);
        const real lse = m + std::log(s);
        for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] = std::exp(row[j] - lse);
        loss += lse - row[labels[i]];
    }
    Tensor out = Tensor::scalar(loss / real(b), out_requires_grad(tape, {&logits}));
    if (out.requires_grad()) {
        SP sl = logits.st(), so = out.st();
        auto lbl = std::make_shared<std::vector<int>>(labels);
        tape.record([sl, so, probs, lbl, b, c] {
            if (!has_out_grad(so)) return;
            sl->ensure_grad();
            const real g = so->grad[0] / real(b);
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < c; ++j)
                    sl->grad[i * c + j] += g * (*probs)[i * c + j];
                sl->grad[i * c + std::size_t((*lbl)[i])] -= g;
            }
        });
    }
    return out;
}

void sgd_step(std::span<Tensor> params, real lr, real weight_decay) {
    for (Tensor& p : params)
        if (!p.has_grad())
            throw NotBackpropagatedError(
                "sgd_step: parameter has no gradient; run backward first");
    const real lr_wd = lr * weight_decay;
    for (Tensor& p : params) kern::active().sgd_update(p.data(), p.grad(), lr, lr_wd, p.size());
}

Tensor transposed(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transposed: expects 2-D, got " + shape_str(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j * m + i) = a.at(i * n + j);
    return out;
}

}  // namespace fcl::nd
