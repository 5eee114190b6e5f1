#ifndef VDIFF_CORE_GRAPH_HPP
#define VDIFF_CORE_GRAPH_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "core/tensor.hpp"

namespace vd {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

// C = A(m,k) * B(k,n), optionally accumulating
template <typename T>
inline void gemm_nn(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n, bool acc) {
    EMap<T> C(c, m, n);
    ECMap<T> A(a, m, k), B(b, k, n);
    if (acc) C.noalias() += A * B;
    else C.noalias() = A * B;
}

// C = A(m,k) * B(n,k)^T
template <typename T>
inline void gemm_nt(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n, bool acc) {
    EMap<T> C(c, m, n);
    ECMap<T> A(a, m, k), B(b, n, k);
    if (acc) C.noalias() += A * B.transpose();
    else C.noalias() = A * B.transpose();
}

// C = A(k,m)^T * B(k,n)
template <typename T>
inline void gemm_tn(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n, bool acc) {
    EMap<T> C(c, m, n);
    ECMap<T> A(a, k, m), B(b, k, n);
    if (acc) C.noalias() += A.transpose() * B;
    else C.noalias() = A.transpose() * B;
}

template <typename T>
struct VarT {
    TensorT<T> value;
    TensorT<T> grad;  // allocated on first accumulation
    bool needs_grad = false;
    std::function<void()> backfn;

    const Shape& shape() const { return value.shape; }
    int64_t numel() const { return value.numel(); }
};

// Reverse-mode tape. Nodes are created in topological order; backward walks
// the tape in reverse. One graph per forward/backward pass.
template <typename T>
class GraphT {
public:
    VarT<T>* leaf(TensorT<T> v, bool needs_grad = false) {
        auto* n = alloc();
        n->value = std::move(v);
        n->needs_grad = needs_grad;
        return n;
    }

    VarT<T>* constant(TensorT<T> v) { return leaf(std::move(v), false); }

    // ---- elementwise ----

    VarT<T>* add(VarT<T>* a, VarT<T>* b) {
        VD_CHECK_CONTRACT(a->shape() == b->shape(),
                          "add: shape mismatch " + shape_str(a->shape()) + " vs " + shape_str(b->shape()));
        auto* n = alloc();
        n->value = TensorT<T>(a->shape());
        for (int64_t i = 0; i < n->numel(); i++) n->value[i] = a->value[i] + b->value[i];
        wire(n, {a, b}, [n, a, b] {
            if (a->needs_grad) accumulate(a, n->grad.data(), n->numel());
            if (b->needs_grad) accumulate(b, n->grad.data(), n->numel());
        });
        return n;
    }

    VarT<T>* sub(VarT<T>* a, VarT<T>* b) {
        VD_CHECK_CONTRACT(a->shape() == b->shape(), "sub: shape mismatch");
        auto* n = alloc();
        n->value = TensorT<T>(a->shape());
        for (int64_t i = 0; i < n->numel(); i++) n->value[i] = a->value[i] - b->value[i];
        wire(n, {a, b}, [n, a, b] {
            if (a->needs_grad) accumulate(a, n->grad.data(), n->numel());
            if (b->needs_grad) {
                ensure_grad(b);
                for (int64_t i = 0; i < n->numel(); i++) b->grad[i] -= n->grad[i];
            }
        });
        return n;
    }

    VarT<T>* mul(VarT<T>* a, VarT<T>* b) {
        VD_CHECK_CONTRACT(a->shape() == b->shape(), "mul: shape mismatch");
        auto* n = alloc();
        n->value = TensorT<T>(a->shape());
        for (int64_t i = 0; i < n->numel(); i++) n->value[i] = a->value[i] * b->value[i];
        wire(n, {a, b}, [n, a, b] {
            if (a->needs_grad) {
                ensure_grad(a);
                for (int64_t i = 0; i < n->numel(); i++) a->grad[i] += n->grad[i] * b->value[i];
            }
            if (b->needs_grad) {
                ensure_grad(b);
                for (int64_t i = 0; i < n->numel(); i++) b->grad[i] += n->grad[i] * a->value[i];
            }
        });
        return n;
    }

    VarT<T>* scale(VarT<T>* a, T c) {
        auto* n = alloc();
        n->value = TensorT<T>(a->shape());
        for (int64_t i = 0; i < n->numel(); i++) n->value[i] = a->value[i] * c;
        wire(n, {a}, [n, a, c] {
            ensure_grad(a);
            for (int64_t i = 0; i < n->numel(); i++) a->grad[i] += n->grad[i] * c;
        });
        return n;
    }

    VarT<T>* silu(VarT<T>* a) {
        auto* n = alloc();
        n->value = TensorT<T>(a->shape());
        for (int64_t i = 0; i < n->numel(); i++) {
            T s = T(1) / (T(1) + std::exp(-a->value[i]));
            n->value[i] = a->value[i] * s;
        }
        wire(n, {a}, [n, a] {
            ensure_grad(a);
            for (int64_t i = 0; i < n->numel(); i++) {
                T x = a->value[i];
                T s = T(1) / (T(1) + std::exp(-x));
                a->grad[i] += n->grad[i] * (s * (T(1) + x * (T(1) - s)));
            }
        });
        return n;
    }

    VarT<T>* sigmoid(VarT<T>* a) {
        auto* n = alloc();
        n->value = TensorT<T>(a->shape());
        for (int64_t i = 0; i < n->numel(); i++)
            n->value[i] = T(1) / (T(1) + std::exp(-a->value[i]));
        wire(n, {a}, [n, a] {
            ensure_grad(a);
            for (int64_t i = 0; i < n->numel(); i++) {
                T y = n->value[i];
                a->grad[i] += n->grad[i] * y * (T(1) - y);
            }
        });
        return n;
    }

    // ---- shape ----

    VarT<T>* reshape(VarT<T>* a, Shape s) {
        auto* n = alloc();
        n->value = a->value.view(std::move(s));
        wire(n, {a}, [n, a] { accumulate(a, n->grad.data(), n->numel()); });
        return n;
    }

    VarT<T>* permute(VarT<T>* a, std::vector<int> axes) {
        const Shape& in = a->shape();
        VD_CHECK_CONTRACT(axes.size() == in.size(), "permute: rank mismatch");
        Shape out(in.size());
        for (size_t i = 0; i < axes.size(); i++) out[i] = in[axes[i]];
        auto* n = alloc();
        n->value = TensorT<T>(out);
        permute_copy(n->value.data(), a->value.data(), in, axes, false);
        wire(n, {a}, [n, a, axes, in] {
            ensure_grad(a);
            permute_copy(n->grad.data(), a->grad.data(), in, axes, true);
        });
        return n;
    }

    VarT<T>* concat_ch(VarT<T>* a, VarT<T>* b) {
        const Shape& sa = a->shape();
        const Shape& sb = b->shape();
        VD_CHECK_CONTRACT(sa.size() == 4 && sb.size() == 4 && sa[0] == sb[0] && sa[2] == sb[2] &&
                              sa[3] == sb[3],
                          "concat_ch: incompatible shapes");
        Shape out = {sa[0], sa[1] + sb[1], sa[2], sa[3]};
        auto* n = alloc();
        n->value = TensorT<T>(out);
        int64_t hw = sa[2] * sa[3], ca = sa[1], cb = sb[1];
        for (int64_t i = 0; i < sa[0]; i++) {
            std::memcpy(n->value.data() + i * (ca + cb) * hw, a->value.data() + i * ca * hw,
                        sizeof(T) * ca * hw);
            std::memcpy(n->value.data() + (i * (ca + cb) + ca) * hw, b->value.data() + i * cb * hw,
                        sizeof(T) * cb * hw);
        }
        wire(n, {a, b}, [n, a, b, hw, ca, cb] {
            int64_t bsz = n->shape()[0];
            if (a->needs_grad) {
                ensure_grad(a);
                for (int64_t i = 0; i < bsz; i++)
                    for (int64_t j = 0; j < ca * hw; j++)
                        a->grad[i * ca * hw + j] += n->grad[i * (ca + cb) * hw + j];
            }
            if (b->needs_grad) {
                ensure_grad(b);
                for (int64_t i = 0; i < bsz; i++)
                    for (int64_t j = 0; j < cb * hw; j++)
                        b->grad[i * cb * hw + j] += n->grad[(i * (ca + cb) + ca) * hw + j];
            }
        });
        return n;
    }

    // ---- linear algebra ----

    VarT<T>* matmul(VarT<T>* a, VarT<T>* b) {
        VD_CHECK_CONTRACT(a->shape().size() == 2 && b->shape().size() == 2 &&
                              a->shape()[1] == b->shape()[0],
                          "matmul: incompatible " + shape_str(a->shape()) + " x " + shape_str(b->shape()));
        int64_t m = a->shape()[0], k = a->shape()[1], nn = b->shape()[1];
        auto* n = alloc();
        n->value = TensorT<T>({m, nn});
        gemm_nn(n->value.data(), a->value.data(), b->value.data(), m, k, nn, false);
        wire(n, {a, b}, [n, a, b, m, k, nn] {
            if (a->needs_grad) {
                ensure_grad(a);
                gemm_nt(a->grad.data(), n->grad.data(), b->value.data(), m, nn, k, true);
            }
            if (b->needs_grad) {
                ensure_grad(b);
                gemm_tn(b->grad.data(), a->value.data(), n->grad.data(), k, m, nn, true);
            }
        });
        return n;
    }

    // a(m,k) * b(n,k)^T
    VarT<T>* matmul_nt(VarT<T>* a, VarT<T>* b) {
        VD_CHECK_CONTRACT(a->shape().size() == 2 && b->shape().size() == 2 &&
                              a->shape()[1] == b->shape()[1],
                          "matmul_nt: incompatible shapes");
        int64_t m = a->shape()[0], k = a->shape()[1], nn = b->shape()[0];
        auto* n = alloc();
        n->value = TensorT<T>({m, nn});
        gemm_nt(n->value.data(), a->value.data(), b->value.data(), m, k, nn, false);
        wire(n, {a, b}, [n, a, b, m, k, nn] {
            if (a->needs_grad) {
                ensure_grad(a);
                gemm_nn(a->grad.data(), n->grad.data(), b->value.data(), m, nn, k, true);
            }
            if (b->needs_grad) {
                ensure_grad(b);
                gemm_tn(b->grad.data(), n->grad.data(), a->value.data(), nn, m, k, true);
            }
        });
        return n;
    }

    // x(..., in) * w(out, in)^T + bias(out)
    VarT<T>* linear(VarT<T>* x, VarT<T>* w, VarT<T>* bias) {
        const Shape& xs = x->shape();
        int64_t in = xs.back();
        VD_CHECK_CONTRACT(w->shape().size() == 2 && w->shape()[1] == in,
                          "linear: weight " + shape_str(w->shape()) + " does not accept input " +
                              shape_str(xs));
        int64_t out = w->shape()[0];
        int64_t rows = x->numel() / in;
        Shape os = xs;
        os.back() = out;
        auto* n = alloc();
        n->value = TensorT<T>(os);
        gemm_nt(n->value.data(), x->value.data(), w->value.data(), rows, in, out, false);
        if (bias) {
            VD_CHECK_CONTRACT(bias->numel() == out, "linear: bias size mismatch");
            for (int64_t r = 0; r < rows; r++)
                for (int64_t c = 0; c < out; c++) n->value[r * out + c] += bias->value[c];
        }
        wire(n, {x, w, bias}, [n, x, w, bias, rows, in, out] {
            if (x->needs_grad) {
                ensure_grad(x);
                gemm_nn(x->grad.data(), n->grad.data(), w->value.data(), rows, out, in, true);
            }
            if (w->needs_grad) {
                ensure_grad(w);
                gemm_tn(w->grad.data(), n->grad.data(), x->value.data(), out, rows, in, true);
            }
            if (bias && bias->needs_grad) {
                ensure_grad(bias);
                for (int64_t r = 0; r < rows; r++)
                    for (int64_t c = 0; c < out; c++) bias->grad[c] += n->grad[r * out + c];
            }
        });
        return n;
    }

    // batched: a(B,m,k) * b(B,k,n)
    VarT<T>* bmm(VarT<T>* a, VarT<T>* b) {
        const Shape& sa = a->shape();
        const Shape& sb = b->shape();
        VD_CHECK_CONTRACT(sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1],
                          "bmm: incompatible " + shape_str(sa) + " x " + shape_str(sb));
        int64_t B = sa[0], m = sa[1], k = sa[2], nn = sb[2];
        auto* n = alloc();
        n->value = TensorT<T>({B, m, nn});
        for (int64_t i = 0; i < B; i++)
            gemm_nn(n->value.data() + i * m * nn, a->value.data() + i * m * k,
                    b->value.data() + i * k * nn, m, k, nn, false);
        wire(n, {a, b}, [n, a, b, B, m, k, nn] {
            if (a->needs_grad) {
                ensure_grad(a);
                for (int64_t i = 0; i < B; i++)
                    gemm_nt(a->grad.data() + i * m * k, n->grad.data() + i * m * nn,
                            b->value.data() + i * k * nn, m, nn, k, true);
            }
            if (b->needs_grad) {
                ensure_grad(b);
                for (int64_t i = 0; i < B; i++)
                    gemm_tn(b->grad.data() + i * k * nn, a->value.data() + i * m * k,
                            n->grad.data() + i * m * nn, k, m, nn, true);
            }
        });
        return n;
    }

    // batched: a(B,m,k) * b(B,n,k)^T
    VarT<T>* bmm_nt(VarT<T>* a, VarT<T>* b) {
        const Shape& sa = a->shape();
        const Shape& sb = b->shape();
        VD_CHECK_CONTRACT(sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[2],
                          "bmm_nt: incompatible " + shape_str(sa) + " x " + shape_str(sb));
        int64_t B = sa[0], m = sa[1], k = sa[2], nn = sb[1];
        auto* n = alloc();
        n->value = TensorT<T>({B, m, nn});
        for (int64_t i = 0; i < B; i++)
            gemm_nt(n->value.data() + i * m * nn, a->value.data() + i * m * k,
                    b->value.data() + i * nn * k, m, k, nn, false);
        wire(n, {a, b}, [n, a, b, B, m, k, nn] {
            if (a->needs_grad) {
                ensure_grad(a);
                for (int64_t i = 0; i < B; i++)
                    gemm_nn(a->grad.data() + i * m * k, n->grad.data() + i * m * nn,
                            b->value.data() + i * nn * k, m, nn, k, true);
            }
            if (b->needs_grad) {
                ensure_grad(b);
                for (int64_t i = 0; i < B; i++)
                    gemm_tn(b->grad.data() + i * nn * k, n->grad.data() + i * m * nn,
                            a->value.data() + i * m * k, nn, m, k, true);
            }
        });
        return n;
    }

    // ---- conv / spatial ----

    VarT<T>* conv2d(VarT<T>* x, VarT<T>* w, VarT<T>* bias, int stride, int pad) {
        return conv2d(x, w, bias, stride, pad, pad);
    }

    VarT<T>* conv2d(VarT<T>* x, VarT<T>* w, VarT<T>* bias, int stride, int pad_h, int pad_w) {
        const Shape& xs = x->shape();
        const Shape& ws = w->shape();
        VD_CHECK_CONTRACT(xs.size() == 4 && ws.size() == 4 && xs[1] == ws[1],
                          "conv2d: bad shapes " + shape_str(xs) + " w " + shape_str(ws));
        int64_t b = xs[0], ic = xs[1], h = xs[2], wd = xs[3];
        int64_t oc = ws[0], kh = ws[2], kw = ws[3];
        int64_t oh = (h + 2 * pad_h - kh) / stride + 1;
        int64_t ow = (wd + 2 * pad_w - kw) / stride + 1;
        int64_t rows = b * oh * ow, K = ic * kh * kw;

        auto col = std::make_shared<TensorT<T>>(Shape{rows, K});
        im2col(col->data(), x->value.data(), b, ic, h, wd, kh, kw, stride, pad_h, pad_w, oh, ow);

        TensorT<T> y2d({rows, oc});
        gemm_nt(y2d.data(), col->data(), w->value.data(), rows, K, oc, false);
        if (bias) {
            for (int64_t r = 0; r < rows; r++)
                for (int64_t c = 0; c < oc; c++) y2d[r * oc + c] += bias->value[c];
        }
        auto* n = alloc();
        n->value = TensorT<T>({b, oc, oh, ow});
        // (b,oh,ow,oc) -> (b,oc,oh,ow)
        for (int64_t bi = 0; bi < b; bi++)
            for (int64_t p = 0; p < oh * ow; p++)
                for (int64_t c = 0; c < oc; c++)
                    n->value[(bi * oc + c) * oh * ow + p] = y2d[(bi * oh * ow + p) * oc + c];

        wire(n, {x, w, bias}, [n, x, w, bias, col, b, ic, h, wd, oc, kh, kw, stride, pad_h, pad_w,
                               oh, ow, rows, K] {
            TensorT<T> dy2d({rows, oc});
            for (int64_t bi = 0; bi < b; bi++)
                for (int64_t p = 0; p < oh * ow; p++)
                    for (int64_t c = 0; c < oc; c++)
                        dy2d[(bi * oh * ow + p) * oc + c] = n->grad[(bi * oc + c) * oh * ow + p];
            if (w->needs_grad) {
                ensure_grad(w);
                gemm_tn(w->grad.data(), dy2d.data(), col->data(), oc, rows, K, true);
            }
            if (bias && bias->needs_grad) {
                ensure_grad(bias);
                for (int64_t r = 0; r < rows; r++)
                    for (int64_t c = 0; c < oc; c++) bias->grad[c] += dy2d[r * oc + c];
            }
            if (x->needs_grad) {
                ensure_grad(x);
                TensorT<T> dcol({rows, K});
                gemm_nn(dcol.data(), dy2d.data(), w->value.data(), rows, oc, K, false);
                col2im(x->grad.data(), dcol.data(), b, ic, h, wd, kh, kw, stride, pad_h, pad_w, oh,
                       ow);
            }
        });
        return n;
    }

    VarT<T>* upsample2x(VarT<T>* x) {
        const Shape& s = x->shape();
        VD_CHECK_CONTRACT(s.size() == 4, "upsample2x: expects 4D");
        int64_t b = s[0], c = s[1], h = s[2], w = s[3];
        auto* n = alloc();
        n->value = TensorT<T>({b, c, h * 2, w * 2});
        for (int64_t i = 0; i < b * c; i++)
            for (int64_t y = 0; y < 2 * h; y++)
                for (int64_t xx = 0; xx < 2 * w; xx++)
                    n->value[(i * 2 * h + y) * 2 * w + xx] = x->value[(i * h + y / 2) * w + xx / 2];
        wire(n, {x}, [n, x, b, c, h, w] {
            ensure_grad(x);
            for (int64_t i = 0; i < b * c; i++)
                for (int64_t y = 0; y < 2 * h; y++)
                    for (int64_t xx = 0; xx < 2 * w; xx++)
                        x->grad[(i * h + y / 2) * w + xx / 2] += n->grad[(i * 2 * h + y) * 2 * w + xx];
        });
        return n;
    }

    // ---- normalization / softmax ----

    VarT<T>* group_norm(VarT<T>* x, VarT<T>* gamma, VarT<T>* beta, int groups, T eps = T(1e-5)) {
        const Shape& s = x->shape();
        VD_CHECK_CONTRACT(s.size() == 4 && s[1] % groups == 0, "group_norm: bad shape/groups");
        int64_t b = s[0], c = s[1], hw = s[2] * s[3];
        int64_t cg = c / groups, gn = cg * hw;
        auto* n = alloc();
        n->value = TensorT<T>(s);
        auto xhat = std::make_shared<TensorT<T>>(s);
        auto istd = std::make_shared<TensorT<T>>(Shape{b * groups});
        for (int64_t bi = 0; bi < b; bi++) {
            for (int64_t g = 0; g < groups; g++) {
                const T* xp = x->value.data() + (bi * c + g * cg) * hw;
                double mean = 0;
                for (int64_t i = 0; i < gn; i++) mean += xp[i];
                mean /= gn;
                double var = 0;
                for (int64_t i = 0; i < gn; i++) {
                    double d = xp[i] - mean;
                    var += d * d;
                }
                var /= gn;
                T is = T(1.0 / std::sqrt(var + (double)eps));
                (*istd)[bi * groups + g] = is;
                T* xh = xhat->data() + (bi * c + g * cg) * hw;
                T* yp = n->value.data() + (bi * c + g * cg) * hw;
                for (int64_t j = 0; j < cg; j++) {
                    T ga = gamma->value[g * cg + j], be = beta->value[g * cg + j];
                    for (int64_t i = 0; i < hw; i++) {
                        T v = (xp[j * hw + i] - T(mean)) * is;
                        xh[j * hw + i] = v;
                        yp[j * hw + i] = ga * v + be;
                    }
                }
            }
        }
        wire(n, {x, gamma, beta}, [n, x, gamma, beta, xhat, istd, b, c, hw, groups, cg, gn] {
            if (gamma->needs_grad) ensure_grad(gamma);
            if (beta->needs_grad) ensure_grad(beta);
            if (x->needs_grad) ensure_grad(x);
            for (int64_t bi = 0; bi < b; bi++) {
                for (int64_t g = 0; g < groups; g++) {
                    const T* dy = n->grad.data() + (bi * c + g * cg) * hw;
                    const T* xh = xhat->data() + (bi * c + g * cg) * hw;
                    if (gamma->needs_grad || beta->needs_grad) {
                        for (int64_t j = 0; j < cg; j++) {
                            double dg = 0, db = 0;
                            for (int64_t i = 0; i < hw; i++) {
                                dg += dy[j * hw + i] * xh[j * hw + i];
                                db += dy[j * hw + i];
                            }
                            if (gamma->needs_grad) gamma->grad[g * cg + j] += T(dg);
                            if (beta->needs_grad) beta->grad[g * cg + j] += T(db);
                        }
                    }
                    if (x->needs_grad) {
                        double sum_dxh = 0, sum_dxh_xh = 0;
                        for (int64_t j = 0; j < cg; j++) {
                            T ga = gamma->value[g * cg + j];
                            for (int64_t i = 0; i < hw; i++) {
                                double dxh = (double)dy[j * hw + i] * ga;
                                sum_dxh += dxh;
                                sum_dxh_xh += dxh * xh[j * hw + i];
                            }
                        }
                        T is = (*istd)[bi * groups + g];
                        T* dx = x->grad.data() + (bi * c + g * cg) * hw;
                        for (int64_t j = 0; j < cg; j++) {
                            T ga = gamma->value[g * cg + j];
                            for (int64_t i = 0; i < hw; i++) {
                                double dxh = (double)dy[j * hw + i] * ga;
                                dx[j * hw + i] += T(is * (dxh - sum_dxh / gn -
                                                          (double)xh[j * hw + i] * sum_dxh_xh / gn));
                            }
                        }
                    }
                }
            }
        });
        return n;
    }

    VarT<T>* layer_norm(VarT<T>* x, VarT<T>* gamma, VarT<T>* beta, T eps = T(1e-5)) {
        const Shape& s = x->shape();
        int64_t d = s.back();
        VD_CHECK_CONTRACT(gamma->numel() == d && beta->numel() == d, "layer_norm: affine size");
        int64_t rows = x->numel() / d;
        auto* n = alloc();
        n->value = TensorT<T>(s);
        auto xhat = std::make_shared<TensorT<T>>(s);
        auto istd = std::make_shared<TensorT<T>>(Shape{rows});
        for (int64_t r = 0; r < rows; r++) {
            const T* xp = x->value.data() + r * d;
            double mean = 0;
            for (int64_t i = 0; i < d; i++) mean += xp[i];
            mean /= d;
            double var = 0;
            for (int64_t i = 0; i < d; i++) {
                double dv = xp[i] - mean;
                var += dv * dv;
            }
            var /= d;
            T is = T(1.0 / std::sqrt(var + (double)eps));
            (*istd)[r] = is;
            for (int64_t i = 0; i < d; i++) {
                T v = (xp[i] - T(mean)) * is;
                (*xhat)[r * d + i] = v;
                n->value[r * d + i] = gamma->value[i] * v + beta->value[i];
            }
        }
        wire(n, {x, gamma, beta}, [n, x, gamma, beta, xhat, istd, rows, d] {
            if (gamma->needs_grad) ensure_grad(gamma);
            if (beta->needs_grad) ensure_grad(beta);
            if (x->needs_grad) ensure_grad(x);
            for (int64_t r = 0; r < rows; r++) {
                const T* dy = n->grad.data() + r * d;
                const T* xh = xhat->data() + r * d;
                if (gamma->needs_grad || beta->needs_grad) {
                    for (int64_t i = 0; i < d; i++) {
                        if (gamma->needs_grad) gamma->grad[i] += dy[i] * xh[i];
                        if (beta->needs_grad) beta->grad[i] += dy[i];
                    }
                }
                if (x->needs_grad) {
                    double sum_dxh = 0, sum_dxh_xh = 0;
                    for (int64_t i = 0; i < d; i++) {
                        double dxh = (double)dy[i] * gamma->value[i];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh[i];
                    }
                    T is = (*istd)[r];
                    T* dx = x->grad.data() + r * d;
                    for (int64_t i = 0; i < d; i++) {
                        double dxh = (double)dy[i] * gamma->value[i];
                        dx[i] += T(is * (dxh - sum_dxh / d - (double)xh[i] * sum_dxh_xh / d));
                    }
                }
            }
        });
        return n;
    }

    VarT<T>* softmax_last(VarT<T>* x) {
        int64_t d = x->shape().back();
        int64_t rows = x->numel() / d;
        auto* n = alloc();
        n->value = TensorT<T>(x->shape());
        for (int64_t r = 0; r < rows; r++) {
            const T* xp = x->value.data() + r * d;
            T* yp = n->value.data() + r * d;
            T mx = xp[0];
            for (int64_t i = 1; i < d; i++) mx = std::max(mx, xp[i]);
            double sum = 0;
            for (int64_t i = 0; i < d; i++) {
                double e = std::exp((double)(xp[i] - mx));
                yp[i] = T(e);
                sum += e;
            }
            T inv = T(1.0 / sum);
            for (int64_t i = 0; i < d; i++) yp[i] *= inv;
        }
        wire(n, {x}, [n, x, rows, d] {
            ensure_grad(x);
            for (int64_t r = 0; r < rows; r++) {
                const T* y = n->value.data() + r * d;
                const T* dy = n->grad.data() + r * d;
                double dot = 0;
                for (int64_t i = 0; i < d; i++) dot += (double)y[i] * dy[i];
                T* dx = x->grad.data() + r * d;
                for (int64_t i = 0; i < d; i++) dx[i] += y[i] * (dy[i] - T(dot));
            }
        });
        return n;
    }

    // ---- broadcast adds ----

    // x(b,c,h,w) + v(c), per channel
    VarT<T>* add_chan(VarT<T>* x, VarT<T>* v) {
        const Shape& s = x->shape();
        VD_CHECK_CONTRACT(s.size() == 4 && v->numel() == s[1], "add_chan: shape mismatch");
        int64_t b = s[0], c = s[1], hw = s[2] * s[3];
        auto* n = alloc();
        n->value = TensorT<T>(s);
        for (int64_t bi = 0; bi < b; bi++)
            for (int64_t ci = 0; ci < c; ci++) {
                T vv = v->value[ci];
                const T* xp = x->value.data() + (bi * c + ci) * hw;
                T* yp = n->value.data() + (bi * c + ci) * hw;
                for (int64_t i = 0; i < hw; i++) yp[i] = xp[i] + vv;
            }
        wire(n, {x, v}, [n, x, v, b, c, hw] {
            if (x->needs_grad) accumulate(x, n->grad.data(), n->numel());
            if (v->needs_grad) {
                ensure_grad(v);
                for (int64_t bi = 0; bi < b; bi++)
                    for (int64_t ci = 0; ci < c; ci++) {
                        const T* gp = n->grad.data() + (bi * c + ci) * hw;
                        double sum = 0;
                        for (int64_t i = 0; i < hw; i++) sum += gp[i];
                        v->grad[ci] += T(sum);
                    }
            }
        });
        return n;
    }

    // x(B,n,d) + m(n,d), broadcast over batch
    VarT<T>* add_rows(VarT<T>* x, VarT<T>* m) {
        const Shape& s = x->shape();
        VD_CHECK_CONTRACT(s.size() == 3 && m->shape().size() == 2 && m->shape()[0] == s[1] &&
                              m->shape()[1] == s[2],
                          "add_rows: shape mismatch");
        int64_t B = s[0], nd = s[1] * s[2];
        auto* n = alloc();
        n->value = TensorT<T>(s);
        for (int64_t bi = 0; bi < B; bi++)
            for (int64_t i = 0; i < nd; i++)
                n->value[bi * nd + i] = x->value[bi * nd + i] + m->value[i];
        wire(n, {x, m}, [n, x, m, B, nd] {
            if (x->needs_grad) accumulate(x, n->grad.data(), n->numel());
            if (m->needs_grad) {
                ensure_grad(m);
                for (int64_t bi = 0; bi < B; bi++)
                    for (int64_t i = 0; i < nd; i++) m->grad[i] += n->grad[bi * nd + i];
            }
        });
        return n;
    }

    // ---- gather / reductions ----

    VarT<T>* rows_gather(VarT<T>* table, std::vector<int64_t> idx) {
        const Shape& s = table->shape();
        VD_CHECK_CONTRACT(s.size() == 2, "rows_gather: table must be 2D");
        int64_t d = s[1];
        for (int64_t i : idx) VD_CHECK_CONTRACT(i >= 0 && i < s[0], "rows_gather: index out of range");
        auto* n = alloc();
        n->value = TensorT<T>({(int64_t)idx.size(), d});
        for (size_t r = 0; r < idx.size(); r++)
            std::memcpy(n->value.data() + r * d, table->value.data() + idx[r] * d, sizeof(T) * d);
        wire(n, {table}, [n, table, idx, d] {
            ensure_grad(table);
            for (size_t r = 0; r < idx.size(); r++)
                for (int64_t i = 0; i < d; i++)
                    table->grad[idx[r] * d + i] += n->grad[r * d + i];
        });
        return n;
    }

    VarT<T>* mean_all(VarT<T>* x) {
        auto* n = alloc();
        n->value = TensorT<T>({1});
        double sum = 0;
        for (int64_t i = 0; i < x->numel(); i++) sum += x->value[i];
        n->value[0] = T(sum / x->numel());
        wire(n, {x}, [n, x] {
            ensure_grad(x);
            T g = n->grad[0] / T(x->numel());
            for (int64_t i = 0; i < x->numel(); i++) x->grad[i] += g;
        });
        return n;
    }

    // mean((a-b)^2) over all elements
    VarT<T>* mse(VarT<T>* a, VarT<T>* b) {
        VD_CHECK_CONTRACT(a->shape() == b->shape(), "mse: shape mismatch");
        auto* n = alloc();
        n->value = TensorT<T>({1});
        double sum = 0;
        for (int64_t i = 0; i < a->numel(); i++) {
            double d = (double)a->value[i] - (double)b->value[i];
            sum += d * d;
        }
        n->value[0] = T(sum / a->numel());
        wire(n, {a, b}, [n, a, b] {
            T g = n->grad[0] * T(2) / T(a->numel());
            if (a->needs_grad) {
                ensure_grad(a);
                for (int64_t i = 0; i < a->numel(); i++)
                    a->grad[i] += g * (a->value[i] - b->value[i]);
            }
            if (b->needs_grad) {
                ensure_grad(b);
                for (int64_t i = 0; i < a->numel(); i++)
                    b->grad[i] -= g * (a->value[i] - b->value[i]);
            }
        });
        return n;
    }

    // ---- backward ----

    void backward(VarT<T>* out) {
        VD_CHECK_CONTRACT(out->numel() == 1, "backward: output must be scalar");
        ensure_grad(out);
        out->grad.fill(T(1));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            VarT<T>* n = it->get();
            if (n->backfn && n->grad.defined()) n->backfn();
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::unique_ptr<VarT<T>>> nodes_;

    VarT<T>* alloc() {
        nodes_.push_back(std::make_unique<VarT<T>>());
        return nodes_.back().get();
    }

    static void ensure_grad(VarT<T>* v) {
        if (!v->grad.defined()) v->grad = TensorT<T>(v->shape());
    }

    static void accumulate(VarT<T>* v, const T* g, int64_t count) {
        ensure_grad(v);
        for (int64_t i = 0; i < count; i++) v->grad[i] += g[i];
    }

    void wire(VarT<T>* n, std::initializer_list<VarT<T>*> parents, std::function<void()> fn) {
        bool any = false;
        for (auto* p : parents)
            if (p && p->needs_grad) any = true;
        n->needs_grad = any;
        if (any) n->backfn = std::move(fn);
    }

    // out[perm position] = in; when `back`, scatter-add out grads into in grads
    static void permute_copy(T* out, T* in, const Shape& in_shape, const std::vector<int>& axes,
                             bool back) {
        int nd = (int)in_shape.size();
        Shape out_shape(nd);
        for (int i = 0; i < nd; i++) out_shape[i] = in_shape[axes[i]];
        std::vector<int64_t> in_strides(nd, 1), out_strides(nd, 1);
        for (int i = nd - 2; i >= 0; i--) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
        for (int i = nd - 2; i >= 0; i--) out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
        int64_t total = shape_numel(in_shape);
        std::vector<int64_t> out_idx(nd, 0);
        for (int64_t o = 0; o < total; o++) {
            int64_t rem = o, src = 0;
            for (int i = 0; i < nd; i++) {
                int64_t ix = rem / out_strides[i];
                rem %= out_strides[i];
                src += ix * in_strides[axes[i]];
            }
            if (back) in[src] += out[o];
            else out[o] = in[src];
        }
    }

    static void im2col(T* col, const T* x, int64_t b, int64_t ic, int64_t h, int64_t w, int64_t kh,
                       int64_t kw, int stride, int pad_h, int pad_w, int64_t oh, int64_t ow) {
        int64_t K = ic * kh * kw;
        for (int64_t bi = 0; bi < b; bi++) {
            for (int64_t oy = 0; oy < oh; oy++) {
                for (int64_t ox = 0; ox < ow; ox++) {
                    T* row = col + ((bi * oh + oy) * ow + ox) * K;
                    for (int64_t ci = 0; ci < ic; ci++) {
                        const T* xp = x + (bi * ic + ci) * h * w;
                        for (int64_t ky = 0; ky < kh; ky++) {
                            int64_t iy = oy * stride - pad_h + ky;
                            for (int64_t kx = 0; kx < kw; kx++) {
                                int64_t ix = ox * stride - pad_w + kx;
                                row[(ci * kh + ky) * kw + kx] =
                                    (iy >= 0 && iy < h && ix >= 0 && ix < w) ? xp[iy * w + ix] : T(0);
                            }
                        }
                    }
                }
            }
        }
    }

    static void col2im(T* dx, const T* dcol, int64_t b, int64_t ic, int64_t h, int64_t w, int64_t kh,
                       int64_t kw, int stride, int pad_h, int pad_w, int64_t oh, int64_t ow) {
        int64_t K = ic * kh * kw;
        for (int64_t bi = 0; bi < b; bi++) {
            for (int64_t oy = 0; oy < oh; oy++) {
                for (int64_t ox = 0; ox < ow; ox++) {
                    const T* row = dcol + ((bi * oh + oy) * ow + ox) * K;
                    for (int64_t ci = 0; ci < ic; ci++) {
                        T* xp = dx + (bi * ic + ci) * h * w;
                        for (int64_t ky = 0; ky < kh; ky++) {
                            int64_t iy = oy * stride - pad_h + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int64_t kx = 0; kx < kw; kx++) {
                                int64_t ix = ox * stride - pad_w + kx;
                                if (ix < 0 || ix >= w) continue;
                                xp[iy * w + ix] += row[(ci * kh + ky) * kw + kx];
                            }
                        }
                    }
                }
            }
        }
    }
};

using Graph = GraphT<float>;
using GraphD = GraphT<double>;
using Var = VarT<float>;
using VarD = VarT<double>;

}  // namespace vd

#endif
