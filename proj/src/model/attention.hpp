#ifndef VDIFF_MODEL_ATTENTION_HPP
#define VDIFF_MODEL_ATTENTION_HPP

#include "model/lora.hpp"

namespace vd {

// linear projection with optional LoRA residuals resolved by target name
template <typename T>
VarT<T>* lora_linear(GraphT<T>& g, VarT<T>* x, VarT<T>* w, VarT<T>* bias,
                     const LoraRuntimeT<T>* loras, const std::string& target) {
    VarT<T>* y = g.linear(x, w, bias);
    if (!loras) return y;
    const auto* terms = loras->find(target);
    if (!terms) return y;
    Shape xs = x->shape();
    int64_t in = xs.back();
    VarT<T>* x2d = g.reshape(x, {x->numel() / in, in});
    Shape ys = y->shape();
    for (const auto& t : *terms) {
        VD_CHECK_CONTRACT(t.B->shape()[0] == in && t.A->shape()[0] == ys.back(),
                          "adapter dims incompatible with projection " + target);
        if (t.scale == T(0)) continue;
        VarT<T>* h = g.matmul(x2d, t.B);                    // (N, r)
        VarT<T>* d = g.matmul_nt(h, t.A);                   // (N, m)
        y = g.add(y, g.reshape(g.scale(d, t.scale), ys));
    }
    return y;
}

template <typename T>
struct AttnWeights {
    VarT<T>* wq;
    VarT<T>* wk;
    VarT<T>* wv;
    VarT<T>* wo;
    VarT<T>* bo;
    int heads;
    std::string target_prefix;  // e.g. "unet.down0.attn.self"
};

// Multi-head scaled dot-product attention over the middle axis.
// q_in: (B, nq, dq), k_in/v_in: (B, nk, dk); returns (B, nq, d_model).
// Per head: Softmax(Q K^T / sqrt(d_head)) V, heads concatenated, then the
// output projection. Self/cross attention pass the same tensor for k and v.
template <typename T>
VarT<T>* attention(GraphT<T>& g, VarT<T>* q_in, VarT<T>* k_in, VarT<T>* v_in,
                   const AttnWeights<T>& w, const LoraRuntimeT<T>* loras = nullptr) {
    const Shape& qs = q_in->shape();
    const Shape& ks = k_in->shape();
    VD_CHECK_CONTRACT(qs.size() == 3 && ks.size() == 3 && qs[0] == ks[0],
                      "attention: expects (B,n,d) inputs with equal batch");
    VD_CHECK_CONTRACT(k_in->shape()[1] == v_in->shape()[1] && k_in->shape()[0] == v_in->shape()[0],
                      "attention: k/v sequence mismatch");
    int64_t B = qs[0], nq = qs[1], nk = ks[1];
    int64_t d = w.wq->shape()[0];
    int h = w.heads;
    VD_CHECK_CONTRACT(d % h == 0, "attention: d_model not divisible by heads");
    int64_t dh = d / h;

    VarT<T>* q = lora_linear<T>(g, q_in, w.wq, nullptr, loras, w.target_prefix + ".q");
    VarT<T>* k = lora_linear<T>(g, k_in, w.wk, nullptr, loras, w.target_prefix + ".k");
    VarT<T>* v = lora_linear<T>(g, v_in, w.wv, nullptr, loras, w.target_prefix + ".v");

    auto split_heads = [&](VarT<T>* x, int64_t n) {
        x = g.reshape(x, {B, n, (int64_t)h, dh});
        x = g.permute(x, {0, 2, 1, 3});  // (B, h, n, dh)
        return g.reshape(x, {B * h, n, dh});
    };
    q = split_heads(q, nq);
    k = split_heads(k, nk);
    v = split_heads(v, nk);

    VarT<T>* scores = g.scale(g.bmm_nt(q, k), T(1.0 / std::sqrt((double)dh)));  // (B*h, nq, nk)
    VarT<T>* att = g.softmax_last(scores);
    VarT<T>* ctx = g.bmm(att, v);  // (B*h, nq, dh)

    ctx = g.reshape(ctx, {B, (int64_t)h, nq, dh});
    ctx = g.permute(ctx, {0, 2, 1, 3});
    ctx = g.reshape(ctx, {B, nq, d});
    return lora_linear(g, ctx, w.wo, w.bo, loras, w.target_prefix + ".o");
}

// value-level convenience (tests, one-off evaluation)
struct AttnProjection {
    Tensor wq, wk, wv, wo, bo;
    int heads = 1;
};

inline Tensor attention_eval(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                             const AttnProjection& p) {
    Graph g;
    AttnWeights<float> w;
    w.wq = g.leaf(p.wq);
    w.wk = g.leaf(p.wk);
    w.wv = g.leaf(p.wv);
    w.wo = g.leaf(p.wo);
    w.bo = p.bo.defined() ? g.leaf(p.bo) : nullptr;
    w.heads = p.heads;
    Shape qs = q_in.shape, ks = k_in.shape;
    VD_CHECK_CONTRACT(qs.size() == 2 && ks.size() == 2, "attention_eval: expects (n,d) sequences");
    auto* q = g.reshape(g.leaf(q_in), {1, qs[0], qs[1]});
    auto* k = g.reshape(g.leaf(k_in), {1, ks[0], ks[1]});
    auto* v = g.reshape(g.leaf(v_in), {1, v_in.shape[0], v_in.shape[1]});
    auto* out = attention(g, q, k, v, w);
    return out->value.view({qs[0], p.wo.shape[0]}).clone();
}

}  // namespace vd

#endif
