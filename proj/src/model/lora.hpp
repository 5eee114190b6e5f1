#ifndef VDIFF_MODEL_LORA_HPP
#define VDIFF_MODEL_LORA_HPP

#include <map>
#include <set>

#include "core/params.hpp"

namespace vd {

// Low-rank residual on a linear projection: delta(z) = alpha * A (B^T z),
// A (m,r), B (n,r) for a base projection W (m,n). B starts at zero so a fresh
// adapter is a no-op.
struct LoraPair {
    Tensor A;
    Tensor B;
    float alpha = 1.0f;
    std::string target;

    int64_t rank() const { return A.shape[1]; }
    int64_t out_dim() const { return A.shape[0]; }
    int64_t in_dim() const { return B.shape[0]; }
};

inline LoraPair init_lora_pair(const std::string& target, int64_t m, int64_t n, int64_t r,
                               float alpha, Rng& rng) {
    VD_CHECK_CONFIG(r >= 1 && r <= std::min(m, n),
                    "lora rank out of range for target " + target);
    LoraPair p;
    p.target = target;
    p.alpha = alpha;
    p.A = Tensor::randn({m, r}, rng, 0.02f);
    p.B = Tensor::zeros({n, r});
    return p;
}

// A named group of LoRA pairs over a set of projection targets. The tensors
// live in `params` under "<target>.A"/"<target>.B" so training, hashing and
// checkpointing treat them like any other parameters.
struct LoraSet {
    std::string kind;  // domain_adapter | motion_lora | personalization
    int64_t rank = 4;
    float alpha = 1.0f;
    std::vector<std::string> targets;
    ParamDict params;

    LoraPair pair(const std::string& target) const {
        LoraPair p;
        p.target = target;
        p.alpha = alpha;
        p.A = params.at(target + ".A");
        p.B = params.at(target + ".B");
        return p;
    }
};

using ProjDims = std::map<std::string, std::pair<int64_t, int64_t>>;  // target -> (m, n)

inline LoraSet init_lora_set(const std::string& kind, const std::vector<std::string>& targets,
                             const ProjDims& dims, int64_t rank, float alpha, Rng& rng) {
    LoraSet s;
    s.kind = kind;
    s.rank = rank;
    s.alpha = alpha;
    s.targets = targets;
    for (auto& t : targets) {
        auto it = dims.find(t);
        VD_CHECK_CONFIG(it != dims.end(), "lora target not found in host model: " + t);
        auto [m, n] = it->second;
        LoraPair p = init_lora_pair(t, m, n, rank, alpha, rng);
        s.params.add(t + ".A", p.A);
        s.params.add(t + ".B", p.B);
    }
    return s;
}

// uniform inference-time scaler; 0 removes the adapter entirely
inline LoraSet set_adapter_scale(LoraSet s, float alpha) {
    s.alpha = alpha;
    return s;
}

inline int64_t count_lora_params(const ProjDims& dims, int64_t r) {
    VD_CHECK_CONFIG(r >= 1, "lora rank must be >= 1");
    int64_t total = 0;
    for (auto& [_, mn] : dims) total += r * (mn.first + mn.second);
    return total;
}

// ---- value-level algebra (inference / tests; the graph path is in attention.hpp) ----

// z: (N,n) rows; returns W z + alpha * A (B^T z) per row
inline Tensor lora_apply(const Tensor& z, const Tensor& w, const LoraPair& p) {
    VD_CHECK_CONTRACT(z.shape.back() == w.shape[1], "lora_apply: input dim mismatch");
    VD_CHECK_CONTRACT(p.B.shape[0] == w.shape[1] && p.A.shape[0] == w.shape[0] &&
                          p.A.shape[1] == p.B.shape[1],
                      "lora_apply: adapter dims incompatible with projection " + p.target);
    int64_t rows = z.numel() / z.shape.back();
    int64_t n = w.shape[1], m = w.shape[0], r = p.A.shape[1];
    Tensor y({rows, m});
    gemm_nt(y.data(), z.data(), w.data(), rows, n, m, false);
    Tensor h({rows, r});
    gemm_nn(h.data(), z.data(), p.B.data(), rows, n, r, false);
    Tensor d({rows, m});
    gemm_nt(d.data(), h.data(), p.A.data(), rows, r, m, false);
    for (int64_t i = 0; i < y.numel(); i++) y[i] += p.alpha * d[i];
    Shape os = z.shape;
    os.back() = m;
    return y.view(os);
}

// W' = W + alpha * A B^T
inline Tensor merge_lora_into_weights(const Tensor& w, const LoraPair& p) {
    VD_CHECK_CONTRACT(p.A.shape[0] == w.shape[0] && p.B.shape[0] == w.shape[1],
                      "merge_lora_into_weights: dims incompatible");
    Tensor out = w.clone();
    int64_t m = w.shape[0], n = w.shape[1], r = p.A.shape[1];
    Tensor delta({m, n});
    gemm_nt(delta.data(), p.A.data(), p.B.data(), m, r, n, false);
    for (int64_t i = 0; i < out.numel(); i++) out[i] += p.alpha * delta[i];
    return out;
}

// Effective per-target dense deltas of a weighted list of LoRA sets:
// delta_W = sum_i weight_i * alpha_i * A_i B_i^T. Accumulated in double; the
// deltas stay additive (never merged through a product).
inline std::map<std::string, TensorD> compose_motion_loras(
    const std::vector<const LoraSet*>& sets, const std::vector<double>& weights) {
    VD_CHECK_CONFIG(sets.size() == weights.size(), "compose: one weight per lora set required");
    VD_CHECK_CONFIG(!sets.empty(), "compose: empty lora list");
    for (size_t i = 1; i < sets.size(); i++) {
        if (sets[i]->targets != sets[0]->targets) {
            std::set<std::string> a(sets[0]->targets.begin(), sets[0]->targets.end());
            std::set<std::string> b(sets[i]->targets.begin(), sets[i]->targets.end());
            std::string diff;
            for (auto& t : a)
                if (!b.count(t)) diff += " -" + t;
            for (auto& t : b)
                if (!a.count(t)) diff += " +" + t;
            throw config_error("compose: target mismatch between lora sets:" + diff);
        }
    }
    std::map<std::string, TensorD> out;
    for (auto& target : sets[0]->targets) {
        LoraPair p0 = sets[0]->pair(target);
        int64_t m = p0.out_dim(), n = p0.in_dim();
        TensorD acc({m, n});
        for (size_t s = 0; s < sets.size(); s++) {
            LoraPair p = sets[s]->pair(target);
            VD_CHECK_CONTRACT(p.out_dim() == m && p.in_dim() == n,
                              "compose: dim mismatch on target " + target);
            double w = weights[s] * (double)p.alpha;
            int64_t r = p.rank();
            for (int64_t i = 0; i < m; i++)
                for (int64_t j = 0; j < n; j++) {
                    double dot = 0;
                    for (int64_t k = 0; k < r; k++)
                        dot += (double)p.A[i * r + k] * (double)p.B[j * r + k];
                    acc[i * n + j] += w * dot;
                }
        }
        out.emplace(target, std::move(acc));
    }
    return out;
}

// ---- graph-side resolution ----

template <typename T>
struct LoraTermT {
    VarT<T>* A;
    VarT<T>* B;
    T scale;
};

template <typename T>
struct LoraRuntimeT {
    std::unordered_map<std::string, std::vector<LoraTermT<T>>> by_target;

    const std::vector<LoraTermT<T>>* find(const std::string& target) const {
        auto it = by_target.find(target);
        return it == by_target.end() ? nullptr : &it->second;
    }

    // trainability of the wrapped tensors comes from the ParamVars predicate
    void attach(ParamVarsT<T>& pv, const std::vector<std::string>& targets, T scale) {
        for (auto& t : targets)
            by_target[t].push_back(LoraTermT<T>{pv[t + ".A"], pv[t + ".B"], scale});
    }
};

}  // namespace vd

#endif
