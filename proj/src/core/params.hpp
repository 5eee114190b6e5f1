#ifndef VDIFF_CORE_PARAMS_HPP
#define VDIFF_CORE_PARAMS_HPP

#include <functional>
#include <unordered_map>

#include "core/graph.hpp"
#include "core/tensor.hpp"

namespace vd {

// Named parameter container with stable iteration order.
template <typename T>
struct ParamDictT {
    std::vector<std::string> order;
    std::unordered_map<std::string, TensorT<T>> map;

    void add(const std::string& name, TensorT<T> t) {
        VD_CHECK_CONTRACT(!map.count(name), "duplicate parameter name: " + name);
        order.push_back(name);
        map.emplace(name, std::move(t));
    }

    bool has(const std::string& name) const { return map.count(name) > 0; }

    TensorT<T>& at(const std::string& name) {
        auto it = map.find(name);
        VD_CHECK_CONTRACT(it != map.end(), "unknown parameter: " + name);
        return it->second;
    }
    const TensorT<T>& at(const std::string& name) const {
        auto it = map.find(name);
        VD_CHECK_CONTRACT(it != map.end(), "unknown parameter: " + name);
        return it->second;
    }

    int64_t total_params() const {
        int64_t n = 0;
        for (auto& name : order) n += map.at(name).numel();
        return n;
    }

    // byte hash over a subset of parameters, in registration order
    uint64_t group_hash(const std::function<bool(const std::string&)>& pred = nullptr) const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (auto& name : order) {
            if (pred && !pred(name)) continue;
            h = fnv1a64(name.data(), name.size(), h);
            const auto& t = map.at(name);
            h = fnv1a64(t.data(), t.numel() * sizeof(T), h);
        }
        return h;
    }

    template <typename U>
    ParamDictT<U> cast() const {
        ParamDictT<U> out;
        for (auto& name : order) out.add(name, map.at(name).template cast<U>());
        return out;
    }

    ParamDictT clone() const {
        ParamDictT out;
        for (auto& name : order) out.add(name, map.at(name).clone());
        return out;
    }
};

using ParamDict = ParamDictT<float>;

// Per-graph view of a ParamDict: lazily wraps tensors as leaf vars, marking
// only the trainable subset as differentiable.
template <typename T>
struct ParamVarsT {
    GraphT<T>* g = nullptr;
    ParamDictT<T>* dict = nullptr;
    std::function<bool(const std::string&)> trainable;  // null => nothing trains
    std::unordered_map<std::string, VarT<T>*> cache;

    ParamVarsT(GraphT<T>& graph, ParamDictT<T>& d,
               std::function<bool(const std::string&)> pred = nullptr)
        : g(&graph), dict(&d), trainable(std::move(pred)) {}

    VarT<T>* operator[](const std::string& name) {
        auto it = cache.find(name);
        if (it != cache.end()) return it->second;
        bool req = trainable && trainable(name);
        VarT<T>* v = g->leaf(dict->at(name), req);  // shares storage with the dict
        cache.emplace(name, v);
        return v;
    }

    VarT<T>* get_or_null(const std::string& name) {
        return dict->has(name) ? (*this)[name] : nullptr;
    }
};

using ParamVars = ParamVarsT<float>;

// kaiming-uniform init used for conv/linear weights
template <typename T>
TensorT<T> init_weight(Shape s, int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt((double)fan_in);
    return TensorT<T>::uniform(std::move(s), rng, T(-bound), T(bound));
}

inline void add_linear(ParamDict& p, const std::string& prefix, int64_t out, int64_t in, Rng& rng,
                       bool bias = true, bool zero = false) {
    if (zero) p.add(prefix + ".w", Tensor::zeros({out, in}));
    else p.add(prefix + ".w", init_weight<float>({out, in}, in, rng));
    if (bias) p.add(prefix + ".b", Tensor::zeros({out}));
}

inline void add_conv(ParamDict& p, const std::string& prefix, int64_t oc, int64_t ic, int64_t kh,
                     int64_t kw, Rng& rng, bool zero = false) {
    if (zero) p.add(prefix + ".w", Tensor::zeros({oc, ic, kh, kw}));
    else p.add(prefix + ".w", init_weight<float>({oc, ic, kh, kw}, ic * kh * kw, rng));
    p.add(prefix + ".b", Tensor::zeros({oc}));
}

inline void add_norm(ParamDict& p, const std::string& prefix, int64_t c) {
    p.add(prefix + ".g", Tensor::full({c}, 1.0f));
    p.add(prefix + ".b", Tensor::zeros({c}));
}

}  // namespace vd

#endif
