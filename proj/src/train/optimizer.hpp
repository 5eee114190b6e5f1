#ifndef VDIFF_TRAIN_OPTIMIZER_HPP
#define VDIFF_TRAIN_OPTIMIZER_HPP

#include "core/params.hpp"

namespace vd {

// Adaptive-moment optimizer with decoupled weight decay and bias correction.
// Moment accumulators exist only for parameters that actually train; a
// parameter with no gradient this step is left untouched (no decay either).
struct AdamW {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int64_t step_count = 0;
    std::unordered_map<std::string, std::pair<Tensor, Tensor>> moments;  // name -> (m, v)

    void step(ParamDict& params, const std::vector<std::pair<std::string, const Tensor*>>& grads) {
        step_count++;
        double bc1 = 1.0 - std::pow(beta1, (double)step_count);
        double bc2 = 1.0 - std::pow(beta2, (double)step_count);
        for (auto& [name, grad] : grads) {
            if (!grad || !grad->defined()) continue;
            Tensor& p = params.at(name);
            VD_CHECK_CONTRACT(p.shape == grad->shape, "adamw: grad shape mismatch for " + name);
            for (int64_t i = 0; i < grad->numel(); i++)
                if (!std::isfinite((*grad)[i]))
                    throw numeric_error("adamw: non-finite gradient in parameter '" + name + "'");
            auto it = moments.find(name);
            if (it == moments.end())
                it = moments.emplace(name, std::make_pair(Tensor::zeros(p.shape),
                                                          Tensor::zeros(p.shape))).first;
            Tensor& m = it->second.first;
            Tensor& v = it->second.second;
            for (int64_t i = 0; i < p.numel(); i++) {
                double gi = (*grad)[i];
                double mi = beta1 * m[i] + (1.0 - beta1) * gi;
                double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                m[i] = (float)mi;
                v[i] = (float)vi;
                double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps) + weight_decay * p[i];
                p[i] = (float)(p[i] - lr * update);
            }
        }
    }
};

// gradients of one component's trainable parameters after backward()
inline std::vector<std::pair<std::string, const Tensor*>> collect_grads(ParamVars& pv) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (auto& name : pv.dict->order) {
        if (!pv.trainable || !pv.trainable(name)) continue;
        auto it = pv.cache.find(name);
        if (it == pv.cache.end() || !it->second->grad.defined()) {
            out.push_back({name, nullptr});
            continue;
        }
        out.push_back({name, &it->second->grad});
    }
    return out;
}

}  // namespace vd

#endif
