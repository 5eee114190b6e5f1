#ifndef VDIFF_MODEL_MOTION_MODULE_HPP
#define VDIFF_MODEL_MOTION_MODULE_HPP

#include "model/attention.hpp"
#include "model/inflation.hpp"
#include "model/positional.hpp"

namespace vd {

// Temporal Transformer inserted per UNet site: frame-position encoding,
// n_blocks of pre-norm self-attention over the frame axis plus feed-forward,
// wrapped in input/output projections. The output projection is zero at
// init, so with the outer residual the whole module starts as an identity.
struct MotionSite {
    std::string name;
    int64_t channels;
};

struct MotionConfig {
    std::vector<MotionSite> sites;
    int n_blocks = 2;
    int heads = 2;
    int ff_mult = 2;
    int max_frames = 16;
    bool use_pe = true;
    std::string variant = "transformer";  // "transformer" | "conv"
    int conv_kernel = 3;

    std::string prefix(const MotionSite& s) const { return "mm." + s.name; }
};

inline std::vector<std::string> motion_attention_targets(const MotionConfig& cfg) {
    std::vector<std::string> out;
    for (auto& s : cfg.sites)
        for (int j = 0; j < cfg.n_blocks; j++)
            for (const char* p : {".q", ".k", ".v", ".o"})
                out.push_back(cfg.prefix(s) + ".blk" + std::to_string(j) + ".attn" + p);
    return out;
}

inline ProjDims motion_projection_dims(const MotionConfig& cfg) {
    ProjDims dims;
    for (auto& s : cfg.sites)
        for (int j = 0; j < cfg.n_blocks; j++)
            for (const char* p : {".q", ".k", ".v", ".o"})
                dims[cfg.prefix(s) + ".blk" + std::to_string(j) + ".attn" + p] = {s.channels,
                                                                                  s.channels};
    return dims;
}

inline ParamDict init_motion_params(const MotionConfig& cfg, Rng& rng) {
    ParamDict p;
    for (auto& s : cfg.sites) {
        int64_t c = s.channels;
        std::string base = cfg.prefix(s);
        add_linear(p, base + ".proj_in", c, c, rng);
        for (int j = 0; j < cfg.n_blocks; j++) {
            std::string bp = base + ".blk" + std::to_string(j);
            add_norm(p, bp + ".ln1", c);
            if (cfg.variant == "conv") {
                add_conv(p, bp + ".conv", c, c, cfg.conv_kernel, 1, rng);
                add_linear(p, bp + ".pw", c, c, rng);
            } else {
                add_linear(p, bp + ".attn.q", c, c, rng, false);
                add_linear(p, bp + ".attn.k", c, c, rng, false);
                add_linear(p, bp + ".attn.v", c, c, rng, false);
                add_linear(p, bp + ".attn.o", c, c, rng);
            }
            add_norm(p, bp + ".ln2", c);
            add_linear(p, bp + ".ff.fc1", c * cfg.ff_mult, c, rng);
            add_linear(p, bp + ".ff.fc2", c, c * cfg.ff_mult, rng);
        }
        add_linear(p, base + ".proj_out", c, c, rng, true, /*zero=*/true);
    }
    return p;
}

// 1D convolution along the frame axis of (B, f, c), same zero padding
template <typename T>
VarT<T>* conv1d_frames(GraphT<T>& g, VarT<T>* seq, VarT<T>* w, VarT<T>* bias) {
    const Shape& s = seq->shape();
    VD_CHECK_CONTRACT(s.size() == 3, "conv1d_frames: expects (B,f,c)");
    int k = (int)w->shape()[2];
    VD_CHECK_CONTRACT(k % 2 == 1, "conv1d_frames: kernel size must be odd");
    auto* x = g.permute(seq, {0, 2, 1});                    // (B,c,f)
    x = g.reshape(x, {s[0], s[2], s[1], 1});                // (B,c,f,1)
    auto* w4 = g.reshape(w, {w->shape()[0], w->shape()[1], w->shape()[2], 1});
    auto* y = g.conv2d(x, w4, bias, 1, k / 2, 0);
    y = g.reshape(y, {s[0], s[2], s[1]});
    return g.permute(y, {0, 2, 1});
}

// one temporal block on (B, f, c); pre-norm attention (or its conv
// replacement) and feed-forward, each residual
template <typename T>
VarT<T>* temporal_block_forward(GraphT<T>& g, const MotionConfig& cfg, ParamVarsT<T>& pv,
                                VarT<T>* seq, const std::string& block_prefix,
                                const LoraRuntimeT<T>* loras = nullptr) {
    VD_CHECK_CONTRACT(seq->shape().size() == 3, "temporal_block: expects (B,f,c)");
    VarT<T>* u = g.layer_norm(seq, pv[block_prefix + ".ln1.g"], pv[block_prefix + ".ln1.b"]);
    if (cfg.variant == "conv") {
        u = conv1d_frames(g, u, pv[block_prefix + ".conv.w"], pv[block_prefix + ".conv.b"]);
        u = g.silu(u);
        u = g.linear(u, pv[block_prefix + ".pw.w"], pv[block_prefix + ".pw.b"]);
    } else {
        AttnWeights<T> w;
        w.wq = pv[block_prefix + ".attn.q.w"];
        w.wk = pv[block_prefix + ".attn.k.w"];
        w.wv = pv[block_prefix + ".attn.v.w"];
        w.wo = pv[block_prefix + ".attn.o.w"];
        w.bo = pv[block_prefix + ".attn.o.b"];
        w.heads = cfg.heads;
        w.target_prefix = block_prefix + ".attn";
        u = attention(g, u, u, u, w, loras);
    }
    seq = g.add(seq, u);
    u = g.layer_norm(seq, pv[block_prefix + ".ln2.g"], pv[block_prefix + ".ln2.b"]);
    u = g.linear(u, pv[block_prefix + ".ff.fc1.w"], pv[block_prefix + ".ff.fc1.b"]);
    u = g.silu(u);
    u = g.linear(u, pv[block_prefix + ".ff.fc2.w"], pv[block_prefix + ".ff.fc2.b"]);
    return g.add(seq, u);
}

// whole site on merged frames: x (b*f, c, h, w) -> same shape.
// output = x + proj_out(blocks(PE + proj_in(space-merged x)))
template <typename T>
VarT<T>* motion_site_forward(GraphT<T>& g, const MotionConfig& cfg, ParamVarsT<T>& pv,
                             const MotionSite& site, VarT<T>* x, int64_t frames,
                             const LoraRuntimeT<T>* loras = nullptr) {
    const Shape& s = x->shape();
    VD_CHECK_CONTRACT(s.size() == 4 && s[0] % frames == 0, "motion_site: bad merged batch");
    VD_CHECK_CONTRACT(s[1] == site.channels, "motion_site " + site.name + ": channel mismatch, got " +
                                                 std::to_string(s[1]));
    VD_CHECK_CONFIG(frames <= cfg.max_frames,
                    "motion_site: frame count exceeds max_frames=" + std::to_string(cfg.max_frames));
    int64_t b = s[0] / frames;
    std::string base = cfg.prefix(site);

    VarT<T>* v5 = g_split_frames(g, x, FrameToken{b, frames});  // (b,c,f,h,w)
    VarT<T>* seq = g_merge_space(g, v5);                        // (b*h*w, f, c)
    VarT<T>* u = g.linear(seq, pv[base + ".proj_in.w"], pv[base + ".proj_in.b"]);
    if (cfg.use_pe) u = g.add_rows(u, g.constant(sinusoidal_encoding<T>(frames, site.channels)));
    for (int j = 0; j < cfg.n_blocks; j++)
        u = temporal_block_forward(g, cfg, pv, u, base + ".blk" + std::to_string(j), loras);
    u = g.linear(u, pv[base + ".proj_out.w"], pv[base + ".proj_out.b"]);
    VarT<T>* dv = g_split_space(g, u, SpaceToken{b, s[2], s[3]});
    VarT<T>* y5 = g.add(v5, dv);
    return g_merge_frames(g, y5);
}

// value-level wrapper over a whole video tensor (b,c,f,h,w)
inline Tensor motion_module_forward(const MotionConfig& cfg, const ParamDict& params,
                                    const MotionSite& site, const Tensor& v,
                                    const std::vector<const LoraSet*>& loras = {},
                                    float lora_scale = 1.0f) {
    Graph g;
    ParamVars pv(g, const_cast<ParamDict&>(params));
    LoraRuntimeT<float> rt;
    std::vector<std::unique_ptr<ParamVars>> lora_pvs;
    for (auto* ls : loras) {
        lora_pvs.push_back(std::make_unique<ParamVars>(g, const_cast<ParamDict&>(ls->params)));
        rt.attach(*lora_pvs.back(), ls->targets, ls->alpha * lora_scale);
    }
    auto [merged, tok] = merge_frames_into_batch(v);
    auto* x = g.leaf(merged);
    auto* y = motion_site_forward(g, cfg, pv, site, x, v.shape[2], loras.empty() ? nullptr : &rt);
    return split_frames_from_batch(y->value, tok);
}

}  // namespace vd

#endif
