#ifndef VDIFF_MODEL_UNET_HPP
#define VDIFF_MODEL_UNET_HPP

#include "model/motion_module.hpp"
#include "model/text_encoder.hpp"

namespace vd {

// Denoiser eps_theta(z_t, t, text): 2 resolution levels of paired down/up
// blocks plus a middle block; every block is ResNet + spatial self-attention
// + text cross-attention (+ feed-forward). Latent input is (N, 4, 8, 8).
struct UNetConfig {
    int64_t lat_ch = 4;
    int64_t base = 32;
    std::vector<int> mult = {1, 2};
    int heads = 2;
    int64_t text_dim = kTextDim;
    int64_t time_dim = 64;
    int groups = 8;

    int64_t level_ch(int l) const { return base * mult[l]; }
};

struct UNetSite {
    std::string name;
    int64_t channels;
};

inline std::vector<UNetSite> unet_sites(const UNetConfig& cfg) {
    return {{"down0", cfg.level_ch(0)},
            {"down1", cfg.level_ch(1)},
            {"mid", cfg.level_ch(1)},
            {"up1", cfg.level_ch(1)},
            {"up0", cfg.level_ch(0)}};
}

inline std::vector<MotionSite> motion_sites_for(const UNetConfig& cfg) {
    std::vector<MotionSite> out;
    for (auto& s : unet_sites(cfg)) out.push_back({s.name, s.channels});
    return out;
}

// spatial self/cross attention projection dims; LoRA targets for the domain
// adapter and LoRA-mode personalization
inline ProjDims unet_projection_dims(const UNetConfig& cfg) {
    ProjDims dims;
    for (auto& s : unet_sites(cfg)) {
        std::string p = "unet." + s.name + ".attn";
        int64_t c = s.channels;
        for (const char* t : {".q", ".k", ".v", ".o"}) dims[p + ".self" + t] = {c, c};
        dims[p + ".cross.q"] = {c, c};
        dims[p + ".cross.k"] = {c, cfg.text_dim};
        dims[p + ".cross.v"] = {c, cfg.text_dim};
        dims[p + ".cross.o"] = {c, c};
    }
    return dims;
}

inline std::vector<std::string> unet_attention_targets(const UNetConfig& cfg) {
    std::vector<std::string> out;
    for (auto& [k, _] : unet_projection_dims(cfg)) out.push_back(k);
    return out;
}

namespace detail {

inline void add_resnet(ParamDict& p, const std::string& prefix, int64_t cin, int64_t cout,
                       int64_t time_dim, Rng& rng) {
    add_norm(p, prefix + ".norm1", cin);
    add_conv(p, prefix + ".conv1", cout, cin, 3, 3, rng);
    add_linear(p, prefix + ".time", cout, time_dim, rng);
    add_norm(p, prefix + ".norm2", cout);
    add_conv(p, prefix + ".conv2", cout, cout, 3, 3, rng);
    if (cin != cout) add_conv(p, prefix + ".skip", cout, cin, 1, 1, rng);
}

inline void add_attn_stack(ParamDict& p, const std::string& prefix, int64_t c, int64_t text_dim,
                           Rng& rng) {
    add_norm(p, prefix + ".norm", c);
    add_linear(p, prefix + ".proj_in", c, c, rng);
    add_norm(p, prefix + ".ln1", c);
    add_linear(p, prefix + ".self.q", c, c, rng, false);
    add_linear(p, prefix + ".self.k", c, c, rng, false);
    add_linear(p, prefix + ".self.v", c, c, rng, false);
    add_linear(p, prefix + ".self.o", c, c, rng);
    add_norm(p, prefix + ".ln2", c);
    add_linear(p, prefix + ".cross.q", c, c, rng, false);
    add_linear(p, prefix + ".cross.k", c, text_dim, rng, false);
    add_linear(p, prefix + ".cross.v", c, text_dim, rng, false);
    add_linear(p, prefix + ".cross.o", c, c, rng);
    add_norm(p, prefix + ".ln3", c);
    add_linear(p, prefix + ".ff.fc1", 2 * c, c, rng);
    add_linear(p, prefix + ".ff.fc2", c, 2 * c, rng);
    add_linear(p, prefix + ".proj_out", c, c, rng);
}

}  // namespace detail

inline ParamDict init_unet_params(const UNetConfig& cfg, Rng& rng) {
    ParamDict p;
    int64_t c0 = cfg.level_ch(0), c1 = cfg.level_ch(1);
    add_conv(p, "unet.conv_in", c0, cfg.lat_ch, 3, 3, rng);
    add_linear(p, "unet.time.fc1", cfg.time_dim, cfg.time_dim, rng);
    add_linear(p, "unet.time.fc2", cfg.time_dim, cfg.time_dim, rng);
    detail::add_resnet(p, "unet.down0.res", c0, c0, cfg.time_dim, rng);
    detail::add_attn_stack(p, "unet.down0.attn", c0, cfg.text_dim, rng);
    add_conv(p, "unet.downsample0", c1, c0, 3, 3, rng);
    detail::add_resnet(p, "unet.down1.res", c1, c1, cfg.time_dim, rng);
    detail::add_attn_stack(p, "unet.down1.attn", c1, cfg.text_dim, rng);
    detail::add_resnet(p, "unet.mid.res1", c1, c1, cfg.time_dim, rng);
    detail::add_attn_stack(p, "unet.mid.attn", c1, cfg.text_dim, rng);
    detail::add_resnet(p, "unet.mid.res2", c1, c1, cfg.time_dim, rng);
    detail::add_resnet(p, "unet.up1.res", c1 * 2, c1, cfg.time_dim, rng);
    detail::add_attn_stack(p, "unet.up1.attn", c1, cfg.text_dim, rng);
    add_conv(p, "unet.upsample1", c0, c1, 3, 3, rng);
    detail::add_resnet(p, "unet.up0.res", c0 * 2, c0, cfg.time_dim, rng);
    detail::add_attn_stack(p, "unet.up0.attn", c0, cfg.text_dim, rng);
    add_norm(p, "unet.out.norm", c0);
    add_conv(p, "unet.out.conv", cfg.lat_ch, c0, 3, 3, rng, /*zero=*/true);
    return p;
}

// Optional plug-ins for a denoiser forward pass. `frames` > 1 routes the
// merged batch through the motion module at each site.
template <typename T>
struct DenoiserHooks {
    const LoraRuntimeT<T>* adapters = nullptr;  // spatial attention LoRAs
    const MotionConfig* mcfg = nullptr;
    ParamVarsT<T>* motion_pv = nullptr;
    const LoraRuntimeT<T>* motion_loras = nullptr;
    int64_t frames = 1;
};

namespace detail {

template <typename T>
VarT<T>* resnet_block(GraphT<T>& g, const UNetConfig& cfg, ParamVarsT<T>& pv,
                      const std::string& prefix, VarT<T>* x, VarT<T>* tfeat) {
    VarT<T>* h = g.group_norm(x, pv[prefix + ".norm1.g"], pv[prefix + ".norm1.b"], cfg.groups);
    h = g.silu(h);
    h = g.conv2d(h, pv[prefix + ".conv1.w"], pv[prefix + ".conv1.b"], 1, 1);
    VarT<T>* te = g.linear(g.silu(tfeat), pv[prefix + ".time.w"], pv[prefix + ".time.b"]);
    h = g.add_chan(h, g.reshape(te, {te->numel()}));
    h = g.group_norm(h, pv[prefix + ".norm2.g"], pv[prefix + ".norm2.b"], cfg.groups);
    h = g.silu(h);
    h = g.conv2d(h, pv[prefix + ".conv2.w"], pv[prefix + ".conv2.b"], 1, 1);
    VarT<T>* skip = x;
    if (pv.dict->has(prefix + ".skip.w"))
        skip = g.conv2d(x, pv[prefix + ".skip.w"], pv[prefix + ".skip.b"], 1, 0);
    return g.add(h, skip);
}

template <typename T>
VarT<T>* attn_stack(GraphT<T>& g, const UNetConfig& cfg, ParamVarsT<T>& pv,
                    const std::string& prefix, VarT<T>* x, VarT<T>* text,
                    const LoraRuntimeT<T>* loras) {
    const Shape& s = x->shape();
    int64_t N = s[0], c = s[1], hw = s[2] * s[3];
    VarT<T>* h = g.group_norm(x, pv[prefix + ".norm.g"], pv[prefix + ".norm.b"], cfg.groups);
    h = g.reshape(h, {N, c, hw});
    h = g.permute(h, {0, 2, 1});  // tokens (N, hw, c)
    h = g.linear(h, pv[prefix + ".proj_in.w"], pv[prefix + ".proj_in.b"]);

    auto attn_of = [&](const char* which) {
        AttnWeights<T> w;
        std::string ap = prefix + "." + which;
        w.wq = pv[ap + ".q.w"];
        w.wk = pv[ap + ".k.w"];
        w.wv = pv[ap + ".v.w"];
        w.wo = pv[ap + ".o.w"];
        w.bo = pv[ap + ".o.b"];
        w.heads = cfg.heads;
        w.target_prefix = ap;
        return w;
    };

    VarT<T>* u = g.layer_norm(h, pv[prefix + ".ln1.g"], pv[prefix + ".ln1.b"]);
    h = g.add(h, attention(g, u, u, u, attn_of("self"), loras));
    u = g.layer_norm(h, pv[prefix + ".ln2.g"], pv[prefix + ".ln2.b"]);
    h = g.add(h, attention(g, u, text, text, attn_of("cross"), loras));
    u = g.layer_norm(h, pv[prefix + ".ln3.g"], pv[prefix + ".ln3.b"]);
    u = g.linear(u, pv[prefix + ".ff.fc1.w"], pv[prefix + ".ff.fc1.b"]);
    u = g.silu(u);
    u = g.linear(u, pv[prefix + ".ff.fc2.w"], pv[prefix + ".ff.fc2.b"]);
    h = g.add(h, u);

    h = g.linear(h, pv[prefix + ".proj_out.w"], pv[prefix + ".proj_out.b"]);
    h = g.permute(h, {0, 2, 1});
    h = g.reshape(h, {N, c, s[2], s[3]});
    return g.add(x, h);
}

}  // namespace detail

// Full denoiser pass over a merged batch. z: (N, lat, h, w) with N = b*frames;
// text: (N, L, D); t: one diffusion step for the whole batch.
template <typename T>
VarT<T>* unet_apply(GraphT<T>& g, const UNetConfig& cfg, ParamVarsT<T>& pv, VarT<T>* z, int64_t t,
                    VarT<T>* text, const DenoiserHooks<T>& hooks = {}) {
    const Shape& zs = z->shape();
    VD_CHECK_CONTRACT(zs.size() == 4 && zs[1] == cfg.lat_ch,
                      "unet_apply: latent channel mismatch, expected " +
                          std::to_string(cfg.lat_ch) + " got " + shape_str(zs));
    VD_CHECK_CONTRACT(text->shape().size() == 3 && text->shape()[0] == zs[0],
                      "unet_apply: text batch mismatch");

    auto motion = [&](VarT<T>* x, const std::string& site_name, int64_t channels) -> VarT<T>* {
        if (!hooks.mcfg || hooks.frames <= 0) return x;
        const MotionSite* site = nullptr;
        for (auto& s : hooks.mcfg->sites)
            if (s.name == site_name) site = &s;
        VD_CHECK_CONFIG(site != nullptr,
                        "motion module has no site '" + site_name + "' for this denoiser");
        VD_CHECK_CONFIG(site->channels == channels,
                        "motion site '" + site_name + "' channel mismatch: module has " +
                            std::to_string(site->channels) + ", denoiser needs " +
                            std::to_string(channels));
        return motion_site_forward(g, *hooks.mcfg, *hooks.motion_pv, *site, x, hooks.frames,
                                   hooks.motion_loras);
    };

    VarT<T>* tfeat = g.constant(sinusoidal_position_row<T>(t, cfg.time_dim));  // (1, time_dim)
    tfeat = g.linear(tfeat, pv["unet.time.fc1.w"], pv["unet.time.fc1.b"]);
    tfeat = g.silu(tfeat);
    tfeat = g.linear(tfeat, pv["unet.time.fc2.w"], pv["unet.time.fc2.b"]);

    int64_t c0 = cfg.level_ch(0), c1 = cfg.level_ch(1);
    VarT<T>* x = g.conv2d(z, pv["unet.conv_in.w"], pv["unet.conv_in.b"], 1, 1);

    VarT<T>* d0 = detail::resnet_block(g, cfg, pv, "unet.down0.res", x, tfeat);
    d0 = detail::attn_stack(g, cfg, pv, "unet.down0.attn", d0, text, hooks.adapters);
    d0 = motion(d0, "down0", c0);

    VarT<T>* h = g.conv2d(d0, pv["unet.downsample0.w"], pv["unet.downsample0.b"], 2, 1);
    VarT<T>* d1 = detail::resnet_block(g, cfg, pv, "unet.down1.res", h, tfeat);
    d1 = detail::attn_stack(g, cfg, pv, "unet.down1.attn", d1, text, hooks.adapters);
    d1 = motion(d1, "down1", c1);

    VarT<T>* m = detail::resnet_block(g, cfg, pv, "unet.mid.res1", d1, tfeat);
    m = detail::attn_stack(g, cfg, pv, "unet.mid.attn", m, text, hooks.adapters);
    m = motion(m, "mid", c1);
    m = detail::resnet_block(g, cfg, pv, "unet.mid.res2", m, tfeat);

    VarT<T>* u = detail::resnet_block(g, cfg, pv, "unet.up1.res", g.concat_ch(m, d1), tfeat);
    u = detail::attn_stack(g, cfg, pv, "unet.up1.attn", u, text, hooks.adapters);
    u = motion(u, "up1", c1);

    u = g.upsample2x(u);
    u = g.conv2d(u, pv["unet.upsample1.w"], pv["unet.upsample1.b"], 1, 1);

    u = detail::resnet_block(g, cfg, pv, "unet.up0.res", g.concat_ch(u, d0), tfeat);
    u = detail::attn_stack(g, cfg, pv, "unet.up0.attn", u, text, hooks.adapters);
    u = motion(u, "up0", c0);

    u = g.group_norm(u, pv["unet.out.norm.g"], pv["unet.out.norm.b"], cfg.groups);
    u = g.silu(u);
    return g.conv2d(u, pv["unet.out.conv.w"], pv["unet.out.conv.b"], 1, 1);
}

}  // namespace vd

#endif
