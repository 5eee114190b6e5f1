#ifndef VDIFF_MODEL_AUTOENCODER_HPP
#define VDIFF_MODEL_AUTOENCODER_HPP

#include "core/params.hpp"

namespace vd {

// Small conv autoencoder, spatial factor 4 (3 x h x w -> 4 x h/4 x w/4).
// Also carries the frozen embedding head used by the evaluation metrics:
// flattened latent -> 64-dim unit vector.
struct AEConfig {
    int64_t img_ch = 3;
    int64_t img_size = 32;
    int64_t base = 32;
    int64_t lat_ch = 4;
    int64_t embed_dim = 64;
    int groups = 8;
};

inline ParamDict init_ae_params(const AEConfig& cfg, Rng& rng) {
    ParamDict p;
    int64_t b = cfg.base;
    add_conv(p, "ae.enc.conv0", b, cfg.img_ch, 3, 3, rng);
    add_norm(p, "ae.enc.norm0", b);
    add_conv(p, "ae.enc.conv1", b, b, 3, 3, rng);
    add_norm(p, "ae.enc.norm1", b);
    add_conv(p, "ae.enc.conv2", 2 * b, b, 3, 3, rng);
    add_norm(p, "ae.enc.norm2", 2 * b);
    add_conv(p, "ae.enc.conv3", cfg.lat_ch, 2 * b, 3, 3, rng);
    add_conv(p, "ae.dec.conv0", 2 * b, cfg.lat_ch, 3, 3, rng);
    add_norm(p, "ae.dec.norm0", 2 * b);
    add_conv(p, "ae.dec.conv1", b, 2 * b, 3, 3, rng);
    add_norm(p, "ae.dec.norm1", b);
    add_conv(p, "ae.dec.conv2", b, b, 3, 3, rng);
    add_norm(p, "ae.dec.norm2", b);
    add_conv(p, "ae.dec.conv3", cfg.img_ch, b, 3, 3, rng);
    int64_t lat_flat = cfg.lat_ch * (cfg.img_size / 4) * (cfg.img_size / 4);
    // fixed random head, seeded at init and frozen with the rest after stage 0
    p.add("ae.embed.proj", Tensor::randn({cfg.embed_dim, lat_flat}, rng, 0.08f));
    return p;
}

template <typename T>
VarT<T>* ae_encode(GraphT<T>& g, const AEConfig& cfg, ParamVarsT<T>& pv, VarT<T>* x) {
    const Shape& s = x->shape();
    VD_CHECK_CONTRACT(s.size() == 4 && s[1] == cfg.img_ch, "ae_encode: expects (b,3,h,w)");
    VD_CHECK_CONTRACT(s[2] % 4 == 0 && s[3] % 4 == 0,
                      "ae_encode: spatial dims must be divisible by 4, got " + shape_str(s));
    auto act = [&](VarT<T>* h, const std::string& n) {
        return g.silu(g.group_norm(h, pv[n + ".g"], pv[n + ".b"], cfg.groups));
    };
    VarT<T>* h = g.conv2d(x, pv["ae.enc.conv0.w"], pv["ae.enc.conv0.b"], 1, 1);
    h = act(h, "ae.enc.norm0");
    h = g.conv2d(h, pv["ae.enc.conv1.w"], pv["ae.enc.conv1.b"], 2, 1);
    h = act(h, "ae.enc.norm1");
    h = g.conv2d(h, pv["ae.enc.conv2.w"], pv["ae.enc.conv2.b"], 2, 1);
    h = act(h, "ae.enc.norm2");
    return g.conv2d(h, pv["ae.enc.conv3.w"], pv["ae.enc.conv3.b"], 1, 1);
}

template <typename T>
VarT<T>* ae_decode(GraphT<T>& g, const AEConfig& cfg, ParamVarsT<T>& pv, VarT<T>* z) {
    const Shape& s = z->shape();
    VD_CHECK_CONTRACT(s.size() == 4 && s[1] == cfg.lat_ch,
                      "ae_decode: latent channel mismatch, expected " +
                          std::to_string(cfg.lat_ch) + " got " + shape_str(s));
    auto act = [&](VarT<T>* h, const std::string& n) {
        return g.silu(g.group_norm(h, pv[n + ".g"], pv[n + ".b"], cfg.groups));
    };
    VarT<T>* h = g.conv2d(z, pv["ae.dec.conv0.w"], pv["ae.dec.conv0.b"], 1, 1);
    h = act(h, "ae.dec.norm0");
    h = g.upsample2x(h);
    h = g.conv2d(h, pv["ae.dec.conv1.w"], pv["ae.dec.conv1.b"], 1, 1);
    h = act(h, "ae.dec.norm1");
    h = g.upsample2x(h);
    h = g.conv2d(h, pv["ae.dec.conv2.w"], pv["ae.dec.conv2.b"], 1, 1);
    h = act(h, "ae.dec.norm2");
    h = g.conv2d(h, pv["ae.dec.conv3.w"], pv["ae.dec.conv3.b"], 1, 1);
    return g.sigmoid(h);
}

// Runtime bundle: weights + the latent scale calibrated after stage 0 so
// diffusion sees roughly unit-variance latents.
struct Autoencoder {
    AEConfig cfg;
    ParamDict params;
    float latent_scale = 1.0f;

    // (b,3,h,w) -> (b,lat,h/4,w/4), scaled
    Tensor encode_image(const Tensor& x) const {
        Graph g;
        ParamVars pv(g, const_cast<ParamDict&>(params));
        auto* z = ae_encode(g, cfg, pv, g.leaf(x));
        Tensor out = z->value.clone();
        for (int64_t i = 0; i < out.numel(); i++) out[i] *= latent_scale;
        return out;
    }

    // inverse of encode_image; output in [0,1]
    Tensor decode_latent(const Tensor& z) const {
        Tensor unscaled = z.clone();
        for (int64_t i = 0; i < unscaled.numel(); i++) unscaled[i] /= latent_scale;
        Graph g;
        ParamVars pv(g, const_cast<ParamDict&>(params));
        auto* x = ae_decode(g, cfg, pv, g.leaf(unscaled));
        Tensor out = x->value.clone();
        for (int64_t i = 0; i < out.numel(); i++) out[i] = std::clamp(out[i], 0.0f, 1.0f);
        return out;
    }

    // frozen metric embedder: (3,h,w) image -> unit vector (embed_dim)
    Tensor embed(const Tensor& img) const {
        VD_CHECK_CONTRACT(img.ndim() == 3, "embed: expects (3,h,w)");
        Tensor z = encode_image(img.view({1, img.shape[0], img.shape[1], img.shape[2]}));
        const Tensor& proj = params.at("ae.embed.proj");
        VD_CHECK_CONTRACT(proj.shape[1] == z.numel(), "embed: image size unsupported by head");
        Tensor e({proj.shape[0]});
        gemm_nt(e.data(), z.data(), proj.data(), 1, z.numel(), proj.shape[0], false);
        double norm = 0;
        for (int64_t i = 0; i < e.numel(); i++) norm += (double)e[i] * e[i];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            e.fill(0.0f);
            e[0] = 1.0f;
            return e;
        }
        for (int64_t i = 0; i < e.numel(); i++) e[i] = (float)(e[i] / norm);
        return e;
    }
};

}  // namespace vd

#endif
