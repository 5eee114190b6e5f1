#ifndef VDIFF_PIPELINE_STACK_HPP
#define VDIFF_PIPELINE_STACK_HPP

#include "diffusion/schedule.hpp"
#include "io/checkpoint.hpp"
#include "model/autoencoder.hpp"
#include "model/unet.hpp"

namespace vd {

// Everything a denoiser run needs, assembled from per-component checkpoints:
// autoencoder, base (or personalized) T2I, optional domain adapter, optional
// motion module, optional MotionLoRAs with composition weights.
struct Pipeline {
    UNetConfig ucfg;
    AEConfig acfg;
    Vocabulary vocab = build_default_vocab();
    NoiseSchedule sched = build_schedule(100, 1e-4, 0.02);

    Autoencoder ae;
    ParamDict unet;  // denoiser + text encoder parameters
    std::optional<LoraSet> adapter;
    std::optional<LoraSet> person_lora;
    std::optional<MotionConfig> mcfg;
    ParamDict motion;
    std::vector<std::pair<LoraSet, float>> motion_loras;
};

enum class TrainTarget { none, unet_full, autoencoder, adapter, motion, motion_lora, person_lora };

// ---- checkpoint config snapshots ----

inline json unet_config_json(const UNetConfig& c, const Vocabulary& vocab,
                             const NoiseSchedule& sched) {
    json j;
    j["lat_ch"] = c.lat_ch;
    j["base"] = c.base;
    j["mult"] = c.mult;
    j["heads"] = c.heads;
    j["text_dim"] = c.text_dim;
    j["time_dim"] = c.time_dim;
    j["groups"] = c.groups;
    j["vocab"] = vocab.words;
    j["sched_T"] = sched.T;
    j["sched_beta_start"] = sched.beta[0];
    j["sched_beta_end"] = sched.beta.back();
    return j;
}

inline void unet_config_from_json(const json& j, UNetConfig& c, Vocabulary& vocab,
                                  NoiseSchedule& sched) {
    c.lat_ch = j.value("lat_ch", (int64_t)4);
    c.base = j.value("base", (int64_t)32);
    c.mult = j.value("mult", std::vector<int>{1, 2});
    c.heads = (int)j.value("heads", 2);
    c.text_dim = j.value("text_dim", (int64_t)64);
    c.time_dim = j.value("time_dim", (int64_t)64);
    c.groups = (int)j.value("groups", 8);
    vocab.words = j.value("vocab", std::vector<std::string>{});
    VD_CHECK_CONFIG(!vocab.words.empty(), "checkpoint config: missing vocabulary");
    vocab.index.clear();
    for (size_t i = 0; i < vocab.words.size(); i++) vocab.index[vocab.words[i]] = (int64_t)i;
    sched = build_schedule(j.value("sched_T", (int64_t)100), j.value("sched_beta_start", 1e-4),
                           j.value("sched_beta_end", 0.02));
}

inline json motion_config_json(const MotionConfig& c) {
    json j;
    json sites = json::array();
    for (auto& s : c.sites) sites.push_back({{"name", s.name}, {"channels", s.channels}});
    j["sites"] = sites;
    j["n_blocks"] = c.n_blocks;
    j["heads"] = c.heads;
    j["ff_mult"] = c.ff_mult;
    j["max_frames"] = c.max_frames;
    j["use_pe"] = c.use_pe;
    j["variant"] = c.variant;
    j["conv_kernel"] = c.conv_kernel;
    return j;
}

inline MotionConfig motion_config_from_json(const json& j) {
    MotionConfig c;
    c.sites.clear();
    for (auto& s : j.at("sites")) c.sites.push_back({s.at("name"), s.at("channels")});
    c.n_blocks = (int)j.value("n_blocks", 2);
    c.heads = (int)j.value("heads", 2);
    c.ff_mult = (int)j.value("ff_mult", 2);
    c.max_frames = (int)j.value("max_frames", 16);
    c.use_pe = j.value("use_pe", true);
    c.variant = j.value("variant", std::string("transformer"));
    c.conv_kernel = (int)j.value("conv_kernel", 3);
    return c;
}

inline json lora_config_json(const LoraSet& s, const json& extra = json::object()) {
    json j;
    j["lora_kind"] = s.kind;
    j["rank"] = s.rank;
    j["alpha"] = s.alpha;
    j["targets"] = s.targets;
    for (auto& [k, v] : extra.items()) j[k] = v;
    return j;
}

inline LoraSet lora_from_checkpoint(const CheckpointData& ck) {
    LoraSet s;
    s.kind = ck.config.value("lora_kind", ck.kind);
    s.rank = ck.config.value("rank", (int64_t)4);
    s.alpha = ck.config.value("alpha", 1.0f);
    s.targets = ck.config.value("targets", std::vector<std::string>{});
    VD_CHECK_CONFIG(!s.targets.empty(), "lora checkpoint: missing target manifest");
    for (auto& t : s.targets) {
        VD_CHECK_CONFIG(ck.params.has(t + ".A") && ck.params.has(t + ".B"),
                        "lora checkpoint: missing tensors for target " + t);
    }
    s.params = ck.params;
    return s;
}

// validate a LoRA set's manifest against the host model's projection dims
inline void validate_lora_against(const LoraSet& s, const ProjDims& dims, const std::string& what) {
    for (auto& t : s.targets) {
        auto it = dims.find(t);
        if (it == dims.end())
            throw config_error(what + ": adapter targets projection '" + t +
                               "' which the host model does not have");
        auto [m, n] = it->second;
        const Tensor& A = s.params.at(t + ".A");
        const Tensor& B = s.params.at(t + ".B");
        if (A.shape[0] != m || B.shape[0] != n || A.shape[1] != B.shape[1])
            throw config_error(what + ": adapter dims for '" + t + "' (A " + shape_str(A.shape) +
                               ", B " + shape_str(B.shape) + ") do not fit projection (" +
                               std::to_string(m) + "," + std::to_string(n) + ")");
    }
}

// ---- save / load ----

inline void save_base_t2i(const std::string& path, const Pipeline& p,
                          const std::string& kind = "base_t2i", const json& extra = json::object()) {
    json cfg = unet_config_json(p.ucfg, p.vocab, p.sched);
    for (auto& [k, v] : extra.items()) cfg[k] = v;
    save_checkpoint(path, kind, p.unet, cfg);
}

inline void save_autoencoder_ckpt(const std::string& path, const Autoencoder& ae) {
    json cfg;
    cfg["img_ch"] = ae.cfg.img_ch;
    cfg["img_size"] = ae.cfg.img_size;
    cfg["base"] = ae.cfg.base;
    cfg["lat_ch"] = ae.cfg.lat_ch;
    cfg["embed_dim"] = ae.cfg.embed_dim;
    cfg["groups"] = ae.cfg.groups;
    cfg["latent_scale"] = ae.latent_scale;
    save_checkpoint(path, "autoencoder", ae.params, cfg);
}

inline Autoencoder load_autoencoder_ckpt(const std::string& path) {
    CheckpointData ck = load_checkpoint(path, "autoencoder");
    Autoencoder ae;
    ae.cfg.img_ch = ck.config.value("img_ch", (int64_t)3);
    ae.cfg.img_size = ck.config.value("img_size", (int64_t)32);
    ae.cfg.base = ck.config.value("base", (int64_t)32);
    ae.cfg.lat_ch = ck.config.value("lat_ch", (int64_t)4);
    ae.cfg.embed_dim = ck.config.value("embed_dim", (int64_t)64);
    ae.cfg.groups = (int)ck.config.value("groups", 8);
    ae.latent_scale = ck.config.value("latent_scale", 1.0f);
    Rng dummy(0);
    ParamDict expected = init_ae_params(ae.cfg, dummy);
    validate_params(ck.params, expected, "autoencoder " + path);
    ae.params = std::move(ck.params);
    return ae;
}

// base_t2i or full personalization checkpoints both restore the denoiser
inline void load_t2i_into(Pipeline& p, const std::string& path, const std::string& expected_kind) {
    CheckpointData ck = load_checkpoint(path, expected_kind);
    unet_config_from_json(ck.config, p.ucfg, p.vocab, p.sched);
    Rng dummy(0);
    ParamDict expected = init_unet_params(p.ucfg, dummy);
    add_text_params(expected, p.vocab, dummy);
    validate_params(ck.params, expected, "t2i " + path);
    p.unet = std::move(ck.params);
}

inline void save_motion_ckpt(const std::string& path, const Pipeline& p) {
    VD_CHECK_CONTRACT(p.mcfg.has_value(), "save_motion_ckpt: no motion module attached");
    save_checkpoint(path, "motion_module", p.motion, motion_config_json(*p.mcfg));
}

inline void load_motion_into(Pipeline& p, const std::string& path) {
    CheckpointData ck = load_checkpoint(path, "motion_module");
    MotionConfig mc = motion_config_from_json(ck.config);
    // site alignment with the host UNet, by name and channel count
    auto host_sites = motion_sites_for(p.ucfg);
    VD_CHECK_CONFIG(mc.sites.size() == host_sites.size(),
                    "motion module " + path + ": has " + std::to_string(mc.sites.size()) +
                        " sites, host UNet exposes " + std::to_string(host_sites.size()));
    for (size_t i = 0; i < host_sites.size(); i++) {
        VD_CHECK_CONFIG(mc.sites[i].name == host_sites[i].name &&
                            mc.sites[i].channels == host_sites[i].channels,
                        "motion module " + path + ": site '" + mc.sites[i].name +
                            "' does not align with host site '" + host_sites[i].name + "'");
    }
    Rng dummy(0);
    ParamDict expected = init_motion_params(mc, dummy);
    validate_params(ck.params, expected, "motion module " + path);
    p.mcfg = mc;
    p.motion = std::move(ck.params);
}

inline void save_lora_ckpt(const std::string& path, const LoraSet& s, const std::string& kind,
                           const json& extra = json::object()) {
    save_checkpoint(path, kind, s.params, lora_config_json(s, extra));
}

// ---- forward assembly ----

// wires one graph over the pipeline's components; keeps the ParamVars alive
// so a training loop can read gradients afterwards
struct ForwardCtx {
    Graph g;
    std::unique_ptr<ParamVars> unet_pv, motion_pv, adapter_pv, person_pv;
    std::vector<std::unique_ptr<ParamVars>> mlora_pvs;
    LoraRuntimeT<float> spatial_loras, temporal_loras;
    Var* pred = nullptr;
    ParamVars* trainable_pv = nullptr;

    ForwardCtx() = default;
    ForwardCtx(const ForwardCtx&) = delete;
};

// z5: (b, lat, f, h, w); tokens: one prompt per batch item, repeated across
// frames for the cross-attention
inline void denoiser_forward(ForwardCtx& ctx, Pipeline& p, const Tensor& z5, int64_t t,
                             const std::vector<std::vector<int64_t>>& tokens,
                             TrainTarget target = TrainTarget::none) {
    VD_CHECK_CONTRACT(z5.ndim() == 5, "denoiser_forward: expects (b,c,f,h,w)");
    int64_t b = z5.shape[0], f = z5.shape[2];
    VD_CHECK_CONTRACT((int64_t)tokens.size() == b, "denoiser_forward: one prompt per batch item");

    Graph& g = ctx.g;
    ctx.unet_pv = std::make_unique<ParamVars>(
        g, p.unet, target == TrainTarget::unet_full
                       ? std::function<bool(const std::string&)>(
                             [](const std::string& n) { return n.rfind("unet.", 0) == 0 ||
                                                               n.rfind("text.", 0) == 0; })
                       : nullptr);
    if (p.adapter) {
        ctx.adapter_pv = std::make_unique<ParamVars>(
            g, p.adapter->params,
            target == TrainTarget::adapter
                ? std::function<bool(const std::string&)>([](const std::string&) { return true; })
                : nullptr);
        if (p.adapter->alpha != 0.0f)
            ctx.spatial_loras.attach(*ctx.adapter_pv, p.adapter->targets, p.adapter->alpha);
    }
    if (p.person_lora) {
        ctx.person_pv = std::make_unique<ParamVars>(
            g, p.person_lora->params,
            target == TrainTarget::person_lora
                ? std::function<bool(const std::string&)>([](const std::string&) { return true; })
                : nullptr);
        if (p.person_lora->alpha != 0.0f)
            ctx.spatial_loras.attach(*ctx.person_pv, p.person_lora->targets, p.person_lora->alpha);
    }
    DenoiserHooks<float> hooks;
    hooks.frames = f;
    if (p.mcfg) {
        ctx.motion_pv = std::make_unique<ParamVars>(
            g, p.motion,
            target == TrainTarget::motion
                ? std::function<bool(const std::string&)>([](const std::string&) { return true; })
                : nullptr);
        hooks.mcfg = &*p.mcfg;
        hooks.motion_pv = ctx.motion_pv.get();
        for (size_t i = 0; i < p.motion_loras.size(); i++) {
            auto& [set, weight] = p.motion_loras[i];
            ctx.mlora_pvs.push_back(std::make_unique<ParamVars>(
                g, const_cast<ParamDict&>(set.params),
                target == TrainTarget::motion_lora
                    ? std::function<bool(const std::string&)>([](const std::string&) { return true; })
                    : nullptr));
            ctx.temporal_loras.attach(*ctx.mlora_pvs.back(), set.targets, set.alpha * weight);
        }
        if (!p.motion_loras.empty()) hooks.motion_loras = &ctx.temporal_loras;
    }
    if (!ctx.spatial_loras.by_target.empty()) hooks.adapters = &ctx.spatial_loras;

    // text: repeat each item's tokens across its frames
    std::vector<int64_t> flat;
    flat.reserve(b * f * kTextLen);
    for (int64_t i = 0; i < b; i++) {
        VD_CHECK_CONTRACT((int64_t)tokens[i].size() == kTextLen, "denoiser_forward: bad token len");
        for (int64_t k = 0; k < f; k++)
            flat.insert(flat.end(), tokens[i].begin(), tokens[i].end());
    }
    Var* text = text_embed(g, *ctx.unet_pv, flat);

    auto [merged, tok] = merge_frames_into_batch(z5);
    Var* z = g.leaf(std::move(merged));
    Var* out = unet_apply(g, p.ucfg, *ctx.unet_pv, z, t, text, hooks);
    ctx.pred = out;

    switch (target) {
        case TrainTarget::unet_full: ctx.trainable_pv = ctx.unet_pv.get(); break;
        case TrainTarget::adapter: ctx.trainable_pv = ctx.adapter_pv.get(); break;
        case TrainTarget::person_lora: ctx.trainable_pv = ctx.person_pv.get(); break;
        case TrainTarget::motion: ctx.trainable_pv = ctx.motion_pv.get(); break;
        case TrainTarget::motion_lora:
            ctx.trainable_pv = ctx.mlora_pvs.empty() ? nullptr : ctx.mlora_pvs[0].get();
            break;
        default: break;
    }
}

// prediction over a (b,c,f,h,w) latent, no gradients
inline Tensor predict_noise(Pipeline& p, const Tensor& z5, int64_t t,
                            const std::vector<std::vector<int64_t>>& tokens) {
    ForwardCtx ctx;
    denoiser_forward(ctx, p, z5, t, tokens);
    return split_frames_from_batch(ctx.pred->value, FrameToken{z5.shape[0], z5.shape[2]});
}

// sampler-facing closure for a fixed prompt
inline DenoiseFn make_denoise_fn(Pipeline& p, const std::string& prompt) {
    auto toks = tokenize(p.vocab, prompt);
    return [&p, toks](const Tensor& zt, int64_t t) {
        std::vector<std::vector<int64_t>> tokens(zt.shape[0], toks);
        return predict_noise(p, zt, t, tokens);
    };
}

struct SampleOpts {
    int64_t frames = 8;
    int64_t steps = 25;
    double guidance = 1.0;
    uint64_t seed = 0;
    NoiseInit noise = NoiseInit::independent;
};

// (1, lat, f, h, w) latent clip for one prompt
inline Tensor sample_video_latents(Pipeline& p, const std::string& prompt, const SampleOpts& o) {
    int64_t hw = p.acfg.img_size / 4;
    Shape shape = {1, p.ucfg.lat_ch, o.frames, hw, hw};
    return ddim_sample(make_denoise_fn(p, prompt), make_denoise_fn(p, ""), shape, o.steps,
                       o.guidance, p.sched, o.seed, o.noise);
}

inline std::vector<Tensor> decode_video(const Pipeline& p, const Tensor& lat5) {
    VD_CHECK_CONTRACT(lat5.ndim() == 5 && lat5.shape[0] == 1, "decode_video: expects (1,c,f,h,w)");
    auto [merged, tok] = merge_frames_into_batch(lat5);
    Tensor imgs = p.ae.decode_latent(merged);  // (f,3,H,W)
    std::vector<Tensor> frames;
    for (int64_t k = 0; k < tok.f; k++) {
        Tensor fr({3, imgs.shape[2], imgs.shape[3]});
        std::memcpy(fr.data(), imgs.data() + k * fr.numel(), sizeof(float) * fr.numel());
        frames.push_back(std::move(fr));
    }
    return frames;
}

}  // namespace vd

#endif
