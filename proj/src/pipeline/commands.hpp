#ifndef VDIFF_PIPELINE_COMMANDS_HPP
#define VDIFF_PIPELINE_COMMANDS_HPP

#include "data/camera_augment.hpp"
#include "eval/metrics.hpp"
#include "io/gif.hpp"
#include "train/stages.hpp"

namespace vd {

// Command layer: one function per CLI subcommand, all driven by a KVConfig
// (defaults < config file < flags). Every run writes a run_manifest.json
// sufficient to reproduce it.

inline std::vector<std::string> argv_from_config(const KVConfig& c) {
    if (!c.has("argv_json")) return {};
    try {
        return nlohmann::json::parse(c.values.at("argv_json")).get<std::vector<std::string>>();
    } catch (...) {
        return {};
    }
}

inline RunManifest start_manifest(const std::string& command, const KVConfig& c) {
    RunManifest m;
    m.command = command;
    m.argv = argv_from_config(c);
    m.config = c;
    m.config.values.erase("argv_json");
    m.seed = (uint64_t)c.get_int("seed", 0);
    return m;
}

inline void log_effective_config(const std::string& command, const KVConfig& c) {
    std::fprintf(stderr, "[vdiff] %s config:", command.c_str());
    for (auto& [k, v] : c.values)
        if (k != "argv_json") std::fprintf(stderr, " %s=%s", k.c_str(), v.c_str());
    std::fprintf(stderr, "\n");
}

inline std::vector<Tensor> corpus_images(const CorpusManifest& m, const std::string& split = "") {
    std::vector<Tensor> out;
    for (auto& e : m.entries) {
        if (!split.empty() && e.split != split) continue;
        auto frames = read_frames(m.root + "/" + e.dir);
        out.insert(out.end(), frames.begin(), frames.end());
    }
    return out;
}

// ---- datagen ----

inline void cmd_datagen(const KVConfig& c) {
    log_effective_config("datagen", c);
    WallTimer timer;
    std::string out = c.require("out");
    uint64_t seed = (uint64_t)c.get_int("seed", 0);
    int64_t videos = c.get_int("videos", 700);
    int64_t frames = c.get_int("frames", 8);
    int64_t images = c.get_int("images", 500);
    int64_t style_n = c.get_int("style_n", 30);
    double watermark = c.get_real("watermark", 0.6);
    bool styles = c.get_bool("styles", true);

    RunManifest man = start_manifest("datagen", c);
    std::filesystem::create_directories(out);
    if (videos > 0) {
        auto m = generate_corpus(out + "/videos", videos, frames, watermark,
                                 mix_seed(seed, "videos"));
        man.dataset_hashes["videos"] = hash_hex(m.corpus_hash);
    }
    if (images > 0) {
        auto m = generate_still_corpus(out + "/images", images, mix_seed(seed, "images"));
        man.dataset_hashes["images"] = hash_hex(m.corpus_hash);
    }
    if (styles) {
        for (auto& s : style_names()) {
            auto m = generate_style_set(s, style_n, mix_seed(seed, "styles"), out + "/styles/" + s);
            man.dataset_hashes["style_" + s] = hash_hex(m.corpus_hash);
        }
    }
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- pretrain (stage 0: autoencoder + base T2I) ----

inline void cmd_pretrain(const KVConfig& c) {
    log_effective_config("pretrain", c);
    WallTimer timer;
    std::string data = c.require("data");
    std::string out = c.require("out");
    uint64_t seed = (uint64_t)c.get_int("seed", 0);
    std::filesystem::create_directories(out);
    RunManifest man = start_manifest("pretrain", c);

    CorpusManifest stills = read_corpus_manifest(data + "/images");
    CorpusManifest videos = read_corpus_manifest(data + "/videos");
    man.dataset_hashes["images"] = hash_hex(stills.corpus_hash);
    man.dataset_hashes["videos"] = hash_hex(videos.corpus_hash);

    // the AE must reconstruct everything the pipeline will encode, including
    // watermarked video frames; the T2I itself trains on clean stills only
    std::vector<Tensor> ae_images = corpus_images(stills);
    std::vector<Tensor> vid_frames = corpus_images(videos, "train");
    ae_images.insert(ae_images.end(), vid_frames.begin(), vid_frames.end());

    Rng rng(mix_seed(seed, "init"));
    Autoencoder ae;
    ae.params = init_ae_params(ae.cfg, rng);
    TrainOpts ao;
    ao.iterations = c.get_int("ae_iters", 1000);
    ao.batch = c.get_int("batch", 16);
    ao.lr = c.get_real("ae_lr", 2e-3);
    ao.seed = mix_seed(seed, "ae");
    auto ae_rep = train_autoencoder(ae, ae_images, ao, [](int64_t it, float l) {
        std::fprintf(stderr, "[vdiff] ae iter %lld loss %.5f\n", (long long)it, l);
    });
    calibrate_latent_scale(ae, ae_images);

    // reconstruction quality on the corpus
    double psnr_acc = 0;
    int64_t psnr_n = std::min<int64_t>(64, (int64_t)ae_images.size());
    for (int64_t i = 0; i < psnr_n; i++) {
        const Tensor& img = ae_images[i];
        Tensor z = ae.encode_image(img.view({1, 3, img.shape[1], img.shape[2]}));
        Tensor rec = ae.decode_latent(z);
        psnr_acc += psnr(img, rec.view(img.shape));
    }
    man.metrics["ae_final_loss"] = ae_rep.losses.back();
    man.metrics["ae_psnr"] = psnr_acc / psnr_n;
    man.metrics["latent_scale"] = ae.latent_scale;
    save_autoencoder_ckpt(out + "/autoencoder.ckpt", ae);

    // base T2I on clean stills
    Pipeline p;
    p.ae = ae;
    p.unet = init_unet_params(p.ucfg, rng);
    add_text_params(p.unet, p.vocab, rng);
    LatentDataset dset = encode_corpus(stills, ae, p.vocab);
    TrainOpts to;
    to.iterations = c.get_int("t2i_iters", 2000);
    to.batch = c.get_int("batch", 16);
    to.lr = c.get_real("t2i_lr", 2e-4);
    to.seed = mix_seed(seed, "t2i");
    to.single_frames = true;
    auto t2i_rep = train_denoising_stage(p, TrainTarget::unet_full, dset, to,
                                         [](int64_t it, float l) {
                                             std::fprintf(stderr, "[vdiff] t2i iter %lld loss %.5f\n",
                                                          (long long)it, l);
                                         });
    man.metrics["t2i_first_loss"] = t2i_rep.mean_loss(0, 50);
    man.metrics["t2i_final_loss"] = t2i_rep.mean_loss(t2i_rep.losses.size() - 50, 50);
    save_base_t2i(out + "/base_t2i.ckpt", p);

    man.add_output("autoencoder.ckpt", out + "/autoencoder.ckpt");
    man.add_output("base_t2i.ckpt", out + "/base_t2i.ckpt");
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- shared loading ----

inline Pipeline load_base_pipeline(const KVConfig& c) {
    Pipeline p;
    p.ae = load_autoencoder_ckpt(c.require("ae"));
    std::string model = c.has("model") ? c.require("model") : c.require("base");
    CheckpointData probe = load_checkpoint(model);
    if (probe.kind == "personalization" && probe.config.value("mode", "") == "lora")
        throw config_error("checkpoint " + model +
                           " is a LoRA-mode personalization; pass it via person_lora instead");
    if (probe.kind != "base_t2i" && probe.kind != "personalization")
        throw config_error("checkpoint " + model + ": kind mismatch, expected 'base_t2i' or "
                           "'personalization' got '" + probe.kind + "'");
    load_t2i_into(p, model, probe.kind);
    return p;
}

inline void attach_adapter(Pipeline& p, const KVConfig& c, bool required) {
    bool no_adapter = c.get_bool("no_adapter", false);
    if (c.has("adapter") && !no_adapter) {
        CheckpointData ck = load_checkpoint(c.require("adapter"), "domain_adapter");
        LoraSet s = lora_from_checkpoint(ck);
        validate_lora_against(s, unet_projection_dims(p.ucfg), "domain adapter");
        s.alpha = (float)c.get_real("adapter_alpha", s.alpha);
        p.adapter = std::move(s);
    } else if (required && !no_adapter) {
        throw config_error(
            "this stage expects a domain adapter; pass adapter=<ckpt> or set no_adapter=1 "
            "(ablation) explicitly");
    }
}

inline void attach_person_lora(Pipeline& p, const KVConfig& c) {
    if (!c.has("person_lora")) return;
    CheckpointData ck = load_checkpoint(c.require("person_lora"), "personalization");
    VD_CHECK_CONFIG(ck.config.value("mode", "") == "lora",
                    "person_lora: checkpoint is not a LoRA-mode personalization");
    LoraSet s = lora_from_checkpoint(ck);
    validate_lora_against(s, unet_projection_dims(p.ucfg), "personalization lora");
    p.person_lora = std::move(s);
}

inline void attach_motion_loras(Pipeline& p, const KVConfig& c) {
    if (!c.has("motion_loras")) return;
    VD_CHECK_CONFIG(p.mcfg.has_value(), "motion_loras given but no motion module attached");
    ProjDims dims = motion_projection_dims(*p.mcfg);
    std::string spec = c.values.at("motion_loras");
    size_t pos = 0;
    while (pos < spec.size()) {
        size_t comma = spec.find(',', pos);
        std::string item = spec.substr(pos, comma == std::string::npos ? spec.npos : comma - pos);
        pos = comma == std::string::npos ? spec.size() : comma + 1;
        if (item.empty()) continue;
        double weight = 1.0;
        std::string path = item;
        size_t colon = item.rfind(':');
        if (colon != std::string::npos && item.find('/') < colon) {
            // "path:weight" (paths contain '/', so a trailing :w is a weight)
            try {
                weight = std::stod(item.substr(colon + 1));
                path = item.substr(0, colon);
            } catch (...) {
                path = item;
            }
        }
        CheckpointData ck = load_checkpoint(path, "motion_lora");
        LoraSet s = lora_from_checkpoint(ck);
        validate_lora_against(s, dims, "motion lora " + path);
        p.motion_loras.push_back({std::move(s), (float)weight});
    }
}

// ---- train-adapter (stage 1) ----

inline void cmd_train_adapter(const KVConfig& c) {
    log_effective_config("train-adapter", c);
    WallTimer timer;
    std::string out = c.require("out");
    uint64_t seed = (uint64_t)c.get_int("seed", 0);
    std::filesystem::create_directories(out);
    RunManifest man = start_manifest("train-adapter", c);

    Pipeline p = load_base_pipeline(c);
    CorpusManifest videos = read_corpus_manifest(c.require("data"));
    man.dataset_hashes["videos"] = hash_hex(videos.corpus_hash);

    Rng rng(mix_seed(seed, "adapter-init"));
    int64_t rank = c.get_int("rank", 4);
    p.adapter = init_lora_set("domain_adapter", unet_attention_targets(p.ucfg),
                              unet_projection_dims(p.ucfg), rank, 1.0f, rng);

    LatentDataset dset = encode_corpus(videos, p.ae, p.vocab, "train");
    TrainOpts o;
    o.iterations = c.get_int("iters", 2000);
    o.batch = c.get_int("batch", 16);
    o.lr = c.get_real("lr", 5e-5);
    o.seed = mix_seed(seed, "adapter");
    o.single_frames = true;  // static frames randomly sampled from the videos
    auto rep = train_denoising_stage(p, TrainTarget::adapter, dset, o, [](int64_t it, float l) {
        std::fprintf(stderr, "[vdiff] adapter iter %lld loss %.5f\n", (long long)it, l);
    });

    man.metrics["first_loss"] = rep.mean_loss(0, 100);
    man.metrics["final_loss"] = rep.mean_loss(rep.losses.size() - 100, 100);
    man.metrics["frozen_hash"] = hash_hex(rep.frozen_hash_after);
    save_lora_ckpt(out + "/domain_adapter.ckpt", *p.adapter, "domain_adapter");
    man.add_output("domain_adapter.ckpt", out + "/domain_adapter.ckpt");
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- train-motion (stage 2) ----

inline void cmd_train_motion(const KVConfig& c) {
    log_effective_config("train-motion", c);
    WallTimer timer;
    std::string out = c.require("out");
    uint64_t seed = (uint64_t)c.get_int("seed", 0);
    std::filesystem::create_directories(out);
    RunManifest man = start_manifest("train-motion", c);

    Pipeline p = load_base_pipeline(c);
    attach_adapter(p, c, /*required=*/true);  // stage ordering; no_adapter=1 for the ablation
    CorpusManifest videos = read_corpus_manifest(c.require("data"));
    man.dataset_hashes["videos"] = hash_hex(videos.corpus_hash);

    Rng rng(mix_seed(seed, "motion-init"));
    MotionConfig mc;
    mc.sites = motion_sites_for(p.ucfg);
    mc.variant = c.get_str("variant", "transformer");
    VD_CHECK_CONFIG(mc.variant == "transformer" || mc.variant == "conv",
                    "train-motion: variant must be 'transformer' or 'conv'");
    mc.use_pe = c.get_bool("use_pe", true);
    mc.max_frames = (int)c.get_int("max_frames", 16);
    p.mcfg = mc;
    p.motion = init_motion_params(mc, rng);

    LatentDataset dset = encode_corpus(videos, p.ae, p.vocab, "train");
    TrainOpts o;
    o.iterations = c.get_int("iters", 5000);
    o.batch = c.get_int("batch", 2);
    o.lr = c.get_real("lr", 1e-4);
    o.seed = mix_seed(seed, "motion");
    o.frames = c.get_int("frames", dset.f);
    VD_CHECK_CONFIG(o.frames == dset.f, "train-motion: frames=" + std::to_string(o.frames) +
                                            " but corpus clips have f=" + std::to_string(dset.f));
    auto rep = train_denoising_stage(p, TrainTarget::motion, dset, o, [](int64_t it, float l) {
        std::fprintf(stderr, "[vdiff] motion iter %lld loss %.5f\n", (long long)it, l);
    });

    json losses = json::array();
    for (float l : rep.losses) losses.push_back(l);
    man.metrics["losses"] = losses;
    man.metrics["first_loss"] = rep.mean_loss(0, 100);
    man.metrics["final_loss"] = rep.mean_loss(rep.losses.size() - 100, 100);
    man.metrics["frozen_hash"] = hash_hex(rep.frozen_hash_after);
    save_motion_ckpt(out + "/motion_module.ckpt", p);
    man.add_output("motion_module.ckpt", out + "/motion_module.ckpt");
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- train-motionlora (stage 3) ----

inline void cmd_train_motionlora(const KVConfig& c) {
    log_effective_config("train-motionlora", c);
    WallTimer timer;
    std::string out = c.require("out");
    uint64_t seed = (uint64_t)c.get_int("seed", 0);
    std::filesystem::create_directories(out);
    RunManifest man = start_manifest("train-motionlora", c);

    Pipeline p = load_base_pipeline(c);
    attach_adapter(p, c, /*required=*/true);
    load_motion_into(p, c.require("motion"));

    CorpusManifest refs = read_corpus_manifest(c.require("refs"));
    VD_CHECK_CONFIG(refs.n >= 1, "train-motionlora: reference set is empty");
    man.dataset_hashes["refs"] = hash_hex(refs.corpus_hash);

    Rng rng(mix_seed(seed, "mlora-init"));
    int64_t rank = c.get_int("rank", 2);
    LoraSet lora = init_lora_set("motion_lora", motion_attention_targets(*p.mcfg),
                                 motion_projection_dims(*p.mcfg), rank, 1.0f, rng);
    p.motion_loras.push_back({std::move(lora), 1.0f});

    LatentDataset dset = encode_corpus(refs, p.ae, p.vocab, "train");
    TrainOpts o;
    o.iterations = c.get_int("iters", 2000);
    o.batch = c.get_int("batch", 2);
    o.lr = c.get_real("lr", 1e-4);
    o.seed = mix_seed(seed, "mlora");
    o.frames = dset.f;
    auto rep = train_denoising_stage(p, TrainTarget::motion_lora, dset, o, [](int64_t it, float l) {
        std::fprintf(stderr, "[vdiff] motionlora iter %lld loss %.5f\n", (long long)it, l);
    });

    man.metrics["first_loss"] = rep.mean_loss(0, 100);
    man.metrics["final_loss"] = rep.mean_loss(rep.losses.size() - 100, 100);
    man.metrics["frozen_hash"] = hash_hex(rep.frozen_hash_after);
    json extra;
    extra["pattern"] = read_json_file(c.require("refs") + "/manifest.json").value("pattern", "");
    save_lora_ckpt(out + "/motion_lora.ckpt", p.motion_loras[0].first, "motion_lora", extra);
    man.add_output("motion_lora.ckpt", out + "/motion_lora.ckpt");
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- personalize ----

inline void cmd_personalize(const KVConfig& c) {
    log_effective_config("personalize", c);
    WallTimer timer;
    std::string out = c.require("out");
    std::string mode = c.get_str("mode", "lora");
    VD_CHECK_CONFIG(mode == "full" || mode == "lora", "personalize: mode must be 'full' or 'lora'");
    uint64_t seed = (uint64_t)c.get_int("seed", 0);
    std::filesystem::create_directories(out);
    RunManifest man = start_manifest("personalize", c);

    Pipeline p = load_base_pipeline(c);
    CorpusManifest style = read_corpus_manifest(c.require("style_set"));
    VD_CHECK_CONFIG(!style.entries.empty(), "personalize: style image set is empty");
    man.dataset_hashes["style_set"] = hash_hex(style.corpus_hash);

    LatentDataset dset = encode_corpus(style, p.ae, p.vocab, "train");
    TrainOpts o;
    o.iterations = c.get_int("iters", 1000);
    o.batch = c.get_int("batch", 16);
    o.seed = mix_seed(seed, "personalize");
    o.single_frames = true;

    StageReport rep;
    if (mode == "lora") {
        Rng rng(mix_seed(seed, "person-init"));
        p.person_lora = init_lora_set("personalization", unet_attention_targets(p.ucfg),
                                      unet_projection_dims(p.ucfg), c.get_int("rank", 4), 1.0f, rng);
        o.lr = c.get_real("lr", 2e-4);
        rep = train_denoising_stage(p, TrainTarget::person_lora, dset, o);
        json extra;
        extra["mode"] = "lora";
        extra["style"] = c.get_str("style", "");
        save_lora_ckpt(out + "/personalized.ckpt", *p.person_lora, "personalization", extra);
    } else {
        o.lr = c.get_real("lr", 5e-5);
        rep = train_denoising_stage(p, TrainTarget::unet_full, dset, o);
        json extra;
        extra["mode"] = "full";
        extra["style"] = c.get_str("style", "");
        save_base_t2i(out + "/personalized.ckpt", p, "personalization", extra);
    }
    man.metrics["first_loss"] = rep.mean_loss(0, 50);
    man.metrics["final_loss"] = rep.mean_loss(rep.losses.size() - 50, 50);
    man.add_output("personalized.ckpt", out + "/personalized.ckpt");
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- augment ----

inline void cmd_augment(const KVConfig& c) {
    log_effective_config("augment", c);
    WallTimer timer;
    std::string out = c.require("out");
    RunManifest man = start_manifest("augment", c);
    auto m = augment_corpus(c.require("source"), c.require("pattern"), c.get_int("frames", 8),
                            c.get_int("count", 50), (uint64_t)c.get_int("seed", 0), out);
    man.dataset_hashes["refs"] = hash_hex(m.corpus_hash);
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- animate ----

inline void cmd_animate(const KVConfig& c) {
    log_effective_config("animate", c);
    WallTimer timer;
    std::string out = c.require("out");
    std::filesystem::create_directories(out);
    RunManifest man = start_manifest("animate", c);

    Pipeline p = load_base_pipeline(c);
    attach_adapter(p, c, /*required=*/false);
    attach_person_lora(p, c);
    load_motion_into(p, c.require("motion_module"));
    attach_motion_loras(p, c);

    SampleOpts o;
    o.frames = c.get_int("frames", 8);
    o.steps = c.get_int("steps", 25);
    o.guidance = c.get_real("guidance", 1.0);
    o.seed = (uint64_t)c.get_int("seed", 0);
    o.noise = c.get_str("noise", "independent") == "shared" ? NoiseInit::shared_frames
                                                            : NoiseInit::independent;
    VD_CHECK_CONFIG(p.mcfg && o.frames <= p.mcfg->max_frames,
                    "animate: frames exceed the motion module's max_frames");
    std::string prompt = c.get_str("prompt", "");

    Tensor lat = sample_video_latents(p, prompt, o);
    std::vector<Tensor> frames = decode_video(p, lat);
    write_frames(out, frames);
    int fps = (int)c.get_int("fps", 10);
    export_gif(out + "/animation.gif", frames, fps);

    char name[32];
    for (size_t i = 0; i < frames.size(); i++) {
        std::snprintf(name, sizeof(name), "frame_%02zu.png", i);
        man.add_output(name, out + "/" + name);
    }
    man.add_output("animation.gif", out + "/animation.gif");
    man.wall_time_s = timer.seconds();
    write_json_file(out + "/run_manifest.json", man.to_json());
}

// ---- eval ----

inline std::vector<std::string> list_clip_dirs(const std::string& root) {
    std::vector<std::string> dirs;
    if (std::filesystem::exists(root + "/frame_00.png")) {
        dirs.push_back(root);
        return dirs;
    }
    for (auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && std::filesystem::exists(e.path() / "frame_00.png"))
            dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    VD_CHECK_CONFIG(!dirs.empty(), "eval: no clips under " + root);
    return dirs;
}

inline void cmd_eval(const KVConfig& c) {
    log_effective_config("eval", c);
    WallTimer timer;
    std::string out = c.require("out");
    uint64_t seed = (uint64_t)c.get_int("seed", 0);
    int64_t resamples = c.get_int("resamples", 1000);
    RunManifest man = start_manifest("eval", c);

    Autoencoder ae = load_autoencoder_ckpt(c.require("ae"));
    auto dirs = list_clip_dirs(c.require("clips"));
    std::vector<Tensor> refs;
    if (c.has("refs"))
        for (auto& d : list_clip_dirs(c.values.at("refs"))) {
            auto fr = read_frames(d);
            refs.insert(refs.end(), fr.begin(), fr.end());
        }

    json per_clip = json::array();
    std::vector<double> smooth, wmark, dxs, dys, divs, curls, dsim;
    for (auto& d : dirs) {
        auto frames = read_frames(d);
        json jc;
        jc["clip"] = d;
        jc["watermark"] = watermark_score_clip(frames);
        wmark.push_back(jc["watermark"]);
        if (frames.size() >= 2) {
            double s = smoothness_score(frames, ae);
            FlowStats fs = flow_motion_stats(frames);
            jc["smoothness"] = s;
            jc["mean_dx"] = fs.mean_dx;
            jc["mean_dy"] = fs.mean_dy;
            jc["divergence"] = fs.divergence;
            jc["curl"] = fs.curl;
            smooth.push_back(s);
            dxs.push_back(fs.mean_dx);
            dys.push_back(fs.mean_dy);
            divs.push_back(fs.divergence);
            curls.push_back(fs.curl);
        }
        if (!refs.empty()) {
            double ds = domain_similarity(frames, refs, ae);
            jc["domain_similarity"] = ds;
            dsim.push_back(ds);
        }
        per_clip.push_back(jc);
    }

    json report;
    report["clips"] = per_clip;
    auto agg = [&](const char* name, const std::vector<double>& v) {
        if (v.empty()) return;
        auto ci = bootstrap_ci(v, resamples, mix_seed(seed, name));
        report["aggregate"][name] = {{"mean", ci.mean}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi},
                                     {"n", v.size()}};
    };
    agg("smoothness", smooth);
    agg("watermark", wmark);
    agg("mean_dx", dxs);
    agg("mean_dy", dys);
    agg("divergence", divs);
    agg("curl", curls);
    agg("domain_similarity", dsim);
    write_json_file(out, report);
    man.add_output("report", out);
    man.wall_time_s = timer.seconds();
    std::string man_path = out + ".manifest.json";
    write_json_file(man_path, man.to_json());
}

}  // namespace vd

#endif
