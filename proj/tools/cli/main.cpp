// vdiff command-line tool. Thin shell over the C API in vdiff.h: every
// subcommand builds an option set (defaults < --config file < flags) and
// dispatches to the matching vd_cmd_* entry point.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vdiff.h"

namespace {

struct OptsHandle {
    vd_opts* o;
    OptsHandle() : o(vd_opts_new()) {}
    ~OptsHandle() { vd_opts_free(o); }
};

int exit_code_for(vd_status s) {
    switch (s) {
        case VD_STATUS_OK: return 0;
        case VD_STATUS_INVALID_ARG:
        case VD_STATUS_IO_ERROR: return 1;  // user error
        default: return 2;                  // internal error
    }
}

int finish(vd_status s) {
    if (s != VD_STATUS_OK)
        std::fprintf(stderr, "error (%s): %s\n", vd_status_name(s), vd_last_error());
    return exit_code_for(s);
}

// common plumbing: a subcommand with a config file, a seed and typed options
struct SubCmd {
    CLI::App* app;
    std::shared_ptr<OptsHandle> opts = std::make_shared<OptsHandle>();
    std::shared_ptr<std::string> config_path = std::make_shared<std::string>();
    // flag setters applied after the config file so flags take precedence
    std::shared_ptr<std::vector<std::function<void(vd_opts*)>>> setters =
        std::make_shared<std::vector<std::function<void(vd_opts*)>>>();

    SubCmd(CLI::App& parent, const std::string& name, const std::string& desc) {
        app = parent.add_subcommand(name, desc);
        app->add_option("--config", *config_path, "key=value config file");
    }

    void add(const std::string& flag, const std::string& key, const std::string& desc,
             bool required = false) {
        auto val = std::make_shared<std::string>();
        CLI::Option* opt = app->add_option(flag, *val, desc);
        if (required) opt->required();
        auto setters_ = setters;
        app->callback([]() {});  // ensure callbacks allowed
        setters->push_back([val, key, opt](vd_opts* o) {
            if (opt->count() > 0) vd_opts_set(o, key.c_str(), val->c_str());
        });
    }

    void add_flag(const std::string& flag, const std::string& key, const std::string& desc) {
        auto val = std::make_shared<bool>(false);
        CLI::Option* opt = app->add_flag(flag, *val, desc);
        setters->push_back([val, key, opt](vd_opts* o) {
            if (opt->count() > 0) vd_opts_set(o, key.c_str(), *val ? "1" : "0");
        });
    }

    vd_status build(int argc, char** argv) {
        if (!config_path->empty()) {
            vd_status s = vd_opts_load_file(opts->o, config_path->c_str());
            if (s != VD_STATUS_OK) return s;
        }
        for (auto& fn : *setters) fn(opts->o);
        nlohmann::json j = nlohmann::json::array();
        for (int i = 0; i < argc; i++) j.push_back(argv[i]);
        vd_opts_set(opts->o, "argv_json", j.dump().c_str());
        return VD_STATUS_OK;
    }
};

int run_inspect(const std::string& path, bool as_json) {
    // checkpoints have a binary magic; anything else is treated as JSON
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
        std::fprintf(stderr, "error (io-error): cannot open %s\n", path.c_str());
        return 1;
    }
    char magic[8] = {0};
    probe.read(magic, 8);
    if (std::string(magic, 6) == "VDCKPT") {
        vd_checkpoint* ck = nullptr;
        vd_status s = vd_checkpoint_open(path.c_str(), &ck);
        if (s != VD_STATUS_OK) return finish(s);
        if (as_json) {
            std::printf("%s\n", vd_checkpoint_header_json(ck));
        } else {
            std::printf("checkpoint %s\n", path.c_str());
            std::printf("  kind: %s\n", vd_checkpoint_kind(ck));
            int64_t n = vd_checkpoint_tensor_count(ck);
            std::printf("  tensors: %lld\n", (long long)n);
            for (int64_t i = 0; i < n; i++) {
                int64_t dims[8];
                int nd = 0;
                vd_checkpoint_tensor_dims(ck, i, dims, &nd);
                std::string ds;
                for (int d = 0; d < nd; d++) ds += (d ? "x" : "") + std::to_string(dims[d]);
                std::printf("    %-56s %s\n", vd_checkpoint_tensor_name(ck, i), ds.c_str());
            }
        }
        vd_checkpoint_close(ck);
        return 0;
    }
    // JSON artifact (run manifest, corpus manifest, eval report)
    std::ifstream is(path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error (invalid-argument): %s is neither a checkpoint nor JSON (%s)\n",
                     path.c_str(), e.what());
        return 1;
    }
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("vdiff ") + vd_version() +
                 " — tiny latent video-diffusion pipeline with a plug-in temporal motion module"};
    app.require_subcommand(1);

    SubCmd datagen(app, "datagen", "Generate the synthetic corpora (videos, stills, style sets)");
    datagen.add("--out", "out", "output root directory", true);
    datagen.add("--videos", "videos", "number of video clips (default 700)");
    datagen.add("--frames", "frames", "frames per clip (default 8)");
    datagen.add("--images", "images", "number of clean still images (default 500)");
    datagen.add("--style-n", "style_n", "images per style set (default 30)");
    datagen.add("--watermark", "watermark", "watermark strength in [0,1] (default 0.6)");
    datagen.add("--styles", "styles", "also emit style sets (default 1)");
    datagen.add("--seed", "seed", "master seed");

    SubCmd pretrain(app, "pretrain", "Stage 0: train the autoencoder and the base T2I");
    pretrain.add("--data", "data", "datagen output root", true);
    pretrain.add("--out", "out", "output directory", true);
    pretrain.add("--ae-iters", "ae_iters", "autoencoder iterations (default 1000)");
    pretrain.add("--t2i-iters", "t2i_iters", "denoiser iterations (default 2000)");
    pretrain.add("--batch", "batch", "batch size (default 16)");
    pretrain.add("--ae-lr", "ae_lr", "autoencoder learning rate");
    pretrain.add("--t2i-lr", "t2i_lr", "denoiser learning rate");
    pretrain.add("--seed", "seed", "master seed");

    SubCmd tadapter(app, "train-adapter", "Stage 1: domain adapter on static video frames");
    tadapter.add("--data", "data", "video corpus directory", true);
    tadapter.add("--base", "base", "base T2I checkpoint", true);
    tadapter.add("--ae", "ae", "autoencoder checkpoint", true);
    tadapter.add("--out", "out", "output directory", true);
    tadapter.add("--iters", "iters", "iterations (default 2000)");
    tadapter.add("--batch", "batch", "batch size (default 16)");
    tadapter.add("--lr", "lr", "learning rate (default 5e-5)");
    tadapter.add("--rank", "rank", "LoRA rank (default 4)");
    tadapter.add("--seed", "seed", "master seed");

    SubCmd tmotion(app, "train-motion", "Stage 2: temporal motion module on videos");
    tmotion.add("--data", "data", "video corpus directory", true);
    tmotion.add("--base", "base", "base T2I checkpoint", true);
    tmotion.add("--ae", "ae", "autoencoder checkpoint", true);
    tmotion.add("--adapter", "adapter", "domain adapter checkpoint");
    tmotion.add_flag("--no-adapter", "no_adapter", "train without a domain adapter (ablation)");
    tmotion.add("--out", "out", "output directory", true);
    tmotion.add("--iters", "iters", "iterations (default 5000)");
    tmotion.add("--batch", "batch", "videos per batch (default 2)");
    tmotion.add("--lr", "lr", "learning rate (default 1e-4)");
    tmotion.add("--frames", "frames", "frames per clip (must match corpus)");
    tmotion.add("--variant", "variant", "temporal block: transformer|conv");
    tmotion.add("--use-pe", "use_pe", "frame position encoding on/off (default 1)");
    tmotion.add("--seed", "seed", "master seed");

    SubCmd tmlora(app, "train-motionlora", "Stage 3: MotionLoRA on reference clips");
    tmlora.add("--refs", "refs", "reference clip directory (augment output)", true);
    tmlora.add("--base", "base", "base T2I checkpoint", true);
    tmlora.add("--ae", "ae", "autoencoder checkpoint", true);
    tmlora.add("--adapter", "adapter", "domain adapter checkpoint");
    tmlora.add_flag("--no-adapter", "no_adapter", "train without a domain adapter");
    tmlora.add("--motion", "motion", "motion module checkpoint", true);
    tmlora.add("--out", "out", "output directory", true);
    tmlora.add("--iters", "iters", "iterations (default 2000)");
    tmlora.add("--batch", "batch", "videos per batch (default 2)");
    tmlora.add("--lr", "lr", "learning rate (default 1e-4)");
    tmlora.add("--rank", "rank", "LoRA rank (default 2)");
    tmlora.add("--seed", "seed", "master seed");

    SubCmd person(app, "personalize", "Fine-tune the base T2I to a style set (full or LoRA)");
    person.add("--style-set", "style_set", "style image set directory", true);
    person.add("--base", "base", "base T2I checkpoint", true);
    person.add("--ae", "ae", "autoencoder checkpoint", true);
    person.add("--out", "out", "output directory", true);
    person.add("--mode", "mode", "full | lora (default lora)");
    person.add("--style", "style", "style tag recorded in the checkpoint");
    person.add("--iters", "iters", "iterations (default 1000)");
    person.add("--lr", "lr", "learning rate");
    person.add("--seed", "seed", "master seed");

    SubCmd augment(app, "augment", "Camera-motion reference clips from held-out videos");
    augment.add("--source", "source", "video corpus directory", true);
    augment.add("--pattern", "pattern",
                "zoom_in|zoom_out|pan_left|pan_right|pan_up|pan_down|roll_cw|roll_ccw", true);
    augment.add("--frames", "frames", "frames per clip (default 8)");
    augment.add("--count", "count", "number of reference clips (default 50)");
    augment.add("--seed", "seed", "master seed");
    augment.add("--out", "out", "output directory", true);

    SubCmd animate(app, "animate", "Sample an animation from an assembled generator");
    animate.add("--model", "model", "base T2I or full-personalization checkpoint", true);
    animate.add("--ae", "ae", "autoencoder checkpoint", true);
    animate.add("--motion-module", "motion_module", "motion module checkpoint", true);
    animate.add("--adapter", "adapter", "domain adapter checkpoint");
    animate.add("--adapter-alpha", "adapter_alpha", "adapter scaler (default: stored alpha)");
    animate.add("--person-lora", "person_lora", "LoRA-mode personalization checkpoint");
    animate.add("--motion-lora", "motion_loras",
                "motion LoRA checkpoints, 'path[:weight]' comma separated");
    animate.add("--prompt", "prompt", "text prompt");
    animate.add("--frames", "frames", "frames to generate (default 8)");
    animate.add("--steps", "steps", "DDIM steps (default 25)");
    animate.add("--guidance", "guidance", "guidance scale, 0 disables (default 1.0)");
    animate.add("--noise", "noise", "initial noise: independent|shared (default independent)");
    animate.add("--fps", "fps", "GIF framerate (default 10)");
    animate.add("--seed", "seed", "sampling seed");
    animate.add("--out", "out", "output directory", true);

    SubCmd evalc(app, "eval", "Score clips: smoothness, watermark, flow, domain similarity");
    evalc.add("--clips", "clips", "directory of clip dirs (frame_XX.png)", true);
    evalc.add("--ae", "ae", "autoencoder checkpoint (metric embedder)", true);
    evalc.add("--refs", "refs", "reference image directory for domain similarity");
    evalc.add("--resamples", "resamples", "bootstrap resamples (default 1000)");
    evalc.add("--seed", "seed", "bootstrap seed");
    evalc.add("--out", "out", "report JSON path", true);

    auto* inspect = app.add_subcommand("inspect", "Describe a checkpoint or JSON artifact");
    std::string inspect_path;
    bool inspect_json = false;
    inspect->add_option("path", inspect_path, "checkpoint / manifest / report")->required();
    inspect->add_flag("--json", inspect_json, "dump raw JSON header");

    CLI11_PARSE(app, argc, argv);

    auto dispatch = [&](SubCmd& sc, vd_status (*fn)(const vd_opts*)) -> int {
        vd_status s = sc.build(argc, argv);
        if (s != VD_STATUS_OK) return finish(s);
        return finish(fn(sc.opts->o));
    };

    if (datagen.app->parsed()) return dispatch(datagen, vd_cmd_datagen);
    if (pretrain.app->parsed()) return dispatch(pretrain, vd_cmd_pretrain);
    if (tadapter.app->parsed()) return dispatch(tadapter, vd_cmd_train_adapter);
    if (tmotion.app->parsed()) return dispatch(tmotion, vd_cmd_train_motion);
    if (tmlora.app->parsed()) return dispatch(tmlora, vd_cmd_train_motionlora);
    if (person.app->parsed()) return dispatch(person, vd_cmd_personalize);
    if (augment.app->parsed()) return dispatch(augment, vd_cmd_augment);
    if (animate.app->parsed()) return dispatch(animate, vd_cmd_animate);
    if (evalc.app->parsed()) return dispatch(evalc, vd_cmd_eval);
    if (inspect->parsed()) return run_inspect(inspect_path, inspect_json);
    return 1;
}
