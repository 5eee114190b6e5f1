#ifndef VDIFF_TRAIN_STAGES_HPP
#define VDIFF_TRAIN_STAGES_HPP

#include "data/datagen.hpp"
#include "pipeline/stack.hpp"
#include "train/optimizer.hpp"

namespace vd {

// corpus loaded to latent space once per stage; AE is frozen past stage 0
struct LatentDataset {
    std::vector<Tensor> latents;                // (lat, f, h/4, w/4) per clip, scaled
    std::vector<std::vector<int64_t>> tokens;   // tokenized caption per clip
    int64_t f = 1;
    uint64_t content_hash = 0;
};

inline LatentDataset encode_corpus(const CorpusManifest& m, const Autoencoder& ae,
                                   const Vocabulary& vocab, const std::string& split = "train") {
    LatentDataset d;
    d.f = m.f;
    d.content_hash = m.corpus_hash;
    for (auto& e : m.entries) {
        if (!split.empty() && e.split != split) continue;
        std::vector<Tensor> frames = read_frames(m.root + "/" + e.dir);
        int64_t f = (int64_t)frames.size();
        int64_t hh = frames[0].shape[1], ww = frames[0].shape[2];
        Tensor batch({f, 3, hh, ww});
        for (int64_t k = 0; k < f; k++)
            std::memcpy(batch.data() + k * frames[k].numel(), frames[k].data(),
                        sizeof(float) * frames[k].numel());
        Tensor lat = ae.encode_image(batch);  // (f, lat, h/4, w/4)
        Tensor clip({lat.shape[1], f, lat.shape[2], lat.shape[3]});
        // (f,c,h,w) -> (c,f,h,w)
        int64_t hw = lat.shape[2] * lat.shape[3], c = lat.shape[1];
        for (int64_t k = 0; k < f; k++)
            for (int64_t ci = 0; ci < c; ci++)
                std::memcpy(clip.data() + (ci * f + k) * hw, lat.data() + (k * c + ci) * hw,
                            sizeof(float) * hw);
        d.latents.push_back(std::move(clip));
        d.tokens.push_back(tokenize(vocab, e.caption));
    }
    VD_CHECK_CONFIG(!d.latents.empty(), "encode_corpus: no clips in split '" + split + "'");
    return d;
}

// deterministic shuffled index stream, reshuffled per epoch
struct BatchSampler {
    int64_t n, batch;
    uint64_t seed;
    int64_t epoch = 0;
    size_t pos = 0;
    std::vector<int64_t> perm;

    BatchSampler(int64_t n_, int64_t batch_, uint64_t seed_) : n(n_), batch(batch_), seed(seed_) {
        reshuffle();
    }
    void reshuffle() {
        perm.resize(n);
        for (int64_t i = 0; i < n; i++) perm[i] = i;
        Rng rng(mix_seed(seed, "epoch", (uint64_t)epoch));
        for (int64_t i = n; i > 1; i--) std::swap(perm[i - 1], perm[rng.randint(i)]);
        pos = 0;
    }
    std::vector<int64_t> next() {
        std::vector<int64_t> out;
        while ((int64_t)out.size() < batch) {
            if (pos >= perm.size()) {
                epoch++;
                reshuffle();
            }
            out.push_back(perm[pos++]);
        }
        return out;
    }
};

struct TrainOpts {
    int64_t iterations = 1000;
    int64_t batch = 8;
    double lr = 1e-4;
    double weight_decay = 0.01;
    uint64_t seed = 0;
    double text_dropout = 0.1;   // classifier-free guidance dropout
    int64_t frames = 1;          // frames per sample fed to the denoiser
    bool single_frames = false;  // sample one random frame per clip (adapter stage)
    int64_t log_every = 50;
};

struct StageReport {
    std::vector<float> losses;  // one per iteration
    double wall_s = 0;
    uint64_t frozen_hash_before = 0, frozen_hash_after = 0;

    double mean_loss(size_t from, size_t count) const {
        double acc = 0;
        size_t end = std::min(from + count, losses.size());
        VD_CHECK_CONTRACT(end > from, "mean_loss: empty window");
        for (size_t i = from; i < end; i++) acc += losses[i];
        return acc / (double)(end - from);
    }
};

// hash of everything the stage must not touch
inline uint64_t frozen_hash(const Pipeline& p, TrainTarget target) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](uint64_t v) { h = fnv1a64(&v, sizeof(v), h); };
    if (target != TrainTarget::unet_full) mix(p.unet.group_hash());
    if (target != TrainTarget::autoencoder) mix(p.ae.params.group_hash());
    if (p.adapter && target != TrainTarget::adapter) mix(p.adapter->params.group_hash());
    if (p.person_lora && target != TrainTarget::person_lora) mix(p.person_lora->params.group_hash());
    if (p.mcfg && target != TrainTarget::motion) mix(p.motion.group_hash());
    if (target != TrainTarget::motion_lora)
        for (auto& [set, w] : p.motion_loras) mix(set.params.group_hash());
    return h;
}

// One denoising-objective training stage over a latent dataset, updating a
// single component. Freezing is verified by hashing everything else.
inline StageReport train_denoising_stage(Pipeline& p, TrainTarget target, const LatentDataset& data,
                                         const TrainOpts& o,
                                         const std::function<void(int64_t, float)>& on_iter = {}) {
    VD_CHECK_CONFIG(target != TrainTarget::none && target != TrainTarget::autoencoder,
                    "train_denoising_stage: bad target");
    WallTimer timer;
    StageReport rep;
    rep.frozen_hash_before = frozen_hash(p, target);

    AdamW opt;
    opt.lr = o.lr;
    opt.weight_decay = o.weight_decay;
    BatchSampler sampler((int64_t)data.latents.size(), o.batch, mix_seed(o.seed, "batch"));
    auto empty_tokens = std::vector<int64_t>((size_t)kTextLen, 0);  // <pad> row

    int64_t lat_h = data.latents[0].shape[2], lat_w = data.latents[0].shape[3];
    int64_t lat_c = data.latents[0].shape[0];

    for (int64_t it = 0; it < o.iterations; it++) {
        auto idx = sampler.next();
        Rng rng(mix_seed(o.seed, "iter", (uint64_t)it));

        // batch z0 (b, c, f, h, w) + per-item prompts
        int64_t f = o.single_frames ? 1 : o.frames;
        Tensor z0({o.batch, lat_c, f, lat_h, lat_w});
        std::vector<std::vector<int64_t>> tokens;
        for (int64_t bi = 0; bi < o.batch; bi++) {
            const Tensor& clip = data.latents[idx[bi]];
            int64_t src_f = clip.shape[1];
            int64_t k0 = o.single_frames ? rng.randint(src_f) : 0;
            VD_CHECK_CONFIG(o.single_frames || src_f == f,
                            "train stage: clip has " + std::to_string(src_f) +
                                " frames, config wants " + std::to_string(f));
            int64_t hw = lat_h * lat_w;
            for (int64_t ci = 0; ci < lat_c; ci++)
                for (int64_t k = 0; k < f; k++)
                    std::memcpy(z0.data() + (((bi * lat_c + ci) * f) + k) * hw,
                                clip.data() + (ci * src_f + (o.single_frames ? k0 : k)) * hw,
                                sizeof(float) * hw);
            bool drop = rng.uniform() < o.text_dropout;
            tokens.push_back(drop ? empty_tokens : data.tokens[idx[bi]]);
        }

        int64_t t = rng.randint(p.sched.T);
        Tensor eps = Tensor::randn(z0.shape, rng);
        Tensor zt = add_noise(z0, eps, t, p.sched);

        ForwardCtx ctx;
        denoiser_forward(ctx, p, zt, t, tokens, target);
        auto [eps_m, tok] = merge_frames_into_batch(eps);
        Var* loss = ctx.g.mse(ctx.pred, ctx.g.constant(std::move(eps_m)));
        float lv = loss->value[0];
        if (!std::isfinite(lv))
            throw numeric_error("training: non-finite loss at iteration " + std::to_string(it));
        ctx.g.backward(loss);
        VD_CHECK_CONTRACT(ctx.trainable_pv, "training: no trainable component wired");
        opt.step(*ctx.trainable_pv->dict, collect_grads(*ctx.trainable_pv));
        rep.losses.push_back(lv);
        if (on_iter && (it % o.log_every == 0 || it + 1 == o.iterations)) on_iter(it, lv);
    }
    rep.frozen_hash_after = frozen_hash(p, target);
    VD_CHECK_CONTRACT(rep.frozen_hash_before == rep.frozen_hash_after,
                      "training: frozen parameters changed during stage");
    rep.wall_s = timer.seconds();
    return rep;
}

// ---- stage 0: autoencoder pretraining (plain reconstruction) ----

inline StageReport train_autoencoder(Autoencoder& ae, const std::vector<Tensor>& images,
                                     const TrainOpts& o,
                                     const std::function<void(int64_t, float)>& on_iter = {}) {
    VD_CHECK_CONFIG(!images.empty(), "train_autoencoder: empty image set");
    WallTimer timer;
    StageReport rep;
    AdamW opt;
    opt.lr = o.lr;
    opt.weight_decay = o.weight_decay;
    BatchSampler sampler((int64_t)images.size(), o.batch, mix_seed(o.seed, "ae-batch"));
    auto trainable = [](const std::string& n) {
        return n.rfind("ae.", 0) == 0 && n != "ae.embed.proj";
    };
    int64_t hh = images[0].shape[1], ww = images[0].shape[2];
    for (int64_t it = 0; it < o.iterations; it++) {
        auto idx = sampler.next();
        Tensor x({o.batch, 3, hh, ww});
        for (int64_t bi = 0; bi < o.batch; bi++)
            std::memcpy(x.data() + bi * images[idx[bi]].numel(), images[idx[bi]].data(),
                        sizeof(float) * images[idx[bi]].numel());
        Graph g;
        ParamVars pv(g, ae.params, trainable);
        Var* xin = g.leaf(x);
        Var* z = ae_encode(g, ae.cfg, pv, xin);
        Var* rec = ae_decode(g, ae.cfg, pv, z);
        Var* loss = g.mse(rec, xin);
        float lv = loss->value[0];
        if (!std::isfinite(lv))
            throw numeric_error("ae training: non-finite loss at iteration " + std::to_string(it));
        g.backward(loss);
        opt.step(ae.params, collect_grads(pv));
        rep.losses.push_back(lv);
        if (on_iter && (it % o.log_every == 0 || it + 1 == o.iterations)) on_iter(it, lv);
    }
    rep.wall_s = timer.seconds();
    return rep;
}

// latent std over a sample of images; sets ae.latent_scale so diffusion sees
// roughly unit variance
inline void calibrate_latent_scale(Autoencoder& ae, const std::vector<Tensor>& images,
                                   int64_t max_images = 256) {
    ae.latent_scale = 1.0f;
    double acc = 0, acc2 = 0;
    int64_t count = 0;
    for (int64_t i = 0; i < std::min<int64_t>((int64_t)images.size(), max_images); i++) {
        const Tensor& img = images[i];
        Tensor z = ae.encode_image(img.view({1, img.shape[0], img.shape[1], img.shape[2]}));
        for (int64_t j = 0; j < z.numel(); j++) {
            acc += z[j];
            acc2 += (double)z[j] * z[j];
            count++;
        }
    }
    double mean = acc / count;
    double var = acc2 / count - mean * mean;
    VD_CHECK_CONTRACT(var > 1e-12, "calibrate_latent_scale: degenerate latents");
    ae.latent_scale = (float)(1.0 / std::sqrt(var));
}

inline double psnr(const Tensor& a, const Tensor& b) {
    double mse = 0;
    for (int64_t i = 0; i < a.numel(); i++) {
        double d = (double)a[i] - b[i];
        mse += d * d;
    }
    mse /= a.numel();
    return mse <= 0 ? 99.0 : 10.0 * std::log10(1.0 / mse);
}

}  // namespace vd

#endif
