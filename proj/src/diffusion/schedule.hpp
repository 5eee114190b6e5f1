#ifndef VDIFF_DIFFUSION_SCHEDULE_HPP
#define VDIFF_DIFFUSION_SCHEDULE_HPP

#include <functional>

#include "core/tensor.hpp"

namespace vd {

// Forward-diffusion schedule: per-step variances beta_t and the cumulative
// products alpha_bar_t = prod_{s<=t} (1 - beta_s), t = 0..T-1.
struct NoiseSchedule {
    int64_t T = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;
};

inline NoiseSchedule build_schedule(int64_t T, double beta_start, double beta_end) {
    VD_CHECK_CONFIG(T >= 2, "build_schedule: T must be >= 2");
    VD_CHECK_CONFIG(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                    "build_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (int64_t t = 0; t < T; t++) {
        s.beta[t] = beta_start + (beta_end - beta_start) * (double)t / (double)(T - 1);
        prod *= 1.0 - s.beta[t];
        s.alpha_bar[t] = prod;
    }
    return s;
}

// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps, elementwise; for
// video latents the same coefficients apply to every frame.
inline Tensor add_noise(const Tensor& z0, const Tensor& eps, int64_t t, const NoiseSchedule& s) {
    VD_CHECK_CONTRACT(z0.shape == eps.shape,
                      "add_noise: z0 and eps must be shape-identical, got " + shape_str(z0.shape) +
                          " vs " + shape_str(eps.shape));
    VD_CHECK_CONTRACT(t >= 0 && t < s.T, "add_noise: step index out of range");
    float a = (float)std::sqrt(s.alpha_bar[t]);
    float b = (float)std::sqrt(1.0 - s.alpha_bar[t]);
    Tensor out(z0.shape);
    for (int64_t i = 0; i < z0.numel(); i++) out[i] = a * z0[i] + b * eps[i];
    return out;
}

// Denoiser as seen by the sampler/loss: text conditioning is bound inside.
using DenoiseFn = std::function<Tensor(const Tensor& zt, int64_t t)>;

// the seeded draw shared by training and the loss below:
// t ~ Uniform{0..T-1} first, then eps ~ N(0,I) in data order
inline std::pair<int64_t, Tensor> sample_t_eps(uint64_t seed, const NoiseSchedule& s,
                                               const Shape& shape) {
    Rng rng(seed);
    int64_t t = rng.randint(s.T);
    Tensor eps = Tensor::randn(shape, rng);
    return {t, std::move(eps)};
}

// MSE between the drawn noise and the model prediction, averaged over all
// elements; deterministic given the seed.
inline double denoising_loss(const DenoiseFn& model, const Tensor& z0, uint64_t rng_seed,
                             const NoiseSchedule& sched) {
    auto [t, eps] = sample_t_eps(rng_seed, sched, z0.shape);
    Tensor zt = add_noise(z0, eps, t, sched);
    Tensor pred = model(zt, t);
    VD_CHECK_CONTRACT(pred.shape == z0.shape, "denoising_loss: prediction shape mismatch");
    if (!pred.all_finite())
        throw numeric_error("denoising_loss: non-finite model output at step t=" +
                            std::to_string(t));
    double sum = 0;
    for (int64_t i = 0; i < eps.numel(); i++) {
        double d = (double)eps[i] - (double)pred[i];
        sum += d * d;
    }
    return sum / eps.numel();
}

enum class NoiseInit {
    independent,    // i.i.d. gaussian over the whole latent
    shared_frames,  // one gaussian per (b,c,h,w) slice, repeated across frames
};

inline Tensor sample_initial_noise(const Shape& shape, uint64_t seed, NoiseInit mode) {
    Rng rng(seed);
    if (mode == NoiseInit::independent || shape.size() != 5) return Tensor::randn(shape, rng);
    int64_t b = shape[0], c = shape[1], f = shape[2], h = shape[3], w = shape[4];
    Tensor frame = Tensor::randn({b, c, 1, h, w}, rng);
    Tensor out(shape);
    for (int64_t j = 0; j < b * c; j++)
        for (int64_t k = 0; k < f; k++)
            std::memcpy(out.data() + (j * f + k) * h * w, frame.data() + j * h * w,
                        sizeof(float) * h * w);
    return out;
}

// Deterministic DDIM (eta = 0) from pure gaussian noise. guidance_scale g:
// eps_hat = eps_cond + g * (eps_cond - eps_uncond); g = 0 skips the
// unconditional pass entirely.
inline Tensor ddim_sample(const DenoiseFn& cond, const DenoiseFn& uncond, Shape shape,
                          int64_t steps, double guidance_scale, const NoiseSchedule& sched,
                          uint64_t seed, NoiseInit mode = NoiseInit::independent) {
    VD_CHECK_CONFIG(steps >= 1 && steps <= sched.T,
                    "ddim_sample: steps must be in [1, T], got " + std::to_string(steps));
    VD_CHECK_CONFIG(guidance_scale >= 0.0, "ddim_sample: guidance scale must be >= 0");
    Tensor z = sample_initial_noise(shape, seed, mode);

    std::vector<int64_t> ts(steps);
    for (int64_t k = 0; k < steps; k++)
        ts[k] = steps == 1 ? sched.T - 1
                           : (int64_t)std::llround((double)(sched.T - 1) *
                                                   (double)(steps - 1 - k) / (double)(steps - 1));
    for (int64_t k = 0; k < steps; k++) {
        int64_t t = ts[k];
        Tensor eps_hat = cond(z, t);
        VD_CHECK_CONTRACT(eps_hat.shape == z.shape, "ddim_sample: prediction shape mismatch");
        if (guidance_scale != 0.0) {
            Tensor eps_u = uncond(z, t);
            for (int64_t i = 0; i < eps_hat.numel(); i++)
                eps_hat[i] = eps_hat[i] + (float)guidance_scale * (eps_hat[i] - eps_u[i]);
        }
        if (!eps_hat.all_finite())
            throw numeric_error("ddim_sample: non-finite prediction at t=" + std::to_string(t));
        double ab_t = sched.alpha_bar[t];
        double ab_prev = (k + 1 < steps) ? sched.alpha_bar[ts[k + 1]] : 1.0;
        float c0 = (float)(std::sqrt(ab_prev) / std::sqrt(ab_t));
        float c1 = (float)(std::sqrt(1.0 - ab_prev) -
                           std::sqrt(ab_prev) * std::sqrt(1.0 - ab_t) / std::sqrt(ab_t));
        for (int64_t i = 0; i < z.numel(); i++) z[i] = c0 * z[i] + c1 * eps_hat[i];
    }
    return z;
}

}  // namespace vd

#endif
