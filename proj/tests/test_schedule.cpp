#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffusion/schedule.hpp"

using namespace vd;

TEST_CASE("build_schedule: T=2 closed form") {
    auto s = build_schedule(2, 0.5, 0.5);
    CHECK(s.beta[0] == doctest::Approx(0.5));
    CHECK(s.beta[1] == doctest::Approx(0.5));
    CHECK(s.alpha_bar[0] == doctest::Approx(0.5));
    CHECK(s.alpha_bar[1] == doctest::Approx(0.25));
}

TEST_CASE("build_schedule: monotone and in range") {
    auto s = build_schedule(100, 1e-4, 0.02);
    for (int t = 0; t < 100; t++) {
        CHECK(s.beta[t] > 0.0);
        CHECK(s.beta[t] < 1.0);
        if (t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
    }
    CHECK(s.alpha_bar[99] > 0.0);
    CHECK(s.alpha_bar[99] < 1.0);
    CHECK(s.alpha_bar[0] > s.alpha_bar[99]);
}

TEST_CASE("build_schedule: T=1000 against an independent product loop") {
    auto s = build_schedule(1000, 1e-4, 0.02);
    // oracle: separate accumulation of the same definition
    long double prod = 1.0L;
    for (int t = 0; t < 1000; t++) {
        long double beta = 1e-4L + (0.02L - 1e-4L) * (long double)t / 999.0L;
        prod *= (1.0L - beta);
        CHECK(std::abs((double)(s.alpha_bar[t] - (double)prod)) <=
              1e-12 * std::abs((double)prod) + 1e-300);
    }
    CHECK(s.alpha_bar[999] == doctest::Approx((double)prod).epsilon(1e-12));
}

TEST_CASE("build_schedule: rejects bad ranges") {
    CHECK_THROWS_AS(build_schedule(1, 0.1, 0.2), config_error);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2), config_error);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2), config_error);
    CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), config_error);
}

TEST_CASE("add_noise: zero-noise limit returns z0") {
    auto s = build_schedule(2, 1e-12, 1e-12);
    Rng rng(3);
    Tensor z0 = Tensor::randn({1, 2, 1, 3, 3}, rng);
    Tensor eps = Tensor::randn({1, 2, 1, 3, 3}, rng);
    Tensor zt = add_noise(z0, eps, 0, s);
    CHECK(max_abs_diff(zt, z0) < 1e-5);
}

TEST_CASE("add_noise: closed form at alpha_bar = 0.25") {
    // schedule with alpha_bar[1] = 0.25: beta = 0.5 twice
    auto s = build_schedule(2, 0.5, 0.5);
    Tensor z0 = Tensor::full({1, 1, 1, 2, 2}, 1.0f);
    Tensor eps = Tensor::full({1, 1, 1, 2, 2}, 1.0f);
    Tensor zt = add_noise(z0, eps, 1, s);
    for (int64_t i = 0; i < zt.numel(); i++)
        CHECK(zt[i] == doctest::Approx(0.5 + std::sqrt(0.75)).epsilon(1e-6));
}

TEST_CASE("add_noise: scalar-loop oracle on random input") {
    auto s = build_schedule(50, 1e-3, 0.04);
    Rng rng(17);
    Tensor z0 = Tensor::randn({2, 3, 4, 5, 5}, rng);
    Tensor eps = Tensor::randn({2, 3, 4, 5, 5}, rng);
    int64_t t = 23;
    Tensor zt = add_noise(z0, eps, t, s);
    double a = std::sqrt(s.alpha_bar[t]), b = std::sqrt(1.0 - s.alpha_bar[t]);
    for (int64_t i = 0; i < z0.numel(); i++) {
        double expect = a * (double)z0[i] + b * (double)eps[i];
        CHECK(std::abs(zt[i] - expect) < 1e-6);
    }
}

TEST_CASE("add_noise: frame-wise equivariance is exact") {
    auto s = build_schedule(50, 1e-3, 0.04);
    Rng rng(29);
    Tensor z0 = Tensor::randn({2, 3, 4, 4, 4}, rng);
    Tensor eps = Tensor::randn({2, 3, 4, 4, 4}, rng);
    Tensor whole = add_noise(z0, eps, 31, s);
    // per-frame slices processed independently must agree bitwise
    int64_t hw = 16;
    for (int64_t bi = 0; bi < 2; bi++)
        for (int64_t k = 0; k < 4; k++) {
            Tensor fz({1, 3, 1, 4, 4}), fe({1, 3, 1, 4, 4});
            for (int64_t c = 0; c < 3; c++) {
                std::memcpy(fz.data() + c * hw, z0.data() + ((bi * 3 + c) * 4 + k) * hw,
                            sizeof(float) * hw);
                std::memcpy(fe.data() + c * hw, eps.data() + ((bi * 3 + c) * 4 + k) * hw,
                            sizeof(float) * hw);
            }
            Tensor fr = add_noise(fz, fe, 31, s);
            for (int64_t c = 0; c < 3; c++)
                for (int64_t i = 0; i < hw; i++)
                    CHECK(fr[c * hw + i] == whole[((bi * 3 + c) * 4 + k) * hw + i]);
        }
    CHECK_THROWS_AS(add_noise(z0, Tensor::zeros({1, 1, 1, 2, 2}), 3, s), contract_error);
    CHECK_THROWS_AS(add_noise(z0, eps, 50, s), contract_error);
}

TEST_CASE("noise statistics match analytic mean and variance") {
    auto s = build_schedule(100, 1e-4, 0.02);
    Rng rng(101);
    Tensor z0 = Tensor::randn({1, 4, 2, 40, 40}, rng);  // 12800 elements
    for (int64_t t : {5, 50, 99}) {
        Tensor eps = Tensor::randn(z0.shape, rng);
        Tensor zt = add_noise(z0, eps, t, s);
        double a = std::sqrt(s.alpha_bar[t]);
        double want_var = 1.0 - s.alpha_bar[t];
        double acc = 0, acc2 = 0;
        for (int64_t i = 0; i < zt.numel(); i++) {
            double d = zt[i] - a * z0[i];
            acc += d;
            acc2 += d * d;
        }
        double n = (double)zt.numel();
        double mean = acc / n;
        double var = acc2 / n - mean * mean;
        // mean of n samples with variance want_var: sigma = sqrt(want_var/n)
        CHECK(std::abs(mean) < 3.0 * std::sqrt(want_var / n));
        CHECK(std::abs(var - want_var) < 0.05 * want_var);
    }
}

TEST_CASE("denoising_loss: perfect predictor and zero predictor") {
    auto s = build_schedule(100, 1e-4, 0.02);
    Shape shape = {1, 4, 2, 8, 8};
    uint64_t seed = 77;
    // the model that returns the exact sampled eps: loss 0
    auto [t_expected, eps_expected] = sample_t_eps(seed, s, shape);
    DenoiseFn perfect = [&](const Tensor&, int64_t) { return eps_expected; };
    CHECK(denoising_loss(perfect, Tensor::zeros(shape), seed, s) == doctest::Approx(0.0));

    // all-zeros model: loss = mean(eps^2) ~ 1 over many elements
    DenoiseFn zero = [&](const Tensor& zt, int64_t) { return Tensor::zeros(zt.shape); };
    Shape big = {1, 4, 4, 32, 32};  // 16384 elements
    double l = denoising_loss(zero, Tensor::zeros(big), 123, s);
    CHECK(std::abs(l - 1.0) < 0.05);
}

TEST_CASE("denoising_loss: scalar oracle on tiny case") {
    auto s = build_schedule(10, 0.01, 0.2);
    Shape shape = {1, 1, 1, 2, 2};
    uint64_t seed = 5;
    Rng rng(41);
    Tensor z0 = Tensor::randn(shape, rng);
    // model: returns 0.5 * zt
    DenoiseFn half = [](const Tensor& zt, int64_t) {
        Tensor out = zt.clone();
        for (int64_t i = 0; i < out.numel(); i++) out[i] *= 0.5f;
        return out;
    };
    double got = denoising_loss(half, z0, seed, s);
    // oracle: replicate the documented seeding procedure with plain scalars
    Rng orng(seed);
    int64_t t = orng.randint(10);
    double a = std::sqrt(s.alpha_bar[t]), b = std::sqrt(1 - s.alpha_bar[t]);
    double acc = 0;
    std::vector<double> eps(4);
    for (int i = 0; i < 4; i++) eps[i] = orng.normal();
    for (int i = 0; i < 4; i++) {
        double zt = a * z0[i] + b * eps[i];
        double d = eps[i] - 0.5 * zt;
        acc += d * d;
    }
    CHECK(got == doctest::Approx(acc / 4).epsilon(1e-5));
}

TEST_CASE("denoising_loss: non-finite output raises numeric error with step") {
    auto s = build_schedule(10, 0.01, 0.2);
    DenoiseFn bad = [](const Tensor& zt, int64_t) {
        return Tensor::full(zt.shape, std::numeric_limits<float>::quiet_NaN());
    };
    try {
        denoising_loss(bad, Tensor::zeros({1, 1, 1, 2, 2}), 3, s);
        FAIL("expected numeric_error");
    } catch (const numeric_error& e) {
        CHECK(std::string(e.what()).find("t=") != std::string::npos);
    }
}

TEST_CASE("ddim: one-step inversion identity recovers z0") {
    auto s = build_schedule(100, 1e-4, 0.02);
    Rng rng(303);
    Shape shape = {1, 2, 1, 4, 4};
    Tensor z0 = Tensor::randn(shape, rng);
    uint64_t seed = 99;
    // construct z_T from z0 using the exact noise ddim_sample will draw
    Tensor zT = sample_initial_noise(shape, seed, NoiseInit::independent);
    int64_t T1 = s.T - 1;
    double a = std::sqrt(s.alpha_bar[T1]), b = std::sqrt(1 - s.alpha_bar[T1]);
    // eps such that zT = a z0 + b eps
    Tensor eps(shape);
    for (int64_t i = 0; i < eps.numel(); i++) eps[i] = (float)((zT[i] - a * z0[i]) / b);
    DenoiseFn model = [&](const Tensor&, int64_t) { return eps; };
    Tensor out = ddim_sample(model, model, shape, 1, 0.0, s, seed);
    CHECK(max_abs_diff(out, z0) < 1e-5);
}

TEST_CASE("ddim: guidance degenerate cases agree") {
    auto s = build_schedule(100, 1e-4, 0.02);
    Shape shape = {1, 2, 1, 4, 4};
    DenoiseFn model = [](const Tensor& zt, int64_t t) {
        Tensor out = zt.clone();
        for (int64_t i = 0; i < out.numel(); i++) out[i] = 0.3f * out[i] + 0.01f * (float)t;
        return out;
    };
    Tensor a = ddim_sample(model, model, shape, 10, 0.0, s, 5);
    Tensor b = ddim_sample(model, model, shape, 10, 2.5, s, 5);
    CHECK(max_abs_diff(a, b) < 1e-6);
}

TEST_CASE("ddim: two-step hand-computed oracle on a scalar latent") {
    auto s = build_schedule(4, 0.1, 0.4);
    Shape shape = {1, 1, 1, 1, 1};
    // linear toy model eps_hat = c * z
    const double c = 0.7;
    DenoiseFn model = [&](const Tensor& zt, int64_t) {
        Tensor out = zt.clone();
        out[0] = (float)(c * out[0]);
        return out;
    };
    uint64_t seed = 31;
    Tensor out = ddim_sample(model, model, shape, 2, 0.0, s, seed);
    // oracle: replicate the two updates by hand; steps visit t=3 then t=0
    double z = sample_initial_noise(shape, seed, NoiseInit::independent)[0];
    auto step = [&](double zt, double ab_t, double ab_prev) {
        double eps = c * zt;
        double x0 = (zt - std::sqrt(1 - ab_t) * eps) / std::sqrt(ab_t);
        return std::sqrt(ab_prev) * x0 + std::sqrt(1 - ab_prev) * eps;
    };
    z = step(z, s.alpha_bar[3], s.alpha_bar[0]);
    z = step(z, s.alpha_bar[0], 1.0);
    CHECK(out[0] == doctest::Approx(z).epsilon(1e-5));
}

TEST_CASE("ddim: determinism and config errors") {
    auto s = build_schedule(20, 1e-3, 0.05);
    Shape shape = {1, 2, 2, 4, 4};
    DenoiseFn model = [](const Tensor& zt, int64_t) {
        Tensor out = zt.clone();
        for (int64_t i = 0; i < out.numel(); i++) out[i] *= 0.5f;
        return out;
    };
    Tensor a = ddim_sample(model, model, shape, 10, 0.0, s, 7);
    Tensor b = ddim_sample(model, model, shape, 10, 0.0, s, 7);
    CHECK(a.byte_hash() == b.byte_hash());  // bit-identical
    CHECK_THROWS_AS(ddim_sample(model, model, shape, 21, 0.0, s, 7), config_error);
    CHECK_THROWS_AS(ddim_sample(model, model, shape, 10, -1.0, s, 7), config_error);
}

TEST_CASE("shared-frame noise repeats one slice across frames") {
    Tensor z = sample_initial_noise({2, 3, 4, 5, 5}, 9, NoiseInit::shared_frames);
    for (int64_t j = 0; j < 6; j++)
        for (int64_t k = 1; k < 4; k++)
            for (int64_t i = 0; i < 25; i++)
                CHECK(z[(j * 4 + k) * 25 + i] == z[(j * 4) * 25 + i]);
}
