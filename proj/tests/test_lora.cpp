#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "model/unet.hpp"
#include "oracles.hpp"

using namespace vd;

namespace {

Tensor dense_delta(const LoraPair& p) {
    // oracle: alpha * A B^T by explicit loops in double
    int64_t m = p.out_dim(), n = p.in_dim(), r = p.rank();
    Tensor d({m, n});
    for (int64_t i = 0; i < m; i++)
        for (int64_t j = 0; j < n; j++) {
            double acc = 0;
            for (int64_t k = 0; k < r; k++) acc += (double)p.A[i * r + k] * p.B[j * r + k];
            d[i * n + j] = (float)(p.alpha * acc);
        }
    return d;
}

Tensor apply_dense(const Tensor& w, const Tensor& z) {
    int64_t m = w.shape[0], n = w.shape[1], rows = z.numel() / n;
    Tensor y({rows, m});
    for (int64_t r = 0; r < rows; r++)
        for (int64_t i = 0; i < m; i++) {
            double acc = 0;
            for (int64_t j = 0; j < n; j++) acc += (double)w[i * n + j] * z[r * n + j];
            y[r * m + i] = (float)acc;
        }
    return y;
}

}  // namespace

TEST_CASE("lora_apply: fresh pair (B=0) is the base projection") {
    Rng rng(1);
    Tensor w = Tensor::randn({5, 4}, rng);
    LoraPair p = init_lora_pair("t", 5, 4, 2, 1.0f, rng);
    Tensor z = Tensor::randn({3, 4}, rng);
    Tensor with = lora_apply(z, w, p);
    Tensor base({3, 5});
    gemm_nt(base.data(), z.data(), w.data(), 3, 4, 5, false);
    CHECK(max_abs_diff(with, base) == 0.0);
}

TEST_CASE("lora_apply: 2x2 closed form") {
    Tensor w = Tensor::zeros({2, 2});
    w.at({0, 0}) = w.at({1, 1}) = 1.0f;  // identity
    LoraPair p;
    p.target = "t";
    p.alpha = 1.0f;
    p.A = Tensor::from_vec({2, 1}, {1, 0});
    p.B = Tensor::from_vec({2, 1}, {0, 1});
    Tensor z = Tensor::from_vec({1, 2}, {0, 1});
    Tensor y = lora_apply(z, w, p);  // delta W = [[0,1],[0,0]] -> y = (1, 1)
    CHECK(y.at({0, 0}) == doctest::Approx(1.0));
    CHECK(y.at({0, 1}) == doctest::Approx(1.0));
    Tensor merged = merge_lora_into_weights(w, p);
    CHECK(merged.at({0, 0}) == 1.0f);
    CHECK(merged.at({0, 1}) == 1.0f);
    CHECK(merged.at({1, 0}) == 0.0f);
    CHECK(merged.at({1, 1}) == 1.0f);
}

TEST_CASE("lora_apply: dense-matrix oracle on random shapes") {
    Rng rng(2);
    Tensor w = Tensor::randn({6, 5}, rng);
    LoraPair p = init_lora_pair("t", 6, 5, 3, 0.8f, rng);
    p.B = Tensor::randn({5, 3}, rng, 0.5f);
    Tensor z = Tensor::randn({4, 5}, rng);
    Tensor got = lora_apply(z, w, p);
    Tensor weff = w.clone();
    Tensor d = dense_delta(p);
    for (int64_t i = 0; i < weff.numel(); i++) weff[i] += d[i];
    Tensor expect = apply_dense(weff, z);
    CHECK(max_abs_diff(got, expect) < 1e-5);
    CHECK_THROWS_AS(lora_apply(Tensor::zeros({2, 4}), w, p), contract_error);
}

TEST_CASE("adapter scale: alpha 0 removes the adapter, output affine in alpha") {
    Rng rng(3);
    Tensor w = Tensor::randn({4, 4}, rng);
    LoraPair p = init_lora_pair("t", 4, 4, 2, 1.0f, rng);
    p.B = Tensor::randn({4, 2}, rng, 0.5f);
    Tensor z = Tensor::randn({5, 4}, rng);

    LoraPair p0 = p, p05 = p, p1 = p;
    p0.alpha = 0.0f;
    p05.alpha = 0.5f;
    p1.alpha = 1.0f;
    Tensor y0 = lora_apply(z, w, p0);
    Tensor y05 = lora_apply(z, w, p05);
    Tensor y1 = lora_apply(z, w, p1);

    Tensor base({5, 4});
    gemm_nt(base.data(), z.data(), w.data(), 5, 4, 4, false);
    CHECK(max_abs_diff(y0, base) == 0.0);  // alpha = 0 reproduces the base exactly
    // exact midpoint at the projection level
    for (int64_t i = 0; i < y05.numel(); i++)
        CHECK(y05[i] == doctest::Approx(0.5 * (y0[i] + y1[i])).epsilon(1e-6));
}

TEST_CASE("set_adapter_scale applies uniformly over the set") {
    Rng rng(4);
    ProjDims dims = {{"a.q", {4, 4}}, {"a.k", {4, 6}}};
    LoraSet s = init_lora_set("domain_adapter", {"a.q", "a.k"}, dims, 2, 1.0f, rng);
    LoraSet s0 = set_adapter_scale(s, 0.0f);
    CHECK(s0.alpha == 0.0f);
    CHECK(s0.pair("a.q").alpha == 0.0f);
    CHECK(s0.pair("a.k").alpha == 0.0f);
    LoraSet s2 = set_adapter_scale(s, 0.37f);
    CHECK(s2.pair("a.k").alpha == doctest::Approx(0.37f));
}

TEST_CASE("compose_motion_loras: trivial and weighted cases") {
    Rng rng(5);
    ProjDims dims = {{"m.q", {4, 4}}, {"m.v", {4, 4}}};
    LoraSet a = init_lora_set("motion_lora", {"m.q", "m.v"}, dims, 2, 1.0f, rng);
    LoraSet b = init_lora_set("motion_lora", {"m.q", "m.v"}, dims, 2, 1.0f, rng);
    for (auto* s : {&a, &b}) {
        Rng r2(s == &a ? 6 : 7);
        s->params.at("m.q.B") = Tensor::randn({4, 2}, r2, 0.5f);
        s->params.at("m.v.B") = Tensor::randn({4, 2}, r2, 0.5f);
    }
    // single lora, weight 1: identical to its dense delta
    auto single = compose_motion_loras({&a}, {1.0});
    Tensor da = dense_delta(a.pair("m.q"));
    for (int64_t i = 0; i < 16; i++)
        CHECK(single.at("m.q")[i] == doctest::Approx(da[i]).epsilon(1e-6));

    // weights (1, 0): equals the first alone
    auto zw = compose_motion_loras({&a, &b}, {1.0, 0.0});
    for (int64_t i = 0; i < 16; i++)
        CHECK(zw.at("m.q")[i] == doctest::Approx(single.at("m.q")[i]).epsilon(1e-12));

    // dense oracle for the sum
    auto both = compose_motion_loras({&a, &b}, {1.0, 1.0});
    Tensor db = dense_delta(b.pair("m.q"));
    for (int64_t i = 0; i < 16; i++)
        CHECK(both.at("m.q")[i] == doctest::Approx((double)da[i] + db[i]).epsilon(1e-5));

    // order independence to 1e-9
    auto swapped = compose_motion_loras({&b, &a}, {1.0, 1.0});
    for (int64_t i = 0; i < 16; i++)
        CHECK(std::abs(both.at("m.q")[i] - swapped.at("m.q")[i]) < 1e-9);
}

TEST_CASE("compose_motion_loras: target mismatch lists the differing targets") {
    Rng rng(8);
    ProjDims d1 = {{"m.q", {4, 4}}};
    ProjDims d2 = {{"m.k", {4, 4}}};
    LoraSet a = init_lora_set("motion_lora", {"m.q"}, d1, 2, 1.0f, rng);
    LoraSet b = init_lora_set("motion_lora", {"m.k"}, d2, 2, 1.0f, rng);
    try {
        compose_motion_loras({&a, &b}, {1.0, 1.0});
        FAIL("expected config_error");
    } catch (const config_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("m.q") != std::string::npos);
        CHECK(msg.find("m.k") != std::string::npos);
    }
}

TEST_CASE("merge-then-forward equals adapt-then-forward on random inputs") {
    Rng rng(9);
    Tensor w = Tensor::randn({8, 6}, rng);
    LoraPair p = init_lora_pair("t", 8, 6, 4, 1.3f, rng);
    p.B = Tensor::randn({6, 4}, rng, 0.4f);
    Tensor merged = merge_lora_into_weights(w, p);
    for (int rep = 0; rep < 100; rep++) {
        Tensor z = Tensor::randn({1, 6}, rng);
        Tensor adapt = lora_apply(z, w, p);
        Tensor direct = apply_dense(merged, z);
        CHECK(max_abs_diff(adapt, direct) < 1e-6);
    }
    // B = 0 merge is the identity on W
    LoraPair fresh = init_lora_pair("t", 8, 6, 4, 1.0f, rng);
    CHECK(max_abs_diff(merge_lora_into_weights(w, fresh), w) == 0.0);
}

TEST_CASE("count_lora_params") {
    ProjDims one = {{"w", {320, 320}}};
    CHECK(count_lora_params(one, 2) == 1280);
    CHECK(count_lora_params(one, 4) == 2560);  // linear in rank

    // desk-scale temporal module: independent enumeration of the same dims
    UNetConfig ucfg;
    MotionConfig mcfg;
    mcfg.sites = motion_sites_for(ucfg);
    int64_t expect = 0;
    for (auto& site : mcfg.sites)
        for (int blk = 0; blk < mcfg.n_blocks; blk++)
            for (int proj = 0; proj < 4; proj++) expect += 2 * (site.channels + site.channels);
    CHECK(count_lora_params(motion_projection_dims(mcfg), 2) == expect);
    CHECK(count_lora_params(motion_projection_dims(mcfg), 4) == 2 * expect);
    CHECK_THROWS_AS(count_lora_params(one, 0), config_error);
}

TEST_CASE("fresh adapters change no model output anywhere") {
    UNetConfig ucfg;
    Vocabulary vocab = build_default_vocab();
    Rng rng(10);
    ParamDict unet = init_unet_params(ucfg, rng);
    add_text_params(unet, vocab, rng);
    unet.at("unet.out.conv.w") = Tensor::randn({4, 32, 3, 3}, rng, 0.05f);
    LoraSet adapter = init_lora_set("domain_adapter", unet_attention_targets(ucfg),
                                    unet_projection_dims(ucfg), 4, 1.0f, rng);

    Tensor z = Tensor::randn({1, 4, 8, 8}, rng);
    auto toks = tokenize(vocab, "red circle on black background");
    auto forward = [&](bool with_adapter) {
        Graph g;
        ParamVars pv(g, unet);
        ParamVars apv(g, adapter.params);
        LoraRuntimeT<float> rt;
        if (with_adapter) rt.attach(apv, adapter.targets, adapter.alpha);
        DenoiserHooks<float> hooks;
        hooks.adapters = with_adapter ? &rt : nullptr;
        std::vector<int64_t> flat(toks.begin(), toks.end());
        auto* text = text_embed(g, pv, flat);
        auto* out = unet_apply(g, ucfg, pv, g.leaf(z), 9, text, hooks);
        return out->value.clone();
    };
    Tensor without = forward(false);
    Tensor with = forward(true);
    CHECK(max_abs_diff(without, with) == 0.0);
}

TEST_CASE("lora init: rank and dims validated") {
    Rng rng(11);
    CHECK_THROWS_AS(init_lora_pair("t", 4, 4, 5, 1.0f, rng), config_error);
    CHECK_THROWS_AS(init_lora_pair("t", 4, 4, 0, 1.0f, rng), config_error);
    ProjDims dims = {{"a", {4, 4}}};
    CHECK_THROWS_AS(init_lora_set("domain_adapter", {"missing"}, dims, 2, 1.0f, rng), config_error);
    // fresh pair invariants: B exactly zero, A small
    LoraPair p = init_lora_pair("t", 6, 5, 2, 1.0f, rng);
    for (int64_t i = 0; i < p.B.numel(); i++) CHECK(p.B[i] == 0.0f);
    for (int64_t i = 0; i < p.A.numel(); i++) CHECK(std::abs(p.A[i]) < 0.2f);
}
