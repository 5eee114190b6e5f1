#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "io/checkpoint.hpp"
#include "data/datagen.hpp"
#include "io/gif.hpp"
#include "io/manifest.hpp"
#include "model/motion_module.hpp"
#include "model/unet.hpp"
#include "oracles.hpp"

using namespace vd;

namespace {
const std::string kTmp = std::filesystem::temp_directory_path() / "vdiff_io_tests";

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(is)),
                                std::istreambuf_iterator<char>());
}

ParamDict random_params() {
    Rng rng(5);
    ParamDict p;
    p.add("a.w", Tensor::randn({7, 3}, rng));
    p.add("a.b", Tensor::randn({7}, rng));
    p.add("b.w", Tensor::randn({2, 5, 3, 3}, rng));
    return p;
}

}  // namespace

TEST_CASE("checkpoint: save/load roundtrip is bit-exact") {
    std::filesystem::create_directories(kTmp);
    ParamDict p = random_params();
    json cfg;
    cfg["note"] = "test";
    save_checkpoint(kTmp + "/rt.ckpt", "base_t2i", p, cfg);
    CheckpointData ck = load_checkpoint(kTmp + "/rt.ckpt", "base_t2i");
    CHECK(ck.kind == "base_t2i");
    CHECK(ck.config.value("note", "") == "test");
    CHECK(ck.params.order == p.order);
    for (auto& name : p.order)
        CHECK(ck.params.at(name).byte_hash() == p.at(name).byte_hash());
    // a second save of the loaded data is byte-identical
    save_checkpoint(kTmp + "/rt2.ckpt", ck.kind, ck.params, ck.config);
    CHECK(hash_file(kTmp + "/rt.ckpt") == hash_file(kTmp + "/rt2.ckpt"));
}

TEST_CASE("checkpoint: manifest offsets are 64-aligned and non-overlapping") {
    ParamDict p = random_params();
    save_checkpoint(kTmp + "/align.ckpt", "autoencoder", p, json::object());
    std::ifstream is(kTmp + "/align.ckpt", std::ios::binary);
    uint64_t body_start = 0;
    json header = read_checkpoint_header(is, "align.ckpt", &body_start);
    CHECK(body_start % 64 == 0);
    uint64_t prev_end = 0;
    for (auto& e : header.at("tensors")) {
        uint64_t off = e.at("offset"), nbytes = e.at("nbytes");
        CHECK(off % 64 == 0);
        CHECK(off >= prev_end);
        prev_end = off + nbytes;
    }
    CHECK(header.at("body_size").get<uint64_t>() >= prev_end);
}

TEST_CASE("checkpoint: truncation and corruption fail closed") {
    ParamDict p = random_params();
    save_checkpoint(kTmp + "/t.ckpt", "motion_module", p, json::object());
    auto bytes = slurp(kTmp + "/t.ckpt");

    {  // truncated body
        std::ofstream os(kTmp + "/trunc.ckpt", std::ios::binary);
        os.write((const char*)bytes.data(), (std::streamsize)(bytes.size() - 17));
    }
    CHECK_THROWS_AS(load_checkpoint(kTmp + "/trunc.ckpt"), io_error);

    {  // flipped body byte -> hash mismatch
        auto bad = bytes;
        bad[bad.size() - 1] ^= 0x5a;
        std::ofstream os(kTmp + "/corrupt.ckpt", std::ios::binary);
        os.write((const char*)bad.data(), (std::streamsize)bad.size());
    }
    try {
        load_checkpoint(kTmp + "/corrupt.ckpt");
        FAIL("expected io_error");
    } catch (const io_error& e) {
        CHECK(std::string(e.what()).find("hash") != std::string::npos);
    }

    {  // garbage magic
        std::ofstream os(kTmp + "/junk.ckpt", std::ios::binary);
        os << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(load_checkpoint(kTmp + "/junk.ckpt"), io_error);
}

TEST_CASE("checkpoint: kind mismatch names both kinds") {
    ParamDict p = random_params();
    save_checkpoint(kTmp + "/kind.ckpt", "motion_lora", p, json::object());
    try {
        load_checkpoint(kTmp + "/kind.ckpt", "domain_adapter");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("domain_adapter") != std::string::npos);
        CHECK(msg.find("motion_lora") != std::string::npos);
    }
    CHECK_THROWS_AS(save_checkpoint(kTmp + "/bad.ckpt", "weights", p, json::object()),
                    config_error);
}

TEST_CASE("checkpoint: architecture validation before adoption") {
    ParamDict p = random_params();
    ParamDict expected = random_params();
    validate_params(p, expected, "ok");
    ParamDict missing;
    missing.add("a.w", p.at("a.w"));
    CHECK_THROWS_AS(validate_params(missing, expected, "x"), config_error);
    ParamDict wrong_shape = random_params();
    wrong_shape.map.at("a.b") = Tensor::zeros({8});
    CHECK_THROWS_AS(validate_params(wrong_shape, expected, "x"), config_error);
    ParamDict extra = random_params();
    extra.add("zz", Tensor::zeros({1}));
    CHECK_THROWS_AS(validate_params(extra, expected, "x"), config_error);
}

TEST_CASE("motion lora checkpoint: small file, size follows the parameter count") {
    UNetConfig ucfg;
    MotionConfig mcfg;
    mcfg.sites = motion_sites_for(ucfg);
    Rng rng(9);
    LoraSet s = init_lora_set("motion_lora", motion_attention_targets(mcfg),
                              motion_projection_dims(mcfg), 2, 1.0f, rng);
    json cfg;
    cfg["lora_kind"] = s.kind;
    cfg["rank"] = s.rank;
    cfg["alpha"] = s.alpha;
    cfg["targets"] = s.targets;
    save_checkpoint(kTmp + "/mlora.ckpt", "motion_lora", s.params, cfg);
    auto size = std::filesystem::file_size(kTmp + "/mlora.ckpt");
    CHECK(size < 200 * 1024);
    // header + 4 * sum r(m+n) bytes + alignment
    int64_t payload = 4 * count_lora_params(motion_projection_dims(mcfg), 2);
    int64_t aligned = 0;
    for (auto& name : s.params.order)
        aligned += ((s.params.at(name).numel() * 4 + 63) / 64) * 64;
    CHECK((int64_t)size >= payload);
    std::ifstream is(kTmp + "/mlora.ckpt", std::ios::binary);
    uint64_t body_start = 0;
    json header = read_checkpoint_header(is, "mlora.ckpt", &body_start);
    CHECK((int64_t)size == (int64_t)body_start + (int64_t)header.at("body_size").get<uint64_t>());
    CHECK(header.at("body_size").get<int64_t>() <= aligned);
}

TEST_CASE("gif: timing, structure, decode-re-encode stability") {
    Rng rng(11);
    std::vector<Tensor> frames;
    for (int k = 0; k < 16; k++) {
        SceneSpec spec;
        spec.shape = ShapeKind::square;
        spec.color = k % 6;
        spec.motion = MotionKind::still;
        spec.start_x = 8.0 + k;
        spec.start_y = 16;
        spec.size = 4;
        frames.push_back(generate_clip(spec, 1).frames[0]);
    }
    export_gif(kTmp + "/a.gif", frames, 8);
    auto gif = oracle::decode_gif(slurp(kTmp + "/a.gif"));
    CHECK(gif.w == 32);
    CHECK(gif.h == 32);
    REQUIRE(gif.frames.size() == 16);
    // 8 fps -> 12/13 cs delays, alternating by cumulative rounding
    for (size_t k = 0; k < 16; k++) {
        CHECK(gif.frames[k].delay_cs >= 12);
        CHECK(gif.frames[k].delay_cs <= 13);
    }
    int total = 0;
    for (auto& f : gif.frames) total += f.delay_cs;
    CHECK(total == 200);  // 16 frames at 8 fps = 2 s

    // pixel spot check through the palette
    const auto& g0 = gif.frames[0];
    for (int64_t y = 0; y < 32; y++)
        for (int64_t x = 0; x < 32; x++) {
            uint32_t c = g0.palette[g0.indices[y * 32 + x]];
            CHECK((int)((c >> 16) & 0xff) == (int)to_u8(frames[0].at({0, y, x})));
            CHECK((int)(c & 0xff) == (int)to_u8(frames[0].at({2, y, x})));
        }

    // decode -> re-encode -> decode keeps the frame count
    std::vector<Tensor> decoded;
    for (auto& fr : gif.frames) {
        Tensor t({3, 32, 32});
        for (int64_t i = 0; i < 32 * 32; i++) {
            uint32_t c = fr.palette[fr.indices[i]];
            t[i] = ((c >> 16) & 0xff) / 255.0f;
            t[32 * 32 + i] = ((c >> 8) & 0xff) / 255.0f;
            t[2 * 32 * 32 + i] = (c & 0xff) / 255.0f;
        }
        decoded.push_back(std::move(t));
    }
    export_gif(kTmp + "/b.gif", decoded, 8);
    auto gif2 = oracle::decode_gif(slurp(kTmp + "/b.gif"));
    CHECK(gif2.frames.size() == gif.frames.size());

    // single frame
    export_gif(kTmp + "/one.gif", {frames[0]}, 10);
    CHECK(oracle::decode_gif(slurp(kTmp + "/one.gif")).frames.size() == 1);
    CHECK_THROWS_AS(export_gif(kTmp + "/none.gif", {}, 10), contract_error);
}

TEST_CASE("gif: wide palettes take the quantized-cube path") {
    Rng rng(13);
    Tensor grad({3, 32, 32});
    for (int64_t i = 0; i < grad.numel(); i++) grad[i] = (float)rng.uniform();
    export_gif(kTmp + "/cube.gif", {grad, grad}, 4);
    auto gif = oracle::decode_gif(slurp(kTmp + "/cube.gif"));
    REQUIRE(gif.frames.size() == 2);
    CHECK(gif.frames[0].palette.size() == 256);
    // quantization error bounded by the cube cell size
    const auto& f0 = gif.frames[0];
    for (int64_t i = 0; i < 32 * 32; i++) {
        uint32_t c = f0.palette[f0.indices[i]];
        CHECK(std::abs((double)((c >> 16) & 0xff) / 255.0 - grad[i]) < 0.25);
    }
}

TEST_CASE("png roundtrip preserves quantized pixels") {
    Rng rng(15);
    Tensor img = Tensor::uniform({3, 24, 40}, rng, 0.0f, 1.0f);
    write_png(kTmp + "/x.png", img);
    Tensor back = read_png(kTmp + "/x.png");
    REQUIRE(back.shape == img.shape);
    for (int64_t i = 0; i < img.numel(); i++)
        CHECK(to_u8(back[i]) == to_u8(img[i]));
    CHECK_THROWS_AS(read_png(kTmp + "/missing.png"), io_error);
    CHECK_THROWS_AS(read_frames(kTmp + "/not_a_dir"), io_error);
}

TEST_CASE("kvconfig: parsing, precedence, typed getters") {
    {
        std::ofstream os(kTmp + "/c.conf");
        os << "# comment\n"
           << "iters = 500\n"
           << "lr=2e-4   # trailing comment\n"
           << "name = run a\n"
           << "\n";
    }
    KVConfig c = KVConfig::from_file(kTmp + "/c.conf");
    CHECK(c.get_int("iters", 0) == 500);
    CHECK(c.get_real("lr", 0) == doctest::Approx(2e-4));
    CHECK(c.get_str("name", "") == "run a");
    CHECK(c.get_int("missing", 7) == 7);
    c.set("iters", "123");  // flag overrides file
    CHECK(c.get_int("iters", 0) == 123);
    CHECK_THROWS_AS(c.require("absent"), config_error);
    c.set("iters", "abc");
    CHECK_THROWS_AS(c.get_int("iters", 0), config_error);
    CHECK_THROWS_AS(KVConfig::from_file(kTmp + "/missing.conf"), config_error);
    {
        std::ofstream os(kTmp + "/bad.conf");
        os << "novalue\n";
    }
    CHECK_THROWS_AS(KVConfig::from_file(kTmp + "/bad.conf"), config_error);
}

TEST_CASE("run manifest roundtrip") {
    RunManifest m;
    m.command = "animate";
    m.argv = {"vdiff", "animate", "--out", "x"};
    m.config.set("seed", "5");
    m.seed = 5;
    m.metrics["loss"] = 0.25;
    write_json_file(kTmp + "/man.json", m.to_json());
    RunManifest back = RunManifest::from_json(read_json_file(kTmp + "/man.json"));
    CHECK(back.command == "animate");
    CHECK(back.argv == m.argv);
    CHECK(back.config.get_int("seed", 0) == 5);
    CHECK(back.metrics.value("loss", 0.0) == doctest::Approx(0.25));
}
