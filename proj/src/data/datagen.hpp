#ifndef VDIFF_DATA_DATAGEN_HPP
#define VDIFF_DATA_DATAGEN_HPP

#include <array>
#include <filesystem>

#include "io/image_png.hpp"
#include "io/manifest.hpp"

namespace vd {

// Moving-shapes corpus: one colored shape on a flat background, translated or
// scaled linearly across frames, rasterized with 4x supersampling.

enum class ShapeKind { circle = 0, square = 1, triangle = 2 };
enum class MotionKind { left = 0, right, up, down, grow, shrink, still };

constexpr int kImageSize = 32;
constexpr int kWatermarkSize = 8;

inline const std::array<std::array<float, 3>, 6>& shape_colors() {
    static const std::array<std::array<float, 3>, 6> c = {{{1, 0, 0},
                                                           {0, 1, 0},
                                                           {0, 0, 1},
                                                           {1, 1, 0},
                                                           {1, 0, 1},
                                                           {0, 1, 1}}};
    return c;
}
inline const std::array<std::string, 6>& color_names() {
    static const std::array<std::string, 6> n = {"red", "green", "blue", "yellow", "magenta", "cyan"};
    return n;
}
inline const std::array<std::array<float, 3>, 4>& background_colors() {
    static const std::array<std::array<float, 3>, 4> c = {{{0, 0, 0},
                                                           {1, 1, 1},
                                                           {0.5f, 0.5f, 0.5f},
                                                           {0.7f, 0.6f, 0.45f}}};
    return c;
}
inline const std::array<std::string, 4>& background_names() {
    static const std::array<std::string, 4> n = {"black", "white", "gray", "tan"};
    return n;
}
inline const std::array<std::string, 3>& shape_names() {
    static const std::array<std::string, 3> n = {"circle", "square", "triangle"};
    return n;
}
inline const std::array<std::string, 7>& motion_phrases() {
    static const std::array<std::string, 7> n = {"moving left", "moving right", "moving up",
                                                 "moving down", "growing",     "shrinking",
                                                 "holding still"};
    return n;
}

struct SceneSpec {
    ShapeKind shape = ShapeKind::circle;
    int color = 0;       // index into shape_colors
    MotionKind motion = MotionKind::still;
    double speed = 0;    // px/frame (translation) or radius px/frame (grow/shrink)
    int background = 0;  // index into background_colors
    uint64_t seed = 0;
    double start_x = 16, start_y = 16;
    double size = 5;     // half-extent at frame 0
};

inline std::string render_caption(const SceneSpec& s) {
    return color_names()[s.color] + " " + shape_names()[(int)s.shape] + " " +
           motion_phrases()[(int)s.motion] + " on " + background_names()[s.background] +
           " background";
}

// inverse of render_caption over the caption grammar's semantic fields
struct ParsedCaption {
    ShapeKind shape;
    int color;
    MotionKind motion;
    int background;
};

inline ParsedCaption parse_caption(const std::string& caption) {
    auto find_index = [&](const auto& names, const std::string& what) {
        for (size_t i = 0; i < names.size(); i++)
            if (caption.find(names[i]) != std::string::npos) return (int)i;
        throw contract_error("parse_caption: no " + what + " in '" + caption + "'");
    };
    ParsedCaption p;
    p.color = find_index(color_names(), "color");
    p.shape = (ShapeKind)find_index(shape_names(), "shape");
    p.motion = (MotionKind)find_index(motion_phrases(), "motion");
    // background word comes after "on "
    auto on = caption.find(" on ");
    VD_CHECK_CONTRACT(on != std::string::npos, "parse_caption: no background clause");
    std::string tail = caption.substr(on + 4);
    int bg = -1;
    for (size_t i = 0; i < background_names().size(); i++)
        if (tail.rfind(background_names()[i], 0) == 0) bg = (int)i;
    VD_CHECK_CONTRACT(bg >= 0, "parse_caption: unknown background in '" + caption + "'");
    p.background = bg;
    return p;
}

namespace raster {

inline bool inside_shape(ShapeKind kind, double px, double py, double cx, double cy, double size) {
    double dx = px - cx, dy = py - cy;
    switch (kind) {
        case ShapeKind::circle:
            return dx * dx + dy * dy <= size * size;
        case ShapeKind::square:
            return std::abs(dx) <= size && std::abs(dy) <= size;
        case ShapeKind::triangle: {
            // equilateral, apex up, circumradius = 1.2 * size
            double R = 1.2 * size;
            double v0x = cx, v0y = cy - R;
            double v1x = cx + R * 0.86602540378443864676, v1y = cy + R * 0.5;
            double v2x = cx - R * 0.86602540378443864676, v2y = cy + R * 0.5;
            auto side = [&](double ax, double ay, double bx, double by) {
                return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
            };
            double s0 = side(v0x, v0y, v1x, v1y);
            double s1 = side(v1x, v1y, v2x, v2y);
            double s2 = side(v2x, v2y, v0x, v0y);
            return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
        }
    }
    return false;
}

// 4x supersampled coverage of the shape at one pixel
inline double coverage(ShapeKind kind, int64_t px, int64_t py, double cx, double cy, double size) {
    int hit = 0;
    for (int sy = 0; sy < 4; sy++)
        for (int sx = 0; sx < 4; sx++) {
            double x = px + (sx + 0.5) / 4.0;
            double y = py + (sy + 0.5) / 4.0;
            if (inside_shape(kind, x, y, cx, cy, size)) hit++;
        }
    return hit / 16.0;
}

inline double shape_extent(ShapeKind kind, double size) {
    return kind == ShapeKind::triangle ? 1.2 * size : kind == ShapeKind::square ? size * 1.0 : size;
}

}  // namespace raster

enum class StyleKind { plain = 0, outline, pastel, inverted };

// one frame; outline renders a ring of ~1.5px, pastel/inverted post-transform
inline Tensor render_frame(const SceneSpec& s, double cx, double cy, double size,
                           StyleKind style = StyleKind::plain) {
    const auto& fg = shape_colors()[s.color];
    const auto& bg = background_colors()[s.background];
    Tensor img({3, kImageSize, kImageSize});
    for (int64_t y = 0; y < kImageSize; y++)
        for (int64_t x = 0; x < kImageSize; x++) {
            double cov;
            if (style == StyleKind::outline) {
                double outer = raster::coverage(s.shape, x, y, cx, cy, size);
                double inner = raster::coverage(s.shape, x, y, cx, cy, std::max(0.0, size - 1.5));
                cov = std::max(0.0, outer - inner);
            } else {
                cov = raster::coverage(s.shape, x, y, cx, cy, size);
            }
            for (int c = 0; c < 3; c++)
                img[(c * kImageSize + y) * kImageSize + x] =
                    (float)(bg[c] * (1.0 - cov) + fg[c] * cov);
        }
    if (style == StyleKind::pastel)
        for (int64_t i = 0; i < img.numel(); i++) img[i] = 0.6f * img[i] + 0.4f;
    if (style == StyleKind::inverted)
        for (int64_t i = 0; i < img.numel(); i++) img[i] = 1.0f - img[i];
    return img;
}

struct VideoClip {
    std::vector<Tensor> frames;  // each (3,32,32) in [0,1]
    std::string caption;
    SceneSpec spec;
};

// deterministic per spec; throws if the shape would leave the frame
inline VideoClip generate_clip(const SceneSpec& spec, int64_t f, StyleKind style = StyleKind::plain) {
    VD_CHECK_CONFIG(f >= 1, "generate_clip: need at least one frame");
    VideoClip clip;
    clip.spec = spec;
    clip.caption = render_caption(spec);
    double vx = 0, vy = 0, vs = 0;
    switch (spec.motion) {
        case MotionKind::left: vx = -spec.speed; break;
        case MotionKind::right: vx = spec.speed; break;
        case MotionKind::up: vy = -spec.speed; break;
        case MotionKind::down: vy = spec.speed; break;
        case MotionKind::grow: vs = spec.speed; break;
        case MotionKind::shrink: vs = -spec.speed; break;
        case MotionKind::still: break;
    }
    for (int64_t k = 0; k < f; k++) {
        double cx = spec.start_x + vx * k;
        double cy = spec.start_y + vy * k;
        double size = spec.size + vs * k;
        VD_CHECK_CONFIG(size >= 1.0, "generate_clip: shape shrinks below 1px at frame " +
                                         std::to_string(k));
        double ext = raster::shape_extent(spec.shape, size);
        if (cx - ext < 0 || cx + ext > kImageSize || cy - ext < 0 || cy + ext > kImageSize)
            throw config_error("generate_clip: shape exits frame at frame " + std::to_string(k));
        clip.frames.push_back(render_frame(spec, cx, cy, size, style));
    }
    return clip;
}

// 8x8 binary glyph stamped into the bottom-right corner (nested squares)
inline const std::array<uint8_t, 64>& watermark_glyph() {
    static const std::array<uint8_t, 64> g = {
        1, 1, 1, 1, 1, 1, 1, 1,  //
        1, 0, 0, 0, 0, 0, 0, 1,  //
        1, 0, 1, 1, 1, 1, 0, 1,  //
        1, 0, 1, 0, 0, 1, 0, 1,  //
        1, 0, 1, 0, 0, 1, 0, 1,  //
        1, 0, 1, 1, 1, 1, 0, 1,  //
        1, 0, 0, 0, 0, 0, 0, 1,  //
        1, 1, 1, 1, 1, 1, 1, 1,
    };
    return g;
}

inline void stamp_watermark_frame(Tensor& img, double strength) {
    int64_t h = img.shape[1], w = img.shape[2];
    const auto& g = watermark_glyph();
    for (int64_t y = 0; y < kWatermarkSize; y++)
        for (int64_t x = 0; x < kWatermarkSize; x++) {
            float gv = (float)g[y * kWatermarkSize + x];
            int64_t iy = h - kWatermarkSize + y, ix = w - kWatermarkSize + x;
            for (int c = 0; c < 3; c++) {
                float& p = img[(c * h + iy) * w + ix];
                p = (float)((1.0 - strength) * p + strength * gv);
            }
        }
}

// blends the whole corner patch toward the glyph; strength 0 is a no-op,
// strength 1 makes the patch equal the glyph exactly. Frames are cloned:
// tensor copies share storage, and the input clip must stay untouched.
inline VideoClip stamp_watermark(VideoClip clip, double strength) {
    VD_CHECK_CONFIG(strength >= 0.0 && strength <= 1.0, "stamp_watermark: strength in [0,1]");
    if (strength == 0.0) return clip;
    for (auto& f : clip.frames) {
        f = f.clone();
        stamp_watermark_frame(f, strength);
    }
    return clip;
}

inline uint64_t clip_content_hash(const VideoClip& clip) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (auto& f : clip.frames) {
        std::vector<uint8_t> q(f.numel());
        for (int64_t i = 0; i < f.numel(); i++) q[i] = to_u8(f[i]);
        h = fnv1a64(q.data(), q.size(), h);
    }
    return h;
}

inline void write_clip(const std::string& dir, const VideoClip& clip) {
    std::filesystem::create_directories(dir);
    write_frames(dir, clip.frames);
    std::ofstream cap(dir + "/caption.txt");
    cap << clip.caption << "\n";
    json sj;
    sj["shape"] = shape_names()[(int)clip.spec.shape];
    sj["color"] = color_names()[clip.spec.color];
    sj["motion"] = (int)clip.spec.motion;
    sj["speed"] = clip.spec.speed;
    sj["background"] = background_names()[clip.spec.background];
    sj["seed"] = clip.spec.seed;
    sj["start_x"] = clip.spec.start_x;
    sj["start_y"] = clip.spec.start_y;
    sj["size"] = clip.spec.size;
    sj["frames"] = (int64_t)clip.frames.size();
    write_json_file(dir + "/spec.json", sj);
}

// sample free parameters so every motion stays in-frame for f frames
inline SceneSpec sample_scene(Rng& rng, ShapeKind shape, int color, MotionKind motion, int64_t f) {
    SceneSpec s;
    s.shape = shape;
    s.color = color;
    s.motion = motion;
    s.background = (int)rng.randint(4);
    s.seed = rng.u64();
    bool scaling = motion == MotionKind::grow || motion == MotionKind::shrink;
    s.speed = scaling ? rng.uniform(0.3, 0.6) : rng.uniform(1.0, 2.5);
    if (motion == MotionKind::still) s.speed = 0;
    s.size = rng.uniform(4.0, 6.5);
    double end_size = s.size + (motion == MotionKind::grow ? s.speed * (f - 1) : 0.0);
    if (motion == MotionKind::shrink) s.size = std::max(s.size, 1.5 + s.speed * (f - 1));
    double ext = raster::shape_extent(s.shape, std::max(s.size, end_size));
    double travel = scaling || motion == MotionKind::still ? 0.0 : s.speed * (f - 1);
    double lo = ext + 0.5, hi = kImageSize - ext - 0.5;
    double lo_x = lo + (motion == MotionKind::left ? travel : 0.0);
    double hi_x = hi - (motion == MotionKind::right ? travel : 0.0);
    double lo_y = lo + (motion == MotionKind::up ? travel : 0.0);
    double hi_y = hi - (motion == MotionKind::down ? travel : 0.0);
    VD_CHECK_CONFIG(lo_x < hi_x && lo_y < hi_y, "sample_scene: no room for motion");
    s.start_x = rng.uniform(lo_x, hi_x);
    s.start_y = rng.uniform(lo_y, hi_y);
    return s;
}

struct CorpusEntry {
    std::string dir;  // relative to corpus root
    std::string caption;
    std::string split;  // "train" | "heldout"
    uint64_t hash;
};

struct CorpusManifest {
    std::string root;
    int64_t n = 0, f = 0;
    double watermark = 0;
    uint64_t seed = 0;
    std::vector<CorpusEntry> entries;
    uint64_t corpus_hash = 0;
};

inline void write_corpus_manifest(const CorpusManifest& m) {
    json j;
    j["kind"] = "video_corpus";
    j["n"] = m.n;
    j["f"] = m.f;
    j["watermark"] = m.watermark;
    j["seed"] = m.seed;
    j["corpus_hash"] = hash_hex(m.corpus_hash);
    json entries = json::array();
    for (auto& e : m.entries) {
        json je;
        je["dir"] = e.dir;
        je["caption"] = e.caption;
        je["split"] = e.split;
        je["hash"] = hash_hex(e.hash);
        entries.push_back(je);
    }
    j["entries"] = entries;
    write_json_file(m.root + "/manifest.json", j);
}

inline CorpusManifest read_corpus_manifest(const std::string& root) {
    json j = read_json_file(root + "/manifest.json");
    CorpusManifest m;
    m.root = root;
    m.n = j.value("n", (int64_t)0);
    m.f = j.value("f", (int64_t)0);
    m.watermark = j.value("watermark", 0.0);
    m.seed = j.value("seed", (uint64_t)0);
    m.corpus_hash = std::stoull(j.value("corpus_hash", std::string("0")), nullptr, 16);
    for (auto& je : j.at("entries")) {
        CorpusEntry e;
        e.dir = je.at("dir");
        e.caption = je.at("caption");
        e.split = je.at("split");
        e.hash = std::stoull(je.value("hash", std::string("0")), nullptr, 16);
        m.entries.push_back(e);
    }
    return m;
}

// Balanced moving-shapes video corpus, all clips watermarked, 90/10
// train/held-out split. Deterministic per seed.
inline CorpusManifest generate_corpus(const std::string& out_dir, int64_t n, int64_t f,
                                      double watermark_strength, uint64_t seed) {
    VD_CHECK_CONFIG(n >= 1, "generate_corpus: need n >= 1");
    std::filesystem::create_directories(out_dir);
    CorpusManifest m;
    m.root = out_dir;
    m.n = n;
    m.f = f;
    m.watermark = watermark_strength;
    m.seed = seed;

    // balanced over shape x color x motion, cycling through all 126 combos
    std::vector<std::tuple<ShapeKind, int, MotionKind>> combos;
    for (int sh = 0; sh < 3; sh++)
        for (int c = 0; c < 6; c++)
            for (int mo = 0; mo < 7; mo++)
                combos.push_back({(ShapeKind)sh, c, (MotionKind)mo});
    Rng shuffle_rng(mix_seed(seed, "combo-shuffle"));
    for (size_t i = combos.size(); i > 1; i--)
        std::swap(combos[i - 1], combos[shuffle_rng.randint((int64_t)i)]);

    // held-out = last tenth of a seed-shuffled order
    std::vector<int64_t> order(n);
    for (int64_t i = 0; i < n; i++) order[i] = i;
    Rng split_rng(mix_seed(seed, "split-shuffle"));
    for (int64_t i = n; i > 1; i--) std::swap(order[i - 1], order[split_rng.randint(i)]);
    std::vector<std::string> split(n, "train");
    for (int64_t i = n - n / 10; i < n; i++) split[order[i]] = "heldout";

    uint64_t corpus_hash = 0xcbf29ce484222325ull;
    char dirname[32];
    for (int64_t i = 0; i < n; i++) {
        auto [sh, color, mo] = combos[i % combos.size()];
        Rng rng(mix_seed(seed, "clip", (uint64_t)i));
        SceneSpec spec = sample_scene(rng, sh, color, mo, f);
        VideoClip clip = stamp_watermark(generate_clip(spec, f), watermark_strength);
        std::snprintf(dirname, sizeof(dirname), "clip_%05lld", (long long)i);
        write_clip(out_dir + "/" + dirname, clip);
        CorpusEntry e;
        e.dir = dirname;
        e.caption = clip.caption;
        e.split = split[i];
        e.hash = clip_content_hash(clip);
        corpus_hash = fnv1a64(&e.hash, sizeof(e.hash), corpus_hash);
        m.entries.push_back(e);
    }
    m.corpus_hash = corpus_hash;
    write_corpus_manifest(m);
    return m;
}

// Clean still-image corpus (f=1, no watermark, no motion clause in the
// caption grammar's sense: motion is "holding still").
inline CorpusManifest generate_still_corpus(const std::string& out_dir, int64_t n, uint64_t seed) {
    VD_CHECK_CONFIG(n >= 1, "generate_still_corpus: need n >= 1");
    std::filesystem::create_directories(out_dir);
    CorpusManifest m;
    m.root = out_dir;
    m.n = n;
    m.f = 1;
    m.watermark = 0;
    m.seed = seed;
    std::vector<std::pair<ShapeKind, int>> combos;
    for (int sh = 0; sh < 3; sh++)
        for (int c = 0; c < 6; c++) combos.push_back({(ShapeKind)sh, c});
    uint64_t corpus_hash = 0xcbf29ce484222325ull;
    char dirname[32];
    for (int64_t i = 0; i < n; i++) {
        auto [sh, color] = combos[i % combos.size()];
        Rng rng(mix_seed(seed, "still", (uint64_t)i));
        SceneSpec spec = sample_scene(rng, sh, color, MotionKind::still, 1);
        VideoClip clip = generate_clip(spec, 1);
        std::snprintf(dirname, sizeof(dirname), "img_%05lld", (long long)i);
        write_clip(out_dir + "/" + dirname, clip);
        CorpusEntry e;
        e.dir = dirname;
        e.caption = clip.caption;
        e.split = "train";
        e.hash = clip_content_hash(clip);
        corpus_hash = fnv1a64(&e.hash, sizeof(e.hash), corpus_hash);
        m.entries.push_back(e);
    }
    m.corpus_hash = corpus_hash;
    write_corpus_manifest(m);
    return m;
}

inline const std::array<std::string, 3>& style_names() {
    static const std::array<std::string, 3> n = {"outline", "pastel", "inverted"};
    return n;
}

// Styled still images with trigger-word captions, e.g.
// "sks-outline style red circle on black background".
inline CorpusManifest generate_style_set(const std::string& style, int64_t n, uint64_t seed,
                                         const std::string& out_dir) {
    VD_CHECK_CONFIG(n >= 10, "generate_style_set: need n >= 10");
    StyleKind kind;
    if (style == "outline") kind = StyleKind::outline;
    else if (style == "pastel") kind = StyleKind::pastel;
    else if (style == "inverted") kind = StyleKind::inverted;
    else throw config_error("generate_style_set: unknown style '" + style + "'");

    std::filesystem::create_directories(out_dir);
    CorpusManifest m;
    m.root = out_dir;
    m.n = n;
    m.f = 1;
    m.watermark = 0;
    m.seed = seed;
    std::vector<std::pair<ShapeKind, int>> combos;
    for (int sh = 0; sh < 3; sh++)
        for (int c = 0; c < 6; c++) combos.push_back({(ShapeKind)sh, c});
    uint64_t corpus_hash = 0xcbf29ce484222325ull;
    char dirname[32];
    for (int64_t i = 0; i < n; i++) {
        auto [sh, color] = combos[i % combos.size()];
        Rng rng(mix_seed(seed, "style-" + style, (uint64_t)i));
        SceneSpec spec = sample_scene(rng, sh, color, MotionKind::still, 1);
        VideoClip clip = generate_clip(spec, 1, kind);
        clip.caption = "sks-" + style + " style " + color_names()[color] + " " +
                       shape_names()[(int)sh] + " on " + background_names()[spec.background] +
                       " background";
        std::snprintf(dirname, sizeof(dirname), "style_%05lld", (long long)i);
        write_clip(out_dir + "/" + dirname, clip);
        CorpusEntry e;
        e.dir = dirname;
        e.caption = clip.caption;
        e.split = "train";
        e.hash = clip_content_hash(clip);
        corpus_hash = fnv1a64(&e.hash, sizeof(e.hash), corpus_hash);
        m.entries.push_back(e);
    }
    m.corpus_hash = corpus_hash;
    write_corpus_manifest(m);
    return m;
}

}  // namespace vd

#endif
