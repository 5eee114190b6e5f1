#ifndef VDIFF_DATA_CAMERA_AUGMENT_HPP
#define VDIFF_DATA_CAMERA_AUGMENT_HPP

#include "data/datagen.hpp"

namespace vd {

// Rule-based camera-motion reference clips: a crop window swept over the
// source frames. Zoom shrinks/grows the window, pan translates it, roll
// rotates it; the window must stay inside the source for every frame.
//
// Sign conventions are chosen so the *content* motion matches the pattern
// name: pan_right moves the window left, so content flows right; zoom_in
// shrinks the window, so content expands (positive flow divergence).

struct CropSchedule {
    std::string pattern;  // label; composites join with '+'
    int64_t f = 8;
    double start_scale = 1.0, end_scale = 1.0;
    double pan_dx = 0, pan_dy = 0;  // total window travel, fraction of extent
    double roll_degrees = 0;        // total rotation, positive = clockwise
};

inline CropSchedule make_pattern(const std::string& name, int64_t f) {
    CropSchedule s;
    s.pattern = name;
    s.f = f;
    if (name == "zoom_in") {
        s.start_scale = 1.0;
        s.end_scale = 0.6;
    } else if (name == "zoom_out") {
        s.start_scale = 0.6;
        s.end_scale = 1.0;
    } else if (name == "pan_right" || name == "pan_left" || name == "pan_up" ||
               name == "pan_down") {
        s.start_scale = s.end_scale = 0.72;
        // window travels right-to-left for pan_right, so content flows right
        double e = 0.25;
        if (name == "pan_right") s.pan_dx = e;
        if (name == "pan_left") s.pan_dx = -e;
        if (name == "pan_down") s.pan_dy = e;
        if (name == "pan_up") s.pan_dy = -e;
    } else if (name == "roll_cw" || name == "roll_ccw") {
        s.start_scale = s.end_scale = 0.7;
        s.roll_degrees = name == "roll_cw" ? 30.0 : -30.0;
    } else {
        throw config_error("unknown camera pattern '" + name + "'");
    }
    return s;
}

inline void validate_schedule(const CropSchedule& s) {
    VD_CHECK_CONFIG(s.f >= 1, "crop schedule: need f >= 1");
    VD_CHECK_CONFIG(s.start_scale > 0 && s.end_scale > 0 && s.start_scale <= 1.0 &&
                        s.end_scale <= 1.0,
                    "crop schedule: scales must be in (0, 1]");
}

struct FrameTransform {
    double scale;    // crop extent as fraction of source extent
    double dx, dy;   // window center offset from source center, in source px
    double angle;    // radians, positive = clockwise
};

// linear interpolation of scale / offset / angle across frames; frame 0 is
// the schedule's start state. Throws naming the first frame whose rotated
// crop leaves the source.
inline std::vector<FrameTransform> schedule_crops(const CropSchedule& s, int64_t src_w,
                                                  int64_t src_h) {
    validate_schedule(s);
    std::vector<FrameTransform> out;
    double ex = (double)(src_w - 1), ey = (double)(src_h - 1);
    for (int64_t k = 0; k < s.f; k++) {
        double u = s.f == 1 ? 0.0 : (double)k / (double)(s.f - 1);
        FrameTransform t;
        t.scale = s.start_scale + (s.end_scale - s.start_scale) * u;
        t.dx = (0.5 - u) * s.pan_dx * ex;  // start at +pan/2, end at -pan/2
        t.dy = (0.5 - u) * s.pan_dy * ey;
        t.angle = s.roll_degrees * (3.14159265358979323846 / 180.0) * u;
        double c = std::cos(t.angle), sn = std::sin(t.angle);
        for (int corner = 0; corner < 4; corner++) {
            double lx = (corner & 1 ? 0.5 : -0.5) * t.scale * ex;
            double ly = (corner & 2 ? 0.5 : -0.5) * t.scale * ey;
            double rx = c * lx - sn * ly, ry = sn * lx + c * ly;
            double px = ex / 2 + t.dx + rx, py = ey / 2 + t.dy + ry;
            if (px < -1e-9 || px > ex + 1e-9 || py < -1e-9 || py > ey + 1e-9)
                throw config_error("crop schedule '" + s.pattern + "': crop exceeds source at frame " +
                                   std::to_string(k));
        }
        out.push_back(t);
    }
    return out;
}

// per-frame transform composition: scales multiply, offsets add, angles add
inline CropSchedule compose_patterns(const CropSchedule& a, const CropSchedule& b) {
    VD_CHECK_CONFIG(a.f == b.f, "compose_patterns: frame counts differ");
    CropSchedule c;
    c.pattern = a.pattern + "+" + b.pattern;
    c.f = a.f;
    c.start_scale = a.start_scale * b.start_scale;
    c.end_scale = a.end_scale * b.end_scale;
    c.pan_dx = a.pan_dx + b.pan_dx;
    c.pan_dy = a.pan_dy + b.pan_dy;
    c.roll_degrees = a.roll_degrees + b.roll_degrees;
    // bounds re-validated on a unit source; real sources re-check in schedule_crops
    schedule_crops(c, kImageSize, kImageSize);
    return c;
}

// bilinear sample with corner-aligned coordinates spanning [0, n-1]
inline void bilinear_rgb(const Tensor& img, double x, double y, float* out) {
    int64_t h = img.shape[1], w = img.shape[2];
    x = std::clamp(x, 0.0, (double)(w - 1));
    y = std::clamp(y, 0.0, (double)(h - 1));
    int64_t x0 = (int64_t)x, y0 = (int64_t)y;
    int64_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    double fx = x - x0, fy = y - y0;
    for (int c = 0; c < 3; c++) {
        const float* p = img.data() + c * h * w;
        double v = p[y0 * w + x0] * (1 - fx) * (1 - fy) + p[y0 * w + x1] * fx * (1 - fy) +
                   p[y1 * w + x0] * (1 - fx) * fy + p[y1 * w + x1] * fx * fy;
        out[c] = (float)v;
    }
}

// crop/rotate each source frame per transform and resample to out_size.
// A single-image source is reused for every frame.
inline std::vector<Tensor> apply_schedule(const std::vector<Tensor>& source,
                                          const std::vector<FrameTransform>& transforms,
                                          int64_t out_size = kImageSize) {
    VD_CHECK_CONTRACT(!source.empty(), "apply_schedule: empty source");
    std::vector<Tensor> out;
    int64_t sh = source[0].shape[1], sw = source[0].shape[2];
    double ex = (double)(sw - 1), ey = (double)(sh - 1);
    for (size_t k = 0; k < transforms.size(); k++) {
        const Tensor& src = source[std::min(k, source.size() - 1)];
        const FrameTransform& t = transforms[k];
        double c = std::cos(t.angle), sn = std::sin(t.angle);
        Tensor frame({3, out_size, out_size});
        float px[3];
        for (int64_t oy = 0; oy < out_size; oy++)
            for (int64_t ox = 0; ox < out_size; ox++) {
                double u = out_size == 1 ? 0.5 : (double)ox / (double)(out_size - 1);
                double v = out_size == 1 ? 0.5 : (double)oy / (double)(out_size - 1);
                double lx = (u - 0.5) * t.scale * ex;
                double ly = (v - 0.5) * t.scale * ey;
                double rx = c * lx - sn * ly, ry = sn * lx + c * ly;
                bilinear_rgb(src, ex / 2 + t.dx + rx, ey / 2 + t.dy + ry, px);
                for (int ch = 0; ch < 3; ch++)
                    frame[(ch * out_size + oy) * out_size + ox] = px[ch];
            }
        out.push_back(std::move(frame));
    }
    return out;
}

inline json schedule_to_json(const CropSchedule& s) {
    json j;
    j["pattern"] = s.pattern;
    j["frames"] = s.f;
    j["start_scale"] = s.start_scale;
    j["end_scale"] = s.end_scale;
    j["pan_dx"] = s.pan_dx;
    j["pan_dy"] = s.pan_dy;
    j["roll_degrees"] = s.roll_degrees;
    return j;
}

// Build a reference-clip set for motion personalization by augmenting
// held-out corpus clips with one pattern. Emits clip dirs + JSON sidecars.
inline CorpusManifest augment_corpus(const std::string& corpus_dir, const std::string& pattern,
                                     int64_t frames, int64_t count, uint64_t seed,
                                     const std::string& out_dir) {
    CorpusManifest src = read_corpus_manifest(corpus_dir);
    std::vector<const CorpusEntry*> held;
    for (auto& e : src.entries)
        if (e.split == "heldout") held.push_back(&e);
    VD_CHECK_CONFIG(!held.empty(), "augment: corpus has no held-out clips");
    std::filesystem::create_directories(out_dir);

    CropSchedule sched = make_pattern(pattern, frames);
    CorpusManifest m;
    m.root = out_dir;
    m.n = count;
    m.f = frames;
    m.seed = seed;
    uint64_t corpus_hash = 0xcbf29ce484222325ull;
    Rng rng(mix_seed(seed, "augment-" + pattern));
    char dirname[32];
    for (int64_t i = 0; i < count; i++) {
        const CorpusEntry& e = *held[rng.randint((int64_t)held.size())];
        std::vector<Tensor> frames_in = read_frames(corpus_dir + "/" + e.dir);
        auto transforms = schedule_crops(sched, frames_in[0].shape[2], frames_in[0].shape[1]);
        VideoClip clip;
        clip.frames = apply_schedule(frames_in, transforms);
        clip.caption = e.caption;
        std::snprintf(dirname, sizeof(dirname), "ref_%05lld", (long long)i);
        std::string dir = out_dir + "/" + dirname;
        std::filesystem::create_directories(dir);
        write_frames(dir, clip.frames);
        std::ofstream cap(dir + "/caption.txt");
        cap << clip.caption << "\n";
        json sidecar = schedule_to_json(sched);
        sidecar["source"] = e.dir;
        write_json_file(dir + "/schedule.json", sidecar);
        CorpusEntry oe;
        oe.dir = dirname;
        oe.caption = clip.caption;
        oe.split = "train";
        oe.hash = clip_content_hash(clip);
        corpus_hash = fnv1a64(&oe.hash, sizeof(oe.hash), corpus_hash);
        m.entries.push_back(oe);
    }
    m.corpus_hash = corpus_hash;
    json j;
    j["kind"] = "reference_clips";
    j["pattern"] = pattern;
    j["n"] = m.n;
    j["f"] = m.f;
    j["seed"] = m.seed;
    j["schedule"] = schedule_to_json(sched);
    j["corpus_hash"] = hash_hex(m.corpus_hash);
    json entries = json::array();
    for (auto& oe : m.entries) {
        json je;
        je["dir"] = oe.dir;
        je["caption"] = oe.caption;
        je["split"] = oe.split;
        je["hash"] = hash_hex(oe.hash);
        entries.push_back(je);
    }
    j["entries"] = entries;
    write_json_file(out_dir + "/manifest.json", j);
    return m;
}

}  // namespace vd

#endif
