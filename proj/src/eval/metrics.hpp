#ifndef VDIFF_EVAL_METRICS_HPP
#define VDIFF_EVAL_METRICS_HPP

#include "data/datagen.hpp"
#include "model/autoencoder.hpp"

namespace vd {

inline double cosine(const Tensor& a, const Tensor& b) {
    double dot = 0, na = 0, nb = 0;
    for (int64_t i = 0; i < a.numel(); i++) {
        dot += (double)a[i] * b[i];
        na += (double)a[i] * a[i];
        nb += (double)b[i] * b[i];
    }
    double d = std::sqrt(na) * std::sqrt(nb);
    return d < 1e-20 ? 0.0 : dot / d;
}

// 100 x mean cosine similarity of consecutive-frame embeddings
inline double smoothness_score(const std::vector<Tensor>& frames, const Autoencoder& emb) {
    VD_CHECK_CONTRACT(frames.size() >= 2, "smoothness_score: need at least 2 frames");
    std::vector<Tensor> e;
    for (auto& f : frames) e.push_back(emb.embed(f));
    double acc = 0;
    for (size_t i = 0; i + 1 < e.size(); i++) acc += cosine(e[i], e[i + 1]);
    return 100.0 * acc / (double)(e.size() - 1);
}

// 100 x mean over frames of the best cosine against the reference set
inline double domain_similarity(const std::vector<Tensor>& frames,
                                const std::vector<Tensor>& refs, const Autoencoder& emb) {
    VD_CHECK_CONTRACT(!refs.empty(), "domain_similarity: empty reference set");
    VD_CHECK_CONTRACT(!frames.empty(), "domain_similarity: empty clip");
    std::vector<Tensor> re;
    for (auto& r : refs) re.push_back(emb.embed(r));
    double acc = 0;
    for (auto& f : frames) {
        Tensor e = emb.embed(f);
        double best = -1.0;
        for (auto& r : re) best = std::max(best, cosine(e, r));
        acc += best;
    }
    return 100.0 * acc / (double)frames.size();
}

// normalized cross-correlation of the bottom-right 8x8 patch (channel mean)
// against the binary glyph; zero-variance patches score 0
inline double watermark_score(const Tensor& img) {
    VD_CHECK_CONTRACT(img.ndim() == 3 && img.shape[1] >= kWatermarkSize &&
                          img.shape[2] >= kWatermarkSize,
                      "watermark_score: image too small");
    const auto& g = watermark_glyph();
    int64_t h = img.shape[1], w = img.shape[2];
    const int64_t n = kWatermarkSize * kWatermarkSize;
    double pm = 0, gm = 0;
    std::array<double, 64> patch;
    for (int64_t y = 0; y < kWatermarkSize; y++)
        for (int64_t x = 0; x < kWatermarkSize; x++) {
            int64_t iy = h - kWatermarkSize + y, ix = w - kWatermarkSize + x;
            double v = 0;
            for (int c = 0; c < 3; c++) v += img[(c * h + iy) * w + ix];
            patch[y * kWatermarkSize + x] = v / 3.0;
            pm += v / 3.0;
            gm += g[y * kWatermarkSize + x];
        }
    pm /= n;
    gm /= n;
    double cov = 0, vp = 0, vg = 0;
    for (int64_t i = 0; i < n; i++) {
        double dp = patch[i] - pm, dg = g[i] - gm;
        cov += dp * dg;
        vp += dp * dp;
        vg += dg * dg;
    }
    if (vp < 1e-9 || vg < 1e-9) return 0.0;
    return cov / (std::sqrt(vp) * std::sqrt(vg));
}

inline double watermark_score_clip(const std::vector<Tensor>& frames) {
    double acc = 0;
    for (auto& f : frames) acc += watermark_score(f);
    return acc / (double)frames.size();
}

// Coarse block-matching optical flow: 4x4 blocks, +-3 px search, consecutive
// frames. SAD runs on integer-quantized intensity so scores are exact; among
// tied displacements the smallest magnitude wins, and a +-d ambiguity on an
// axis resolves to 0. That keeps the stats exactly antisymmetric under
// horizontal mirroring.
struct FlowStats {
    double mean_dx = 0, mean_dy = 0, divergence = 0, curl = 0;
};

namespace flow_detail {

constexpr int kBlock = 4;
constexpr int kSearch = 3;

inline std::vector<int> gray_int(const Tensor& img) {
    int64_t h = img.shape[1], w = img.shape[2];
    std::vector<int> g(h * w);
    for (int64_t i = 0; i < h * w; i++) {
        double v = img[i] + img[h * w + i] + img[2 * h * w + i];
        g[i] = (int)std::lround(v * 255.0);
    }
    return g;
}

}  // namespace flow_detail

inline FlowStats flow_motion_stats(const std::vector<Tensor>& frames) {
    using namespace flow_detail;
    VD_CHECK_CONTRACT(frames.size() >= 2, "flow_motion_stats: need at least 2 frames");
    int64_t h = frames[0].shape[1], w = frames[0].shape[2];
    int64_t gh = h / kBlock, gw = w / kBlock;
    VD_CHECK_CONTRACT(gh >= 3 && gw >= 3, "flow_motion_stats: image too small for 4x4 blocks");

    double sum_dx = 0, sum_dy = 0, sum_div = 0, sum_curl = 0;
    int64_t n_cells = 0, n_grad = 0;
    std::vector<double> fdx(gh * gw), fdy(gh * gw);

    for (size_t k = 0; k + 1 < frames.size(); k++) {
        std::vector<int> prev = gray_int(frames[k]);
        std::vector<int> next = gray_int(frames[k + 1]);
        for (int64_t by = 0; by < gh; by++)
            for (int64_t bx = 0; bx < gw; bx++) {
                int64_t y0 = by * kBlock, x0 = bx * kBlock;
                long best = -1;
                // pass 1: best SAD
                for (int dy = -kSearch; dy <= kSearch; dy++)
                    for (int dx = -kSearch; dx <= kSearch; dx++) {
                        int64_t ny = y0 + dy, nx = x0 + dx;
                        if (ny < 0 || nx < 0 || ny + kBlock > h || nx + kBlock > w) continue;
                        long sad = 0;
                        for (int yy = 0; yy < kBlock; yy++)
                            for (int xx = 0; xx < kBlock; xx++)
                                sad += std::abs(prev[(y0 + yy) * w + x0 + xx] -
                                                next[(ny + yy) * w + nx + xx]);
                        if (best < 0 || sad < best) best = sad;
                    }
                // pass 2: smallest-displacement minimizers
                int bestmag = 1 << 20;
                std::vector<std::pair<int, int>> cands;
                for (int dy = -kSearch; dy <= kSearch; dy++)
                    for (int dx = -kSearch; dx <= kSearch; dx++) {
                        int64_t ny = y0 + dy, nx = x0 + dx;
                        if (ny < 0 || nx < 0 || ny + kBlock > h || nx + kBlock > w) continue;
                        long sad = 0;
                        for (int yy = 0; yy < kBlock; yy++)
                            for (int xx = 0; xx < kBlock; xx++)
                                sad += std::abs(prev[(y0 + yy) * w + x0 + xx] -
                                                next[(ny + yy) * w + nx + xx]);
                        if (sad != best) continue;
                        int mag = std::abs(dx) + std::abs(dy);
                        if (mag < bestmag) {
                            bestmag = mag;
                            cands.clear();
                        }
                        if (mag == bestmag) cands.push_back({dx, dy});
                    }
                bool pos_x = false, neg_x = false, pos_y = false, neg_y = false;
                int vx = 0, vy = 0;
                for (auto [dx, dy] : cands) {
                    (dx > 0 ? pos_x : neg_x) |= dx != 0;
                    (dy > 0 ? pos_y : neg_y) |= dy != 0;
                    vx = dx;
                    vy = dy;
                }
                double out_dx = (pos_x && neg_x) ? 0.0 : (double)vx;
                double out_dy = (pos_y && neg_y) ? 0.0 : (double)vy;
                fdx[by * gw + bx] = out_dx;
                fdy[by * gw + bx] = out_dy;
                sum_dx += out_dx;
                sum_dy += out_dy;
                n_cells++;
            }
        // central differences over the block grid (spacing = kBlock px)
        for (int64_t by = 1; by + 1 < gh; by++)
            for (int64_t bx = 1; bx + 1 < gw; bx++) {
                double ddx_dx = (fdx[by * gw + bx + 1] - fdx[by * gw + bx - 1]) / (2.0 * kBlock);
                double ddy_dy = (fdy[(by + 1) * gw + bx] - fdy[(by - 1) * gw + bx]) / (2.0 * kBlock);
                double ddy_dx = (fdy[by * gw + bx + 1] - fdy[by * gw + bx - 1]) / (2.0 * kBlock);
                double ddx_dy = (fdx[(by + 1) * gw + bx] - fdx[(by - 1) * gw + bx]) / (2.0 * kBlock);
                sum_div += ddx_dx + ddy_dy;
                sum_curl += ddy_dx - ddx_dy;
                n_grad++;
            }
    }
    FlowStats s;
    s.mean_dx = sum_dx / (double)n_cells;
    s.mean_dy = sum_dy / (double)n_cells;
    s.divergence = sum_div / (double)n_grad;
    s.curl = sum_curl / (double)n_grad;
    return s;
}

// rank-based AUC (Mann-Whitney), ties count half
inline double auc_score(const std::vector<double>& positives, const std::vector<double>& negatives) {
    VD_CHECK_CONTRACT(!positives.empty() && !negatives.empty(), "auc: empty sample");
    double wins = 0;
    for (double p : positives)
        for (double n : negatives) wins += p > n ? 1.0 : p == n ? 0.5 : 0.0;
    return wins / ((double)positives.size() * (double)negatives.size());
}

struct BootstrapCI {
    double mean = 0, lo = 0, hi = 0;
};

// seed-fixed percentile bootstrap over the sample mean
inline BootstrapCI bootstrap_ci(const std::vector<double>& values, int64_t resamples,
                                uint64_t seed) {
    VD_CHECK_CONTRACT(!values.empty(), "bootstrap_ci: empty sample");
    BootstrapCI out;
    for (double v : values) out.mean += v;
    out.mean /= (double)values.size();
    Rng rng(seed);
    std::vector<double> means(resamples);
    for (int64_t r = 0; r < resamples; r++) {
        double acc = 0;
        for (size_t i = 0; i < values.size(); i++)
            acc += values[rng.randint((int64_t)values.size())];
        means[r] = acc / (double)values.size();
    }
    std::sort(means.begin(), means.end());
    out.lo = means[(size_t)((double)(resamples - 1) * 0.025)];
    out.hi = means[(size_t)((double)(resamples - 1) * 0.975)];
    return out;
}

}  // namespace vd

#endif
