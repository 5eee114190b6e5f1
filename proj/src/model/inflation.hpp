#ifndef VDIFF_MODEL_INFLATION_HPP
#define VDIFF_MODEL_INFLATION_HPP

#include "core/tensor.hpp"

namespace vd {

// Reshape contracts that let a 2D image model process video tensors
// (b, c, f, h, w): image layers fold the frame axis into the batch axis,
// temporal layers fold the spatial axes into the batch axis.

struct FrameToken {
    int64_t b, f;
};
struct SpaceToken {
    int64_t b, h, w;
};

// (b,c,f,h,w) -> (b*f, c, h, w); frame k of batch j lands at row j*f + k
template <typename T>
std::pair<TensorT<T>, FrameToken> merge_frames_into_batch(const TensorT<T>& v) {
    VD_CHECK_CONTRACT(v.ndim() == 5, "merge_frames: expects (b,c,f,h,w)");
    int64_t b = v.shape[0], c = v.shape[1], f = v.shape[2], h = v.shape[3], w = v.shape[4];
    TensorT<T> out({b * f, c, h, w});
    int64_t hw = h * w;
    for (int64_t j = 0; j < b; j++)
        for (int64_t ci = 0; ci < c; ci++)
            for (int64_t k = 0; k < f; k++)
                std::memcpy(out.data() + (((j * f + k) * c + ci) * hw),
                            v.data() + (((j * c + ci) * f + k) * hw), sizeof(T) * hw);
    return {std::move(out), FrameToken{b, f}};
}

template <typename T>
TensorT<T> split_frames_from_batch(const TensorT<T>& x, FrameToken tok) {
    VD_CHECK_CONTRACT(x.ndim() == 4 && x.shape[0] == tok.b * tok.f,
                      "split_frames: leading axis " + std::to_string(x.shape[0]) +
                          " does not match token b*f = " + std::to_string(tok.b * tok.f));
    int64_t c = x.shape[1], h = x.shape[2], w = x.shape[3], hw = h * w;
    TensorT<T> out({tok.b, c, tok.f, h, w});
    for (int64_t j = 0; j < tok.b; j++)
        for (int64_t ci = 0; ci < c; ci++)
            for (int64_t k = 0; k < tok.f; k++)
                std::memcpy(out.data() + (((j * c + ci) * tok.f + k) * hw),
                            x.data() + (((j * tok.f + k) * c + ci) * hw), sizeof(T) * hw);
    return out;
}

// (b,c,f,h,w) -> ((b*h*w), f, c); each spatial location becomes an
// independent length-f sequence of c-dim vectors
template <typename T>
std::pair<TensorT<T>, SpaceToken> merge_space_into_batch(const TensorT<T>& v) {
    VD_CHECK_CONTRACT(v.ndim() == 5, "merge_space: expects (b,c,f,h,w)");
    int64_t b = v.shape[0], c = v.shape[1], f = v.shape[2], h = v.shape[3], w = v.shape[4];
    TensorT<T> out({b * h * w, f, c});
    for (int64_t j = 0; j < b; j++)
        for (int64_t ci = 0; ci < c; ci++)
            for (int64_t k = 0; k < f; k++) {
                const T* src = v.data() + ((j * c + ci) * f + k) * h * w;
                for (int64_t p = 0; p < h * w; p++)
                    out[((j * h * w + p) * f + k) * c + ci] = src[p];
            }
    return {std::move(out), SpaceToken{b, h, w}};
}

template <typename T>
TensorT<T> split_space_from_batch(const TensorT<T>& x, SpaceToken tok) {
    VD_CHECK_CONTRACT(x.ndim() == 3 && x.shape[0] == tok.b * tok.h * tok.w,
                      "split_space: leading axis does not match token b*h*w");
    int64_t f = x.shape[1], c = x.shape[2], hw = tok.h * tok.w;
    TensorT<T> out({tok.b, c, f, tok.h, tok.w});
    for (int64_t j = 0; j < tok.b; j++)
        for (int64_t ci = 0; ci < c; ci++)
            for (int64_t k = 0; k < f; k++) {
                T* dst = out.data() + ((j * c + ci) * f + k) * hw;
                for (int64_t p = 0; p < hw; p++) dst[p] = x[((j * hw + p) * f + k) * c + ci];
            }
    return out;
}

// graph-side equivalents (same index maps, via permute/reshape)

// (b,c,f,h,w) -> (b*f,c,h,w)
template <typename T>
VarT<T>* g_merge_frames(GraphT<T>& g, VarT<T>* v) {
    const Shape& s = v->shape();
    VD_CHECK_CONTRACT(s.size() == 5, "g_merge_frames: expects 5D");
    auto* x = g.permute(v, {0, 2, 1, 3, 4});  // (b,f,c,h,w)
    return g.reshape(x, {s[0] * s[2], s[1], s[3], s[4]});
}

// (b*f,c,h,w) -> (b,c,f,h,w)
template <typename T>
VarT<T>* g_split_frames(GraphT<T>& g, VarT<T>* x, FrameToken tok) {
    const Shape& s = x->shape();
    auto* v = g.reshape(x, {tok.b, tok.f, s[1], s[2], s[3]});
    return g.permute(v, {0, 2, 1, 3, 4});
}

// (b,c,f,h,w) -> ((b*h*w), f, c)
template <typename T>
VarT<T>* g_merge_space(GraphT<T>& g, VarT<T>* v) {
    const Shape& s = v->shape();
    VD_CHECK_CONTRACT(s.size() == 5, "g_merge_space: expects 5D");
    auto* x = g.permute(v, {0, 3, 4, 2, 1});  // (b,h,w,f,c)
    return g.reshape(x, {s[0] * s[3] * s[4], s[2], s[1]});
}

// ((b*h*w), f, c) -> (b,c,f,h,w)
template <typename T>
VarT<T>* g_split_space(GraphT<T>& g, VarT<T>* x, SpaceToken tok) {
    const Shape& s = x->shape();
    auto* v = g.reshape(x, {tok.b, tok.h, tok.w, s[1], s[2]});
    return g.permute(v, {0, 4, 3, 1, 2});
}

}  // namespace vd

#endif
