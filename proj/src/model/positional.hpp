#ifndef VDIFF_MODEL_POSITIONAL_HPP
#define VDIFF_MODEL_POSITIONAL_HPP

#include "core/tensor.hpp"

namespace vd {

// Standard sinusoidal table: PE(pos, 2i) = sin(pos / 10000^(2i/d)),
// PE(pos, 2i+1) = cos(pos / 10000^(2i/d)). Rows are positions.
template <typename T = float>
TensorT<T> sinusoidal_encoding(int64_t positions, int64_t d) {
    VD_CHECK_CONFIG(d % 2 == 0, "sinusoidal_encoding: dimension must be even, got " +
                                    std::to_string(d));
    VD_CHECK_CONFIG(positions >= 1, "sinusoidal_encoding: need at least one position");
    TensorT<T> pe({positions, d});
    for (int64_t pos = 0; pos < positions; pos++) {
        for (int64_t i = 0; i < d / 2; i++) {
            double freq = std::pow(10000.0, -2.0 * (double)i / (double)d);
            pe[pos * d + 2 * i] = T(std::sin(pos * freq));
            pe[pos * d + 2 * i + 1] = T(std::cos(pos * freq));
        }
    }
    return pe;
}

// single position as a (1, d) row; used for diffusion-step conditioning
template <typename T = float>
TensorT<T> sinusoidal_position_row(int64_t pos, int64_t d) {
    VD_CHECK_CONFIG(d % 2 == 0, "sinusoidal_position_row: dimension must be even");
    TensorT<T> pe({1, d});
    for (int64_t i = 0; i < d / 2; i++) {
        double freq = std::pow(10000.0, -2.0 * (double)i / (double)d);
        pe[2 * i] = T(std::sin(pos * freq));
        pe[2 * i + 1] = T(std::cos(pos * freq));
    }
    return pe;
}

}  // namespace vd

#endif
