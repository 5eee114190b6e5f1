#ifndef VDIFF_CORE_TENSOR_HPP
#define VDIFF_CORE_TENSOR_HPP

#include <algorithm>
#include <cstring>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include "core/common.hpp"

namespace vd {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); i++) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

// Dense contiguous tensor, row-major, last axis fastest. Copies are shallow
// (shared storage); ops that write allocate fresh storage.
template <typename T>
struct TensorT {
    Shape shape;
    std::shared_ptr<std::vector<T>> storage;

    TensorT() = default;
    explicit TensorT(Shape s)
        : shape(std::move(s)),
          storage(std::make_shared<std::vector<T>>(shape_numel(shape), T(0))) {
        for (int64_t d : shape)
            VD_CHECK_CONTRACT(d >= 1, "tensor axis sizes must be >= 1, got " + shape_str(shape));
    }

    int64_t numel() const { return storage ? static_cast<int64_t>(storage->size()) : 0; }
    int ndim() const { return static_cast<int>(shape.size()); }
    bool defined() const { return static_cast<bool>(storage); }

    T* data() { return storage->data(); }
    const T* data() const { return storage->data(); }

    T& operator[](int64_t i) { return (*storage)[i]; }
    const T& operator[](int64_t i) const { return (*storage)[i]; }

    T& at(std::initializer_list<int64_t> idx) {
        return (*storage)[flat_index(idx)];
    }
    const T& at(std::initializer_list<int64_t> idx) const {
        return (*storage)[flat_index(idx)];
    }

    int64_t flat_index(std::initializer_list<int64_t> idx) const {
        VD_CHECK_CONTRACT(idx.size() == shape.size(), "index rank mismatch");
        int64_t flat = 0;
        size_t k = 0;
        for (int64_t i : idx) {
            flat = flat * shape[k] + i;
            k++;
        }
        return flat;
    }

    // shares storage, new shape
    TensorT view(Shape s) const {
        VD_CHECK_CONTRACT(shape_numel(s) == numel(),
                          "view numel mismatch: " + shape_str(shape) + " -> " + shape_str(s));
        TensorT t;
        t.shape = std::move(s);
        t.storage = storage;
        return t;
    }

    TensorT clone() const {
        TensorT t;
        t.shape = shape;
        t.storage = std::make_shared<std::vector<T>>(*storage);
        return t;
    }

    void fill(T v) { std::fill(storage->begin(), storage->end(), v); }

    bool all_finite() const {
        for (T v : *storage)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    uint64_t byte_hash() const {
        return fnv1a64(storage->data(), storage->size() * sizeof(T));
    }

    static TensorT zeros(Shape s) { return TensorT(std::move(s)); }

    static TensorT full(Shape s, T v) {
        TensorT t(std::move(s));
        t.fill(v);
        return t;
    }

    static TensorT randn(Shape s, Rng& rng, T stddev = T(1)) {
        TensorT t(std::move(s));
        for (auto& v : *t.storage) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    static TensorT uniform(Shape s, Rng& rng, T lo, T hi) {
        TensorT t(std::move(s));
        for (auto& v : *t.storage) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    static TensorT from_vec(Shape s, std::vector<T> vals) {
        VD_CHECK_CONTRACT(shape_numel(s) == static_cast<int64_t>(vals.size()),
                          "from_vec size mismatch");
        TensorT t;
        t.shape = std::move(s);
        t.storage = std::make_shared<std::vector<T>>(std::move(vals));
        return t;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> t;
        t.shape = shape;
        t.storage = std::make_shared<std::vector<U>>(numel());
        for (int64_t i = 0; i < numel(); i++) (*t.storage)[i] = static_cast<U>((*storage)[i]);
        return t;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename T>
inline double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
    VD_CHECK_CONTRACT(a.numel() == b.numel(), "max_abs_diff: size mismatch");
    double m = 0;
    for (int64_t i = 0; i < a.numel(); i++)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace vd

#endif
