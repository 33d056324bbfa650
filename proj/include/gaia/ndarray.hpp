#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "gaia/common.hpp"

namespace gaia {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major n-d array. float32 is the on-disk and clip dtype, double is
// the nn compute dtype; both share this container.
template <typename T>
struct NDArray {
    Shape shape;
    std::vector<T> data;

    NDArray() = default;
    explicit NDArray(Shape s) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), T(0)) {}
    NDArray(Shape s, T fill) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {}
    NDArray(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != shape_numel(shape))
            throw DomainError("NDArray: data size does not match shape " + shape_str(shape));
    }

    static NDArray zeros(Shape s) { return NDArray(std::move(s)); }
    static NDArray full(Shape s, T v) { return NDArray(std::move(s), v); }
    static NDArray scalar(T v) { return NDArray(Shape{}, std::vector<T>{v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // Variadic row-major index.
    template <typename... Ix>
    T& at(Ix... ix) {
        return data[static_cast<size_t>(offset_of({static_cast<int64_t>(ix)...}))];
    }
    template <typename... Ix>
    const T& at(Ix... ix) const {
        return data[static_cast<size_t>(offset_of({static_cast<int64_t>(ix)...}))];
    }

    int64_t offset_of(std::initializer_list<int64_t> ix) const {
        if (static_cast<int>(ix.size()) != ndim())
            throw DomainError("NDArray::at: rank mismatch for shape " + shape_str(shape));
        int64_t off = 0;
        int i = 0;
        for (int64_t v : ix) {
            off = off * shape[static_cast<size_t>(i)] + v;
            ++i;
        }
        return off;
    }

    NDArray reshaped(Shape s) const {
        if (shape_numel(s) != numel())
            throw DomainError("NDArray::reshaped: numel mismatch " + shape_str(shape) + " -> " + shape_str(s));
        NDArray out;
        out.shape = std::move(s);
        out.data = data;
        return out;
    }

    bool same_shape(const NDArray& o) const { return shape == o.shape; }

    template <typename U>
    NDArray<U> cast() const {
        NDArray<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Arr = NDArray<double>;
using ArrF = NDArray<float>;

inline Arr randn(Shape s, std::mt19937_64& rng, double stddev = 1.0) {
    Arr out(std::move(s));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : out.data) v = dist(rng);
    return out;
}

inline Arr rand_uniform(Shape s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    Arr out(std::move(s));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : out.data) v = dist(rng);
    return out;
}

}  // namespace gaia
