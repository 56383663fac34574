#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace omnivid {

// Dense row-major tensor. Kept deliberately minimal: shape + flat storage.
template <typename T>
struct Tensor {
    std::vector<uint32_t> dims;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<uint32_t> d) : dims(std::move(d)) {
        data.assign(numel_of(dims), T(0));
    }
    Tensor(std::vector<uint32_t> d, std::vector<T> v) : dims(std::move(d)), data(std::move(v)) {
        if (data.size() != numel_of(dims))
            throw std::invalid_argument("tensor: payload size does not match dims");
    }

    static size_t numel_of(const std::vector<uint32_t>& d) {
        size_t n = 1;
        for (uint32_t x : d) n *= x;
        return n;
    }

    size_t numel() const { return data.size(); }
    size_t rank() const { return dims.size(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }

    // 2-D accessors; most model math lives on (rows, cols) views.
    uint32_t rows() const { return dims.at(0); }
    uint32_t cols() const { return dims.at(1); }
    T* row(size_t r) { return data.data() + r * dims.at(1); }
    const T* row(size_t r) const { return data.data() + r * dims.at(1); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(dims);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

inline std::string shape_str(const std::vector<uint32_t>& d) {
    std::string s = "(";
    for (size_t i = 0; i < d.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(d[i]);
    }
    return s + ")";
}

}  // namespace omnivid
