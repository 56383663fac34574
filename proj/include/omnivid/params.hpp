#pragma once

#include <map>
#include <string>

#include "omnivid/digest.hpp"
#include "omnivid/rng.hpp"
#include "omnivid/tensor.hpp"

namespace omnivid {

template <typename T>
using ParamMapT = std::map<std::string, Tensor<T>>;
using ParamMap = ParamMapT<float>;

template <typename T>
const Tensor<T>& pget(const ParamMapT<T>& p, const std::string& name) {
    auto it = p.find(name);
    if (it == p.end()) throw std::runtime_error("params: missing tensor '" + name + "'");
    return it->second;
}

template <typename T>
void init_normal(ParamMapT<T>& p, const std::string& name, std::vector<uint32_t> dims, Rng& rng,
                 double stddev) {
    Tensor<T> t(std::move(dims));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
    p[name] = std::move(t);
}

template <typename T>
void init_zeros(ParamMapT<T>& p, const std::string& name, std::vector<uint32_t> dims) {
    p[name] = Tensor<T>(std::move(dims));
}

// Accumulating gradient add: creates the slot on first touch.
template <typename T>
Tensor<T>& grad_slot(ParamMapT<T>& grads, const std::string& name,
                     const std::vector<uint32_t>& dims) {
    auto it = grads.find(name);
    if (it == grads.end()) it = grads.emplace(name, Tensor<T>(dims)).first;
    return it->second;
}

inline uint64_t tensor_digest(const Tensor<float>& t) {
    uint64_t h = fnv1a(t.dims.data(), t.dims.size() * sizeof(uint32_t));
    return fnv1a(t.data.data(), t.data.size() * sizeof(float), h);
}

// Digest over all tensors whose name starts with prefix (empty = all).
inline uint64_t params_digest(const ParamMap& p, const std::string& prefix = "") {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : p) {
        if (name.rfind(prefix, 0) != 0) continue;
        h = fnv1a_str(name, h);
        uint64_t d = tensor_digest(t);
        h = fnv1a(&d, sizeof(d), h);
    }
    return h;
}

template <typename U, typename T>
ParamMapT<U> cast_params(const ParamMapT<T>& p) {
    ParamMapT<U> out;
    for (const auto& [name, t] : p) out[name] = t.template cast<U>();
    return out;
}

}  // namespace omnivid
