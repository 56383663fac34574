#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "omnivid/latent_codec.hpp"
#include "omnivid/task.hpp"

namespace omnivid {

// Latent-grid coordinate of a token, (time, height, width).
struct Position3 {
    int64_t t = 0, h = 0, w = 0;
    bool operator==(const Position3&) const = default;
};

// Constant coordinate shift applied to a whole condition grid before rotation.
struct Offset3 {
    int64_t dt = 0, dh = 0, dw = 0;
    bool operator==(const Offset3&) const = default;
};

inline Position3 operator+(Position3 p, Offset3 d) { return {p.t + d.dt, p.h + d.dh, p.w + d.dw}; }

struct RopeConfig {
    int head_dim = 32;
    // rotation-pair split across axes; n_t + n_h + n_w must equal head_dim/2
    int n_t = 4, n_h = 6, n_w = 6;
    double base = 10000.0;

    void check() const {
        if (head_dim % 2 != 0) throw std::invalid_argument("rope: head_dim must be even");
        if (n_t + n_h + n_w != head_dim / 2)
            throw std::invalid_argument("rope: axis split must sum to head_dim/2");
    }
};

// Row-major (t outer, then h, then w) enumeration of grid positions, shifted by offset.
std::vector<Position3> build_position_grid(uint32_t f_l, uint32_t h_l, uint32_t w_l, Offset3 offset);

// head_dim/2 rotation angles for one position: first n_t from t, then n_h from h,
// then n_w from w; within an axis block of size n, theta_i = base^(-i/n).
template <typename T>
void angles(Position3 pos, const RopeConfig& cfg, T* out) {
    int k = 0;
    auto block = [&](int n, int64_t coord) {
        for (int i = 0; i < n; ++i) {
            double theta = std::pow(cfg.base, -double(i) / double(n));
            out[k++] = static_cast<T>(double(coord) * theta);
        }
    };
    block(cfg.n_t, pos.t);
    block(cfg.n_h, pos.h);
    block(cfg.n_w, pos.w);
}

std::vector<double> angles(Position3 pos, const RopeConfig& cfg);

// In-place planar rotation of consecutive pairs (x_{2i}, x_{2i+1}) by angle_seq[i].
// sign=-1 applies the inverse rotation (used by the backward pass).
template <typename T>
void apply_rope(std::span<T> vec, std::span<const T> angle_seq, int sign = 1) {
    if (vec.size() != 2 * angle_seq.size())
        throw std::invalid_argument("apply_rope: vector length must be twice the angle count");
    for (size_t i = 0; i < angle_seq.size(); ++i) {
        T c = std::cos(angle_seq[i]);
        T s = std::sin(angle_seq[i]) * T(sign);
        T x = vec[2 * i], y = vec[2 * i + 1];
        vec[2 * i] = x * c - y * s;
        vec[2 * i + 1] = x * s + y * c;
    }
}

// Per-task positional offset for a condition role relative to a target grid of
// shape (f_tar, h_tar, w_tar). Target tokens always sit at (0,0,0).
Offset3 offset_policy(TaskKind task, GridRole role, uint32_t f_tar, uint32_t h_tar, uint32_t w_tar);

}  // namespace omnivid
