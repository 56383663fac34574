#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "omnivid/tensor.hpp"

namespace omnivid {

constexpr int kPatchSize = 4;
constexpr int kVideoChannels = 3;

enum class GridRole : uint8_t {
    Target = 0,
    ConditionVideo = 1,
    ReferenceImage = 2,
    FirstFrame = 3,
    LastFrame = 4,
};

const char* grid_role_name(GridRole r);

// RGB video, values in [0,1], layout (frames, height, width, 3) row-major.
struct Video {
    uint32_t frames = 0, height = 0, width = 0;
    std::vector<float> data;

    Video() = default;
    Video(uint32_t f, uint32_t h, uint32_t w)
        : frames(f), height(h), width(w), data(size_t(f) * h * w * kVideoChannels, 0.0f) {}

    size_t numel() const { return data.size(); }
    float& at(uint32_t f, uint32_t y, uint32_t x, uint32_t c) {
        return data[((size_t(f) * height + y) * width + x) * kVideoChannels + c];
    }
    float at(uint32_t f, uint32_t y, uint32_t x, uint32_t c) const {
        return data[((size_t(f) * height + y) * width + x) * kVideoChannels + c];
    }

    Tensor<float> to_tensor() const { return Tensor<float>({frames, height, width, 3}, data); }
    static Video from_tensor(const Tensor<float>& t);
};

// Latent grid (f_l, h_l, w_l, c_l) with a role tag and a per-frame validity mask.
struct LatentGrid {
    uint32_t f = 0, h = 0, w = 0, c = 0;
    std::vector<float> data;
    GridRole role = GridRole::Target;
    std::vector<uint8_t> validity;  // length f

    LatentGrid() = default;
    LatentGrid(uint32_t f_, uint32_t h_, uint32_t w_, uint32_t c_, GridRole role_)
        : f(f_), h(h_), w(w_), c(c_), data(size_t(f_) * h_ * w_ * c_, 0.0f), role(role_),
          validity(f_, 1) {}

    size_t frame_size() const { return size_t(h) * w * c; }
    float* frame(uint32_t i) { return data.data() + i * frame_size(); }
    const float* frame(uint32_t i) const { return data.data() + i * frame_size(); }
    size_t numel() const { return data.size(); }
};

struct Segment {
    uint32_t begin = 0, end = 0;  // frame range [begin, end)
    GridRole role = GridRole::Target;
};

// Deterministic space-to-depth codec, patch size P. Lossless by construction:
// encode is a permutation of entries, decode its inverse.
LatentGrid encode(const Video& video, GridRole role, int patch = kPatchSize);
Video decode(const LatentGrid& latent, int patch = kPatchSize);

// Zero-fill a grid out to f_target frames; real frames keep validity=true,
// fill frames get validity=false.
enum class Placement { Front, Back, FrontAndBack };
LatentGrid unify_temporal_shape(const LatentGrid& grid, uint32_t f_target, Placement placement);

// Temporal concatenation of condition grids; returns per-source frame segments.
std::pair<LatentGrid, std::vector<Segment>> concat_conditions(const std::vector<LatentGrid>& conditions);

}  // namespace omnivid
