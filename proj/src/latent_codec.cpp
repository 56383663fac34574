#include "omnivid/latent_codec.hpp"

#include <cstring>
#include <stdexcept>

namespace omnivid {

const char* grid_role_name(GridRole r) {
    switch (r) {
        case GridRole::Target: return "target";
        case GridRole::ConditionVideo: return "condition_video";
        case GridRole::ReferenceImage: return "reference_image";
        case GridRole::FirstFrame: return "first_frame";
        case GridRole::LastFrame: return "last_frame";
    }
    return "?";
}

Video Video::from_tensor(const Tensor<float>& t) {
    if (t.rank() != 4 || t.dims[3] != 3)
        throw std::runtime_error("video tensor must be rank 4 with 3 channels, got " +
                                 shape_str(t.dims));
    Video v(t.dims[0], t.dims[1], t.dims[2]);
    v.data = t.data;
    return v;
}

LatentGrid encode(const Video& video, GridRole role, int patch) {
    if (video.frames < 1) throw std::invalid_argument("encode: frames must be >= 1");
    if (video.height % patch != 0)
        throw std::invalid_argument("encode: height " + std::to_string(video.height) +
                                    " not divisible by patch size " + std::to_string(patch));
    if (video.width % patch != 0)
        throw std::invalid_argument("encode: width " + std::to_string(video.width) +
                                    " not divisible by patch size " + std::to_string(patch));

    uint32_t hl = video.height / patch;
    uint32_t wl = video.width / patch;
    uint32_t cl = kVideoChannels * patch * patch;
    LatentGrid g(video.frames, hl, wl, cl, role);

    // channel index = (py*P + px)*3 + ch
    for (uint32_t f = 0; f < video.frames; ++f)
        for (uint32_t y = 0; y < hl; ++y)
            for (uint32_t x = 0; x < wl; ++x) {
                float* cell = g.frame(f) + (size_t(y) * wl + x) * cl;
                for (int py = 0; py < patch; ++py)
                    for (int px = 0; px < patch; ++px)
                        for (int ch = 0; ch < kVideoChannels; ++ch)
                            cell[(py * patch + px) * kVideoChannels + ch] =
                                video.at(f, y * patch + py, x * patch + px, ch);
            }
    return g;
}

Video decode(const LatentGrid& latent, int patch) {
    uint32_t cl = kVideoChannels * patch * patch;
    if (latent.c != cl)
        throw std::invalid_argument("decode: channel count " + std::to_string(latent.c) +
                                    " incompatible with patch size " + std::to_string(patch) +
                                    " (want " + std::to_string(cl) + ")");
    Video v(latent.f, latent.h * patch, latent.w * patch);
    for (uint32_t f = 0; f < latent.f; ++f)
        for (uint32_t y = 0; y < latent.h; ++y)
            for (uint32_t x = 0; x < latent.w; ++x) {
                const float* cell = latent.frame(f) + (size_t(y) * latent.w + x) * cl;
                for (int py = 0; py < patch; ++py)
                    for (int px = 0; px < patch; ++px)
                        for (int ch = 0; ch < kVideoChannels; ++ch)
                            v.at(f, y * patch + py, x * patch + px, ch) =
                                cell[(py * patch + px) * kVideoChannels + ch];
            }
    return v;
}

LatentGrid unify_temporal_shape(const LatentGrid& grid, uint32_t f_target, Placement placement) {
    if (grid.f > f_target)
        throw std::invalid_argument("unify_temporal_shape: grid has " + std::to_string(grid.f) +
                                    " frames, more than target " + std::to_string(f_target));
    if (placement == Placement::FrontAndBack && grid.f != 2)
        throw std::invalid_argument(
            "unify_temporal_shape: front_and_back placement needs exactly 2 frames (first,last)");

    LatentGrid out(f_target, grid.h, grid.w, grid.c, grid.role);
    std::fill(out.validity.begin(), out.validity.end(), 0);

    auto place = [&](uint32_t src, uint32_t dst) {
        std::memcpy(out.frame(dst), grid.frame(src), grid.frame_size() * sizeof(float));
        out.validity[dst] = grid.validity[src];
    };

    switch (placement) {
        case Placement::Front:
            for (uint32_t i = 0; i < grid.f; ++i) place(i, i);
            break;
        case Placement::Back:
            for (uint32_t i = 0; i < grid.f; ++i) place(i, f_target - grid.f + i);
            break;
        case Placement::FrontAndBack:
            place(0, 0);
            place(1, f_target - 1);
            break;
    }
    return out;
}

std::pair<LatentGrid, std::vector<Segment>> concat_conditions(
    const std::vector<LatentGrid>& conditions) {
    if (conditions.empty()) throw std::invalid_argument("concat_conditions: no inputs");
    const LatentGrid& first = conditions.front();
    uint32_t total = 0;
    for (const auto& g : conditions) {
        if (g.h != first.h || g.w != first.w || g.c != first.c)
            throw std::invalid_argument("concat_conditions: shape mismatch, " + shape_str({g.h, g.w, g.c}) +
                                        " vs " + shape_str({first.h, first.w, first.c}));
        total += g.f;
    }

    LatentGrid out(total, first.h, first.w, first.c, first.role);
    std::vector<Segment> segments;
    uint32_t at = 0;
    for (const auto& g : conditions) {
        std::memcpy(out.frame(at), g.data.data(), g.numel() * sizeof(float));
        for (uint32_t i = 0; i < g.f; ++i) out.validity[at + i] = g.validity[i];
        segments.push_back({at, at + g.f, g.role});
        at += g.f;
    }
    return {std::move(out), std::move(segments)};
}

}  // namespace omnivid
