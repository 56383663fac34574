#include "omnivid/rope3d.hpp"

namespace omnivid {

std::vector<Position3> build_position_grid(uint32_t f_l, uint32_t h_l, uint32_t w_l, Offset3 offset) {
    std::vector<Position3> out;
    out.reserve(size_t(f_l) * h_l * w_l);
    for (uint32_t t = 0; t < f_l; ++t)
        for (uint32_t h = 0; h < h_l; ++h)
            for (uint32_t w = 0; w < w_l; ++w)
                out.push_back(Position3{int64_t(t), int64_t(h), int64_t(w)} + offset);
    return out;
}

std::vector<double> angles(Position3 pos, const RopeConfig& cfg) {
    cfg.check();
    std::vector<double> out(cfg.head_dim / 2);
    angles<double>(pos, cfg, out.data());
    return out;
}

Offset3 offset_policy(TaskKind task, GridRole role, uint32_t f_tar, uint32_t /*h_tar*/,
                      uint32_t w_tar) {
    if (role == GridRole::Target) return {0, 0, 0};

    switch (task) {
        case TaskKind::T2V:
            break;  // no visual conditions
        case TaskKind::I2V:
            // image condition anchors the first target frame; standard 3D RoPE
            if (role == GridRole::FirstFrame) return {0, 0, 0};
            break;
        case TaskKind::FLF2V:
            if (role == GridRole::FirstFrame || role == GridRole::LastFrame) return {0, 0, 0};
            break;
        case TaskKind::InContextGen:
            if (role == GridRole::ConditionVideo) return {0, 0, int64_t(w_tar)};
            if (role == GridRole::ReferenceImage) return {int64_t(f_tar) + 1, 0, 0};
            break;
        case TaskKind::InContextEdit:
            if (role == GridRole::ConditionVideo) return {0, 0, int64_t(w_tar)};
            // reference-conditioned editing (task override); same temporal shift
            if (role == GridRole::ReferenceImage) return {int64_t(f_tar) + 1, 0, 0};
            break;
    }
    throw std::invalid_argument(std::string("offset_policy: no entry for task ") + task_name(task) +
                                " with role " + grid_role_name(role));
}

}  // namespace omnivid
