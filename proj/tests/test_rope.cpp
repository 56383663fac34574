#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "omnivid/rng.hpp"
#include "omnivid/rope3d.hpp"

using namespace omnivid;

namespace {

const RopeConfig kCfg{32, 4, 6, 6, 10000.0};

std::vector<double> random_vec(Rng& rng, int n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

std::vector<double> rotated(const std::vector<double>& v, Position3 p) {
    std::vector<double> a(kCfg.head_dim / 2), out = v;
    angles<double>(p, kCfg, a.data());
    apply_rope<double>(out, a);
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

TEST_CASE("rotation preserves the Euclidean norm") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        auto v = random_vec(rng, kCfg.head_dim);
        Position3 p{int64_t(rng.below(64)), int64_t(rng.below(64)), int64_t(rng.below(64))};
        CHECK(std::fabs(norm(rotated(v, p)) - norm(v)) <= 1e-6 * std::max(1.0, norm(v)));
    }
}

TEST_CASE("attention logits are invariant under a shared position shift") {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        auto q = random_vec(rng, kCfg.head_dim);
        auto k = random_vec(rng, kCfg.head_dim);
        Position3 p1{int64_t(rng.below(32)), int64_t(rng.below(32)), int64_t(rng.below(32))};
        Position3 p2{int64_t(rng.below(32)), int64_t(rng.below(32)), int64_t(rng.below(32))};
        Offset3 shift{int64_t(rng.below(64)) - 32, int64_t(rng.below(64)) - 32,
                      int64_t(rng.below(64)) - 32};
        double base = dot(rotated(q, p1), rotated(k, p2));
        double moved = dot(rotated(q, p1 + shift), rotated(k, p2 + shift));
        CHECK(std::fabs(base - moved) <= 1e-5 * std::max(1.0, std::fabs(base)));
    }
}

TEST_CASE("sign=-1 inverts the rotation exactly") {
    Rng rng(7);
    auto v = random_vec(rng, kCfg.head_dim);
    Position3 p{3, 14, 15};
    std::vector<double> a(kCfg.head_dim / 2);
    angles<double>(p, kCfg, a.data());
    auto w = v;
    apply_rope<double>(w, a, 1);
    apply_rope<double>(w, a, -1);
    for (int i = 0; i < kCfg.head_dim; ++i) CHECK(w[i] == doctest::Approx(v[i]).epsilon(1e-12));
}

TEST_CASE("angle layout: axis blocks with per-block frequency decay") {
    std::vector<double> a = angles(Position3{1, 1, 1}, kCfg);
    REQUIRE(int(a.size()) == kCfg.head_dim / 2);
    // first angle of each block is base^0 * coord = 1
    CHECK(a[0] == doctest::Approx(1.0));
    CHECK(a[kCfg.n_t] == doctest::Approx(1.0));
    CHECK(a[kCfg.n_t + kCfg.n_h] == doctest::Approx(1.0));
    // within a block, frequencies strictly decay
    for (int i = 1; i < kCfg.n_t; ++i) CHECK(a[i] < a[i - 1]);
    std::vector<double> b = angles(Position3{2, 0, 0}, kCfg);
    for (int i = 0; i < kCfg.n_t; ++i) CHECK(b[i] == doctest::Approx(2 * a[i]));
    for (int i = kCfg.n_t; i < kCfg.head_dim / 2; ++i) CHECK(b[i] == 0.0);
}

TEST_CASE("offset policy matches the per-task table") {
    uint32_t f = 4, h = 4, w = 4;
    for (int t = 0; t < kNumTasks; ++t)
        CHECK(offset_policy(static_cast<TaskKind>(t), GridRole::Target, f, h, w) == Offset3{0, 0, 0});

    CHECK(offset_policy(TaskKind::I2V, GridRole::FirstFrame, f, h, w) == Offset3{0, 0, 0});
    CHECK(offset_policy(TaskKind::FLF2V, GridRole::FirstFrame, f, h, w) == Offset3{0, 0, 0});
    CHECK(offset_policy(TaskKind::FLF2V, GridRole::LastFrame, f, h, w) == Offset3{0, 0, 0});
    CHECK(offset_policy(TaskKind::InContextGen, GridRole::ConditionVideo, f, h, w) ==
          Offset3{0, 0, int64_t(w)});
    CHECK(offset_policy(TaskKind::InContextGen, GridRole::ReferenceImage, f, h, w) ==
          Offset3{int64_t(f) + 1, 0, 0});
    CHECK(offset_policy(TaskKind::InContextEdit, GridRole::ConditionVideo, f, h, w) ==
          Offset3{0, 0, int64_t(w)});
    CHECK(offset_policy(TaskKind::InContextEdit, GridRole::ReferenceImage, f, h, w) ==
          Offset3{int64_t(f) + 1, 0, 0});

    CHECK_THROWS(offset_policy(TaskKind::T2V, GridRole::ConditionVideo, f, h, w));
    CHECK_THROWS(offset_policy(TaskKind::I2V, GridRole::LastFrame, f, h, w));
    CHECK_THROWS(offset_policy(TaskKind::FLF2V, GridRole::ReferenceImage, f, h, w));
}

TEST_CASE("shifted condition grids are positionally disjoint from the target") {
    uint32_t f = 4, h = 4, w = 4;
    auto as_set = [](const std::vector<Position3>& v) {
        std::set<std::tuple<int64_t, int64_t, int64_t>> s;
        for (const auto& p : v) s.insert({p.t, p.h, p.w});
        return s;
    };
    auto target = as_set(build_position_grid(f, h, w, {0, 0, 0}));

    for (TaskKind task : {TaskKind::InContextGen, TaskKind::InContextEdit}) {
        auto cond = as_set(build_position_grid(
            f, h, w, offset_policy(task, GridRole::ConditionVideo, f, h, w)));
        auto ref = as_set(build_position_grid(
            1, h, w, offset_policy(task, GridRole::ReferenceImage, f, h, w)));
        for (const auto& p : cond) CHECK(target.count(p) == 0);
        for (const auto& p : ref) CHECK(target.count(p) == 0);
        for (const auto& p : ref) CHECK(cond.count(p) == 0);
    }
}

TEST_CASE("boundary-frame conditions deliberately share target anchor positions") {
    // first/last conditions pin the frames they constrain; disambiguation is
    // by role embedding, not position
    uint32_t f = 4, h = 2, w = 2;
    auto grid = build_position_grid(f, h, w, offset_policy(TaskKind::FLF2V, GridRole::FirstFrame,
                                                           f, h, w));
    CHECK(grid.front() == Position3{0, 0, 0});
}

TEST_CASE("bad axis splits are rejected") {
    RopeConfig bad{32, 4, 6, 5, 10000.0};
    CHECK_THROWS(bad.check());
    RopeConfig odd{31, 4, 6, 6, 10000.0};
    CHECK_THROWS(odd.check());
    CHECK_THROWS(angles(Position3{0, 0, 0}, bad));
}
