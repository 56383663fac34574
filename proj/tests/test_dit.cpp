#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "omnivid/dit_core.hpp"

using namespace omnivid;

namespace {

Video random_video(Rng& rng, uint32_t f, uint32_t h, uint32_t w) {
    Video v(f, h, w);
    for (auto& x : v.data) x = static_cast<float>(rng.uniform());
    return v;
}

// conditions matching each task's ref-kind structure
std::vector<LatentGrid> conditions_for(TaskKind task, const ModelConfig& cfg, Rng& rng) {
    uint32_t hp = cfg.h_l * kPatchSize, wp = cfg.w_l * kPatchSize;
    switch (task) {
        case TaskKind::T2V: return {};
        case TaskKind::I2V: return {encode(random_video(rng, 1, hp, wp), GridRole::FirstFrame)};
        case TaskKind::FLF2V:
            return {encode(random_video(rng, 1, hp, wp), GridRole::FirstFrame),
                    encode(random_video(rng, 1, hp, wp), GridRole::LastFrame)};
        case TaskKind::InContextGen:
            // same order as the manifest refs: image first, then source video
            return {encode(random_video(rng, 1, hp, wp), GridRole::ReferenceImage),
                    encode(random_video(rng, cfg.f_l, hp, wp), GridRole::ConditionVideo)};
        case TaskKind::InContextEdit:
            return {encode(random_video(rng, cfg.f_l, hp, wp), GridRole::ConditionVideo)};
    }
    return {};
}

Instruction instruction_for(TaskKind task) {
    Instruction in;
    in.text = "a fixture instruction for testing";
    switch (task) {
        case TaskKind::T2V: break;
        case TaskKind::I2V: in.refs.push_back({RefKind::FirstFrame, "f.tomn"}); break;
        case TaskKind::FLF2V:
            in.refs.push_back({RefKind::FirstFrame, "f.tomn"});
            in.refs.push_back({RefKind::LastFrame, "l.tomn"});
            break;
        case TaskKind::InContextGen:
            in.refs.push_back({RefKind::Image, "r.tomn"});
            in.refs.push_back({RefKind::VideoRef, "v.tomn"});
            break;
        case TaskKind::InContextEdit:
            in.refs.push_back({RefKind::VideoRef, "v.tomn"});
            break;
    }
    return in;
}

PreparedSample prepared_for(TaskKind task, const ModelConfig& cfg, const ParamMap& params,
                            Rng& rng) {
    TaskSample s;
    s.task = task;
    s.instruction = instruction_for(task);
    s.conditions = conditions_for(task, cfg, rng);
    s.target = encode(random_video(rng, cfg.f_l, cfg.h_l * kPatchSize, cfg.w_l * kPatchSize),
                      GridRole::Target);
    return prepare_sample(s, params);
}

}  // namespace

TEST_CASE("a fresh model produces small finite velocities and adaptor gradients") {
    ModelConfig cfg = gradcheck_config();
    ParamMap params = init_all_params(cfg, 9);
    Rng rng(10);
    for (int t = 0; t < kNumTasks; ++t) {
        PreparedSample prep = prepared_for(static_cast<TaskKind>(t), cfg, params, rng);
        Tensor<float> sem = adapt<float>(prep.sem_raw, params);
        SeqInputs<float> seq =
            assemble_sequence<float>(cfg, prep.task, prep.conditions, sem, prep.target);
        Tensor<float> v = dit_forward<float>(cfg, params, seq, 0.5f, nullptr);
        REQUIRE(v.rows() == seq.n_target);
        REQUIRE(v.cols() == uint32_t(cfg.c_lat));
        // modulation gates start near zero, so the untrained velocity is tame
        for (float x : v.data) {
            CHECK(std::isfinite(x));
            CHECK(std::fabs(x) < 1.0f);
        }

        // the frozen DiT must pass gradient through to the adaptor at init,
        // otherwise adaptor-only training could never move
        Rng loss_rng(700 + t);
        ParamMap grads;
        fm_loss<float>(cfg, params, prep, loss_rng, &grads, 0.0);
        bool adaptor_grad = false;
        for (float g : grads.at("adaptor.w1").data) adaptor_grad |= g != 0.0f;
        CHECK(adaptor_grad);
    }
}

TEST_CASE("sequence assembly has the documented layout per task") {
    ModelConfig cfg = gradcheck_config();
    cfg.f_l = 4;
    ParamMap params = init_all_params(cfg, 9);
    Rng rng(11);

    uint32_t n_target = cfg.f_l * cfg.h_l * cfg.w_l;
    struct Want {
        TaskKind task;
        uint32_t n_cond;
    };
    // I2V/FLF unify to target length; reference image stays one frame
    Want wants[] = {{TaskKind::T2V, 0},
                    {TaskKind::I2V, n_target},
                    {TaskKind::FLF2V, n_target},
                    {TaskKind::InContextGen, n_target + cfg.h_l * cfg.w_l},
                    {TaskKind::InContextEdit, n_target}};
    for (const Want& w : wants) {
        PreparedSample prep = prepared_for(w.task, cfg, params, rng);
        Tensor<float> sem = adapt<float>(prep.sem_raw, params);
        SeqInputs<float> seq =
            assemble_sequence<float>(cfg, prep.task, prep.conditions, sem, prep.target);
        CHECK(seq.n_sem == sem.rows());
        CHECK(seq.n_target == n_target);
        CHECK(seq.n_lat == w.n_cond + n_target);
        CHECK(seq.total() == seq.n_sem + seq.n_lat);
        // target tokens close the sequence and are always valid
        for (uint32_t i = seq.total() - n_target; i < seq.total(); ++i) {
            CHECK(seq.role[i] == kRoleTarget);
            CHECK(seq.valid[i] == 1);
        }
        for (uint32_t i = 0; i < seq.n_sem; ++i) {
            CHECK(seq.role[i] == kRoleSemantic);
            CHECK(seq.has_pos[i] == 0);
        }
    }

    // FLF2V: frames between the boundaries are padding and masked out
    PreparedSample prep = prepared_for(TaskKind::FLF2V, cfg, params, rng);
    Tensor<float> sem = adapt<float>(prep.sem_raw, params);
    SeqInputs<float> seq =
        assemble_sequence<float>(cfg, prep.task, prep.conditions, sem, prep.target);
    uint32_t frame_tokens = cfg.h_l * cfg.w_l;
    uint32_t cond_begin = seq.n_sem;
    for (uint32_t f = 0; f < cfg.f_l; ++f) {
        bool boundary = f == 0 || f == cfg.f_l - 1;
        for (uint32_t i = 0; i < frame_tokens; ++i) {
            uint32_t idx = cond_begin + f * frame_tokens + i;
            CHECK(seq.valid[idx] == (boundary ? 1 : 0));
            CHECK(seq.role[idx] == kRoleBoundary);
        }
    }
}

TEST_CASE("masked-out tokens cannot influence the velocity") {
    ModelConfig cfg = gradcheck_config();
    cfg.f_l = 4;
    ParamMap params = init_all_params(cfg, 9);
    Rng rng(12);

    PreparedSample prep = prepared_for(TaskKind::I2V, cfg, params, rng);
    Tensor<float> sem = adapt<float>(prep.sem_raw, params);
    SeqInputs<float> seq =
        assemble_sequence<float>(cfg, prep.task, prep.conditions, sem, prep.target);

    Tensor<float> base = dit_forward<float>(cfg, params, seq, 0.3f, nullptr);
    bool mutated = false;
    for (uint32_t i = 0; i < seq.n_lat; ++i) {
        if (seq.valid[seq.n_sem + i]) continue;
        for (uint32_t c = 0; c < uint32_t(cfg.c_lat); ++c) seq.latent.row(i)[c] += 3.5f;
        mutated = true;
    }
    REQUIRE(mutated);
    Tensor<float> after = dit_forward<float>(cfg, params, seq, 0.3f, nullptr);
    CHECK(base.data == after.data);
}

TEST_CASE("valid condition tokens do influence the velocity") {
    ModelConfig cfg = gradcheck_config();
    ParamMap params = init_all_params(cfg, 9);
    Rng rng(13);

    PreparedSample prep = prepared_for(TaskKind::InContextEdit, cfg, params, rng);
    Tensor<float> sem = adapt<float>(prep.sem_raw, params);
    SeqInputs<float> seq =
        assemble_sequence<float>(cfg, prep.task, prep.conditions, sem, prep.target);
    Tensor<float> base = dit_forward<float>(cfg, params, seq, 0.3f, nullptr);
    seq.latent.row(0)[0] += 1.0f;  // first condition cell
    Tensor<float> after = dit_forward<float>(cfg, params, seq, 0.3f, nullptr);
    CHECK(base.data != after.data);
}

TEST_CASE("analytic gradients match finite differences on every task assembly") {
    ModelConfig cfg = gradcheck_config();
    ParamMap pf = init_all_params(cfg, 21);
    ParamMapT<double> params = cast_params<double>(pf);

    Rng data_rng(23);
    for (int ti = 0; ti < kNumTasks; ++ti) {
        PreparedSample prep = prepared_for(static_cast<TaskKind>(ti), cfg, pf, data_rng);

        Rng loss_rng(900 + ti);
        ParamMapT<double> grads;
        {
            Rng r = loss_rng;
            fm_loss<double>(cfg, params, prep, r, &grads, 0.0);
        }

        Rng pick(31 + ti);
        // a couple of parameters from each functional group
        for (const char* name :
             {"adaptor.w1", "dit.in_proj.w", "dit.blk0.qkv.w", "dit.blk1.ff1.w", "dit.role_emb",
              "dit.blk0.mod.w", "dit.tmlp.w1", "dit.final_mod.w", "dit.out_proj.w"}) {
            auto& t = params.at(name);
            const auto& g = grads.at(name);
            for (int s = 0; s < 4; ++s) {
                size_t i = pick.below(t.numel());
                double eps = 1e-5, orig = t[i];
                auto loss_at = [&](double v) {
                    t[i] = v;
                    Rng r = loss_rng;
                    return double(fm_loss<double>(cfg, params, prep, r, nullptr, 0.0));
                };
                double fd = (loss_at(orig + eps) - loss_at(orig - eps)) / (2 * eps);
                t[i] = orig;
                double denom = std::max({1e-6, std::fabs(fd), std::fabs(g[i])});
                REQUIRE(std::fabs(fd - g[i]) / denom <= 1e-3);
            }
        }
    }
}

TEST_CASE("euler sampler recovers x0 exactly from the ideal field") {
    Rng rng(40);
    LatentGrid x0(2, 2, 2, 8, GridRole::Target);
    for (auto& v : x0.data) v = static_cast<float>(rng.normal());

    // along the straight path x_t = x0 + t(eps - x0), the matching velocity
    // field is (x - x0)/t
    VelocityFn exact = [&](const Tensor<float>& x, double t) {
        Tensor<float> v(x.dims);
        for (size_t i = 0; i < x.numel(); ++i)
            v[i] = static_cast<float>((double(x[i]) - double(x0.data[i])) / t);
        return v;
    };

    for (int steps : {1, 4, 16}) {
        Rng noise(41);
        LatentGrid out = euler_sample(2, 2, 2, 8, steps, noise, exact);
        for (size_t i = 0; i < out.numel(); ++i)
            REQUIRE(std::fabs(out.data[i] - x0.data[i]) <= 1e-6);
    }
    Rng noise(41);
    CHECK_THROWS(euler_sample(2, 2, 2, 8, 0, noise, exact));
}

TEST_CASE("model-backed sampling is seed-deterministic") {
    ModelConfig cfg = gradcheck_config();
    ParamMap params = init_all_params(cfg, 50);
    Rng rng(52);
    PreparedSample prep = prepared_for(TaskKind::T2V, cfg, params, rng);

    LatentGrid a = sample_latent(cfg, params, prep, 4, 7, 1.0);
    LatentGrid b = sample_latent(cfg, params, prep, 4, 7, 1.0);
    CHECK(a.data == b.data);
    LatentGrid c = sample_latent(cfg, params, prep, 4, 8, 1.0);
    CHECK(a.data != c.data);
    // guidance != 1 runs the unconditional branch too and changes the output
    LatentGrid d = sample_latent(cfg, params, prep, 4, 7, 2.0);
    CHECK(a.data != d.data);
}

TEST_CASE("loss draws are reproducible from the rng state") {
    ModelConfig cfg = gradcheck_config();
    ParamMap params = init_all_params(cfg, 60);
    Rng rng(62);
    PreparedSample prep = prepared_for(TaskKind::I2V, cfg, params, rng);

    Rng r1(99), r2(99);
    float l1 = fm_loss<float>(cfg, params, prep, r1, nullptr, 0.0);
    float l2 = fm_loss<float>(cfg, params, prep, r2, nullptr, 0.0);
    CHECK(l1 == l2);
    CHECK(r1.state() == r2.state());
    CHECK(std::isfinite(l1));
}
