#include "omnivid/dit_core.hpp"

#include <sstream>

namespace omnivid {

std::string ModelConfig::digest_string() const {
    std::ostringstream s;
    s << "d_model=" << d_model << ";layers=" << layers << ";heads=" << heads
      << ";head_dim=" << head_dim << ";d_ff=" << d_ff << ";t_embed=" << t_embed
      << ";c_lat=" << c_lat << ";rope=" << rope.n_t << "," << rope.n_h << "," << rope.n_w << ","
      << rope.base << ";target=" << f_l << "x" << h_l << "x" << w_l << ";seed=" << init_seed;
    return s.str();
}

ModelConfig gradcheck_config() {
    ModelConfig cfg;
    cfg.d_model = 32;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.head_dim = 16;
    cfg.d_ff = 64;
    cfg.t_embed = 32;
    cfg.rope = RopeConfig{16, 2, 3, 3, 10000.0};
    cfg.f_l = 2;
    cfg.h_l = 2;
    cfg.w_l = 2;
    return cfg;
}

namespace {

// Xavier-style init for a (fan_in, fan_out) matrix.
void init_xavier(ParamMap& p, const std::string& name, uint32_t fi, uint32_t fo, Rng& rng) {
    init_normal(p, name, {fi, fo}, rng, std::sqrt(2.0 / (fi + fo)));
}

}  // namespace

void init_dit_params(const ModelConfig& cfg, ParamMap& params, Rng& rng) {
    cfg.check();
    uint32_t d = cfg.d_model, te = cfg.t_embed, dff = cfg.d_ff, cl = cfg.c_lat;

    init_xavier(params, "dit.in_proj.w", cl, d, rng);
    init_zeros(params, "dit.in_proj.b", {d});
    init_normal(params, "dit.role_emb", {kNumTokenRoles, d}, rng, 0.02);
    init_xavier(params, "dit.tmlp.w1", te, te, rng);
    init_zeros(params, "dit.tmlp.b1", {te});
    init_xavier(params, "dit.tmlp.w2", te, te, rng);
    init_zeros(params, "dit.tmlp.b2", {te});
    for (int l = 0; l < cfg.layers; ++l) {
        std::string pre = "dit.blk" + std::to_string(l);
        // small but nonzero gates: with zero gates a frozen DiT would pass no
        // gradient to the adaptor, making adaptor-only training a no-op
        init_normal(params, pre + ".mod.w", {te, 6 * d}, rng, 0.02);
        init_normal(params, pre + ".mod.b", {6 * d}, rng, 0.02);
        init_xavier(params, pre + ".qkv.w", d, 3 * d, rng);
        init_zeros(params, pre + ".qkv.b", {3 * d});
        init_xavier(params, pre + ".attn_out.w", d, d, rng);
        init_zeros(params, pre + ".attn_out.b", {d});
        init_xavier(params, pre + ".ff1.w", d, dff, rng);
        init_zeros(params, pre + ".ff1.b", {dff});
        init_xavier(params, pre + ".ff2.w", dff, d, rng);
        init_zeros(params, pre + ".ff2.b", {d});
    }
    init_normal(params, "dit.final_mod.w", {te, 2 * d}, rng, 0.02);
    init_normal(params, "dit.final_mod.b", {2 * d}, rng, 0.02);
    init_normal(params, "dit.out_proj.w", {d, cl}, rng, 0.02);
    init_zeros(params, "dit.out_proj.b", {cl});
}

ParamMap init_all_params(const ModelConfig& cfg, uint64_t seed) {
    ParamMap params;
    init_encoder_params(params);
    Rng rng(seed);
    init_adaptor_params(params, cfg.d_model, rng);
    init_dit_params(cfg, params, rng);
    return params;
}

PreparedSample prepare_sample(const TaskSample& sample, const ParamMap& params) {
    PreparedSample prep;
    prep.task = sample.task;
    prep.conditions = sample.conditions;
    prep.target = sample.target;
    prep.sem_raw = encode_instruction(sample.instruction, sample.conditions, params);
    return prep;
}

PreparedSample prepare_conditioning(const Instruction& instr,
                                    const std::vector<LatentGrid>& conditions, uint32_t f_l,
                                    uint32_t h_l, uint32_t w_l, const ParamMap& params) {
    PreparedSample prep;
    prep.task = infer_task(instr);
    prep.conditions = conditions;
    prep.target = LatentGrid(f_l, h_l, w_l, kVideoChannels * kPatchSize * kPatchSize,
                             GridRole::Target);
    prep.sem_raw = encode_instruction(instr, conditions, params);
    return prep;
}

LatentGrid euler_sample(uint32_t f, uint32_t h, uint32_t w, uint32_t c, int steps, Rng& rng,
                        const VelocityFn& velocity_fn) {
    if (steps < 1) throw std::invalid_argument("euler_sample: steps must be >= 1");
    Tensor<float> x({f, h, w, c});
    for (auto& v : x.data) v = static_cast<float>(rng.normal());

    double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        double t = 1.0 - k * dt;
        Tensor<float> vel = velocity_fn(x, t);
        if (!vel.same_shape(x)) throw std::runtime_error("euler_sample: velocity shape mismatch");
        for (size_t i = 0; i < x.numel(); ++i)
            x[i] = static_cast<float>(x[i] - dt * static_cast<double>(vel[i]));
    }

    LatentGrid out(f, h, w, c, GridRole::Target);
    out.data = std::move(x.data);
    return out;
}

LatentGrid sample_latent(const ModelConfig& cfg, const ParamMap& params,
                         const PreparedSample& prep, int steps, uint64_t seed,
                         double guidance_scale) {
    cfg.check();
    Tensor<float> sem_cond = adapt<float>(prep.sem_raw.cast<float>(), params);

    auto model_velocity = [&](const Tensor<float>& x, double t, bool with_sem) {
        LatentGrid xt(prep.target.f, prep.target.h, prep.target.w, prep.target.c,
                      GridRole::Target);
        xt.data = x.data;
        Tensor<float> sem = with_sem ? sem_cond : Tensor<float>();
        SeqInputs<float> seq = assemble_sequence<float>(cfg, prep.task, prep.conditions, sem, xt);
        Tensor<float> vel = dit_forward<float>(cfg, params, seq, static_cast<float>(t), nullptr);
        return Tensor<float>({prep.target.f, prep.target.h, prep.target.w, prep.target.c},
                             std::move(vel.data));
    };

    VelocityFn fn;
    if (guidance_scale == 1.0) {
        fn = [&](const Tensor<float>& x, double t) { return model_velocity(x, t, true); };
    } else {
        fn = [&](const Tensor<float>& x, double t) {
            Tensor<float> vc = model_velocity(x, t, true);
            Tensor<float> vu = model_velocity(x, t, false);
            for (size_t i = 0; i < vc.numel(); ++i)
                vc[i] = static_cast<float>(vu[i] + guidance_scale * (vc[i] - vu[i]));
            return vc;
        };
    }

    Rng rng(seed);
    return euler_sample(prep.target.f, prep.target.h, prep.target.w, prep.target.c, steps, rng, fn);
}

}  // namespace omnivid
