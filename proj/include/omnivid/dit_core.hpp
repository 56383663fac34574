#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "omnivid/instruction.hpp"
#include "omnivid/kernels.hpp"
#include "omnivid/params.hpp"
#include "omnivid/rope3d.hpp"
#include "omnivid/semantic_stub.hpp"

namespace omnivid {

struct ModelConfig {
    int d_model = 64;
    int layers = 4;
    int heads = 2;
    int head_dim = 32;
    int d_ff = 256;
    int t_embed = 64;
    int c_lat = kVideoChannels * kPatchSize * kPatchSize;
    RopeConfig rope{32, 4, 6, 6, 10000.0};
    // default target latent shape
    uint32_t f_l = 4, h_l = 4, w_l = 4;
    uint64_t init_seed = 1234;

    void check() const {
        if (d_model != heads * head_dim)
            throw std::invalid_argument("config: d_model must equal heads*head_dim");
        if (rope.head_dim != head_dim)
            throw std::invalid_argument("config: rope head_dim mismatch");
        rope.check();
    }

    std::string digest_string() const;
    uint64_t digest() const { return fnv1a_str(digest_string()); }
};

// Desk gradcheck configuration: 2 layers, d_model 32.
ModelConfig gradcheck_config();

void init_dit_params(const ModelConfig& cfg, ParamMap& params, Rng& rng);
// encoder + adaptor + dit, the full model parameter set
ParamMap init_all_params(const ModelConfig& cfg, uint64_t seed);

// Role-embedding rows. First/last-frame conditions share one boundary row and
// are told apart from the target tokens they overlap positionally.
enum TokenRole : int {
    kRoleSemantic = 0,
    kRoleTarget = 1,
    kRoleConditionVideo = 2,
    kRoleReferenceImage = 3,
    kRoleBoundary = 4,
};
constexpr int kNumTokenRoles = 5;

// Assembled joint sequence: [semantic | conditions | target].
template <typename T>
struct SeqInputs {
    Tensor<T> sem;     // (n_sem, d_model) adapted semantic tokens (may be empty)
    Tensor<T> latent;  // (n_lat, c_lat) condition cells then target cells
    std::vector<int> role;         // N
    std::vector<Position3> pos;    // N (ignored where has_pos=0)
    std::vector<uint8_t> has_pos;  // N; semantic tokens skip rotation
    std::vector<uint8_t> valid;    // N; invalid tokens get zero attention weight
    uint32_t n_sem = 0, n_lat = 0, n_target = 0;
    uint32_t tf = 0, th = 0, tw = 0;  // target latent shape

    uint32_t total() const { return n_sem + n_lat; }
};

// Builds the joint sequence for a task: conditions are temporally unified where
// the task calls for it and carry their offset_policy positions; target tokens
// sit at offset (0,0,0).
template <typename T>
SeqInputs<T> assemble_sequence(const ModelConfig& cfg, TaskKind task,
                               const std::vector<LatentGrid>& conditions, const Tensor<T>& sem,
                               const LatentGrid& noisy_target);

template <typename T>
struct LayerCache {
    Tensor<T> x_in, xn1, h1;
    std::vector<T> rstd1;
    Tensor<T> qkv;  // q,k stored post-rotation
    std::vector<Tensor<T>> probs;
    Tensor<T> attn_concat, attn_out;
    Tensor<T> x_mid, xn2, h2;
    std::vector<T> rstd2;
    Tensor<T> ffpre, ffout;
    Tensor<T> mod;  // (6*d_model)
};

template <typename T>
struct DitCache {
    Tensor<T> t_e0, t_c1, t_c;
    Tensor<T> angles;  // (N, head_dim/2)
    std::vector<LayerCache<T>> layers;
    Tensor<T> x_final, xnf, hf_target, fmod;
    std::vector<T> rstdf;
};

// Velocity prediction over target tokens, shape (n_target, c_lat).
template <typename T>
Tensor<T> dit_forward(const ModelConfig& cfg, const ParamMapT<T>& params, const SeqInputs<T>& in,
                      T t, DitCache<T>* cache);

// Accumulates parameter gradients; grad_sem (optional) receives gradients of
// the adapted semantic token inputs.
template <typename T>
void dit_backward(const ModelConfig& cfg, const ParamMapT<T>& params, const SeqInputs<T>& in,
                  const DitCache<T>& cache, const Tensor<T>& grad_out, ParamMapT<T>& grads,
                  Tensor<T>* grad_sem);

// Sample structure plus the frozen encoder's semantic tokens, computed once.
struct PreparedSample {
    TaskKind task = TaskKind::T2V;
    std::vector<LatentGrid> conditions;
    LatentGrid target;
    Tensor<float> sem_raw;  // (L_s, d_sem)
};

PreparedSample prepare_sample(const TaskSample& sample, const ParamMap& params);
// Conditioning-only variant for inference; target carries shape, values unused.
PreparedSample prepare_conditioning(const Instruction& instr,
                                    const std::vector<LatentGrid>& conditions, uint32_t f_l,
                                    uint32_t h_l, uint32_t w_l, const ParamMap& params);

// Rectified-flow matching loss at a uniformly drawn timestep. Draw order from
// rng: t, then one normal per target entry, then (when cfg_dropout > 0) one
// uniform for the semantic-dropout coin. Accumulates gradients when grads != null.
template <typename T>
T fm_loss(const ModelConfig& cfg, const ParamMapT<T>& params, const PreparedSample& prep, Rng& rng,
          ParamMapT<T>* grads, double cfg_dropout = 0.0);

// Euler integration of dx/dt = velocity(x, t) from t=1 (pure noise) to t=0.
// velocity_fn maps (flat latent tensor, t) -> flat velocity tensor.
using VelocityFn = std::function<Tensor<float>(const Tensor<float>&, double)>;
LatentGrid euler_sample(uint32_t f, uint32_t h, uint32_t w, uint32_t c, int steps, Rng& rng,
                        const VelocityFn& velocity_fn);

// Model-backed sampler; guidance_scale 1.0 disables classifier-free guidance.
LatentGrid sample_latent(const ModelConfig& cfg, const ParamMap& params,
                         const PreparedSample& prep, int steps, uint64_t seed,
                         double guidance_scale = 1.0);

// ---------------------------------------------------------------------------
// implementation
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void layer_norm(const Tensor<T>& x, Tensor<T>& xn, std::vector<T>& rstd) {
    uint32_t n = x.rows(), d = x.cols();
    rstd.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        const T* r = x.row(i);
        T mu = 0;
        for (uint32_t j = 0; j < d; ++j) mu += r[j];
        mu /= T(d);
        T var = 0;
        for (uint32_t j = 0; j < d; ++j) var += (r[j] - mu) * (r[j] - mu);
        var /= T(d);
        T rs = T(1) / std::sqrt(var + T(1e-5));
        rstd[i] = rs;
        T* o = xn.row(i);
        for (uint32_t j = 0; j < d; ++j) o[j] = (r[j] - mu) * rs;
    }
}

// dx for y = (x-mu)*rstd given dy, using cached xn and rstd.
template <typename T>
void layer_norm_backward(const Tensor<T>& xn, const std::vector<T>& rstd, const Tensor<T>& dy,
                         Tensor<T>& dx) {
    uint32_t n = xn.rows(), d = xn.cols();
    for (uint32_t i = 0; i < n; ++i) {
        const T* xnr = xn.row(i);
        const T* dyr = dy.row(i);
        T mean_dy = 0, mean_dyxn = 0;
        for (uint32_t j = 0; j < d; ++j) {
            mean_dy += dyr[j];
            mean_dyxn += dyr[j] * xnr[j];
        }
        mean_dy /= T(d);
        mean_dyxn /= T(d);
        T* dxr = dx.row(i);
        for (uint32_t j = 0; j < d; ++j)
            dxr[j] = rstd[i] * (dyr[j] - mean_dy - xnr[j] * mean_dyxn);
    }
}

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475)));
}

template <typename T>
T gelu_grad(T x) {
    T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475)));
    T pdf = T(0.3989422804014327) * std::exp(T(-0.5) * x * x);
    return cdf + x * pdf;
}

template <typename T>
T silu(T x) {
    return x / (T(1) + std::exp(-x));
}

template <typename T>
T silu_grad(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
void sin_embed(T t, int width, Tensor<T>& out) {
    out = Tensor<T>({static_cast<uint32_t>(width)});
    for (int i = 0; i < width / 2; ++i) {
        T omega = std::pow(T(10000), T(-2.0 * i / width));
        out[2 * i] = std::sin(T(1000) * t * omega);
        out[2 * i + 1] = std::cos(T(1000) * t * omega);
    }
}

// y = x*(1+scale)+shift with row-broadcast scale/shift chunks.
template <typename T>
void modulate(const Tensor<T>& x, const T* shift, const T* scale, Tensor<T>& y) {
    uint32_t n = x.rows(), d = x.cols();
    for (uint32_t i = 0; i < n; ++i) {
        const T* xr = x.row(i);
        T* yr = y.row(i);
        for (uint32_t j = 0; j < d; ++j) yr[j] = xr[j] * (T(1) + scale[j]) + shift[j];
    }
}

}  // namespace detail

template <typename T>
SeqInputs<T> assemble_sequence(const ModelConfig& cfg, TaskKind task,
                               const std::vector<LatentGrid>& conditions, const Tensor<T>& sem,
                               const LatentGrid& noisy_target) {
    cfg.check();
    const uint32_t tf = noisy_target.f, th = noisy_target.h, tw = noisy_target.w;
    if (noisy_target.c != static_cast<uint32_t>(cfg.c_lat))
        throw std::invalid_argument("assemble: target channels " + std::to_string(noisy_target.c) +
                                    " != config c_lat " + std::to_string(cfg.c_lat));

    // Prepare condition grids: temporal unification + positional offsets.
    struct Prepared {
        LatentGrid grid;
        Offset3 offset;
        int role;
    };
    std::vector<Prepared> prepared;

    if (task == TaskKind::FLF2V) {
        const LatentGrid* first = nullptr;
        const LatentGrid* last = nullptr;
        for (const auto& g : conditions) {
            if (g.role == GridRole::FirstFrame) first = &g;
            if (g.role == GridRole::LastFrame) last = &g;
        }
        if (!first || !last) throw std::invalid_argument("assemble: FLF2V needs first and last frames");
        auto [stacked, segs] = concat_conditions({*first, *last});
        (void)segs;
        Offset3 off = offset_policy(task, GridRole::FirstFrame, tf, th, tw);
        prepared.push_back({unify_temporal_shape(stacked, tf, Placement::FrontAndBack), off,
                            kRoleBoundary});
    } else {
        for (const auto& g : conditions) {
            Offset3 off = offset_policy(task, g.role, tf, th, tw);
            switch (g.role) {
                case GridRole::FirstFrame:
                    prepared.push_back({unify_temporal_shape(g, tf, Placement::Front), off,
                                        kRoleBoundary});
                    break;
                case GridRole::LastFrame:
                    prepared.push_back({unify_temporal_shape(g, tf, Placement::Back), off,
                                        kRoleBoundary});
                    break;
                case GridRole::ConditionVideo:
                    prepared.push_back({unify_temporal_shape(g, tf, Placement::Front), off,
                                        kRoleConditionVideo});
                    break;
                case GridRole::ReferenceImage:
                    // sits on its own shifted timeline; no temporal expansion
                    prepared.push_back({g, off, kRoleReferenceImage});
                    break;
                case GridRole::Target:
                    throw std::invalid_argument("assemble: condition grid tagged as target");
            }
        }
    }

    SeqInputs<T> seq;
    seq.n_sem = sem.numel() ? sem.rows() : 0;
    seq.sem = sem;
    seq.tf = tf;
    seq.th = th;
    seq.tw = tw;
    seq.n_target = tf * th * tw;

    uint32_t n_cond = 0;
    for (const auto& p : prepared) n_cond += p.grid.f * p.grid.h * p.grid.w;
    seq.n_lat = n_cond + seq.n_target;

    uint32_t N = seq.total();
    seq.latent = Tensor<T>({seq.n_lat, static_cast<uint32_t>(cfg.c_lat)});
    seq.role.resize(N);
    seq.pos.resize(N);
    seq.has_pos.assign(N, 1);
    seq.valid.assign(N, 1);

    for (uint32_t i = 0; i < seq.n_sem; ++i) {
        seq.role[i] = kRoleSemantic;
        seq.has_pos[i] = 0;
    }

    uint32_t tok = seq.n_sem;
    uint32_t cell = 0;
    auto push_grid = [&](const LatentGrid& g, Offset3 off, int role) {
        if (g.h != th || g.w != tw || g.c != static_cast<uint32_t>(cfg.c_lat))
            throw std::invalid_argument("assemble: condition grid shape incompatible with target");
        auto positions = build_position_grid(g.f, g.h, g.w, off);
        for (uint32_t f = 0; f < g.f; ++f)
            for (uint32_t yx = 0; yx < g.h * g.w; ++yx) {
                const float* src = g.frame(f) + size_t(yx) * g.c;
                T* dst = seq.latent.row(cell);
                for (uint32_t c = 0; c < g.c; ++c) dst[c] = static_cast<T>(src[c]);
                seq.role[tok] = role;
                seq.pos[tok] = positions[size_t(f) * g.h * g.w + yx];
                seq.valid[tok] = g.validity[f];
                ++tok;
                ++cell;
            }
    };

    for (const auto& p : prepared) push_grid(p.grid, p.offset, p.role);

    auto tpos = build_position_grid(tf, th, tw, {0, 0, 0});
    for (uint32_t i = 0; i < seq.n_target; ++i) {
        const float* src = noisy_target.data.data() + size_t(i) * cfg.c_lat;
        T* dst = seq.latent.row(cell + i);
        for (int c = 0; c < cfg.c_lat; ++c) dst[c] = static_cast<T>(src[c]);
        seq.role[tok + i] = kRoleTarget;
        seq.pos[tok + i] = tpos[i];
    }
    return seq;
}

template <typename T>
Tensor<T> dit_forward(const ModelConfig& cfg, const ParamMapT<T>& params, const SeqInputs<T>& in,
                      T t, DitCache<T>* cache) {
    cfg.check();
    const uint32_t N = in.total();
    const uint32_t d = cfg.d_model;
    const int hd = cfg.head_dim;
    const int half = hd / 2;

    DitCache<T> local;
    DitCache<T>& cc = cache ? *cache : local;

    // token embedding
    Tensor<T> x({N, d});
    const auto& role_emb = pget(params, "dit.role_emb");
    for (uint32_t i = 0; i < in.n_sem; ++i) {
        const T* s = in.sem.row(i);
        const T* re = role_emb.row(in.role[i]);
        T* xr = x.row(i);
        for (uint32_t j = 0; j < d; ++j) xr[j] = s[j] + re[j];
    }
    if (in.n_lat) {
        const auto& win = pget(params, "dit.in_proj.w");
        const auto& bin = pget(params, "dit.in_proj.b");
        kernels::gemm_nn<T>(in.latent.ptr(), win.ptr(), x.row(in.n_sem), in.n_lat, cfg.c_lat, d,
                            false);
        for (uint32_t i = 0; i < in.n_lat; ++i) {
            T* xr = x.row(in.n_sem + i);
            const T* re = role_emb.row(in.role[in.n_sem + i]);
            for (uint32_t j = 0; j < d; ++j) xr[j] += bin[j] + re[j];
        }
    }

    // rotation angle table
    cc.angles = Tensor<T>({N, static_cast<uint32_t>(half)});
    for (uint32_t i = 0; i < N; ++i)
        if (in.has_pos[i]) angles<T>(in.pos[i], cfg.rope, cc.angles.row(i));

    // timestep conditioning
    detail::sin_embed(t, cfg.t_embed, cc.t_e0);
    const auto& tw1 = pget(params, "dit.tmlp.w1");
    const auto& tb1 = pget(params, "dit.tmlp.b1");
    const auto& tw2 = pget(params, "dit.tmlp.w2");
    const auto& tb2 = pget(params, "dit.tmlp.b2");
    uint32_t te = cfg.t_embed;
    cc.t_c1 = Tensor<T>({te});
    kernels::gemm_nn<T>(cc.t_e0.ptr(), tw1.ptr(), cc.t_c1.ptr(), 1, te, te, false);
    for (uint32_t j = 0; j < te; ++j) cc.t_c1[j] += tb1[j];
    Tensor<T> t_act({te});
    for (uint32_t j = 0; j < te; ++j) t_act[j] = detail::silu(cc.t_c1[j]);
    cc.t_c = Tensor<T>({te});
    kernels::gemm_nn<T>(t_act.ptr(), tw2.ptr(), cc.t_c.ptr(), 1, te, te, false);
    for (uint32_t j = 0; j < te; ++j) cc.t_c[j] += tb2[j];

    const T scale = T(1) / std::sqrt(T(hd));
    cc.layers.resize(cfg.layers);

    for (int l = 0; l < cfg.layers; ++l) {
        LayerCache<T>& lc = cc.layers[l];
        std::string pre = "dit.blk" + std::to_string(l);
        lc.x_in = x;

        const auto& wmod = pget(params, pre + ".mod.w");
        const auto& bmod = pget(params, pre + ".mod.b");
        lc.mod = Tensor<T>({6 * d});
        kernels::gemm_nn<T>(cc.t_c.ptr(), wmod.ptr(), lc.mod.ptr(), 1, te, 6 * d, false);
        for (uint32_t j = 0; j < 6 * d; ++j) lc.mod[j] += bmod[j];
        const T* sh1 = lc.mod.ptr();
        const T* sc1 = lc.mod.ptr() + d;
        const T* g1 = lc.mod.ptr() + 2 * d;
        const T* sh2 = lc.mod.ptr() + 3 * d;
        const T* sc2 = lc.mod.ptr() + 4 * d;
        const T* g2 = lc.mod.ptr() + 5 * d;

        lc.xn1 = Tensor<T>({N, d});
        detail::layer_norm(x, lc.xn1, lc.rstd1);
        lc.h1 = Tensor<T>({N, d});
        detail::modulate(lc.xn1, sh1, sc1, lc.h1);

        const auto& wqkv = pget(params, pre + ".qkv.w");
        const auto& bqkv = pget(params, pre + ".qkv.b");
        lc.qkv = Tensor<T>({N, 3 * d});
        kernels::gemm_nn<T>(lc.h1.ptr(), wqkv.ptr(), lc.qkv.ptr(), N, d, 3 * d, false);
        for (uint32_t i = 0; i < N; ++i) {
            T* r = lc.qkv.row(i);
            for (uint32_t j = 0; j < 3 * d; ++j) r[j] += bqkv[j];
        }

        // rotate q and k of positioned tokens, per head
        for (uint32_t i = 0; i < N; ++i) {
            if (!in.has_pos[i]) continue;
            std::span<const T> a(cc.angles.row(i), size_t(half));
            T* r = lc.qkv.row(i);
            for (int h = 0; h < cfg.heads; ++h) {
                apply_rope<T>(std::span<T>(r + h * hd, size_t(hd)), a);
                apply_rope<T>(std::span<T>(r + d + h * hd, size_t(hd)), a);
            }
        }

        lc.probs.assign(cfg.heads, Tensor<T>());
        lc.attn_concat = Tensor<T>({N, d});
        Tensor<T> qh({N, static_cast<uint32_t>(hd)}), kh({N, static_cast<uint32_t>(hd)}),
            vh({N, static_cast<uint32_t>(hd)});
        for (int h = 0; h < cfg.heads; ++h) {
            for (uint32_t i = 0; i < N; ++i) {
                const T* r = lc.qkv.row(i);
                std::copy(r + h * hd, r + (h + 1) * hd, qh.row(i));
                std::copy(r + d + h * hd, r + d + (h + 1) * hd, kh.row(i));
                std::copy(r + 2 * d + h * hd, r + 2 * d + (h + 1) * hd, vh.row(i));
            }
            Tensor<T>& P = lc.probs[h];
            P = Tensor<T>({N, N});
            kernels::gemm_nt<T>(qh.ptr(), kh.ptr(), P.ptr(), N, hd, N, false);
            for (uint32_t i = 0; i < N; ++i) {
                T* row = P.row(i);
                T mx = -std::numeric_limits<T>::infinity();
                for (uint32_t j = 0; j < N; ++j) {
                    row[j] = in.valid[j] ? row[j] * scale : -std::numeric_limits<T>::infinity();
                    mx = std::max(mx, row[j]);
                }
                T sum = 0;
                for (uint32_t j = 0; j < N; ++j) {
                    row[j] = in.valid[j] ? std::exp(row[j] - mx) : T(0);
                    sum += row[j];
                }
                T inv = T(1) / sum;
                for (uint32_t j = 0; j < N; ++j) row[j] *= inv;
            }
            Tensor<T> oh({N, static_cast<uint32_t>(hd)});
            kernels::gemm_nn<T>(P.ptr(), vh.ptr(), oh.ptr(), N, N, hd, false);
            for (uint32_t i = 0; i < N; ++i)
                std::copy(oh.row(i), oh.row(i) + hd, lc.attn_concat.row(i) + h * hd);
        }

        const auto& wo = pget(params, pre + ".attn_out.w");
        const auto& bo = pget(params, pre + ".attn_out.b");
        lc.attn_out = Tensor<T>({N, d});
        kernels::gemm_nn<T>(lc.attn_concat.ptr(), wo.ptr(), lc.attn_out.ptr(), N, d, d, false);
        for (uint32_t i = 0; i < N; ++i) {
            T* r = lc.attn_out.row(i);
            T* xr = x.row(i);
            for (uint32_t j = 0; j < d; ++j) xr[j] += g1[j] * (r[j] + bo[j]);
            for (uint32_t j = 0; j < d; ++j) r[j] += bo[j];
        }
        lc.x_mid = x;

        lc.xn2 = Tensor<T>({N, d});
        detail::layer_norm(x, lc.xn2, lc.rstd2);
        lc.h2 = Tensor<T>({N, d});
        detail::modulate(lc.xn2, sh2, sc2, lc.h2);

        const auto& wf1 = pget(params, pre + ".ff1.w");
        const auto& bf1 = pget(params, pre + ".ff1.b");
        const auto& wf2 = pget(params, pre + ".ff2.w");
        const auto& bf2 = pget(params, pre + ".ff2.b");
        uint32_t dff = cfg.d_ff;
        lc.ffpre = Tensor<T>({N, dff});
        kernels::gemm_nn<T>(lc.h2.ptr(), wf1.ptr(), lc.ffpre.ptr(), N, d, dff, false);
        Tensor<T> ffact({N, dff});
        for (uint32_t i = 0; i < N; ++i) {
            T* p = lc.ffpre.row(i);
            T* a = ffact.row(i);
            for (uint32_t j = 0; j < dff; ++j) {
                p[j] += bf1[j];
                a[j] = detail::gelu(p[j]);
            }
        }
        lc.ffout = Tensor<T>({N, d});
        kernels::gemm_nn<T>(ffact.ptr(), wf2.ptr(), lc.ffout.ptr(), N, dff, d, false);
        for (uint32_t i = 0; i < N; ++i) {
            T* r = lc.ffout.row(i);
            T* xr = x.row(i);
            for (uint32_t j = 0; j < d; ++j) {
                r[j] += bf2[j];
                xr[j] += g2[j] * r[j];
            }
        }
    }

    cc.x_final = x;
    const auto& wfm = pget(params, "dit.final_mod.w");
    const auto& bfm = pget(params, "dit.final_mod.b");
    cc.fmod = Tensor<T>({2 * d});
    kernels::gemm_nn<T>(cc.t_c.ptr(), wfm.ptr(), cc.fmod.ptr(), 1, te, 2 * d, false);
    for (uint32_t j = 0; j < 2 * d; ++j) cc.fmod[j] += bfm[j];

    cc.xnf = Tensor<T>({N, d});
    detail::layer_norm(x, cc.xnf, cc.rstdf);

    uint32_t t0 = N - in.n_target;  // target rows are last
    cc.hf_target = Tensor<T>({in.n_target, d});
    for (uint32_t i = 0; i < in.n_target; ++i) {
        const T* r = cc.xnf.row(t0 + i);
        T* o = cc.hf_target.row(i);
        for (uint32_t j = 0; j < d; ++j)
            o[j] = r[j] * (T(1) + cc.fmod[d + j]) + cc.fmod[j];
    }

    const auto& wout = pget(params, "dit.out_proj.w");
    const auto& bout = pget(params, "dit.out_proj.b");
    Tensor<T> vel({in.n_target, static_cast<uint32_t>(cfg.c_lat)});
    kernels::gemm_nn<T>(cc.hf_target.ptr(), wout.ptr(), vel.ptr(), in.n_target, d, cfg.c_lat,
                        false);
    for (uint32_t i = 0; i < in.n_target; ++i)
        for (int j = 0; j < cfg.c_lat; ++j) vel.row(i)[j] += bout[j];
    return vel;
}

template <typename T>
void dit_backward(const ModelConfig& cfg, const ParamMapT<T>& params, const SeqInputs<T>& in,
                  const DitCache<T>& cc, const Tensor<T>& grad_out, ParamMapT<T>& grads,
                  Tensor<T>* grad_sem) {
    const uint32_t N = in.total();
    const uint32_t d = cfg.d_model;
    const int hd = cfg.head_dim;
    const int half = hd / 2;
    const uint32_t te = cfg.t_embed;
    const uint32_t t0 = N - in.n_target;
    const T scale = T(1) / std::sqrt(T(hd));

    Tensor<T> d_tc({te});  // accumulated grad of the timestep conditioning vector

    // output head
    const auto& wout = pget(params, "dit.out_proj.w");
    auto& gwout = grad_slot(grads, "dit.out_proj.w", wout.dims);
    auto& gbout = grad_slot(grads, "dit.out_proj.b", {static_cast<uint32_t>(cfg.c_lat)});
    kernels::gemm_tn<T>(cc.hf_target.ptr(), grad_out.ptr(), gwout.ptr(), d, in.n_target, cfg.c_lat,
                        true);
    for (uint32_t i = 0; i < in.n_target; ++i)
        for (int j = 0; j < cfg.c_lat; ++j) gbout[j] += grad_out.row(i)[j];

    Tensor<T> d_hf({in.n_target, d});
    kernels::gemm_nt<T>(grad_out.ptr(), wout.ptr(), d_hf.ptr(), in.n_target, cfg.c_lat, d, false);

    // final modulation
    Tensor<T> d_fmod({2 * d});
    Tensor<T> d_xnf({N, d});  // zero for non-target rows
    for (uint32_t i = 0; i < in.n_target; ++i) {
        const T* xnr = cc.xnf.row(t0 + i);
        const T* dh = d_hf.row(i);
        T* dxn = d_xnf.row(t0 + i);
        for (uint32_t j = 0; j < d; ++j) {
            d_fmod[j] += dh[j];
            d_fmod[d + j] += dh[j] * xnr[j];
            dxn[j] = dh[j] * (T(1) + cc.fmod[d + j]);
        }
    }
    {
        const auto& wfm = pget(params, "dit.final_mod.w");
        auto& gw = grad_slot(grads, "dit.final_mod.w", wfm.dims);
        auto& gb = grad_slot(grads, "dit.final_mod.b", {2 * d});
        kernels::gemm_tn<T>(cc.t_c.ptr(), d_fmod.ptr(), gw.ptr(), te, 1, 2 * d, true);
        for (uint32_t j = 0; j < 2 * d; ++j) gb[j] += d_fmod[j];
        kernels::gemm_nt<T>(d_fmod.ptr(), wfm.ptr(), d_tc.ptr(), 1, 2 * d, te, false);
    }

    Tensor<T> dx({N, d});
    detail::layer_norm_backward(cc.xnf, cc.rstdf, d_xnf, dx);

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerCache<T>& lc = cc.layers[l];
        std::string pre = "dit.blk" + std::to_string(l);
        const T* g1 = lc.mod.ptr() + 2 * d;
        const T* sc2 = lc.mod.ptr() + 4 * d;
        const T* g2 = lc.mod.ptr() + 5 * d;
        Tensor<T> d_mod({6 * d});

        // ---- MLP branch: x = x_mid + g2 * ffout
        const auto& wf1 = pget(params, pre + ".ff1.w");
        const auto& wf2 = pget(params, pre + ".ff2.w");
        uint32_t dff = cfg.d_ff;
        Tensor<T> d_ffout({N, d});
        for (uint32_t i = 0; i < N; ++i) {
            const T* dxr = dx.row(i);
            const T* fo = lc.ffout.row(i);
            T* dfo = d_ffout.row(i);
            for (uint32_t j = 0; j < d; ++j) {
                d_mod[5 * d + j] += dxr[j] * fo[j];
                dfo[j] = dxr[j] * g2[j];
            }
        }
        // ffout = gelu(ffpre) @ wf2 + bf2
        Tensor<T> ffact({N, dff});
        for (uint32_t i = 0; i < N; ++i)
            for (uint32_t j = 0; j < dff; ++j) ffact.row(i)[j] = detail::gelu(lc.ffpre.row(i)[j]);
        {
            auto& gw = grad_slot(grads, pre + ".ff2.w", wf2.dims);
            auto& gb = grad_slot(grads, pre + ".ff2.b", {d});
            kernels::gemm_tn<T>(ffact.ptr(), d_ffout.ptr(), gw.ptr(), dff, N, d, true);
            for (uint32_t i = 0; i < N; ++i)
                for (uint32_t j = 0; j < d; ++j) gb[j] += d_ffout.row(i)[j];
        }
        Tensor<T> d_ffact({N, dff});
        kernels::gemm_nt<T>(d_ffout.ptr(), wf2.ptr(), d_ffact.ptr(), N, d, dff, false);
        for (uint32_t i = 0; i < N; ++i)
            for (uint32_t j = 0; j < dff; ++j)
                d_ffact.row(i)[j] *= detail::gelu_grad(lc.ffpre.row(i)[j]);
        {
            auto& gw = grad_slot(grads, pre + ".ff1.w", wf1.dims);
            auto& gb = grad_slot(grads, pre + ".ff1.b", {dff});
            kernels::gemm_tn<T>(lc.h2.ptr(), d_ffact.ptr(), gw.ptr(), d, N, dff, true);
            for (uint32_t i = 0; i < N; ++i)
                for (uint32_t j = 0; j < dff; ++j) gb[j] += d_ffact.row(i)[j];
        }
        Tensor<T> d_h2({N, d});
        kernels::gemm_nt<T>(d_ffact.ptr(), wf1.ptr(), d_h2.ptr(), N, dff, d, false);

        // h2 = xn2*(1+sc2)+sh2
        Tensor<T> d_xn2({N, d});
        for (uint32_t i = 0; i < N; ++i) {
            const T* dh = d_h2.row(i);
            const T* xn = lc.xn2.row(i);
            T* dxn = d_xn2.row(i);
            for (uint32_t j = 0; j < d; ++j) {
                d_mod[3 * d + j] += dh[j];
                d_mod[4 * d + j] += dh[j] * xn[j];
                dxn[j] = dh[j] * (T(1) + sc2[j]);
            }
        }
        Tensor<T> d_xmid({N, d});
        detail::layer_norm_backward(lc.xn2, lc.rstd2, d_xn2, d_xmid);
        for (size_t i = 0; i < dx.numel(); ++i) dx[i] += d_xmid[i];
        (void)sc2;

        // ---- attention branch: x_mid = x_in + g1 * attn_out
        const auto& wo = pget(params, pre + ".attn_out.w");
        Tensor<T> d_attnout({N, d});
        for (uint32_t i = 0; i < N; ++i) {
            const T* dxr = dx.row(i);
            const T* ao = lc.attn_out.row(i);
            T* da = d_attnout.row(i);
            for (uint32_t j = 0; j < d; ++j) {
                d_mod[2 * d + j] += dxr[j] * ao[j];
                da[j] = dxr[j] * g1[j];
            }
        }
        {
            auto& gw = grad_slot(grads, pre + ".attn_out.w", wo.dims);
            auto& gb = grad_slot(grads, pre + ".attn_out.b", {d});
            kernels::gemm_tn<T>(lc.attn_concat.ptr(), d_attnout.ptr(), gw.ptr(), d, N, d, true);
            for (uint32_t i = 0; i < N; ++i)
                for (uint32_t j = 0; j < d; ++j) gb[j] += d_attnout.row(i)[j];
        }
        Tensor<T> d_concat({N, d});
        kernels::gemm_nt<T>(d_attnout.ptr(), wo.ptr(), d_concat.ptr(), N, d, d, false);

        Tensor<T> d_qkv({N, 3 * d});
        d_qkv.fill(T(0));
        Tensor<T> qh({N, static_cast<uint32_t>(hd)}), kh({N, static_cast<uint32_t>(hd)}),
            vh({N, static_cast<uint32_t>(hd)});
        for (int h = 0; h < cfg.heads; ++h) {
            for (uint32_t i = 0; i < N; ++i) {
                const T* r = lc.qkv.row(i);
                std::copy(r + h * hd, r + (h + 1) * hd, qh.row(i));
                std::copy(r + d + h * hd, r + d + (h + 1) * hd, kh.row(i));
                std::copy(r + 2 * d + h * hd, r + 2 * d + (h + 1) * hd, vh.row(i));
            }
            const Tensor<T>& P = lc.probs[h];
            Tensor<T> d_oh({N, static_cast<uint32_t>(hd)});
            for (uint32_t i = 0; i < N; ++i)
                std::copy(d_concat.row(i) + h * hd, d_concat.row(i) + (h + 1) * hd, d_oh.row(i));

            Tensor<T> d_vh({N, static_cast<uint32_t>(hd)});
            kernels::gemm_tn<T>(P.ptr(), d_oh.ptr(), d_vh.ptr(), N, N, hd, false);
            Tensor<T> d_P({N, N});
            kernels::gemm_nt<T>(d_oh.ptr(), vh.ptr(), d_P.ptr(), N, hd, N, false);
            // softmax backward (masked entries have P=0 and drop out)
            for (uint32_t i = 0; i < N; ++i) {
                const T* p = P.row(i);
                T* dp = d_P.row(i);
                T dot = 0;
                for (uint32_t j = 0; j < N; ++j) dot += dp[j] * p[j];
                for (uint32_t j = 0; j < N; ++j) dp[j] = p[j] * (dp[j] - dot);
            }
            Tensor<T> d_qh({N, static_cast<uint32_t>(hd)}), d_kh({N, static_cast<uint32_t>(hd)});
            kernels::gemm_nn<T>(d_P.ptr(), kh.ptr(), d_qh.ptr(), N, N, hd, false);
            kernels::gemm_tn<T>(d_P.ptr(), qh.ptr(), d_kh.ptr(), N, N, hd, false);
            for (uint32_t i = 0; i < N; ++i) {
                T* dq = d_qkv.row(i);
                for (int j = 0; j < hd; ++j) {
                    dq[h * hd + j] += d_qh.row(i)[j] * scale;
                    dq[d + h * hd + j] += d_kh.row(i)[j] * scale;
                    dq[2 * d + h * hd + j] += d_vh.row(i)[j];
                }
            }
        }

        // undo rotation on q,k grads
        for (uint32_t i = 0; i < N; ++i) {
            if (!in.has_pos[i]) continue;
            std::span<const T> a(cc.angles.row(i), size_t(half));
            T* r = d_qkv.row(i);
            for (int h = 0; h < cfg.heads; ++h) {
                apply_rope<T>(std::span<T>(r + h * hd, size_t(hd)), a, -1);
                apply_rope<T>(std::span<T>(r + d + h * hd, size_t(hd)), a, -1);
            }
        }

        const auto& wqkv = pget(params, pre + ".qkv.w");
        {
            auto& gw = grad_slot(grads, pre + ".qkv.w", wqkv.dims);
            auto& gb = grad_slot(grads, pre + ".qkv.b", {3 * d});
            kernels::gemm_tn<T>(lc.h1.ptr(), d_qkv.ptr(), gw.ptr(), d, N, 3 * d, true);
            for (uint32_t i = 0; i < N; ++i)
                for (uint32_t j = 0; j < 3 * d; ++j) gb[j] += d_qkv.row(i)[j];
        }
        Tensor<T> d_h1({N, d});
        kernels::gemm_nt<T>(d_qkv.ptr(), wqkv.ptr(), d_h1.ptr(), N, 3 * d, d, false);

        const T* sc1 = lc.mod.ptr() + d;
        Tensor<T> d_xn1({N, d});
        for (uint32_t i = 0; i < N; ++i) {
            const T* dh = d_h1.row(i);
            const T* xn = lc.xn1.row(i);
            T* dxn = d_xn1.row(i);
            for (uint32_t j = 0; j < d; ++j) {
                d_mod[j] += dh[j];
                d_mod[d + j] += dh[j] * xn[j];
                dxn[j] = dh[j] * (T(1) + sc1[j]);
            }
        }
        Tensor<T> d_xin({N, d});
        detail::layer_norm_backward(lc.xn1, lc.rstd1, d_xn1, d_xin);
        for (size_t i = 0; i < dx.numel(); ++i) dx[i] += d_xin[i];

        // modulation params
        {
            const auto& wmod = pget(params, pre + ".mod.w");
            auto& gw = grad_slot(grads, pre + ".mod.w", wmod.dims);
            auto& gb = grad_slot(grads, pre + ".mod.b", {6 * d});
            kernels::gemm_tn<T>(cc.t_c.ptr(), d_mod.ptr(), gw.ptr(), te, 1, 6 * d, true);
            for (uint32_t j = 0; j < 6 * d; ++j) gb[j] += d_mod[j];
            kernels::gemm_nt<T>(d_mod.ptr(), wmod.ptr(), d_tc.ptr(), 1, 6 * d, te, true);
        }
    }

    // timestep MLP
    {
        const auto& tw2 = pget(params, "dit.tmlp.w2");
        const auto& tw1 = pget(params, "dit.tmlp.w1");
        Tensor<T> t_act({te});
        for (uint32_t j = 0; j < te; ++j) t_act[j] = detail::silu(cc.t_c1[j]);
        auto& gw2 = grad_slot(grads, "dit.tmlp.w2", tw2.dims);
        auto& gb2 = grad_slot(grads, "dit.tmlp.b2", {te});
        kernels::gemm_tn<T>(t_act.ptr(), d_tc.ptr(), gw2.ptr(), te, 1, te, true);
        for (uint32_t j = 0; j < te; ++j) gb2[j] += d_tc[j];
        Tensor<T> d_act({te});
        kernels::gemm_nt<T>(d_tc.ptr(), tw2.ptr(), d_act.ptr(), 1, te, te, false);
        for (uint32_t j = 0; j < te; ++j) d_act[j] *= detail::silu_grad(cc.t_c1[j]);
        auto& gw1 = grad_slot(grads, "dit.tmlp.w1", tw1.dims);
        auto& gb1 = grad_slot(grads, "dit.tmlp.b1", {te});
        kernels::gemm_tn<T>(cc.t_e0.ptr(), d_act.ptr(), gw1.ptr(), te, 1, te, true);
        for (uint32_t j = 0; j < te; ++j) gb1[j] += d_act[j];
    }

    // embedding layer
    auto& grole = grad_slot(grads, "dit.role_emb", {kNumTokenRoles, d});
    for (uint32_t i = 0; i < N; ++i) {
        T* gr = grole.row(in.role[i]);
        const T* dxr = dx.row(i);
        for (uint32_t j = 0; j < d; ++j) gr[j] += dxr[j];
    }
    if (in.n_lat) {
        const auto& win = pget(params, "dit.in_proj.w");
        auto& gw = grad_slot(grads, "dit.in_proj.w", win.dims);
        auto& gb = grad_slot(grads, "dit.in_proj.b", {d});
        kernels::gemm_tn<T>(in.latent.ptr(), dx.row(in.n_sem), gw.ptr(), cfg.c_lat, in.n_lat, d,
                            true);
        for (uint32_t i = 0; i < in.n_lat; ++i)
            for (uint32_t j = 0; j < d; ++j) gb[j] += dx.row(in.n_sem + i)[j];
    }
    if (grad_sem) {
        *grad_sem = Tensor<T>({in.n_sem, d});
        for (uint32_t i = 0; i < in.n_sem; ++i)
            std::copy(dx.row(i), dx.row(i) + d, grad_sem->row(i));
    }
}

template <typename T>
T fm_loss(const ModelConfig& cfg, const ParamMapT<T>& params, const PreparedSample& prep, Rng& rng,
          ParamMapT<T>* grads, double cfg_dropout) {
    cfg.check();
    const LatentGrid& x0 = prep.target;

    T t = static_cast<T>(rng.uniform());
    LatentGrid xt = x0;
    std::vector<T> u(x0.numel());
    for (size_t i = 0; i < x0.numel(); ++i) {
        T eps = static_cast<T>(rng.normal());
        u[i] = eps - static_cast<T>(x0.data[i]);
        xt.data[i] = static_cast<float>((T(1) - t) * static_cast<T>(x0.data[i]) + t * eps);
    }
    bool drop_sem = cfg_dropout > 0.0 && rng.uniform() < cfg_dropout;

    Tensor<T> sem_in = prep.sem_raw.cast<T>();
    AdaptCache<T> acache;
    Tensor<T> sem = adapt<T>(sem_in, params, &acache);
    if (drop_sem) sem = Tensor<T>();

    SeqInputs<T> seq = assemble_sequence<T>(cfg, prep.task, prep.conditions, sem, xt);
    DitCache<T> cache;
    Tensor<T> vel = dit_forward<T>(cfg, params, seq, t, grads ? &cache : nullptr);

    // forward pass without cache recomputes nothing extra; with grads we reuse it
    if (!grads) {
        T loss = 0;
        for (size_t i = 0; i < u.size(); ++i) {
            T diff = vel[i] - u[i];
            loss += diff * diff;
        }
        return loss / T(u.size());
    }

    T loss = 0;
    Tensor<T> gvel({seq.n_target, static_cast<uint32_t>(cfg.c_lat)});
    for (size_t i = 0; i < u.size(); ++i) {
        T diff = vel[i] - u[i];
        loss += diff * diff;
        gvel[i] = T(2) * diff / T(u.size());
    }
    loss /= T(u.size());

    Tensor<T> grad_sem;
    dit_backward<T>(cfg, params, seq, cache, gvel, *grads, drop_sem ? nullptr : &grad_sem);
    if (!drop_sem && seq.n_sem) adapt_backward<T>(acache, grad_sem, params, *grads);
    return loss;
}

}  // namespace omnivid
