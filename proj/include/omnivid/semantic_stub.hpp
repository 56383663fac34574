#pragma once

#include <vector>

#include "omnivid/instruction.hpp"
#include "omnivid/kernels.hpp"
#include "omnivid/params.hpp"

namespace omnivid {

// Frozen semantic encoder dimensions plus the trainable adaptor stack.
constexpr int kSemWidth = 48;       // d_sem, also the latent channel count
constexpr int kAdaptHidden = 96;    // d_hidden
constexpr int kMaxSemTokens = 64;   // L_s clip
constexpr uint64_t kEncoderSeed = 0x7e1e0a51ULL;  // fixed: the encoder is frozen by definition

// Frozen two-layer transformer weights under "encoder.". Always seeded from
// kEncoderSeed so fixtures stay stable across runs and checkpoints.
void init_encoder_params(ParamMap& params);

// Trainable adaptor (affine -> tanh -> affine) under "adaptor.".
void init_adaptor_params(ParamMap& params, int d_model, Rng& rng);

// Deterministic semantic encoding: hashed byte-trigram text embeddings plus
// mean-pooled per-ref latent summaries, passed through the frozen encoder.
// Returns the penultimate-layer activations, shape (L_s, kSemWidth).
Tensor<float> encode_instruction(const Instruction& instr,
                                 const std::vector<LatentGrid>& ref_summaries,
                                 const ParamMap& params);

// Final-layer activations; exists only so the penultimate extraction point is
// meaningful. Same shape as encode_instruction.
Tensor<float> encode_instruction_final(const Instruction& instr,
                                       const std::vector<LatentGrid>& ref_summaries,
                                       const ParamMap& params);

template <typename T>
struct AdaptCache {
    Tensor<T> input;   // (L, d_sem)
    Tensor<T> hidden;  // (L, d_hidden), post-tanh
};

// tokens (L, d_sem) -> condition tokens (L, d_model).
template <typename T>
Tensor<T> adapt(const Tensor<T>& tokens, const ParamMapT<T>& params, AdaptCache<T>* cache = nullptr) {
    const auto& w1 = pget(params, "adaptor.w1");  // (d_sem, d_hidden)
    const auto& b1 = pget(params, "adaptor.b1");
    const auto& w2 = pget(params, "adaptor.w2");  // (d_hidden, d_model)
    const auto& b2 = pget(params, "adaptor.b2");
    if (tokens.cols() != w1.rows())
        throw std::invalid_argument("adapt: token width " + std::to_string(tokens.cols()) +
                                    " does not match adaptor input " + std::to_string(w1.rows()));

    uint32_t L = tokens.rows(), dh = w1.cols(), dm = w2.cols();
    Tensor<T> h({L, dh});
    kernels::gemm_nn<T>(tokens.ptr(), w1.ptr(), h.ptr(), L, w1.rows(), dh, false);
    for (uint32_t i = 0; i < L; ++i)
        for (uint32_t j = 0; j < dh; ++j) h.row(i)[j] = std::tanh(h.row(i)[j] + b1[j]);

    Tensor<T> out({L, dm});
    kernels::gemm_nn<T>(h.ptr(), w2.ptr(), out.ptr(), L, dh, dm, false);
    for (uint32_t i = 0; i < L; ++i)
        for (uint32_t j = 0; j < dm; ++j) out.row(i)[j] += b2[j];

    if (cache) {
        cache->input = tokens;
        cache->hidden = std::move(h);
    }
    return out;
}

// Accumulates parameter gradients for grad_out (L, d_model).
template <typename T>
void adapt_backward(const AdaptCache<T>& cache, const Tensor<T>& grad_out,
                    const ParamMapT<T>& params, ParamMapT<T>& grads) {
    const auto& w1 = pget(params, "adaptor.w1");
    const auto& w2 = pget(params, "adaptor.w2");
    uint32_t L = grad_out.rows(), dh = w2.rows(), dm = w2.cols(), ds = w1.rows();

    auto& gw2 = grad_slot(grads, "adaptor.w2", {dh, dm});
    auto& gb2 = grad_slot(grads, "adaptor.b2", {dm});
    kernels::gemm_tn<T>(cache.hidden.ptr(), grad_out.ptr(), gw2.ptr(), dh, L, dm, true);
    for (uint32_t i = 0; i < L; ++i)
        for (uint32_t j = 0; j < dm; ++j) gb2[j] += grad_out.row(i)[j];

    Tensor<T> gh({L, dh});
    kernels::gemm_nt<T>(grad_out.ptr(), w2.ptr(), gh.ptr(), L, dm, dh, false);
    for (uint32_t i = 0; i < L; ++i)
        for (uint32_t j = 0; j < dh; ++j) {
            T t = cache.hidden.row(i)[j];
            gh.row(i)[j] *= (T(1) - t * t);
        }

    auto& gw1 = grad_slot(grads, "adaptor.w1", {ds, dh});
    auto& gb1 = grad_slot(grads, "adaptor.b1", {dh});
    kernels::gemm_tn<T>(cache.input.ptr(), gh.ptr(), gw1.ptr(), ds, L, dh, true);
    for (uint32_t i = 0; i < L; ++i)
        for (uint32_t j = 0; j < dh; ++j) gb1[j] += gh.row(i)[j];
}

}  // namespace omnivid
