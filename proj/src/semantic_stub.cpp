#include "omnivid/semantic_stub.hpp"

#include <cmath>
#include <sstream>

namespace omnivid {

namespace {

constexpr int kEncBlocks = 2;
constexpr int kEncHidden = 96;

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

// Hashed byte-trigram embedding of one word, unit-ish scale.
void embed_word(const std::string& word, float* out) {
    std::string padded = "^" + word + "$";
    size_t gram = std::min<size_t>(3, padded.size());
    size_t count = padded.size() - gram + 1;
    for (size_t i = 0; i < count; ++i) {
        uint64_t h = fnv1a(padded.data() + i, gram);
        int idx = static_cast<int>(h % kSemWidth);
        float sign = (h >> 17) & 1 ? 1.0f : -1.0f;
        out[idx] += sign;
    }
    float norm = 1.0f / std::sqrt(static_cast<float>(count));
    for (int i = 0; i < kSemWidth; ++i) out[i] *= norm;
}

void add_sin_position(float* row, int index) {
    for (int i = 0; i < kSemWidth / 2; ++i) {
        double omega = std::pow(10000.0, -2.0 * i / kSemWidth);
        row[2 * i] += 0.3f * static_cast<float>(std::sin(index * omega));
        row[2 * i + 1] += 0.3f * static_cast<float>(std::cos(index * omega));
    }
}

void layer_norm_rows(Tensor<float>& x, Tensor<float>& out) {
    uint32_t n = x.rows(), d = x.cols();
    for (uint32_t i = 0; i < n; ++i) {
        const float* r = x.row(i);
        float mu = 0;
        for (uint32_t j = 0; j < d; ++j) mu += r[j];
        mu /= d;
        float var = 0;
        for (uint32_t j = 0; j < d; ++j) var += (r[j] - mu) * (r[j] - mu);
        var /= d;
        float rstd = 1.0f / std::sqrt(var + 1e-5f);
        float* o = out.row(i);
        for (uint32_t j = 0; j < d; ++j) o[j] = (r[j] - mu) * rstd;
    }
}

void encoder_block(Tensor<float>& x, const ParamMap& p, const std::string& prefix) {
    uint32_t n = x.rows(), d = x.cols();
    Tensor<float> xn({n, d});
    layer_norm_rows(x, xn);

    const auto& wq = pget(p, prefix + ".wq");
    const auto& wk = pget(p, prefix + ".wk");
    const auto& wv = pget(p, prefix + ".wv");
    const auto& wo = pget(p, prefix + ".wo");
    Tensor<float> q({n, d}), k({n, d}), v({n, d});
    kernels::sgemm_nn(xn.ptr(), wq.ptr(), q.ptr(), n, d, d, false);
    kernels::sgemm_nn(xn.ptr(), wk.ptr(), k.ptr(), n, d, d, false);
    kernels::sgemm_nn(xn.ptr(), wv.ptr(), v.ptr(), n, d, d, false);

    float scale = 1.0f / std::sqrt(static_cast<float>(d));
    Tensor<float> logits({n, n});
    kernels::sgemm_nt(q.ptr(), k.ptr(), logits.ptr(), n, d, n, false);
    for (uint32_t i = 0; i < n; ++i) {
        float* row = logits.row(i);
        float mx = row[0] * scale;
        for (uint32_t j = 0; j < n; ++j) {
            row[j] *= scale;
            mx = std::max(mx, row[j]);
        }
        float sum = 0;
        for (uint32_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (uint32_t j = 0; j < n; ++j) row[j] /= sum;
    }
    Tensor<float> attn({n, d}), proj({n, d});
    kernels::sgemm_nn(logits.ptr(), v.ptr(), attn.ptr(), n, n, d, false);
    kernels::sgemm_nn(attn.ptr(), wo.ptr(), proj.ptr(), n, d, d, false);
    for (size_t i = 0; i < x.numel(); ++i) x[i] += proj[i];

    layer_norm_rows(x, xn);
    const auto& w1 = pget(p, prefix + ".w1");
    const auto& b1 = pget(p, prefix + ".b1");
    const auto& w2 = pget(p, prefix + ".w2");
    const auto& b2 = pget(p, prefix + ".b2");
    Tensor<float> h({n, static_cast<uint32_t>(kEncHidden)});
    kernels::sgemm_nn(xn.ptr(), w1.ptr(), h.ptr(), n, d, kEncHidden, false);
    for (uint32_t i = 0; i < n; ++i)
        for (int j = 0; j < kEncHidden; ++j) h.row(i)[j] = std::tanh(h.row(i)[j] + b1[j]);
    Tensor<float> mlp({n, d});
    kernels::sgemm_nn(h.ptr(), w2.ptr(), mlp.ptr(), n, kEncHidden, d, false);
    for (uint32_t i = 0; i < n; ++i)
        for (uint32_t j = 0; j < d; ++j) x.row(i)[j] += mlp.row(i)[j] + b2[j];
}

Tensor<float> embed_tokens(const Instruction& instr, const std::vector<LatentGrid>& refs,
                           const ParamMap& params) {
    if (refs.size() != instr.refs.size())
        throw std::invalid_argument("encode_instruction: ref summaries not aligned with refs");
    if (static_cast<int>(refs.size()) >= kMaxSemTokens)
        throw std::invalid_argument("encode_instruction: too many refs");

    auto words = split_words(instr.text);
    size_t n_text = std::min(words.size(), size_t(kMaxSemTokens) - refs.size());
    uint32_t L = static_cast<uint32_t>(n_text + refs.size());

    const auto& kind_emb = pget(params, "encoder.kind_emb");
    Tensor<float> x({L, static_cast<uint32_t>(kSemWidth)});
    for (size_t i = 0; i < n_text; ++i) embed_word(words[i], x.row(i));
    for (size_t r = 0; r < refs.size(); ++r) {
        const LatentGrid& g = refs[r];
        if (g.c != kSemWidth)
            throw std::invalid_argument("encode_instruction: ref latent channels " +
                                        std::to_string(g.c) + " != " + std::to_string(kSemWidth));
        float* row = x.row(n_text + r);
        size_t cells = g.numel() / g.c;
        for (size_t i = 0; i < cells; ++i)
            for (uint32_t c = 0; c < g.c; ++c) row[c] += g.data[i * g.c + c];
        for (uint32_t c = 0; c < g.c; ++c) row[c] /= static_cast<float>(cells);
        const float* ke = kind_emb.row(static_cast<size_t>(instr.refs[r].kind));
        for (int c = 0; c < kSemWidth; ++c) row[c] += ke[c];
    }
    for (uint32_t i = 0; i < L; ++i) add_sin_position(x.row(i), static_cast<int>(i));
    return x;
}

}  // namespace

void init_encoder_params(ParamMap& params) {
    Rng rng(kEncoderSeed);
    uint32_t d = kSemWidth, dh = kEncHidden;
    init_normal(params, "encoder.kind_emb", {4, d}, rng, 0.5);
    for (int b = 0; b < kEncBlocks; ++b) {
        std::string pre = "encoder.b" + std::to_string(b);
        for (const char* w : {".wq", ".wk", ".wv", ".wo"})
            init_normal(params, pre + w, {d, d}, rng, 0.15);
        init_normal(params, pre + ".w1", {d, dh}, rng, 0.15);
        init_zeros(params, pre + ".b1", {dh});
        init_normal(params, pre + ".w2", {dh, d}, rng, 0.15);
        init_zeros(params, pre + ".b2", {d});
    }
}

void init_adaptor_params(ParamMap& params, int d_model, Rng& rng) {
    init_normal(params, "adaptor.w1", {kSemWidth, kAdaptHidden}, rng, 0.1);
    init_zeros(params, "adaptor.b1", {kAdaptHidden});
    init_normal(params, "adaptor.w2", {kAdaptHidden, static_cast<uint32_t>(d_model)}, rng, 0.1);
    init_zeros(params, "adaptor.b2", {static_cast<uint32_t>(d_model)});
}

Tensor<float> encode_instruction(const Instruction& instr, const std::vector<LatentGrid>& refs,
                                 const ParamMap& params) {
    Tensor<float> x = embed_tokens(instr, refs, params);
    // Penultimate hidden state: the output of block L-1 of L.
    for (int b = 0; b < kEncBlocks - 1; ++b) encoder_block(x, params, "encoder.b" + std::to_string(b));
    return x;
}

Tensor<float> encode_instruction_final(const Instruction& instr, const std::vector<LatentGrid>& refs,
                                       const ParamMap& params) {
    Tensor<float> x = embed_tokens(instr, refs, params);
    for (int b = 0; b < kEncBlocks; ++b) encoder_block(x, params, "encoder.b" + std::to_string(b));
    return x;
}

}  // namespace omnivid
