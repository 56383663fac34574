// Compiled with -mavx2 -mfma; only reached after a runtime cpuid check.
#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "omnivid/kernels.hpp"

namespace omnivid::kernels::avx2 {

namespace {
inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}
}  // namespace

void sgemm_nn(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    int n8 = n & ~7;
    for (int i = 0; i < m; ++i) {
        float* c = C + static_cast<size_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) c[j] = 0.0f;
        const float* a = A + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            __m256 av = _mm256_set1_ps(a[p]);
            const float* b = B + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j < n8; j += 8) {
                __m256 cv = _mm256_loadu_ps(c + j);
                cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + j), cv);
                _mm256_storeu_ps(c + j, cv);
            }
            for (; j < n; ++j) c[j] += a[p] * b[j];
        }
    }
}

void sgemm_nt(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const float* a = A + static_cast<size_t>(i) * k;
        float* c = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* b = B + static_cast<size_t>(j) * k;
            float s = sdot(a, b, k);
            c[j] = acc ? c[j] + s : s;
        }
    }
}

void sgemm_tn(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    int n8 = n & ~7;
    for (int i = 0; i < m; ++i) {
        float* c = C + static_cast<size_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) c[j] = 0.0f;
        for (int p = 0; p < k; ++p) {
            __m256 av = _mm256_set1_ps(A[static_cast<size_t>(p) * m + i]);
            const float* b = B + static_cast<size_t>(p) * n;
            int j = 0;
            for (; j < n8; j += 8) {
                __m256 cv = _mm256_loadu_ps(c + j);
                cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + j), cv);
                _mm256_storeu_ps(c + j, cv);
            }
            for (; j < n; ++j) c[j] += A[static_cast<size_t>(p) * m + i] * b[j];
        }
    }
}

float sdot(const float* x, const float* y, int n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    int i = 0;
    int n16 = n & ~15;
    for (; i < n16; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    float s = hsum256(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace omnivid::kernels::avx2

#endif
