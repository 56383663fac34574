#include "omnivid/kernels.hpp"

namespace omnivid::kernels::scalar {

void sgemm_nn(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        float* c = C + static_cast<size_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) c[j] = 0.0f;
        const float* a = A + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            float av = a[p];
            const float* b = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

void sgemm_nt(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        const float* a = A + static_cast<size_t>(i) * k;
        float* c = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            float s = acc ? c[j] : 0.0f;
            const float* b = B + static_cast<size_t>(j) * k;
            for (int p = 0; p < k; ++p) s += a[p] * b[p];
            c[j] = s;
        }
    }
}

void sgemm_tn(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        float* c = C + static_cast<size_t>(i) * n;
        if (!acc)
            for (int j = 0; j < n; ++j) c[j] = 0.0f;
        for (int p = 0; p < k; ++p) {
            float av = A[static_cast<size_t>(p) * m + i];
            const float* b = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

float sdot(const float* x, const float* y, int n) {
    float s = 0.0f;
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace omnivid::kernels::scalar
