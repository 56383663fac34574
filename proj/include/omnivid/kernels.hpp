#pragma once

#include <cstddef>

namespace omnivid::kernels {

// Matrix kernels on row-major storage.
//   gemm_nn: C(m,n) = A(m,k) * B(k,n)      [+= C when acc]
//   gemm_nt: C(m,n) = A(m,k) * B(n,k)^T    [+= C when acc]
//   gemm_tn: C(m,n) = A(k,m)^T * B(k,n)    [+= C when acc]
// Float entry points dispatch at runtime (scalar or AVX2); the scalar
// namespace is the reference implementation the SIMD paths are tested against.

namespace scalar {
void sgemm_nn(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
void sgemm_nt(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
void sgemm_tn(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
float sdot(const float* x, const float* y, int n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void sgemm_nn(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
void sgemm_nt(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
void sgemm_tn(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
float sdot(const float* x, const float* y, int n);
}  // namespace avx2
#endif

// Dispatched entry points.
void sgemm_nn(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
void sgemm_nt(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
void sgemm_tn(const float* A, const float* B, float* C, int m, int k, int n, bool acc);
float sdot(const float* x, const float* y, int n);

// Name of the backend selected at load time ("scalar" or "avx2").
const char* backend_name();
// Force a backend by name, for tests. Returns false if unavailable.
bool force_backend(const char* name);

// Generic typed front-end: float routes through the dispatcher, other
// scalar types use a reference loop (the double-precision gradcheck path).
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T s = acc ? C[i * n + j] : T(0);
            for (int p = 0; p < k; ++p) s += A[i * k + p] * B[p * n + j];
            C[i * n + j] = s;
        }
    }
}
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T s = acc ? C[i * n + j] : T(0);
            for (int p = 0; p < k; ++p) s += A[i * k + p] * B[j * k + p];
            C[i * n + j] = s;
        }
    }
}
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T s = acc ? C[i * n + j] : T(0);
            for (int p = 0; p < k; ++p) s += A[p * m + i] * B[p * n + j];
            C[i * n + j] = s;
        }
    }
}

template <>
inline void gemm_nn<float>(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    sgemm_nn(A, B, C, m, k, n, acc);
}
template <>
inline void gemm_nt<float>(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    sgemm_nt(A, B, C, m, k, n, acc);
}
template <>
inline void gemm_tn<float>(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    sgemm_tn(A, B, C, m, k, n, acc);
}

}  // namespace omnivid::kernels
