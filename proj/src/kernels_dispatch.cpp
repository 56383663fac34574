#include <cstring>

#include "omnivid/kernels.hpp"

namespace omnivid::kernels {
namespace {

struct Backend {
    const char* name;
    void (*nn)(const float*, const float*, float*, int, int, int, bool);
    void (*nt)(const float*, const float*, float*, int, int, int, bool);
    void (*tn)(const float*, const float*, float*, int, int, int, bool);
    float (*dot)(const float*, const float*, int);
};

constexpr Backend kScalar{"scalar", scalar::sgemm_nn, scalar::sgemm_nt, scalar::sgemm_tn,
                          scalar::sdot};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Backend kAvx2{"avx2", avx2::sgemm_nn, avx2::sgemm_nt, avx2::sgemm_tn, avx2::sdot};

bool avx2_available() { return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"); }
#endif

Backend pick() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) return kAvx2;
#endif
    return kScalar;
}

Backend g_backend = pick();

}  // namespace

const char* backend_name() { return g_backend.name; }

bool force_backend(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        g_backend = kScalar;
        return true;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (std::strcmp(name, "avx2") == 0 && avx2_available()) {
        g_backend = kAvx2;
        return true;
    }
#endif
    return false;
}

void sgemm_nn(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    g_backend.nn(A, B, C, m, k, n, acc);
}
void sgemm_nt(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    g_backend.nt(A, B, C, m, k, n, acc);
}
void sgemm_tn(const float* A, const float* B, float* C, int m, int k, int n, bool acc) {
    g_backend.tn(A, B, C, m, k, n, acc);
}
float sdot(const float* x, const float* y, int n) { return g_backend.dot(x, y, n); }

}  // namespace omnivid::kernels
