#pragma once
// Dense double-precision kernels backing the tensor engine.
//
// Every kernel has a scalar reference implementation and, on x86-64 with
// AVX2, a vectorized variant. The active backend is chosen once at runtime
// (override with set_backend() or the DQE_KERNELS env var).
//
// Elementwise kernels (add/sub/mul/axpy/scale/adam_update) and matmul are
// bit-identical across backends: the AVX2 paths use the same unfused
// multiply-then-add ordering as the scalar loops. dot/sum use lane-partial
// accumulators under AVX2 and are equivalence-tested to a tolerance instead.

#include <cstddef>
#include <string>

namespace dqe::kernels {

struct Ops {
    const char* name;

    // out[i] = a[i] (op) b[i]
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);

    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x[i] *= alpha
    void (*scale)(double alpha, double* x, std::size_t n);

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);

    // C = A * B, row-major, A: m x k, B: k x n, C: m x n (overwritten).
    void (*matmul)(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);

    // One bias-corrected Adam update over a flat parameter block.
    // bc1 = 1 - beta1^t, bc2 = 1 - beta2^t computed by the caller.
    void (*adam_update)(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2);
};

// Backend currently in use. Resolved on first call: AVX2 when the CPU
// supports it, unless DQE_KERNELS=scalar is set.
const Ops& active();

// Force a backend by name ("scalar", "avx2"). Returns false if unavailable.
bool set_backend(const std::string& name);

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr on non-x86 or when built without AVX2 support
bool cpu_has_avx2();

}  // namespace dqe::kernels
