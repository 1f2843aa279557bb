// Scalar reference kernels. These define the numeric contract the SIMD
// variants are tested against.

#include "dqe/kernels.hpp"

#include <cmath>
#include <cstring>

namespace dqe::kernels {

namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double t = alpha * x[i];
        y[i] = y[i] + t;
    }
}

void s_scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

// i-l-j loop order so each row of C is built by axpy over rows of B.
// The AVX2 matmul follows the same ordering, which keeps both backends
// bit-identical.
void s_matmul(const double* a, const double* b, double* c,
              std::size_t m, std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            s_axpy(arow[l], b + l * n, crow, n);
        }
    }
}

void s_adam(double* p, const double* g, double* m, double* v, std::size_t n,
            double lr, double beta1, double beta2, double eps,
            double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        double g2 = g[i] * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g2;
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        double denom = std::sqrt(vhat) + eps;
        p[i] = p[i] - lr * (mhat / denom);
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar", s_add, s_sub, s_mul, s_axpy, s_scale,
        s_dot,    s_sum, s_matmul, s_adam,
    };
    return ops;
}

}  // namespace dqe::kernels
