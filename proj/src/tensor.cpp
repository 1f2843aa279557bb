#include "dqe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "dqe/kernels.hpp"

namespace dqe {

namespace {

bool g_debug_checks = [] {
    const char* env = std::getenv("DQE_DEBUG_CHECKS");
    return env != nullptr && env[0] == '1';
}();

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void set_debug_checks(bool on) { g_debug_checks = on; }
bool debug_checks() { return g_debug_checks; }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->rows = rows;
    impl->cols = cols;
    impl->data.assign(rows * cols, 0.0);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->grad.assign(rows * cols, 0.0);
    return Tensor(std::move(impl));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> data,
                    bool requires_grad) {
    require(data.size() == rows * cols, "Tensor::from: data length does not match shape");
    auto impl = std::make_shared<TensorImpl>();
    impl->rows = rows;
    impl->cols = cols;
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->grad.assign(rows * cols, 0.0);
    return Tensor(std::move(impl));
}

Tensor Tensor::row(std::vector<double> data, bool requires_grad) {
    std::size_t n = data.size();
    return from(1, n, std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from(1, 1, {v}, requires_grad);
}

void Tensor::zero_grad() {
    if (impl_->requires_grad) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::value() const {
    require(size() == 1, "Tensor::value: tensor is not scalar");
    return impl_->data[0];
}

Tensor Tape::make_output(std::size_t rows, std::size_t cols, bool requires_grad) {
    return Tensor::zeros(rows, cols, grad_enabled_ && requires_grad);
}

void Tape::check_finite(const Tensor& t, const char* op) const {
    if (!g_debug_checks) return;
    for (double v : t.vec()) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_output(m, n, a.requires_grad() || b.requires_grad());
    kernels::active().matmul(a.data(), b.data(), out.data(), m, k, n);
    check_finite(out, "matmul");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr();
        record([ai, bi, oi, m, k, n] {
            const auto& ops = kernels::active();
            const double* dout = oi->grad.data();
            if (ai->requires_grad) {
                // dA[i,l] += dot(dC[i,:], B[l,:])
                double* da = ai->grad.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t l = 0; l < k; ++l) {
                        da[i * k + l] += ops.dot(dout + i * n, bi->data.data() + l * n, n);
                    }
                }
            }
            if (bi->requires_grad) {
                // dB[l,:] += A[i,l] * dC[i,:]
                double* db = bi->grad.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t l = 0; l < k; ++l) {
                        ops.axpy(ai->data[i * k + l], dout + i * n, db + l * n, n);
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "add: shape mismatch");
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
    kernels::active().add(a.data(), b.data(), out.data(), a.size());
    check_finite(out, "add");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr();
        record([ai, bi, oi] {
            const auto& ops = kernels::active();
            if (ai->requires_grad)
                ops.axpy(1.0, oi->grad.data(), ai->grad.data(), oi->grad.size());
            if (bi->requires_grad)
                ops.axpy(1.0, oi->grad.data(), bi->grad.data(), oi->grad.size());
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "sub: shape mismatch");
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
    kernels::active().sub(a.data(), b.data(), out.data(), a.size());
    check_finite(out, "sub");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr();
        record([ai, bi, oi] {
            const auto& ops = kernels::active();
            if (ai->requires_grad)
                ops.axpy(1.0, oi->grad.data(), ai->grad.data(), oi->grad.size());
            if (bi->requires_grad)
                ops.axpy(-1.0, oi->grad.data(), bi->grad.data(), oi->grad.size());
        });
    }
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mul: shape mismatch");
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
    kernels::active().mul(a.data(), b.data(), out.data(), a.size());
    check_finite(out, "mul");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr(), bi = b.impl_ptr(), oi = out.impl_ptr();
        record([ai, bi, oi] {
            const std::size_t n = oi->grad.size();
            if (ai->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += oi->grad[i] * ai->data[i];
            }
        });
    }
    return out;
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& bias) {
    require(bias.rows() == 1 && bias.cols() == a.cols(), "add_rowvec: bias must be 1 x cols(a)");
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad() || bias.requires_grad());
    const std::size_t m = a.rows(), n = a.cols();
    for (std::size_t i = 0; i < m; ++i) {
        kernels::active().add(a.data() + i * n, bias.data(), out.data() + i * n, n);
    }
    check_finite(out, "add_rowvec");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr(), bi = bias.impl_ptr(), oi = out.impl_ptr();
        record([ai, bi, oi, m, n] {
            const auto& ops = kernels::active();
            if (ai->requires_grad)
                ops.axpy(1.0, oi->grad.data(), ai->grad.data(), m * n);
            if (bi->requires_grad) {
                for (std::size_t i = 0; i < m; ++i)
                    ops.axpy(1.0, oi->grad.data() + i * n, bi->grad.data(), n);
            }
        });
    }
    return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = c * a.data()[i];
    check_finite(out, "scale");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi, c] {
            kernels::active().axpy(c, oi->grad.data(), ai->grad.data(), oi->grad.size());
        });
    }
    return out;
}

Tensor Tape::add_const(const Tensor& a, double c) {
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + c;
    check_finite(out, "add_const");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi] {
            kernels::active().axpy(1.0, oi->grad.data(), ai->grad.data(), oi->grad.size());
        });
    }
    return out;
}

Tensor Tape::sigmoid(const Tensor& a) {
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
    check_finite(out, "sigmoid");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                double y = oi->data[i];
                ai->grad[i] += oi->grad[i] * y * (1.0 - y);
            }
        });
    }
    return out;
}

Tensor Tape::tanh(const Tensor& a) {
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);
    check_finite(out, "tanh");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                double y = oi->data[i];
                ai->grad[i] += oi->grad[i] * (1.0 - y * y);
            }
        });
    }
    return out;
}

Tensor Tape::exp(const Tensor& a) {
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::exp(a.data()[i]);
    check_finite(out, "exp");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i)
                ai->grad[i] += oi->grad[i] * oi->data[i];
        });
    }
    return out;
}

Tensor Tape::clamp(const Tensor& a, double lo, double hi) {
    require(lo <= hi, "clamp: lo > hi");
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::min(hi, std::max(lo, a.data()[i]));
    check_finite(out, "clamp");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi, lo, hi] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i) {
                double x = ai->data[i];
                if (x >= lo && x <= hi) ai->grad[i] += oi->grad[i];
            }
        });
    }
    return out;
}

namespace {
// Softmax of one stride-`stride` slice of length n starting at base.
void softmax_slice(const double* in, double* out, std::size_t n, std::size_t stride) {
    double mx = in[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = std::exp(in[i * stride] - mx);
        out[i * stride] = e;
        z += e;
    }
    for (std::size_t i = 0; i < n; ++i) out[i * stride] /= z;
}

void softmax_slice_backward(const double* y, const double* dy, double* dx, std::size_t n,
                            std::size_t stride) {
    double dotv = 0.0;
    for (std::size_t i = 0; i < n; ++i) dotv += dy[i * stride] * y[i * stride];
    for (std::size_t i = 0; i < n; ++i)
        dx[i * stride] += y[i * stride] * (dy[i * stride] - dotv);
}
}  // namespace

Tensor Tape::softmax(const Tensor& a, int axis) {
    require(axis == 0 || axis == 1, "softmax: axis must be 0 or 1");
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    const std::size_t m = a.rows(), n = a.cols();
    if (axis == 1) {
        for (std::size_t i = 0; i < m; ++i)
            softmax_slice(a.data() + i * n, out.data() + i * n, n, 1);
    } else {
        for (std::size_t j = 0; j < n; ++j)
            softmax_slice(a.data() + j, out.data() + j, m, n);
    }
    check_finite(out, "softmax");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi, m, n, axis] {
            if (axis == 1) {
                for (std::size_t i = 0; i < m; ++i)
                    softmax_slice_backward(oi->data.data() + i * n, oi->grad.data() + i * n,
                                           ai->grad.data() + i * n, n, 1);
            } else {
                for (std::size_t j = 0; j < n; ++j)
                    softmax_slice_backward(oi->data.data() + j, oi->grad.data() + j,
                                           ai->grad.data() + j, m, n);
            }
        });
    }
    return out;
}

Tensor Tape::masked_softmax(const Tensor& scores, const Tensor& mask) {
    require(scores.rows() == 1 && mask.rows() == 1 && scores.cols() == mask.cols(),
            "masked_softmax: scores and mask must be 1 x n");
    const std::size_t n = scores.cols();
    double mx = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.data()[i] != 0.0) {
            mx = any ? std::max(mx, scores.data()[i]) : scores.data()[i];
            any = true;
        }
    }
    require(any, "masked_softmax: mask selects no entries");
    Tensor out = make_output(1, n, scores.requires_grad());
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = mask.data()[i] != 0.0 ? std::exp(scores.data()[i] - mx) : 0.0;
        out.data()[i] = e;
        z += e;
    }
    for (std::size_t i = 0; i < n; ++i) out.data()[i] /= z;
    check_finite(out, "masked_softmax");
    if (out.requires_grad()) {
        auto si = scores.impl_ptr();
        auto oi = out.impl_ptr();
        record([si, oi, n] {
            // Zero-mask entries have y = 0, so the standard softmax backward
            // already sends them zero gradient.
            softmax_slice_backward(oi->data.data(), oi->grad.data(), si->grad.data(), n, 1);
        });
    }
    return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        require(p.rows() == m, "concat_cols: row mismatch");
        total += p.cols();
        rg = rg || p.requires_grad();
    }
    Tensor out = make_output(m, total, rg);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < m; ++i) {
            std::copy(p.data() + i * p.cols(), p.data() + (i + 1) * p.cols(),
                      out.data() + i * total + off);
        }
        off += p.cols();
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        impls.reserve(parts.size());
        for (const auto& p : parts) impls.push_back(p.impl_ptr());
        auto oi = out.impl_ptr();
        record([impls, oi, m, total] {
            std::size_t off = 0;
            for (const auto& pi : impls) {
                const std::size_t c = pi->cols;
                if (pi->requires_grad) {
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                            pi->grad[i * c + j] += oi->grad[i * total + off + j];
                }
                off += c;
            }
        });
    }
    return out;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    const std::size_t n = parts[0].cols();
    std::size_t total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        require(p.cols() == n, "concat_rows: column mismatch");
        total += p.rows();
        rg = rg || p.requires_grad();
    }
    Tensor out = make_output(total, n, rg);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.size(), out.data() + off * n);
        off += p.rows();
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        impls.reserve(parts.size());
        for (const auto& p : parts) impls.push_back(p.impl_ptr());
        auto oi = out.impl_ptr();
        record([impls, oi, n] {
            std::size_t off = 0;
            for (const auto& pi : impls) {
                if (pi->requires_grad) {
                    kernels::active().axpy(1.0, oi->grad.data() + off * n, pi->grad.data(),
                                           pi->grad.size());
                }
                off += pi->rows;
            }
        });
    }
    return out;
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
    require(c0 < c1 && c1 <= a.cols(), "slice_cols: bad range");
    const std::size_t m = a.rows(), n = a.cols(), w = c1 - c0;
    Tensor out = make_output(m, w, a.requires_grad());
    for (std::size_t i = 0; i < m; ++i)
        std::copy(a.data() + i * n + c0, a.data() + i * n + c1, out.data() + i * w);
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi, m, n, w, c0] {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    ai->grad[i * n + c0 + j] += oi->grad[i * w + j];
        });
    }
    return out;
}

Tensor Tape::mse(const Tensor& pred, const Tensor& target, const Tensor& mask) {
    require(pred.same_shape(target) && pred.same_shape(mask), "mse: shape mismatch");
    const std::size_t n = pred.size();
    double msum = kernels::active().sum(mask.data(), n);
    if (msum == 0.0) throw std::invalid_argument("mse: mask sums to zero");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = pred.data()[i] - target.data()[i];
        acc += mask.data()[i] * d * d;
    }
    Tensor out = make_output(1, 1, pred.requires_grad());
    out.data()[0] = acc / msum;
    check_finite(out, "mse");
    if (out.requires_grad()) {
        auto pi = pred.impl_ptr(), ti = target.impl_ptr(), mi = mask.impl_ptr();
        auto oi = out.impl_ptr();
        record([pi, ti, mi, oi, n, msum] {
            const double g = oi->grad[0];
            for (std::size_t i = 0; i < n; ++i) {
                pi->grad[i] += g * 2.0 * mi->data[i] * (pi->data[i] - ti->data[i]) / msum;
            }
        });
    }
    return out;
}

Tensor Tape::sum(const Tensor& a) {
    Tensor out = make_output(1, 1, a.requires_grad());
    out.data()[0] = kernels::active().sum(a.data(), a.size());
    check_finite(out, "sum");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi] {
            const double g = oi->grad[0];
            for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += g;
        });
    }
    return out;
}

Tensor Tape::dropout(const Tensor& a, double p, bool training, Rng& rng) {
    require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
    if (!training || p == 0.0) return a;
    auto keep = std::make_shared<std::vector<double>>(a.size());
    const double inv = 1.0 / (1.0 - p);
    Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) {
        (*keep)[i] = rng.uniform() < p ? 0.0 : inv;
        out.data()[i] = a.data()[i] * (*keep)[i];
    }
    check_finite(out, "dropout");
    if (out.requires_grad()) {
        auto ai = a.impl_ptr();
        auto oi = out.impl_ptr();
        record([ai, oi, keep] {
            for (std::size_t i = 0; i < oi->grad.size(); ++i)
                ai->grad[i] += oi->grad[i] * (*keep)[i];
        });
    }
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.requires_grad()) {
        throw std::invalid_argument("backward: loss does not require grad");
    }
    loss.impl()->grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace dqe
