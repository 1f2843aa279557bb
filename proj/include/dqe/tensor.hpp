#pragma once
// Minimal dense tensor with reverse-mode differentiation.
//
// Tensors are 2-d (scalars are {1,1}), double precision, row-major. Ops live
// on a Tape; each op records a backward closure, and Tape::backward replays
// them in reverse. Inner loops go through dqe::kernels so the scalar/AVX2
// backends are interchangeable.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dqe/rng.hpp"

namespace dqe {

// When on, every op verifies its output is finite and throws otherwise.
// Defaults to the DQE_DEBUG_CHECKS env var.
void set_debug_checks(bool on);
bool debug_checks();

struct TensorImpl {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<double> grad;  // allocated (zeroed) iff requires_grad
    bool requires_grad = false;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor row(std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    std::size_t rows() const { return impl_->rows; }
    std::size_t cols() const { return impl_->cols; }
    std::size_t size() const { return impl_->data.size(); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& vec() { return impl_->data; }
    const std::vector<double>& vec() const { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    double* grad() { return impl_->grad.data(); }
    const double* grad() const { return impl_->grad.data(); }
    const std::vector<double>& grad_vec() const { return impl_->grad; }
    void zero_grad();

    double at(std::size_t r, std::size_t c) const { return impl_->data[r * impl_->cols + c]; }
    double& at(std::size_t r, std::size_t c) { return impl_->data[r * impl_->cols + c]; }
    // Scalar convenience accessor; requires size() == 1.
    double value() const;

    bool same_shape(const Tensor& o) const {
        return impl_->rows == o.impl_->rows && impl_->cols == o.impl_->cols;
    }

    TensorImpl* impl() const { return impl_.get(); }
    std::shared_ptr<TensorImpl> impl_ptr() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    friend class Tape;
};

class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }
    std::size_t node_count() const { return nodes_.size(); }

    // a: m x k, b: k x n -> m x n
    Tensor matmul(const Tensor& a, const Tensor& b);
    // elementwise, same shape
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    // a: m x n, bias: 1 x n broadcast over rows
    Tensor add_rowvec(const Tensor& a, const Tensor& bias);
    // constant (non-differentiable) scalar coefficient / offset
    Tensor scale(const Tensor& a, double c);
    Tensor add_const(const Tensor& a, double c);

    Tensor sigmoid(const Tensor& a);
    Tensor tanh(const Tensor& a);
    Tensor exp(const Tensor& a);
    Tensor clamp(const Tensor& a, double lo, double hi);

    // axis = 0: softmax down each column; axis = 1: across each row.
    Tensor softmax(const Tensor& a, int axis);
    // scores/mask: 1 x n. Weights are zero where mask is zero and the
    // remaining entries sum to 1. mask must select at least one entry.
    Tensor masked_softmax(const Tensor& scores, const Tensor& mask);

    // Column-wise concatenation (equal rows) / row-wise (equal cols).
    Tensor concat_cols(const std::vector<Tensor>& parts);
    Tensor concat_rows(const std::vector<Tensor>& parts);
    Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);

    // sum(mask * (pred - target)^2) / sum(mask); throws if sum(mask) == 0.
    Tensor mse(const Tensor& pred, const Tensor& target, const Tensor& mask);
    Tensor sum(const Tensor& a);

    // Inverted dropout: zero with probability p, survivors scaled by
    // 1/(1-p). Identity when !training or p == 0. Requires 0 <= p < 1.
    Tensor dropout(const Tensor& a, double p, bool training, Rng& rng);

    // Accumulates d(loss)/d(t) into every requires_grad tensor reachable on
    // this tape. loss must be scalar. Call at most once per tape.
    void backward(const Tensor& loss);

private:
    bool grad_enabled_ = true;
    std::vector<std::function<void()>> nodes_;

    Tensor make_output(std::size_t rows, std::size_t cols, bool requires_grad);
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
    bool track(const Tensor& a) const { return grad_enabled_ && a.requires_grad(); }
    void check_finite(const Tensor& t, const char* op) const;
};

}  // namespace dqe
