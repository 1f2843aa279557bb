#include "dqe/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "dqe/kernels.hpp"

namespace dqe {

void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: params/grads count mismatch");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0);
            state.v[i].assign(params[i].size(), 0.0);
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.hyper.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i].size())
            throw std::invalid_argument("adam_step: grad shape mismatch");
        kernels::active().adam_update(params[i].data(), grads[i].data(), state.m[i].data(),
                                      state.v[i].data(), params[i].size(), state.hyper.lr,
                                      state.hyper.beta1, state.hyper.beta2, state.hyper.eps,
                                      bc1, bc2);
    }
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "adam" || name == "Adam") return OptimizerKind::adam;
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "rmsprop" || name == "RMSProp") return OptimizerKind::rmsprop;
    throw std::invalid_argument("unknown optimizer: " + name);
}

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::rmsprop: return "rmsprop";
    }
    return "?";
}

Optimizer::Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
    adam_.hyper.lr = lr;
}

void Optimizer::step(std::vector<Tensor>& params) {
    switch (kind_) {
        case OptimizerKind::adam: {
            std::vector<std::vector<double>> grads;
            grads.reserve(params.size());
            for (auto& p : params) grads.push_back(p.grad_vec());
            adam_step(params, grads, adam_);
            break;
        }
        case OptimizerKind::sgd: {
            for (auto& p : params)
                kernels::active().axpy(-lr_, p.grad(), p.data(), p.size());
            break;
        }
        case OptimizerKind::rmsprop: {
            const double alpha = 0.99, eps = 1e-8;
            if (rms_v_.empty()) {
                rms_v_.resize(params.size());
                for (std::size_t i = 0; i < params.size(); ++i)
                    rms_v_[i].assign(params[i].size(), 0.0);
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                double* v = rms_v_[i].data();
                const double* g = params[i].grad();
                double* p = params[i].data();
                for (std::size_t j = 0; j < params[i].size(); ++j) {
                    v[j] = alpha * v[j] + (1.0 - alpha) * g[j] * g[j];
                    p[j] -= lr_ * g[j] / (std::sqrt(v[j]) + eps);
                }
            }
            break;
        }
    }
}

}  // namespace dqe
