#pragma once
// Optimizers. Adam is the primary one; sgd/rmsprop exist for the
// hyperparameter grid.

#include <cstddef>
#include <string>
#include <vector>

#include "dqe/tensor.hpp"

namespace dqe {

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    std::size_t step = 0;
    // One moment buffer pair per parameter, same shapes.
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

// Bias-corrected Adam over a parameter list. grads[i] must match params[i]
// in size. Initializes state buffers lazily on first call.
void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state);

enum class OptimizerKind { adam, sgd, rmsprop };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

// Stateful wrapper that reads gradients directly from the tensors.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr);

    void step(std::vector<Tensor>& params);
    double lr() const { return lr_; }
    OptimizerKind kind() const { return kind_; }

private:
    OptimizerKind kind_;
    double lr_;
    AdamState adam_;
    std::vector<std::vector<double>> rms_v_;
};

}  // namespace dqe
