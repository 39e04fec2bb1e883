#pragma once

#include <cstddef>
#include <vector>

#include "retina/nn.hpp"
#include "retina/rng.hpp"
#include "retina/tensor.hpp"

namespace retina::optim {

struct SGDConfig {
    double learning_rate = 0.01;
};

/// Mean loss over a batch together with the per-sample values it averages.
struct LossValue {
    double value = 0.0;
    std::vector<double> per_sample;
};

/// L = (y - y_true)^2 / 2; dL/dy = y - y_true.
double quadratic_loss(double y, double y_true);

/// Per-sample -log(p[label]) with p clamped to >= 1e-12, averaged over the
/// batch. Rows must sum to 1 within 1e-6; labels must lie in
/// [0, class_count).
LossValue cross_entropy(const Tensor& probs, const std::vector<std::size_t>& labels);

/// Gradient of mean cross-entropy with respect to pre-softmax scores:
/// (probs - onehot) / batch.
Tensor cross_entropy_score_grad(const Tensor& probs, const std::vector<std::size_t>& labels);

/// params[i] -= learning_rate * grads[i], elementwise; grads are then
/// cleared to zero. Shapes must align pairwise.
void sgd_step(const SGDConfig& config, const std::vector<Tensor*>& params,
              const std::vector<Tensor*>& grads);

/// Convenience overload over a network's parameters.
void sgd_step(const SGDConfig& config, nn::Network& net);

struct StepResult {
    LossValue loss;       // pre-update cross-entropy
    double accuracy = 0;  // pre-update batch accuracy (argmax vs label)
};

/// One full training step: forward in train mode, cross-entropy, backward,
/// SGD update. Returns the pre-update loss and batch accuracy.
StepResult train_step(nn::Network& net, const Tensor& batch,
                      const std::vector<std::size_t>& labels, const SGDConfig& sgd, Rng& rng);

/// Index of the row maximum (first of equals).
std::size_t argmax_row(const Tensor& rows, std::size_t row);

}  // namespace retina::optim
