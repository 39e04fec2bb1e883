#include "retina/optim.hpp"

#include <cmath>

#include "retina/error.hpp"

namespace retina::optim {

double quadratic_loss(double y, double y_true) {
    if (!std::isfinite(y) || !std::isfinite(y_true))
        throw NumericError("quadratic_loss: non-finite input");
    const double diff = y - y_true;
    return 0.5 * diff * diff;
}

LossValue cross_entropy(const Tensor& probs, const std::vector<std::size_t>& labels) {
    if (probs.shape().rank() != 2)
        throw ShapeError("cross_entropy: expected [batch, classes], got " +
                         probs.shape().str());
    const std::size_t batch = probs.shape()[0];
    const std::size_t classes = probs.shape()[1];
    if (labels.size() != batch)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for a batch of " + std::to_string(batch));

    LossValue loss;
    loss.per_sample.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += probs.at(b, c);
        if (std::abs(sum - 1.0) > 1e-6)
            throw UsageError("cross_entropy: row " + std::to_string(b) +
                             " sums to " + std::to_string(sum) + ", not 1");
        if (labels[b] >= classes)
            throw ValueError("cross_entropy: label " + std::to_string(labels[b]) +
                             " out of range for " + std::to_string(classes) + " classes");
        double p = probs.at(b, labels[b]);
        if (p < 1e-12) p = 1e-12;
        loss.per_sample[b] = -std::log(p);
        loss.value += loss.per_sample[b];
    }
    loss.value /= static_cast<double>(batch);
    if (!std::isfinite(loss.value)) throw NumericError("cross_entropy: non-finite loss");
    return loss;
}

Tensor cross_entropy_score_grad(const Tensor& probs, const std::vector<std::size_t>& labels) {
    const std::size_t batch = probs.shape()[0];
    const std::size_t classes = probs.shape()[1];
    Tensor grad = Tensor::zeros(probs.shape());
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        if (labels[b] >= classes)
            throw ValueError("cross_entropy: label " + std::to_string(labels[b]) +
                             " out of range for " + std::to_string(classes) + " classes");
        for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = labels[b] == c ? 1.0 : 0.0;
            grad.at(b, c) = (probs.at(b, c) - onehot) * inv_batch;
        }
    }
    return grad;
}

void sgd_step(const SGDConfig& config, const std::vector<Tensor*>& params,
              const std::vector<Tensor*>& grads) {
    if (!(config.learning_rate > 0.0) && config.learning_rate != 0.0)
        throw ValueError("sgd_step: learning rate must be finite and >= 0");
    if (!std::isfinite(config.learning_rate))
        throw ValueError("sgd_step: learning rate must be finite");
    if (params.size() != grads.size())
        throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");

    const double lr = config.learning_rate;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        Tensor& g = *grads[t];
        if (!(p.shape() == g.shape()))
            throw ShapeError("sgd_step: parameter " + p.shape().str() +
                             " does not align with gradient " + g.shape().str());
        double* pv = p.data();
        double* gv = g.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double step = lr * gv[i];  // two roundings, never fused
            pv[i] = pv[i] - step;
            gv[i] = 0.0;
        }
    }
}

void sgd_step(const SGDConfig& config, nn::Network& net) {
    sgd_step(config, net.parameters(), net.gradients());
}

std::size_t argmax_row(const Tensor& rows, std::size_t row) {
    const std::size_t classes = rows.shape()[1];
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
        if (rows.at(row, c) > rows.at(row, best)) best = c;
    }
    return best;
}

StepResult train_step(nn::Network& net, const Tensor& batch,
                      const std::vector<std::size_t>& labels, const SGDConfig& sgd, Rng& rng) {
    if (batch.shape()[0] != labels.size())
        throw ShapeError("train_step: batch of " + std::to_string(batch.shape()[0]) +
                         " images vs " + std::to_string(labels.size()) + " labels");

    StepResult result;
    const Tensor probs = net.forward(batch, nn::Mode::train, &rng);
    result.loss = cross_entropy(probs, labels);

    std::size_t correct = 0;
    for (std::size_t b = 0; b < labels.size(); ++b)
        if (argmax_row(probs, b) == labels[b]) ++correct;
    result.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

    net.backward_from_scores(cross_entropy_score_grad(probs, labels));
    sgd_step(sgd, net);
    return result;
}

}  // namespace retina::optim
