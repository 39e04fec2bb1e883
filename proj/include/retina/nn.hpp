#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "retina/rng.hpp"
#include "retina/tensor.hpp"

namespace retina::nn {

enum class Mode { train, infer };

struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t stride_h = 1;
    std::size_t stride_w = 1;
    std::size_t padding = 0;  // symmetric zero padding
};

enum class PoolMode { max, average };

struct PoolSpec {
    std::size_t f_x = 2;  // window width
    std::size_t f_y = 2;  // window height
    std::size_t s_x = 2;  // horizontal stride
    std::size_t s_y = 2;  // vertical stride
    PoolMode mode = PoolMode::max;
};

struct DenseSpec {
    std::size_t in_features = 1;
    std::size_t out_features = 1;
};

struct DropoutSpec {
    /// nullopt defers the rate to the training configuration.
    std::optional<double> rate;
};

struct ReluSpec {};
struct FlattenSpec {};
struct SoftmaxSpec {};

using LayerSpec =
    std::variant<ConvSpec, ReluSpec, PoolSpec, DenseSpec, DropoutSpec, FlattenSpec, SoftmaxSpec>;

std::string layer_name(const LayerSpec& spec);

/// Ordered layer stack plus the input plane it expects. The final layer must
/// produce class_count scores per sample.
struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::size_t class_count = 5;
    std::size_t input_channels = 3;
    std::size_t input_height = 128;
    std::size_t input_width = 128;
};

/// The stack used when a config names no layers: three conv/pool stages into
/// a 128-wide dense head with dropout, for 3x128x128 inputs.
NetworkSpec default_network_spec();

/// Replaces deferred dropout rates with the given value.
NetworkSpec resolve_dropout(NetworkSpec spec, double rate);

/// Propagates shapes through the stack; throws ConfigError naming the first
/// incompatible layer. Returns the output shape of each layer.
std::vector<Shape> validate_network_spec(const NetworkSpec& spec);

/// Per-layer mutable state: parameters, their gradients (same shapes), and
/// the forward cache used by the backward pass.
struct PoolCache {
    Shape in_shape;
    Shape out_shape;
    std::vector<std::size_t> argmax;  // flat input indices, max mode only
};

struct LayerState {
    std::vector<Tensor> params;
    std::vector<Tensor> grads;
    std::optional<Tensor> cached_input;
    std::optional<PoolCache> pool_cache;
    std::optional<Tensor> dropout_mask;
    std::optional<Shape> cached_shape;  // flatten only

    void clear_cache() {
        cached_input.reset();
        pool_cache.reset();
        dropout_mask.reset();
        cached_shape.reset();
    }
};

// ---------------------------------------------------------------------------
// Layer operations. Forward passes cache what their backward pass needs when
// asked to (mode == train); backward passes fill state.grads and return the
// gradient with respect to their input.
// ---------------------------------------------------------------------------

/// Cross-correlation of input [batch,c,h,w] with out_channels filters plus a
/// per-filter bias. Output height is floor((h + 2*pad - kernel_h)/stride_h)+1.
Tensor conv_forward(const ConvSpec& spec, LayerState& state, const Tensor& input,
                    Mode mode = Mode::train);
Tensor conv_backward(const ConvSpec& spec, LayerState& state, const Tensor& upstream);

Tensor relu(const Tensor& input);
/// Masks upstream where the cached input was <= 0 (gradient at 0 is 0).
Tensor relu_backward(const Tensor& cached_input, const Tensor& upstream);

/// Windowed max or average per Eq-style index arithmetic; windows that would
/// overrun the edge are dropped. Max mode records argmax positions, ties
/// broken toward the first maximum in row-major window scan order.
std::pair<Tensor, PoolCache> pool_forward(const PoolSpec& spec, const Tensor& input);
Tensor pool_backward(const PoolSpec& spec, const PoolCache& cache, const Tensor& upstream);

/// output = input * W + b for input [batch, in_features].
Tensor dense_forward(const DenseSpec& spec, LayerState& state, const Tensor& input,
                     Mode mode = Mode::train);
Tensor dense_backward(const DenseSpec& spec, LayerState& state, const Tensor& upstream);

/// Inverted dropout: in train mode each unit is zeroed with probability
/// rate and survivors are scaled by 1/(1-rate); infer mode is the identity.
/// The returned mask holds the multiplier applied to each unit. Rate 0 takes
/// an identity fast path that draws nothing from the generator.
std::pair<Tensor, Tensor> dropout_forward(const DropoutSpec& spec, const Tensor& input,
                                          Mode mode, Rng& rng);
Tensor dropout_backward(const Tensor& mask, const Tensor& upstream);

/// Row-wise softmax over [batch, classes], stabilized by max subtraction.
Tensor softmax(const Tensor& scores);
/// Full softmax Jacobian-vector product given the forward output.
Tensor softmax_backward(const Tensor& softmax_output, const Tensor& upstream);

// ---------------------------------------------------------------------------
// Network: a NetworkSpec bound to per-layer states.
// ---------------------------------------------------------------------------

class Network {
public:
    /// Validates the spec, then initializes parameters: weights uniform in
    /// +-sqrt(6/(fan_in+fan_out)), biases zero, drawn in layer order.
    Network(NetworkSpec spec, Rng& init_rng);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::vector<LayerState>& states() noexcept { return states_; }
    const std::vector<LayerState>& states() const noexcept { return states_; }

    /// Runs the batch through every layer. Train mode populates caches and
    /// requires an rng when the stack contains active dropout.
    Tensor forward(const Tensor& batch, Mode mode, Rng* rng = nullptr);

    /// Backpropagates the gradient of the loss with respect to the
    /// pre-softmax scores (the final layer must be softmax, which the fused
    /// softmax/cross-entropy gradient already accounts for). Fills grads.
    Tensor backward_from_scores(const Tensor& score_grad);

    /// Flat views over every parameter/gradient tensor, in layer order.
    std::vector<Tensor*> parameters();
    std::vector<Tensor*> gradients();

    /// Deep copies of parameters, for snapshots.
    std::vector<Tensor> parameter_snapshot() const;
    void restore_parameters(const std::vector<Tensor>& snapshot);

private:
    NetworkSpec spec_;
    std::vector<LayerState> states_;
};

}  // namespace retina::nn
