#pragma once

#include <optional>
#include <string>

#include "retina/data.hpp"
#include "retina/nn.hpp"
#include "retina/preprocess.hpp"
#include "retina/train.hpp"

namespace retina::cli {

/// Everything a train/tune run needs, parsed from a flat "key = value" file
/// with dotted namespaces. '#' starts a comment; unknown keys are rejected.
///
/// Recognized keys:
///   data.manifest      manifest CSV path (required)
///   data.splits        split sidecar path (default: splits.csv next to the manifest)
///   data.exclusions    optional exclusion-list path
///   net.input          CxHxW, e.g. 3x128x128
///   net.classes        class count (default 5)
///   net.layers         space-separated layer terms, e.g.
///                      conv(16,3x3,s1,p1) relu maxpool(2x2,s2) flatten
///                      dense(128) dropout dense(5) softmax
///                      (default: the built-in stack)
///   preproc.size       WxH target (default 128x128)
///   preproc.threshold  binarization level in (0,1) (default 0.5)
///   preproc.se         structuring element WxH full box (default 3x3)
///   preproc.order      stage names (default: resize normalize erode dilate)
///   train.learning_rate / train.batch_size / train.max_epochs
///   train.dropout_rate / train.patience / train.seed
///   search.learning_rates / search.batch_sizes / search.max_epochs
///   search.dropout_rates  value lists, space-separated
///   search.budget / search.strategy (grid | random)
///   out.dir            output directory for train/tune artifacts
struct RunOptions {
    std::string manifest_path;
    std::string splits_path;
    std::optional<std::string> exclusions_path;
    nn::NetworkSpec network;
    morph::PreprocSpec preproc;
    train::TrainConfig train_config;
    std::optional<train::SearchSpace> search;
    std::string out_dir = "runs/out";
};

RunOptions parse_run_config(const std::string& path);

/// Parses the net.layers term list against the given input plane, inferring
/// conv in_channels and dense in_features by shape propagation. Exposed for
/// tests.
std::vector<nn::LayerSpec> parse_layer_terms(const std::string& text, std::size_t in_channels,
                                             std::size_t in_height, std::size_t in_width);

}  // namespace retina::cli
