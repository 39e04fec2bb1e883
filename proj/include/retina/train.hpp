#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "retina/data.hpp"
#include "retina/nn.hpp"
#include "retina/preprocess.hpp"
#include "retina/tensor.hpp"

namespace retina::train {

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 100;
    double dropout_rate = 0.1;
    std::size_t early_stop_patience = 10;  // 0 disables early stopping
    std::uint64_t seed = 0;

    void validate() const;
};

/// One Table-style row: post-epoch inference metrics on both splits.
struct EpochRecord {
    std::size_t epoch = 0;  // 0-based
    double training_loss = 0.0;
    double training_accuracy = 0.0;
    double validation_loss = 0.0;
    double validation_accuracy = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct Metrics {
    double accuracy = 0.0;
    /// True-positive rate of the binarized decision: grades 1-4 positive,
    /// grade 0 negative.
    double sensitivity = 0.0;
    /// confusion[true_grade][predicted_grade]
    std::array<std::array<std::size_t, data::kGradeCount>, data::kGradeCount> confusion{};
};

/// Derives accuracy and binarized sensitivity from a filled confusion matrix.
Metrics metrics_from_confusion(
    const std::array<std::array<std::size_t, data::kGradeCount>, data::kGradeCount>& confusion);

struct RunReport {
    std::vector<EpochRecord> records;
    bool stopped_early = false;
    std::size_t best_epoch = 0;  // index of the minimal validation-loss record
    Metrics final_metrics;       // validation metrics of the restored best snapshot
    TrainConfig config;
};

/// Validation-loss early stopping: stop after `patience` consecutive epochs
/// in which the best loss did not improve by more than min_delta. The best
/// epoch itself tracks the strict minimum (earliest on ties).
class EarlyStopTracker {
public:
    EarlyStopTracker(std::size_t patience, double min_delta = 1e-6)
        : patience_(patience), min_delta_(min_delta) {}

    /// Feeds one epoch's validation loss; returns true when this epoch is a
    /// new strict minimum (a snapshot should be taken).
    bool observe(double validation_loss);

    bool should_stop() const { return patience_ > 0 && streak_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    std::size_t patience_;
    double min_delta_;
    std::size_t seen_ = 0;
    std::size_t streak_ = 0;
    std::size_t best_epoch_ = 0;
    double best_loss_ = 0.0;
};

struct TrainResult {
    RunReport report;
    nn::Network network;  // parameters restored to the best epoch
};

/// The full epoch loop: per epoch a seeded shuffle of the train split,
/// batched train steps, then inference-mode evaluation of both splits for
/// the epoch record. Stops at max_epochs or when early stopping fires;
/// parameters are restored to the best-validation-loss snapshot.
TrainResult run_training(const nn::NetworkSpec& spec, const data::DatasetManifest& manifest,
                         const morph::PreprocSpec& preproc, const TrainConfig& cfg);

/// Inference-mode forward per sample; argmax class fills the confusion
/// matrix. Pure: repeated calls on unchanged parameters give identical
/// results.
Metrics evaluate(nn::Network& net, const std::vector<const data::FundusSample*>& samples,
                 const morph::PreprocSpec& preproc);

enum class SearchStrategy { grid, random };

struct SearchSpace {
    std::vector<double> learning_rates;
    std::vector<std::size_t> batch_sizes;
    std::vector<std::size_t> max_epochs_options;
    std::vector<double> dropout_rates;
    std::size_t budget = 1;
    SearchStrategy strategy = SearchStrategy::grid;
};

struct SearchResult {
    TrainConfig best;
    std::vector<std::pair<TrainConfig, RunReport>> leaderboard;  // ranked best-first
};

/// Evaluates candidate configurations (grid order, or seeded sampling
/// without replacement) and ranks them by the best validation accuracy any
/// epoch reached, ties broken by lower validation loss, then earlier
/// candidate order. Candidate i trains with seed base.seed ^ i, where i is
/// the candidate's index in the full grid enumeration
/// (learning_rate x batch_size x max_epochs x dropout_rate, rightmost
/// fastest).
SearchResult hyperparameter_search(const SearchSpace& space, const nn::NetworkSpec& spec,
                                   const data::DatasetManifest& manifest,
                                   const morph::PreprocSpec& preproc, const TrainConfig& base);

}  // namespace retina::train
