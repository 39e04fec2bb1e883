#include "retina/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "retina/error.hpp"
#include "retina/image_io.hpp"
#include "retina/optim.hpp"
#include "retina/parallel.hpp"

namespace retina::train {

void TrainConfig::validate() const {
    if (!std::isfinite(learning_rate) || learning_rate < 0.0)
        throw ConfigError("train: learning rate must be finite and >= 0");
    if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
    if (max_epochs == 0) throw ConfigError("train: max epochs must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("train: dropout rate must lie in [0, 1)");
}

Metrics metrics_from_confusion(
    const std::array<std::array<std::size_t, data::kGradeCount>, data::kGradeCount>&
        confusion) {
    Metrics m;
    m.confusion = confusion;
    std::size_t total = 0, diagonal = 0;
    std::size_t true_pos = 0, false_neg = 0;
    for (std::size_t t = 0; t < data::kGradeCount; ++t) {
        for (std::size_t p = 0; p < data::kGradeCount; ++p) {
            const std::size_t n = confusion[t][p];
            total += n;
            if (t == p) diagonal += n;
            if (t >= 1) {  // DR-positive sample
                if (p >= 1)
                    true_pos += n;
                else
                    false_neg += n;
            }
        }
    }
    m.accuracy = total ? static_cast<double>(diagonal) / static_cast<double>(total) : 0.0;
    const std::size_t positives = true_pos + false_neg;
    m.sensitivity =
        positives ? static_cast<double>(true_pos) / static_cast<double>(positives) : 0.0;
    return m;
}

bool EarlyStopTracker::observe(double validation_loss) {
    bool new_best = false;
    if (seen_ == 0) {
        best_loss_ = validation_loss;
        best_epoch_ = 0;
        streak_ = 0;
        new_best = true;
    } else {
        const bool improved = validation_loss < best_loss_ - min_delta_;
        if (validation_loss < best_loss_) {
            best_loss_ = validation_loss;
            best_epoch_ = seen_;
            new_best = true;
        }
        if (improved)
            streak_ = 0;
        else
            ++streak_;
    }
    ++seen_;
    return new_best;
}

namespace {

struct LoadedSplit {
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
};

LoadedSplit load_split(const std::vector<const data::FundusSample*>& samples,
                       const morph::PreprocSpec& preproc) {
    LoadedSplit out;
    out.images.resize(samples.size());
    out.labels.resize(samples.size());
    parallel_for(samples.size(), [&](std::size_t b0, std::size_t b1) {
        for (std::size_t i = b0; i < b1; ++i) {
            out.images[i] = morph::preprocess(morph::read_image(samples[i]->image_path), preproc);
            out.labels[i] = samples[i]->grade;
        }
    });
    return out;
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::array<std::array<std::size_t, data::kGradeCount>, data::kGradeCount> confusion{};
};

// Inference pass over preloaded tensors; per-sample forwards merged in
// sample order.
EvalResult evaluate_cached(nn::Network& net, const LoadedSplit& split) {
    const std::size_t n = split.images.size();
    std::vector<double> losses(n);
    std::vector<std::size_t> predicted(n);
    parallel_for(n, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t i = b0; i < b1; ++i) {
            const Shape& s = split.images[i].shape();
            const Tensor input = split.images[i].reshaped(Shape{1, s[0], s[1], s[2]});
            const Tensor probs = net.forward(input, nn::Mode::infer);
            const optim::LossValue lv =
                optim::cross_entropy(probs, {split.labels[i]});
            losses[i] = lv.value;
            predicted[i] = optim::argmax_row(probs, 0);
        }
    });

    EvalResult r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r.loss += losses[i];
        r.confusion[split.labels[i]][predicted[i]]++;
        if (predicted[i] == split.labels[i]) ++correct;
    }
    r.loss /= static_cast<double>(n);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return r;
}

Tensor assemble_batch(const LoadedSplit& split, const std::vector<std::size_t>& order,
                      std::size_t begin, std::size_t end) {
    const Shape& s = split.images[order[begin]].shape();
    Tensor batch = Tensor::zeros(Shape{end - begin, s[0], s[1], s[2]});
    const std::size_t stride = s.count();
    for (std::size_t i = begin; i < end; ++i) {
        const Tensor& img = split.images[order[i]];
        std::copy(img.values().begin(), img.values().end(),
                  batch.data() + (i - begin) * stride);
    }
    return batch;
}

}  // namespace

TrainResult run_training(const nn::NetworkSpec& spec, const data::DatasetManifest& manifest,
                         const morph::PreprocSpec& preproc, const TrainConfig& cfg) {
    cfg.validate();
    preproc.validate();

    const auto train_samples = manifest.in_split(data::Split::train);
    const auto val_samples = manifest.in_split(data::Split::val);
    if (train_samples.empty()) throw ConfigError("run_training: the train split is empty");
    if (val_samples.empty()) throw ConfigError("run_training: the validation split is empty");

    const nn::NetworkSpec resolved = nn::resolve_dropout(spec, cfg.dropout_rate);
    nn::validate_network_spec(resolved);

    const LoadedSplit train_set = load_split(train_samples, preproc);
    const LoadedSplit val_set = load_split(val_samples, preproc);

    // One sequential generator drives everything: parameter initialization,
    // then per epoch the shuffle followed by the batch dropout draws.
    Rng rng(cfg.seed);
    nn::Network net(resolved, rng);

    const optim::SGDConfig sgd{cfg.learning_rate};
    EarlyStopTracker stopper(cfg.early_stop_patience);
    std::vector<Tensor> best_params = net.parameter_snapshot();

    RunReport report;
    report.config = cfg;

    std::vector<std::size_t> order(train_set.images.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            const Tensor batch = assemble_batch(train_set, order, begin, end);
            std::vector<std::size_t> labels(end - begin);
            for (std::size_t i = begin; i < end; ++i)
                labels[i - begin] = train_set.labels[order[i]];
            optim::train_step(net, batch, labels, sgd, rng);
        }

        const EvalResult tr = evaluate_cached(net, train_set);
        const EvalResult va = evaluate_cached(net, val_set);
        report.records.push_back(
            EpochRecord{epoch, tr.loss, tr.accuracy, va.loss, va.accuracy});

        if (stopper.observe(va.loss)) best_params = net.parameter_snapshot();
        if (stopper.should_stop()) {
            report.stopped_early = true;
            break;
        }
    }

    report.best_epoch = stopper.best_epoch();
    net.restore_parameters(best_params);
    const EvalResult final_val = evaluate_cached(net, val_set);
    report.final_metrics = metrics_from_confusion(final_val.confusion);

    return TrainResult{std::move(report), std::move(net)};
}

Metrics evaluate(nn::Network& net, const std::vector<const data::FundusSample*>& samples,
                 const morph::PreprocSpec& preproc) {
    if (samples.empty()) throw UsageError("evaluate: no samples");
    const LoadedSplit split = load_split(samples, preproc);
    return metrics_from_confusion(evaluate_cached(net, split).confusion);
}

SearchResult hyperparameter_search(const SearchSpace& space, const nn::NetworkSpec& spec,
                                   const data::DatasetManifest& manifest,
                                   const morph::PreprocSpec& preproc,
                                   const TrainConfig& base) {
    if (space.learning_rates.empty() || space.batch_sizes.empty() ||
        space.max_epochs_options.empty() || space.dropout_rates.empty())
        throw ConfigError("search: every candidate list must be non-empty");
    if (space.budget == 0) throw ConfigError("search: budget must be >= 1");

    struct Candidate {
        std::size_t index;
        TrainConfig config;
    };
    std::vector<Candidate> all;
    std::size_t idx = 0;
    for (double lr : space.learning_rates)
        for (std::size_t bs : space.batch_sizes)
            for (std::size_t me : space.max_epochs_options)
                for (double dr : space.dropout_rates) {
                    TrainConfig c = base;
                    c.learning_rate = lr;
                    c.batch_size = bs;
                    c.max_epochs = me;
                    c.dropout_rate = dr;
                    c.seed = base.seed ^ static_cast<std::uint64_t>(idx);
                    all.push_back(Candidate{idx, c});
                    ++idx;
                }

    std::vector<Candidate> chosen;
    if (space.strategy == SearchStrategy::grid) {
        if (space.budget > all.size())
            throw ConfigError("search: grid budget " + std::to_string(space.budget) +
                              " exceeds the " + std::to_string(all.size()) +
                              " grid candidates");
        chosen.assign(all.begin(), all.begin() + static_cast<long>(space.budget));
    } else {
        // seeded sampling without replacement
        Rng rng(base.seed);
        std::vector<std::size_t> pool(all.size());
        std::iota(pool.begin(), pool.end(), 0);
        const std::size_t n = std::min(space.budget, all.size());
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t j =
                k + static_cast<std::size_t>(rng.uniform_below(pool.size() - k));
            std::swap(pool[k], pool[j]);
            chosen.push_back(all[pool[k]]);
        }
    }

    struct Scored {
        std::size_t index;
        double best_acc;
        double best_loss;
        TrainConfig config;
        RunReport report;
    };
    std::vector<Scored> scored(chosen.size());
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        TrainResult result = run_training(spec, manifest, preproc, chosen[k].config);
        double best_acc = 0.0;
        double best_loss = std::numeric_limits<double>::infinity();
        for (const auto& rec : result.report.records) {
            best_acc = std::max(best_acc, rec.validation_accuracy);
            best_loss = std::min(best_loss, rec.validation_loss);
        }
        scored[k] = Scored{chosen[k].index, best_acc, best_loss, chosen[k].config,
                           std::move(result.report)};
    }

    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.best_acc != b.best_acc) return a.best_acc > b.best_acc;
        if (a.best_loss != b.best_loss) return a.best_loss < b.best_loss;
        return a.index < b.index;
    });

    SearchResult out;
    out.best = scored.front().config;
    for (auto& s : scored) out.leaderboard.emplace_back(s.config, std::move(s.report));
    return out;
}

}  // namespace retina::train
