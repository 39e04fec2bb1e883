#include "retina/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>

#include "retina/curves.hpp"
#include "retina/data.hpp"
#include "retina/error.hpp"
#include "retina/image_io.hpp"
#include "retina/model_file.hpp"
#include "retina/optim.hpp"
#include "retina/run_config.hpp"
#include "retina/train.hpp"

namespace fs = std::filesystem;

namespace retina::cli {

namespace {

int report_error(const Error& e, std::ostream& err) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
}

int report_unknown(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << "\n";
    return 3;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw IoError(what + " not found: " + path);
}

void print_metrics(const train::Metrics& m, std::ostream& out) {
    out << "accuracy    " << train::round_trip_decimal(m.accuracy) << "\n";
    out << "sensitivity " << train::round_trip_decimal(m.sensitivity)
        << "  (grades 1-4 positive vs grade 0 negative)\n";
    out << "confusion matrix (rows = true grade, cols = predicted):\n";
    std::size_t total = 0;
    for (std::size_t t = 0; t < data::kGradeCount; ++t) {
        out << "  " << t << " " << data::severity_name(t);
        for (std::size_t pad = data::severity_name(t).size(); pad < 14; ++pad) out << ' ';
        for (std::size_t p = 0; p < data::kGradeCount; ++p) {
            out << std::setw(6) << m.confusion[t][p];
            total += m.confusion[t][p];
        }
        out << "\n";
    }
    out << "samples     " << total << "\n";
}

data::DatasetManifest load_manifest_with_splits(const RunOptions& opt) {
    data::DatasetManifest manifest = data::load_manifest(opt.manifest_path);
    if (opt.exclusions_path) {
        const auto ids = data::load_exclusion_list(*opt.exclusions_path);
        std::size_t newly = 0;
        std::vector<std::string> unknown;
        manifest = data::apply_exclusions(manifest, ids, &newly, &unknown);
    }
    data::load_split_sidecar(manifest, opt.splits_path);
    return manifest;
}

void write_summary(const std::string& path, const train::RunReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const train::TrainConfig& c = report.config;
    out << "run summary\n";
    out << "learning_rate " << train::round_trip_decimal(c.learning_rate) << "\n";
    out << "batch_size " << c.batch_size << "\n";
    out << "max_epochs " << c.max_epochs << "\n";
    out << "dropout_rate " << train::round_trip_decimal(c.dropout_rate) << "\n";
    out << "patience " << c.early_stop_patience << "\n";
    out << "seed " << c.seed << "\n";
    out << "epochs_run " << report.records.size() << "\n";
    out << "stopped_early " << (report.stopped_early ? 1 : 0) << "\n";
    out << "best_epoch " << report.best_epoch << "\n";
    out << "validation_accuracy "
        << train::round_trip_decimal(report.final_metrics.accuracy) << "\n";
    out << "validation_sensitivity "
        << train::round_trip_decimal(report.final_metrics.sensitivity) << "\n";
}

}  // namespace

int cmd_synth(std::size_t per_grade, std::uint64_t seed, const std::string& out_dir,
              std::size_t image_size, std::ostream& out, std::ostream& err) {
    try {
        const data::DatasetManifest m =
            data::generate_synthetic_dataset(per_grade, seed, out_dir, image_size);
        out << "wrote " << m.samples.size() << " images and " << out_dir
            << "/manifest.csv\n";
        return 0;
    } catch (const Error& e) {
        return report_error(e, err);
    } catch (const std::exception& e) {
        return report_unknown(e, err);
    }
}

int cmd_split(const std::string& manifest_path, double ratio, std::uint64_t seed,
              const std::optional<std::string>& out_path, std::ostream& out,
              std::ostream& err) {
    try {
        if (!(ratio > 0.0 && ratio < 1.0))
            throw ConfigError("split: ratio must lie strictly inside (0, 1)");
        require_file(manifest_path, "manifest");
        data::DatasetManifest manifest = data::load_manifest(manifest_path);
        data::SplitConfig cfg;
        cfg.train_fraction = ratio;
        cfg.seed = seed;
        manifest = data::stratified_split(manifest, cfg);
        const std::string sidecar =
            out_path.value_or((fs::path(manifest_path).parent_path() / "splits.csv").string());
        data::save_split_sidecar(manifest, sidecar);

        const auto train_n = manifest.in_split(data::Split::train).size();
        const auto val_n = manifest.in_split(data::Split::val).size();
        out << "assigned " << train_n << " train / " << val_n << " val samples to "
            << sidecar << "\n";
        return 0;
    } catch (const Error& e) {
        return report_error(e, err);
    } catch (const std::exception& e) {
        return report_unknown(e, err);
    }
}

int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err) {
    try {
        require_file(config_path, "config");
        const RunOptions opt = parse_run_config(config_path);

        // pre-flight: every referenced path and the network geometry are
        // checked before any long-running work starts
        require_file(opt.manifest_path, "manifest");
        require_file(opt.splits_path, "split sidecar");
        if (opt.exclusions_path) require_file(*opt.exclusions_path, "exclusion list");
        nn::validate_network_spec(
            nn::resolve_dropout(opt.network, opt.train_config.dropout_rate));
        std::error_code ec;
        fs::create_directories(opt.out_dir, ec);
        if (ec) throw IoError("cannot create " + opt.out_dir + ": " + ec.message());

        const data::DatasetManifest manifest = load_manifest_with_splits(opt);
        train::TrainResult result =
            train::run_training(opt.network, manifest, opt.preproc, opt.train_config);

        const fs::path dir(opt.out_dir);
        save_model((dir / "model.rgm").string(), result.network);
        train::emit_curves(result.report, (dir / "curves.csv").string(),
                           (dir / "curves.svg").string());
        write_summary((dir / "summary.txt").string(), result.report);

        out << "trained " << result.report.records.size() << " epochs"
            << (result.report.stopped_early ? " (stopped early)" : "") << ", best epoch "
            << result.report.best_epoch << "\n";
        out << "validation accuracy "
            << train::round_trip_decimal(result.report.final_metrics.accuracy) << "\n";
        out << "artifacts in " << opt.out_dir << ": model.rgm curves.csv curves.svg summary.txt\n";
        return 0;
    } catch (const Error& e) {
        return report_error(e, err);
    } catch (const std::exception& e) {
        return report_unknown(e, err);
    }
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& split, const std::optional<std::string>& splits_path,
             const std::optional<std::string>& config_path, std::ostream& out,
             std::ostream& err) {
    try {
        require_file(model_path, "model");
        require_file(manifest_path, "manifest");
        const data::Split which = data::parse_split(split);
        if (which == data::Split::unassigned)
            throw ConfigError("eval: split must be train, val, or test");

        morph::PreprocSpec preproc;
        if (config_path) {
            require_file(*config_path, "config");
            preproc = parse_run_config(*config_path).preproc;
        }

        nn::Network net = load_model(model_path);
        data::DatasetManifest manifest = data::load_manifest(manifest_path);
        const std::string sidecar = splits_path.value_or(
            (fs::path(manifest_path).parent_path() / "splits.csv").string());
        require_file(sidecar, "split sidecar");
        data::load_split_sidecar(manifest, sidecar);

        const auto samples = manifest.in_split(which);
        if (samples.empty())
            throw ConfigError("eval: the " + split + " split is empty");
        const train::Metrics m = train::evaluate(net, samples, preproc);
        print_metrics(m, out);
        return 0;
    } catch (const Error& e) {
        return report_error(e, err);
    } catch (const std::exception& e) {
        return report_unknown(e, err);
    }
}

int cmd_tune(const std::string& config_path, std::ostream& out, std::ostream& err) {
    try {
        require_file(config_path, "config");
        const RunOptions opt = parse_run_config(config_path);
        if (!opt.search)
            throw ConfigError("tune: the config declares no search.* space");
        require_file(opt.manifest_path, "manifest");
        require_file(opt.splits_path, "split sidecar");
        if (opt.exclusions_path) require_file(*opt.exclusions_path, "exclusion list");
        std::error_code ec;
        fs::create_directories(opt.out_dir, ec);
        if (ec) throw IoError("cannot create " + opt.out_dir + ": " + ec.message());

        const data::DatasetManifest manifest = load_manifest_with_splits(opt);
        const train::SearchResult result = train::hyperparameter_search(
            *opt.search, opt.network, manifest, opt.preproc, opt.train_config);

        const std::string board_path = (fs::path(opt.out_dir) / "leaderboard.csv").string();
        std::ofstream board(board_path, std::ios::binary);
        if (!board) throw IoError("cannot open " + board_path + " for writing");
        board << "rank,learning_rate,batch_size,max_epochs,dropout_rate,best_val_accuracy,"
                 "best_val_loss,epochs_run\n";
        for (std::size_t i = 0; i < result.leaderboard.size(); ++i) {
            const auto& [cfg, report] = result.leaderboard[i];
            double best_acc = 0.0, best_loss = std::numeric_limits<double>::infinity();
            for (const auto& r : report.records) {
                best_acc = std::max(best_acc, r.validation_accuracy);
                best_loss = std::min(best_loss, r.validation_loss);
            }
            board << i + 1 << "," << train::round_trip_decimal(cfg.learning_rate) << ","
                  << cfg.batch_size << "," << cfg.max_epochs << ","
                  << train::round_trip_decimal(cfg.dropout_rate) << ","
                  << train::round_trip_decimal(best_acc) << ","
                  << train::round_trip_decimal(best_loss) << "," << report.records.size()
                  << "\n";
        }
        board.close();

        const auto& best = result.best;
        out << "evaluated " << result.leaderboard.size() << " candidates; best: lr "
            << train::round_trip_decimal(best.learning_rate) << ", batch " << best.batch_size
            << ", epochs " << best.max_epochs << ", dropout "
            << train::round_trip_decimal(best.dropout_rate) << "\n";
        out << "leaderboard in " << board_path << "\n";
        return 0;
    } catch (const Error& e) {
        return report_error(e, err);
    } catch (const std::exception& e) {
        return report_unknown(e, err);
    }
}

int cmd_predict(const std::string& model_path, const std::string& image_path,
                const std::optional<std::string>& config_path, std::ostream& out,
                std::ostream& err) {
    try {
        require_file(model_path, "model");
        require_file(image_path, "image");

        morph::PreprocSpec preproc;
        if (config_path) {
            require_file(*config_path, "config");
            preproc = parse_run_config(*config_path).preproc;
        }

        nn::Network net = load_model(model_path);
        const Tensor img = morph::preprocess(morph::read_image(image_path), preproc);
        const Shape& s = img.shape();
        const Tensor probs =
            net.forward(img.reshaped(Shape{1, s[0], s[1], s[2]}), nn::Mode::infer);

        const auto class_label = [](std::size_t c) {
            return c < data::kGradeCount ? data::severity_name(c)
                                         : "class " + std::to_string(c);
        };
        for (std::size_t c = 0; c < probs.shape()[1]; ++c) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%-14s %.6f", class_label(c).c_str(),
                          probs.at(0, c));
            out << buf << "\n";
        }
        out << "predicted: " << class_label(optim::argmax_row(probs, 0)) << "\n";
        return 0;
    } catch (const Error& e) {
        return report_error(e, err);
    } catch (const std::exception& e) {
        return report_unknown(e, err);
    }
}

}  // namespace retina::cli
