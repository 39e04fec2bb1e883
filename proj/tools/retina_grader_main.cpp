#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "retina/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"retina-grader: fundus preprocessing, CNN training, and severity grading"};
    app.require_subcommand(1);

    // synth
    std::size_t per_grade = 60;
    std::uint64_t synth_seed = 0;
    std::string synth_out = "data";
    std::size_t image_size = 128;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic fundus dataset");
    synth->add_option("--per-grade", per_grade, "Images per severity grade")->required();
    synth->add_option("--seed", synth_seed, "Generator seed")->required();
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--size", image_size, "Square image size (min 64)");

    // split
    std::string split_manifest;
    double ratio = 0.8;
    std::uint64_t split_seed = 0;
    std::optional<std::string> split_out;
    auto* split = app.add_subcommand("split", "Stratified train/val assignment");
    split->add_option("--manifest", split_manifest, "Manifest CSV")->required();
    split->add_option("--ratio", ratio, "Train fraction, strictly inside (0,1)");
    split->add_option("--seed", split_seed, "Shuffle seed")->required();
    split->add_option("--out", split_out, "Sidecar path (default: splits.csv next to the manifest)");

    // train
    std::string train_config;
    auto* train = app.add_subcommand("train", "Train a network from a config file");
    train->add_option("--config", train_config, "Run config")->required();

    // eval
    std::string eval_model, eval_manifest, eval_split = "val";
    std::optional<std::string> eval_sidecar, eval_config;
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a split");
    eval->add_option("--model", eval_model, "Model file")->required();
    eval->add_option("--manifest", eval_manifest, "Manifest CSV")->required();
    eval->add_option("--split", eval_split, "train, val, or test");
    eval->add_option("--splits", eval_sidecar, "Split sidecar path");
    eval->add_option("--config", eval_config, "Run config (for the preprocessing recipe)");

    // tune
    std::string tune_config;
    auto* tune = app.add_subcommand("tune", "Hyperparameter search over a config grid");
    tune->add_option("--config", tune_config, "Run config with search.* keys")->required();

    // predict
    std::string predict_model, predict_image;
    std::optional<std::string> predict_config;
    auto* predict = app.add_subcommand("predict", "Grade a single image");
    predict->add_option("--model", predict_model, "Model file")->required();
    predict->add_option("--image", predict_image, "PPM/PGM image")->required();
    predict->add_option("--config", predict_config, "Run config (for the preprocessing recipe)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    using namespace retina::cli;
    if (synth->parsed())
        return cmd_synth(per_grade, synth_seed, synth_out, image_size, std::cout, std::cerr);
    if (split->parsed())
        return cmd_split(split_manifest, ratio, split_seed, split_out, std::cout, std::cerr);
    if (train->parsed()) return cmd_train(train_config, std::cout, std::cerr);
    if (eval->parsed())
        return cmd_eval(eval_model, eval_manifest, eval_split, eval_sidecar, eval_config,
                        std::cout, std::cerr);
    if (tune->parsed()) return cmd_tune(tune_config, std::cout, std::cerr);
    if (predict->parsed())
        return cmd_predict(predict_model, predict_image, predict_config, std::cout, std::cerr);
    return 1;
}
