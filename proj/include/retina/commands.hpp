#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace retina::cli {

/// Subcommand entry points. Each validates its inputs up front, performs the
/// work, reports to `out`/`err`, and returns the process exit code:
/// 0 success, 1 usage/config error, 2 data/parse error, 3 runtime/numeric
/// error.

int cmd_synth(std::size_t per_grade, std::uint64_t seed, const std::string& out_dir,
              std::size_t image_size, std::ostream& out, std::ostream& err);

int cmd_split(const std::string& manifest_path, double ratio, std::uint64_t seed,
              const std::optional<std::string>& out_path, std::ostream& out,
              std::ostream& err);

int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err);

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& split, const std::optional<std::string>& splits_path,
             const std::optional<std::string>& config_path, std::ostream& out,
             std::ostream& err);

int cmd_tune(const std::string& config_path, std::ostream& out, std::ostream& err);

int cmd_predict(const std::string& model_path, const std::string& image_path,
                const std::optional<std::string>& config_path, std::ostream& out,
                std::ostream& err);

}  // namespace retina::cli
