#pragma once

#include <string>
#include <vector>

#include "retina/train.hpp"

namespace retina::train {

/// Shortest decimal string that parses back to exactly the same double.
std::string round_trip_decimal(double v);

/// Writes the epoch records as CSV with header
/// "epochs,training_loss,training_accuracy,validation_loss,validation_accuracy",
/// LF endings, values as shortest round-trip decimal strings.
void write_curve_csv(const RunReport& report, const std::string& path);

/// Parses a curve CSV back into epoch records.
std::vector<EpochRecord> read_curve_csv(const std::string& path);

/// Two-panel SVG line chart (accuracy left, loss right) of the training and
/// validation series versus epoch. Self-contained, no external assets.
void write_curve_svg(const RunReport& report, const std::string& path);

/// Writes both files. Requires at least one record.
void emit_curves(const RunReport& report, const std::string& csv_path,
                 const std::string& svg_path);

}  // namespace retina::train
