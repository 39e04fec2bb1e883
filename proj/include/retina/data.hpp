#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retina/morph.hpp"
#include "retina/rng.hpp"

namespace retina::data {

/// Five-level severity scale: 0 none, 1 mild, 2 moderate, 3 severe,
/// 4 proliferative.
inline constexpr std::size_t kGradeCount = 5;

const std::string& severity_name(std::size_t grade);

/// Accepts 0..4 or a severity name, case-insensitively.
std::size_t parse_severity(const std::string& text);

enum class Split { train, val, test, unassigned };

const std::string& split_name(Split s);
Split parse_split(const std::string& text);

struct FundusSample {
    std::string id;
    std::string image_path;  // resolved relative to the manifest's directory
    std::size_t grade = 0;
    bool excluded = false;
    Split split = Split::unassigned;

    bool operator==(const FundusSample&) const = default;
};

struct DatasetManifest {
    std::vector<FundusSample> samples;
    std::string source_tag;
    std::uint64_t seed = 0;  // seed used for the split, if any

    const FundusSample* find(const std::string& id) const;
    std::vector<const FundusSample*> in_split(Split s) const;
    std::size_t assignable_count() const;  // not excluded
};

struct SplitConfig {
    double train_fraction = 0.8;  // strictly inside (0, 1)
    bool stratified = true;
    std::uint64_t seed = 0;
};

/// CSV with header "id,image_path,grade,excluded", comma-separated, LF line
/// endings. Grade is 0..4 or a severity name; excluded is 0 or 1. IDs must
/// be unique. image_path entries are resolved against the manifest's
/// directory.
DatasetManifest load_manifest(const std::string& path);

/// Writes the manifest back out under the same grammar, with image paths
/// relative to the manifest's directory when they were loaded that way.
void save_manifest(const DatasetManifest& m, const std::string& path);

/// Sidecar CSV "id,split" with split in {train,val,test}. Unlisted samples
/// stay unassigned. Unknown ids and split assignments on excluded samples
/// are parse errors.
void load_split_sidecar(DatasetManifest& m, const std::string& path);
void save_split_sidecar(const DatasetManifest& m, const std::string& path);

/// One id per line; blank lines ignored.
std::vector<std::string> load_exclusion_list(const std::string& path);

/// Flags the listed samples excluded and unassigned. Unknown ids are
/// collected as warnings, not failures. Returns the manifest copy and the
/// count of newly excluded samples.
DatasetManifest apply_exclusions(const DatasetManifest& m, const std::vector<std::string>& ids,
                                 std::size_t* newly_excluded = nullptr,
                                 std::vector<std::string>* unknown_ids = nullptr);

/// Seeded per-grade partition: within each grade the non-excluded samples
/// are shuffled and floor(n * train_fraction) of them (plus one for the
/// grades with the largest remainders) go to train, the rest to val. Each
/// grade must hold at least two non-excluded samples.
DatasetManifest stratified_split(const DatasetManifest& m, const SplitConfig& cfg);

struct SynthStats {
    std::size_t lesion_count = 0;
    std::size_t bright_lesions = 0;
    std::size_t dark_lesions = 0;
};

/// Renders a synthetic color fundus: a dark disc on black background, a
/// bright optic disc, and grade-correlated lesion blobs. The total lesion
/// count is 0 for grade 0 and uniform over [2g, 3g] otherwise, so the mean
/// count grows with the grade. Deterministic per generator state. Minimum
/// size 64x64.
morph::GrayImage synth_fundus(std::size_t grade, Rng& rng, std::size_t width,
                              std::size_t height, SynthStats* stats = nullptr);

/// Writes per_grade images per grade (PPM, under dir/images/) plus
/// dir/manifest.csv, and returns the manifest. Each sample's pixels are
/// drawn from an Rng seeded with seed ^ sample_index, so generation order
/// does not matter. Requires per_grade >= 2.
DatasetManifest generate_synthetic_dataset(std::size_t per_grade, std::uint64_t seed,
                                           const std::string& dir,
                                           std::size_t image_size = 128);

}  // namespace retina::data
