#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "retina/morph.hpp"
#include "retina/tensor.hpp"

namespace retina::morph {

enum class Stage { resize, normalize, erode, dilate, open, close };

Stage parse_stage(const std::string& name);
std::string stage_name(Stage s);

/// Deterministic preprocessing recipe applied before an image reaches the
/// network. erode/dilate/open/close act channelwise with flat-element
/// grayscale morphology.
struct PreprocSpec {
    std::size_t target_w = 128;
    std::size_t target_h = 128;
    double threshold = 0.5;  // binarization level for the set-theoretic path
    StructuringElement se = StructuringElement::box(3, 3);
    std::vector<Stage> order = {Stage::resize, Stage::normalize, Stage::erode, Stage::dilate};

    void validate() const;
};

/// Applies spec.order, then converts to a [channels, h, w] tensor in [0, 1].
/// Stage failures are rethrown with the stage index and name attached.
Tensor preprocess(const GrayImage& img, const PreprocSpec& spec);

}  // namespace retina::morph
