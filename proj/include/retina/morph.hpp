#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "retina/tensor.hpp"

namespace retina::morph {

/// Row-major boolean grid; true marks a foreground member.
struct BinaryImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bits;

    BinaryImage() = default;
    BinaryImage(std::size_t w, std::size_t h) : width(w), height(h), bits(w * h, 0) {}

    bool get(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
    void set(std::size_t x, std::size_t y, bool v) { bits[y * width + x] = v ? 1 : 0; }

    std::size_t count() const;
    bool operator==(const BinaryImage& other) const = default;
};

/// Boolean mask with an anchor cell; translated across images to define the
/// morphological operations. At least one bit must be set and the anchor
/// must lie inside the grid.
struct StructuringElement {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> bits;
    std::size_t anchor_x = 0;
    std::size_t anchor_y = 0;

    bool get(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }

    /// Offsets of set cells relative to the anchor.
    std::vector<std::pair<long, long>> offsets() const;

    /// Full w x h rectangle with a centered anchor.
    static StructuringElement box(std::size_t w, std::size_t h);

    void validate() const;
};

/// Point reflection through the anchor: offsets are negated.
StructuringElement reflect(const StructuringElement& se);

/// Erosion: pixel p survives iff every set cell of the element, translated
/// to p, lands inside the image on a foreground pixel. Cells that fall
/// outside the frame count as not contained, so borders erode.
BinaryImage erode(const BinaryImage& a, const StructuringElement& b);

/// Dilation: the element is stamped at every foreground pixel (Minkowski
/// sum); stamps falling outside the frame are clipped.
BinaryImage dilate(const BinaryImage& a, const StructuringElement& b);

/// open = dilate(erode(a,b), b); close = erode(dilate(a,b), b).
BinaryImage open(const BinaryImage& a, const StructuringElement& b);
BinaryImage close(const BinaryImage& a, const StructuringElement& b);

/// Planar multichannel intensity image with values in [0, 1].
/// Channel c's plane starts at values[c * width * height].
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<double> values;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::size_t c)
        : width(w), height(h), channels(c), values(w * h * c, 0.0) {}

    double get(std::size_t x, std::size_t y, std::size_t c = 0) const {
        return values[(c * height + y) * width + x];
    }
    void set(std::size_t x, std::size_t y, std::size_t c, double v) {
        values[(c * height + y) * width + x] = v;
    }

    /// Throws ValueError unless all values lie in [0, 1].
    void validate() const;

    bool operator==(const GrayImage& other) const = default;
};

/// Pixel set iff luminance >= t (boundary inclusive). Luminance is
/// 0.299 R + 0.587 G + 0.114 B for 3-channel input, the value itself for
/// 1-channel. Throws ValueError unless 0 < t < 1.
BinaryImage threshold(const GrayImage& img, double t);

enum class GrayMode { erode, dilate };

/// Flat-element min (erode) / max (dilate) morphology on a single-channel
/// image. Out-of-bounds cells read as 1 for erode and 0 for dilate, so a
/// constant image passes through unchanged.
GrayImage gray_morph(const GrayImage& img, const StructuringElement& b, GrayMode mode);

/// Bilinear resize with corner-aligned sampling. A 1-wide target samples the
/// source midline.
GrayImage resize(const GrayImage& img, std::size_t w, std::size_t h);

/// Per-image min-max contrast stretch across all channels; constant images
/// pass through unchanged.
GrayImage normalize(const GrayImage& img);

}  // namespace retina::morph
