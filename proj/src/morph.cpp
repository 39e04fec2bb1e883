#include "retina/morph.hpp"

#include <algorithm>
#include <cmath>

#include "retina/error.hpp"

namespace retina::morph {

std::size_t BinaryImage::count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b != 0;
    return n;
}

std::vector<std::pair<long, long>> StructuringElement::offsets() const {
    std::vector<std::pair<long, long>> out;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            if (get(x, y))
                out.emplace_back(static_cast<long>(x) - static_cast<long>(anchor_x),
                                 static_cast<long>(y) - static_cast<long>(anchor_y));
    return out;
}

StructuringElement StructuringElement::box(std::size_t w, std::size_t h) {
    StructuringElement se;
    se.width = w;
    se.height = h;
    se.bits.assign(w * h, 1);
    se.anchor_x = w / 2;
    se.anchor_y = h / 2;
    return se;
}

void StructuringElement::validate() const {
    if (width == 0 || height == 0 || bits.size() != width * height)
        throw ValueError("structuring element: inconsistent dimensions");
    if (anchor_x >= width || anchor_y >= height)
        throw ValueError("structuring element: anchor outside the grid");
    if (std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b == 0; }))
        throw ValueError("structuring element: no set bits");
}

StructuringElement reflect(const StructuringElement& se) {
    StructuringElement out;
    out.width = se.width;
    out.height = se.height;
    out.bits.assign(se.width * se.height, 0);
    for (std::size_t y = 0; y < se.height; ++y)
        for (std::size_t x = 0; x < se.width; ++x)
            out.bits[(se.height - 1 - y) * se.width + (se.width - 1 - x)] =
                se.bits[y * se.width + x];
    out.anchor_x = se.width - 1 - se.anchor_x;
    out.anchor_y = se.height - 1 - se.anchor_y;
    return out;
}

BinaryImage erode(const BinaryImage& a, const StructuringElement& b) {
    b.validate();
    BinaryImage out(a.width, a.height);
    const auto offs = b.offsets();
    const long w = static_cast<long>(a.width), h = static_cast<long>(a.height);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            bool contained = true;
            for (const auto& [dx, dy] : offs) {
                const long px = x + dx, py = y + dy;
                if (px < 0 || px >= w || py < 0 || py >= h ||
                    !a.get(static_cast<std::size_t>(px), static_cast<std::size_t>(py))) {
                    contained = false;
                    break;
                }
            }
            if (contained) out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), true);
        }
    }
    return out;
}

BinaryImage dilate(const BinaryImage& a, const StructuringElement& b) {
    b.validate();
    BinaryImage out(a.width, a.height);
    const auto offs = b.offsets();
    const long w = static_cast<long>(a.width), h = static_cast<long>(a.height);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            if (!a.get(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) continue;
            for (const auto& [dx, dy] : offs) {
                const long px = x + dx, py = y + dy;
                if (px >= 0 && px < w && py >= 0 && py < h)
                    out.set(static_cast<std::size_t>(px), static_cast<std::size_t>(py), true);
            }
        }
    }
    return out;
}

BinaryImage open(const BinaryImage& a, const StructuringElement& b) {
    return dilate(erode(a, b), b);
}

BinaryImage close(const BinaryImage& a, const StructuringElement& b) {
    return erode(dilate(a, b), b);
}

void GrayImage::validate() const {
    if (width == 0 || height == 0 || channels == 0 ||
        values.size() != width * height * channels)
        throw ValueError("gray image: inconsistent dimensions");
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ValueError("gray image: value " + std::to_string(v) + " outside [0, 1]");
    }
}

BinaryImage threshold(const GrayImage& img, double t) {
    if (!(t > 0.0 && t < 1.0))
        throw ValueError("threshold: t must lie strictly inside (0, 1), got " +
                         std::to_string(t));
    if (img.channels != 1 && img.channels != 3)
        throw ValueError("threshold: expected a 1- or 3-channel image, got " +
                         std::to_string(img.channels));
    BinaryImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const double lum = img.channels == 1
                                   ? img.get(x, y, 0)
                                   : 0.299 * img.get(x, y, 0) + 0.587 * img.get(x, y, 1) +
                                         0.114 * img.get(x, y, 2);
            if (lum >= t) out.set(x, y, true);
        }
    }
    return out;
}

GrayImage gray_morph(const GrayImage& img, const StructuringElement& b, GrayMode mode) {
    b.validate();
    if (img.channels != 1)
        throw ValueError("gray_morph: expected a single-channel image, got " +
                         std::to_string(img.channels) + " channels");

    GrayImage out(img.width, img.height, 1);
    const auto offs = b.offsets();
    const long w = static_cast<long>(img.width), h = static_cast<long>(img.height);
    const bool eroding = mode == GrayMode::erode;
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double acc = eroding ? 1.0 : 0.0;
            for (const auto& [dx, dy] : offs) {
                // erode gathers at p + o, dilate stamps (gathers at p - o)
                const long px = eroding ? x + dx : x - dx;
                const long py = eroding ? y + dy : y - dy;
                if (px < 0 || px >= w || py < 0 || py >= h) continue;
                const double v =
                    img.get(static_cast<std::size_t>(px), static_cast<std::size_t>(py), 0);
                acc = eroding ? std::min(acc, v) : std::max(acc, v);
            }
            out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), 0, acc);
        }
    }
    return out;
}

GrayImage resize(const GrayImage& img, std::size_t w, std::size_t h) {
    if (w == 0 || h == 0) throw ValueError("resize: target extents must be >= 1");
    GrayImage out(w, h, img.channels);
    const double sx = w > 1 ? static_cast<double>(img.width - 1) / static_cast<double>(w - 1)
                            : 0.0;
    const double sy = h > 1 ? static_cast<double>(img.height - 1) / static_cast<double>(h - 1)
                            : 0.0;
    const double ox = w > 1 ? 0.0 : static_cast<double>(img.width - 1) / 2.0;
    const double oy = h > 1 ? 0.0 : static_cast<double>(img.height - 1) / 2.0;

    for (std::size_t c = 0; c < img.channels; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            const double fy = oy + sy * static_cast<double>(y);
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t y1 = std::min(y0 + 1, img.height - 1);
            const double wy = fy - static_cast<double>(y0);
            for (std::size_t x = 0; x < w; ++x) {
                const double fx = ox + sx * static_cast<double>(x);
                const std::size_t x0 = static_cast<std::size_t>(fx);
                const std::size_t x1 = std::min(x0 + 1, img.width - 1);
                const double wx = fx - static_cast<double>(x0);
                const double top =
                    img.get(x0, y0, c) * (1.0 - wx) + img.get(x1, y0, c) * wx;
                const double bottom =
                    img.get(x0, y1, c) * (1.0 - wx) + img.get(x1, y1, c) * wx;
                out.set(x, y, c, top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    return out;
}

GrayImage normalize(const GrayImage& img) {
    double lo = 1.0, hi = 0.0;
    for (double v : img.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) return img;
    GrayImage out = img;
    const double inv = 1.0 / (hi - lo);
    for (double& v : out.values) v = (v - lo) * inv;
    return out;
}

}  // namespace retina::morph
