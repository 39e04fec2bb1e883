#pragma once

#include <string>

#include "retina/morph.hpp"

namespace retina::morph {

/// Reads an 8-bit binary netpbm image: P5 (one channel) or P6 (three
/// channels). Header tokens are separated by whitespace, '#' comments run to
/// end of line, maxval must lie in [1, 255], and exactly one whitespace byte
/// separates the header from the raster. Samples are scaled to [0, 1] by
/// 1/maxval.
GrayImage read_image(const std::string& path);

/// Writes a 3-channel image as binary P6 with maxval 255; values are
/// quantized with round-half-away-from-zero. Output bytes depend only on the
/// image contents.
void write_ppm(const std::string& path, const GrayImage& img);

/// Writes a 1-channel image as binary P5 with maxval 255.
void write_pgm(const std::string& path, const GrayImage& img);

}  // namespace retina::morph
