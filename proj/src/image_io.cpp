#include "retina/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "retina/error.hpp"

namespace retina::morph {

namespace {

bool is_pbm_space(int c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Reads the next header token, skipping whitespace and '#' comments. The
// character that terminates the token stays in the stream.
std::string next_token(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF && (is_pbm_space(c) || c == '#')) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        }
        c = in.get();
    }
    if (c == EOF) throw ParseError(path + ": truncated netpbm header");
    std::string token;
    while (c != EOF && !is_pbm_space(c) && c != '#') {
        token.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (c != EOF) in.unget();
    return token;
}

std::size_t parse_extent(const std::string& token, const std::string& path,
                         const char* what) {
    if (token.empty()) throw ParseError(path + ": missing " + what);
    std::size_t value = 0;
    for (char ch : token) {
        if (ch < '0' || ch > '9')
            throw ParseError(path + ": non-numeric " + what + " '" + token + "'");
        value = value * 10 + static_cast<std::size_t>(ch - '0');
        if (value > 1'000'000) throw ParseError(path + ": unreasonable " + what);
    }
    return value;
}

void write_netpbm(const std::string& path, const GrayImage& img, bool color) {
    const std::size_t want = color ? 3 : 1;
    if (img.channels != want)
        throw ValueError(path + ": expected a " + std::to_string(want) +
                         "-channel image, got " + std::to_string(img.channels));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << (color ? "P6" : "P5") << "\n"
        << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raster(img.width * img.height * want);
    std::size_t i = 0;
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < want; ++c) {
                const double v = img.get(x, y, c);
                raster[i++] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    }
    out.write(reinterpret_cast<const char*>(raster.data()),
              static_cast<std::streamsize>(raster.size()));
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace

GrayImage read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    const std::string magic = next_token(in, path);
    std::size_t channels = 0;
    if (magic == "P6") {
        channels = 3;
    } else if (magic == "P5") {
        channels = 1;
    } else {
        throw ParseError(path + ": unsupported magic '" + magic +
                         "' (expected binary P5 or P6)");
    }

    const std::size_t width = parse_extent(next_token(in, path), path, "width");
    const std::size_t height = parse_extent(next_token(in, path), path, "height");
    const std::size_t maxval = parse_extent(next_token(in, path), path, "maxval");
    if (width == 0 || height == 0) throw ParseError(path + ": zero image extent");
    if (maxval == 0 || maxval > 255)
        throw ParseError(path + ": maxval " + std::to_string(maxval) +
                         " outside the 8-bit range [1, 255]");

    // Exactly one whitespace byte separates the header from the raster.
    const int sep = in.get();
    if (sep == EOF || !is_pbm_space(sep)) throw ParseError(path + ": malformed raster separator");

    const std::size_t n = width * height * channels;
    std::vector<unsigned char> raster(n);
    in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw ParseError(path + ": truncated raster (expected " + std::to_string(n) +
                         " bytes)");

    GrayImage img(width, height, channels);
    const double inv = 1.0 / static_cast<double>(maxval);
    std::size_t i = 0;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                img.set(x, y, c, static_cast<double>(raster[i++]) * inv);
    return img;
}

void write_ppm(const std::string& path, const GrayImage& img) {
    write_netpbm(path, img, true);
}

void write_pgm(const std::string& path, const GrayImage& img) {
    write_netpbm(path, img, false);
}

}  // namespace retina::morph
