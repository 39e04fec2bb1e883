#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "retina/error.hpp"
#include "retina/image_io.hpp"
#include "retina/rng.hpp"

using namespace retina;
using namespace retina::morph;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("ppm round trip preserves 8-bit quantized values") {
    Rng rng(3);
    GrayImage img(7, 5, 3);
    for (double& v : img.values) v = rng.next_double();

    const std::string path = temp_path("retina_io_test.ppm");
    write_ppm(path, img);
    const GrayImage back = read_image(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    REQUIRE(back.channels == 3);
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        const double quantized = std::lround(img.values[i] * 255.0) / 255.0;
        CHECK(back.values[i] == doctest::Approx(quantized).epsilon(1e-12));
    }

    // a second write of the same image is byte-identical
    const std::string path2 = temp_path("retina_io_test2.ppm");
    write_ppm(path2, img);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("pgm round trip for single-channel images") {
    Rng rng(5);
    GrayImage img(4, 6, 1);
    for (double& v : img.values) v = rng.next_double();
    const std::string path = temp_path("retina_io_test.pgm");
    write_pgm(path, img);
    const GrayImage back = read_image(path);
    CHECK(back.channels == 1);
    CHECK(back.width == 4);
    CHECK(back.height == 6);
    std::remove(path.c_str());
}

TEST_CASE("header grammar: comments and flexible whitespace") {
    const std::string path = temp_path("retina_io_grammar.pgm");
    spit(path, "P5 # magic\n# a comment line\n  2\t2 # extents\n255\n\x01\x02\x03\x04");
    const GrayImage img = read_image(path);
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.get(0, 0) == doctest::Approx(1.0 / 255.0));
    CHECK(img.get(1, 1) == doctest::Approx(4.0 / 255.0));
    std::remove(path.c_str());
}

TEST_CASE("malformed netpbm files are rejected") {
    const std::string path = temp_path("retina_io_bad.pgm");

    spit(path, "P7\n2 2\n255\nxxxx");
    CHECK_THROWS_AS(read_image(path), ParseError);

    spit(path, "P5\n2 2\n300\n\x01\x02\x03\x04");  // 16-bit maxval unsupported
    CHECK_THROWS_AS(read_image(path), ParseError);

    spit(path, "P5\n2 2\n255\n\x01\x02");  // truncated raster
    CHECK_THROWS_AS(read_image(path), ParseError);

    spit(path, "P5\n2 two\n255\nxxxx");
    CHECK_THROWS_AS(read_image(path), ParseError);

    CHECK_THROWS_AS(read_image(temp_path("retina_io_missing.pgm")), IoError);
    std::remove(path.c_str());
}
