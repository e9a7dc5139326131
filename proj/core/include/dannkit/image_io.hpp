#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dannkit/error.hpp"

namespace dannkit {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major
};

void write_png_gray8(const std::filesystem::path& path, const GrayImage& image);

// Reads 8-bit grayscale PNG (other PNG depths/colors are converted) or
// binary PGM (P5). Throws IoError naming the path on failure.
GrayImage read_gray_image(const std::filesystem::path& path);

} // namespace dannkit
