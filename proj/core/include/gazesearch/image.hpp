#pragma once
// 8-bit grayscale PNG I/O and resampling to the model input.

#include "gazesearch/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gazesearch::image {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Any PNG colour type is converted to 8-bit gray. Throws DataError.
GrayImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);

// Bilinear resample to size x size with values in [0, 1].
ad::Matrix to_model_input(const GrayImage& image, int size);

}  // namespace gazesearch::image
