#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "oarseg/grid.hpp"

namespace oarseg {

using Rgb = std::array<std::uint8_t, 3>;

enum class OverlayClass : std::uint8_t {
    none = 0,
    overlap = 1,         // pred and gt
    false_positive = 2,  // pred only
    false_negative = 3,  // gt only
};

struct OverlaySpec {
    Rgb overlap{255, 255, 0};
    Rgb false_positive{0, 255, 0};
    Rgb false_negative{255, 0, 0};
    double opacity = 0.6;  // (0, 1]
};

struct RgbImage {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major
};

Grid2<OverlayClass> classify_overlay(const Mask2D& pred, const Mask2D& gt);

/// Grayscale CT base (image values in [0,1]) with the classified pixels
/// blended toward their class color at `spec.opacity`.
RgbImage render_overlay(const Image2D& image, const Mask2D& pred, const Mask2D& gt, const OverlaySpec& spec = {});

void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace oarseg
