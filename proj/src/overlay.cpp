#include "oarseg/overlay.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace oarseg {

Grid2<OverlayClass> classify_overlay(const Mask2D& pred, const Mask2D& gt) {
    require_same_shape(pred, gt, "overlay");
    Grid2<OverlayClass> out(pred.height, pred.width, OverlayClass::none);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
        if (p && g)
            out.data[i] = OverlayClass::overlap;
        else if (p)
            out.data[i] = OverlayClass::false_positive;
        else if (g)
            out.data[i] = OverlayClass::false_negative;
    }
    return out;
}

RgbImage render_overlay(const Image2D& image, const Mask2D& pred, const Mask2D& gt, const OverlaySpec& spec) {
    require_same_shape(image, pred, "overlay");
    if (!(spec.opacity > 0.0 && spec.opacity <= 1.0)) throw std::invalid_argument("overlay opacity must be in (0, 1]");
    if (spec.overlap == spec.false_positive || spec.overlap == spec.false_negative ||
        spec.false_positive == spec.false_negative)
        throw std::invalid_argument("overlay colors must be distinct");

    const auto classes = classify_overlay(pred, gt);
    RgbImage out{image.height, image.width, std::vector<std::uint8_t>(image.data.size() * 3)};
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const double gray = std::clamp(image.data[i], 0.0, 1.0) * 255.0;
        const Rgb* color = nullptr;
        switch (classes.data[i]) {
            case OverlayClass::overlap: color = &spec.overlap; break;
            case OverlayClass::false_positive: color = &spec.false_positive; break;
            case OverlayClass::false_negative: color = &spec.false_negative; break;
            case OverlayClass::none: break;
        }
        for (int ch = 0; ch < 3; ++ch) {
            double v = gray;
            if (color) v = (1.0 - spec.opacity) * gray + spec.opacity * (*color)[ch];
            out.pixels[i * 3 + ch] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng error while writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::int64_t r = 0; r < image.height; ++r) {
        auto* row = const_cast<png_bytep>(image.pixels.data() + r * image.width * 3);
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace oarseg
