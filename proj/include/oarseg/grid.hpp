#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace oarseg {

/// Row-major 2-D array. Row index is the image y axis, column index x.
template <typename T>
struct Grid2 {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<T> data;

    Grid2() = default;
    Grid2(std::int64_t h, std::int64_t w, T fill = T{})
        : height(h), width(w), data(static_cast<std::size_t>(h * w), fill) {}

    std::size_t size() const { return data.size(); }
    bool same_shape(const Grid2<auto>& other) const {
        return height == other.height && width == other.width;
    }

    T& operator()(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * width + c)]; }
    const T& operator()(std::int64_t r, std::int64_t c) const {
        return data[static_cast<std::size_t>(r * width + c)];
    }

    bool operator==(const Grid2&) const = default;
};

using Image2D = Grid2<double>;
using Mask2D = Grid2<std::uint8_t>;

struct Shape3 {
    std::int64_t slices = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;

    std::int64_t slice_size() const { return height * width; }
    std::int64_t voxel_count() const { return slices * height * width; }
    bool operator==(const Shape3&) const = default;
};

/// Voxel spacing in millimeters, (dz, dy, dx).
struct Spacing {
    double dz = 1.0;
    double dy = 1.0;
    double dx = 1.0;
    bool operator==(const Spacing&) const = default;
};

template <typename A, typename B>
void require_same_shape(const Grid2<A>& a, const Grid2<B>& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace oarseg
