#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "oarseg/grid.hpp"

namespace oarseg::nifti {

/// Scalar volume read from a NIfTI-1 file, converted to double after
/// applying scl_slope / scl_inter. Voxel order is x fastest, then y, then z,
/// which maps directly onto (slice, row, column).
struct Volume {
    Shape3 shape;
    Spacing spacing;
    std::vector<double> values;
};

/// Reads `.nii` or `.nii.gz` (gzip detected from content, not the suffix).
Volume read(const std::filesystem::path& path);

/// Writes a single-file NIfTI-1 int16 volume, gzip-compressed when the path
/// ends in `.gz`.
void write_int16(const std::filesystem::path& path, Shape3 shape, Spacing spacing,
                 const std::vector<std::int16_t>& values);

}  // namespace oarseg::nifti
