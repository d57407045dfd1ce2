#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "oarseg/grid.hpp"
#include "oarseg/organ.hpp"

namespace oarseg {

inline constexpr int kMinHu = -2048;
inline constexpr int kMaxHu = 4095;

/// One patient's CT scan in Hounsfield units, slice-major (slice, y, x).
struct CtVolume {
    std::string patient_id;
    Shape3 shape;
    Spacing spacing;
    std::vector<std::int16_t> voxels;

    std::int16_t at(std::int64_t s, std::int64_t r, std::int64_t c) const {
        return voxels[static_cast<std::size_t>((s * shape.height + r) * shape.width + c)];
    }
};

/// Per-voxel organ codes (0 background, 1..6 OrganId) matching a CtVolume.
struct LabelVolume {
    std::string patient_id;
    Shape3 shape;
    std::vector<std::uint8_t> labels;

    std::uint8_t at(std::int64_t s, std::int64_t r, std::int64_t c) const {
        return labels[static_cast<std::size_t>((s * shape.height + r) * shape.width + c)];
    }
};

struct PatientVolumes {
    CtVolume image;
    LabelVolume labels;
};

/// Intensity window mapped onto [0, 1].
struct HuWindow {
    double lo = -1000.0;
    double hi = 1000.0;
};

struct SliceSample {
    Image2D image;  // windowed, values in [0,1]
    Mask2D mask;    // binary indicator of one organ
    std::string patient_id;
    int slice_index = 0;
};

struct DatasetSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
};

/// Fraction of all voxels carrying each code; index 0 is background.
struct PixelDistribution {
    double background = 0.0;
    std::array<double, kOrganCount> organ{};
    std::uint64_t total_voxels = 0;

    double of(OrganId organ_id) const { return organ[organ_index(organ_id)]; }
};

void validate(const CtVolume& volume);
void validate(const LabelVolume& labels);
void validate_pair(const CtVolume& volume, const LabelVolume& labels);

/// Loads either a raw-format patient directory (meta.json + image.raw +
/// label.raw) or a NIfTI-1 `<id>_image.nii[.gz]` file together with its
/// `<id>_label.nii[.gz]` sibling.
PatientVolumes load_volume(const std::filesystem::path& path);

/// Writes the raw-format directory `dir` (created if needed).
void write_raw_volume(const std::filesystem::path& dir, const CtVolume& volume, const LabelVolume& labels);

/// Every loadable patient under `root`, sorted by patient id.
std::vector<std::filesystem::path> discover_patients(const std::filesystem::path& root);
std::vector<PatientVolumes> load_dataset(const std::filesystem::path& root);

Image2D normalize_slice(const Grid2<std::int16_t>& hu_slice, HuWindow window);
double normalize_value(double hu, HuWindow window);

DatasetSplit split_dataset(std::vector<std::string> patient_ids, std::uint64_t seed);

Grid2<std::int16_t> hu_slice(const CtVolume& volume, std::int64_t slice);
Mask2D organ_mask(const LabelVolume& labels, std::int64_t slice, OrganId organ);

std::vector<SliceSample> extract_slices(const CtVolume& volume, const LabelVolume& labels, OrganId organ,
                                        HuWindow window = {});

PixelDistribution class_pixel_distribution(const std::vector<LabelVolume>& labels);

struct PhantomOptions {
    std::uint64_t seed = 0;
    int n_patients = 3;
    Shape3 shape{16, 64, 64};
    Spacing spacing{2.5, 1.0, 1.0};
};

/// One solid of the phantom. Code 0 is the body (background tissue).
/// Tubes and the body have an effectively infinite z semi-axis.
struct PhantomSolid {
    int code = 0;
    int hu = 0;
    double z = 0, y = 0, x = 0;     // center, voxel units
    double az = 1, ay = 1, ax = 1;  // semi-axes, voxel units

    bool contains(double s, double r, double c) const {
        const double dz = (s - z) / az, dy = (r - y) / ay, dx = (c - x) / ax;
        return dz * dz + dy * dy + dx * dx <= 1.0;
    }
};

/// Per patient, the solids in paint order (later solids overwrite earlier ones).
std::vector<std::vector<PhantomSolid>> phantom_geometry(const PhantomOptions& options);

/// Deterministic synthetic thorax: two lateral lung ellipsoids, a medial heart
/// ellipsoid and three thin tubes (trachea, spinal cord, esophagus) inside a
/// soft-tissue body on an air background. Returns volumes in patient order
/// `phantom_000`, `phantom_001`, ...
std::vector<PatientVolumes> generate_phantom(const PhantomOptions& options);

/// generate_phantom followed by write_raw_volume into `out/<patient_id>/`.
std::vector<std::filesystem::path> synthesize_phantom(const std::filesystem::path& out,
                                                      const PhantomOptions& options);

/// Nominal HU assigned to each structure by the phantom generator.
struct PhantomIntensities {
    static constexpr int air = -1000;
    static constexpr int body = 40;
    static constexpr int lung = -850;
    static constexpr int heart = 350;
    static constexpr int trachea = -1000;
    static constexpr int spinal_cord = 650;
    static constexpr int esophagus = -350;
    static constexpr int noise_amplitude = 20;
};

}  // namespace oarseg
