#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oarseg/grid.hpp"

namespace oarseg {

/// Stacked per-slice binary masks of one organ for one patient.
struct BinaryMaskVolume {
    std::string patient_id;
    Shape3 shape;
    std::vector<std::uint8_t> masks;

    Mask2D slice(std::int64_t s) const;
};

struct PixelCoord {
    std::int64_t row = 0;
    std::int64_t col = 0;
    bool operator==(const PixelCoord&) const = default;
    auto operator<=>(const PixelCoord&) const = default;
};

/// In-plane pixel spacing (dy, dx). Unit spacing gives distances in pixels.
struct PlanarSpacing {
    double dy = 1.0;
    double dx = 1.0;
};

/// 2|P∩G| / (|P|+|G|) over all voxels; 1.0 when both masks are empty.
double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);
double dsc_volume(const BinaryMaskVolume& pred, const BinaryMaskVolume& gt);

/// Foreground pixels with at least one 4-neighbor that is background or
/// outside the array. Row-major order.
std::vector<PixelCoord> surface_pixels(const Mask2D& mask);

/// Exact Euclidean distance from every pixel to the nearest `feature` pixel
/// (separable lower-envelope transform). +inf everywhere when there are no
/// features.
Grid2<double> distance_to_features(const Mask2D& features, PlanarSpacing spacing = {});

/// Percentile with linear interpolation between order statistics
/// (rank = q/100 * (n-1)). `values` must be non-empty.
double percentile_linear(std::vector<double> values, double q);

enum class SliceStatus {
    defined,
    both_empty,  // neither mask has foreground
    one_empty,   // exactly one mask has foreground
};

struct SliceHd95 {
    SliceStatus status = SliceStatus::both_empty;
    double value = 0.0;  // meaningful only when status == defined

    bool defined() const { return status == SliceStatus::defined; }
};

/// 95th percentile of the pooled bidirectional boundary distances.
SliceHd95 hd95_slice(const Mask2D& pred, const Mask2D& gt, PlanarSpacing spacing = {});

struct PatientHd95 {
    std::optional<double> mean;  // over defined slices only
    int defined_slices = 0;
    int both_empty_slices = 0;
    int one_empty_slices = 0;

    int undefined_slices() const { return both_empty_slices + one_empty_slices; }
};

PatientHd95 hd95_patient(const BinaryMaskVolume& pred, const BinaryMaskVolume& gt, PlanarSpacing spacing = {});

struct PatientMetrics {
    std::string patient_id;
    double dsc = 0.0;
    PatientHd95 hd95;
};

PatientMetrics patient_metrics(const BinaryMaskVolume& pred, const BinaryMaskVolume& gt,
                               PlanarSpacing spacing = {});

struct MetricSummary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// One table cell group: a model's scores for one target across patients.
struct MetricRow {
    std::string target;
    std::string model;
    MetricSummary dsc;
    MetricSummary hd95;  // NaN fields when no patient had a defined HD95
    int n_patients = 0;
    int n_undefined_slices = 0;
    int n_one_empty_slices = 0;
};

/// Mean/min/max in patient order. Throws on empty input.
MetricSummary summarize(std::span<const double> values);

MetricRow summarize_patients(std::string target, std::string model, std::span<const PatientMetrics> patients);

}  // namespace oarseg
