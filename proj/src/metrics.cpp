#include "oarseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oarseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform over samples at positions i*step:
// out[i] = min_j (step*(i-j))^2 + f[j]. Infinite f entries are skipped.
void squared_distance_1d(std::span<const double> f, double step, std::span<double> out) {
    const auto n = static_cast<std::int64_t>(f.size());
    std::vector<std::int64_t> site;
    std::vector<double> boundary;
    site.reserve(f.size());
    boundary.reserve(f.size() + 1);
    auto pos = [step](std::int64_t i) { return step * static_cast<double>(i); };
    // Abscissa where the parabolas rooted at p and q intersect.
    auto intersect = [&](std::int64_t p, std::int64_t q) {
        const double xp = pos(p), xq = pos(q);
        return ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
    };
    for (std::int64_t q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) continue;
        while (!site.empty()) {
            const double s = intersect(site.back(), q);
            if (s <= boundary.back()) {
                site.pop_back();
                boundary.pop_back();
            } else {
                boundary.push_back(s);
                break;
            }
        }
        if (site.empty()) boundary.assign(1, -kInf);
        site.push_back(q);
    }
    if (site.empty()) {
        std::fill(out.begin(), out.end(), kInf);
        return;
    }
    boundary.push_back(kInf);
    std::size_t k = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = pos(i);
        while (boundary[k + 1] < x) ++k;
        const double d = x - pos(site[k]);
        out[static_cast<std::size_t>(i)] = d * d + f[static_cast<std::size_t>(site[k])];
    }
}

void check_shapes(const BinaryMaskVolume& a, const BinaryMaskVolume& b) {
    if (!(a.shape == b.shape) || a.masks.size() != b.masks.size())
        throw std::invalid_argument("mask volumes: shape mismatch");
}

}  // namespace

Mask2D BinaryMaskVolume::slice(std::int64_t s) const {
    Mask2D out(shape.height, shape.width);
    const auto offset = static_cast<std::ptrdiff_t>(s * shape.slice_size());
    std::copy_n(masks.begin() + offset, out.data.size(), out.data.begin());
    return out;
}

double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("dice: shape mismatch");
    std::uint64_t inter = 0, p = 0, g = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i] != 0, b = gt[i] != 0;
        p += a;
        g += b;
        inter += a && b;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

double dsc_volume(const BinaryMaskVolume& pred, const BinaryMaskVolume& gt) {
    check_shapes(pred, gt);
    return dice(pred.masks, gt.masks);
}

std::vector<PixelCoord> surface_pixels(const Mask2D& mask) {
    std::vector<PixelCoord> out;
    const auto h = mask.height, w = mask.width;
    for (std::int64_t r = 0; r < h; ++r) {
        for (std::int64_t c = 0; c < w; ++c) {
            if (!mask(r, c)) continue;
            const bool edge = r == 0 || c == 0 || r == h - 1 || c == w - 1 || !mask(r - 1, c) || !mask(r + 1, c) ||
                              !mask(r, c - 1) || !mask(r, c + 1);
            if (edge) out.push_back({r, c});
        }
    }
    return out;
}

Grid2<double> distance_to_features(const Mask2D& features, PlanarSpacing spacing) {
    const auto h = features.height, w = features.width;
    Grid2<double> sq(h, w, kInf);
    for (std::size_t i = 0; i < features.data.size(); ++i)
        if (features.data[i]) sq.data[i] = 0.0;

    std::vector<double> column(static_cast<std::size_t>(h)), column_out(static_cast<std::size_t>(h));
    for (std::int64_t c = 0; c < w; ++c) {
        for (std::int64_t r = 0; r < h; ++r) column[static_cast<std::size_t>(r)] = sq(r, c);
        squared_distance_1d(column, spacing.dy, column_out);
        for (std::int64_t r = 0; r < h; ++r) sq(r, c) = column_out[static_cast<std::size_t>(r)];
    }
    std::vector<double> row_out(static_cast<std::size_t>(w));
    for (std::int64_t r = 0; r < h; ++r) {
        std::span<double> row(sq.data.data() + r * w, static_cast<std::size_t>(w));
        squared_distance_1d(row, spacing.dx, row_out);
        std::copy(row_out.begin(), row_out.end(), row.begin());
    }
    for (auto& v : sq.data) v = std::sqrt(v);
    return sq;
}

double percentile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty list");
    std::sort(values.begin(), values.end());
    const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

SliceHd95 hd95_slice(const Mask2D& pred, const Mask2D& gt, PlanarSpacing spacing) {
    require_same_shape(pred, gt, "hd95_slice");
    const auto pred_surface = surface_pixels(pred);
    const auto gt_surface = surface_pixels(gt);
    if (pred_surface.empty() && gt_surface.empty()) return {SliceStatus::both_empty, 0.0};
    if (pred_surface.empty() || gt_surface.empty()) return {SliceStatus::one_empty, 0.0};

    auto as_mask = [&](const std::vector<PixelCoord>& pixels) {
        Mask2D m(pred.height, pred.width);
        for (const auto& p : pixels) m(p.row, p.col) = 1;
        return m;
    };
    const auto to_gt = distance_to_features(as_mask(gt_surface), spacing);
    const auto to_pred = distance_to_features(as_mask(pred_surface), spacing);

    std::vector<double> pooled;
    pooled.reserve(pred_surface.size() + gt_surface.size());
    for (const auto& p : pred_surface) pooled.push_back(to_gt(p.row, p.col));
    for (const auto& p : gt_surface) pooled.push_back(to_pred(p.row, p.col));
    return {SliceStatus::defined, percentile_linear(std::move(pooled), 95.0)};
}

PatientHd95 hd95_patient(const BinaryMaskVolume& pred, const BinaryMaskVolume& gt, PlanarSpacing spacing) {
    check_shapes(pred, gt);
    PatientHd95 out;
    double sum = 0.0;
    for (std::int64_t s = 0; s < pred.shape.slices; ++s) {
        const auto r = hd95_slice(pred.slice(s), gt.slice(s), spacing);
        switch (r.status) {
            case SliceStatus::defined:
                sum += r.value;
                ++out.defined_slices;
                break;
            case SliceStatus::both_empty: ++out.both_empty_slices; break;
            case SliceStatus::one_empty: ++out.one_empty_slices; break;
        }
    }
    if (out.defined_slices > 0) out.mean = sum / out.defined_slices;
    return out;
}

PatientMetrics patient_metrics(const BinaryMaskVolume& pred, const BinaryMaskVolume& gt, PlanarSpacing spacing) {
    return {gt.patient_id, dsc_volume(pred, gt), hd95_patient(pred, gt, spacing)};
}

MetricSummary summarize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: no values");
    MetricSummary s{0.0, values[0], values[0]};
    double sum = 0.0;
    for (double v : values) {
        sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

MetricRow summarize_patients(std::string target, std::string model, std::span<const PatientMetrics> patients) {
    if (patients.empty()) throw std::invalid_argument("summarize_patients: no patients");
    MetricRow row;
    row.target = std::move(target);
    row.model = std::move(model);
    row.n_patients = static_cast<int>(patients.size());
    std::vector<double> dsc, hd;
    for (const auto& p : patients) {
        dsc.push_back(p.dsc);
        if (p.hd95.mean) hd.push_back(*p.hd95.mean);
        row.n_undefined_slices += p.hd95.undefined_slices();
        row.n_one_empty_slices += p.hd95.one_empty_slices;
    }
    row.dsc = summarize(dsc);
    if (hd.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.hd95 = {nan, nan, nan};
    } else {
        row.hd95 = summarize(hd);
    }
    return row;
}

}  // namespace oarseg
