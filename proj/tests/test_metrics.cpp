#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oarseg/data_io.hpp"
#include "oarseg/metrics.hpp"
#include "oracles.hpp"

using namespace oarseg;

namespace {

Mask2D square(long h, long w, long r0, long c0, long size) {
    Mask2D m(h, w, 0);
    for (long r = r0; r < r0 + size; ++r)
        for (long c = c0; c < c0 + size; ++c) m(r, c) = 1;
    return m;
}

BinaryMaskVolume volume_of(const std::vector<Mask2D>& slices) {
    BinaryMaskVolume v{"p", {static_cast<std::int64_t>(slices.size()), slices[0].height, slices[0].width}, {}};
    for (const auto& s : slices) v.masks.insert(v.masks.end(), s.data.begin(), s.data.end());
    return v;
}

Mask2D dilate4(const Mask2D& m) {
    Mask2D out = m;
    for (long r = 0; r < m.height; ++r)
        for (long c = 0; c < m.width; ++c)
            if (m(r, c)) {
                if (r > 0) out(r - 1, c) = 1;
                if (r + 1 < m.height) out(r + 1, c) = 1;
                if (c > 0) out(r, c - 1) = 1;
                if (c + 1 < m.width) out(r, c + 1) = 1;
            }
    return out;
}

}  // namespace

TEST_CASE("dsc_volume examples") {
    const auto a = square(8, 8, 2, 2, 4);
    CHECK(dice(a.data, a.data) == 1.0);
    CHECK(dice(a.data, square(8, 8, 0, 0, 2).data) == 0.0);
    // 4x4 square shifted by two columns overlaps in 8 pixels.
    const auto shifted = square(8, 8, 2, 4, 4);
    CHECK(dice(a.data, shifted.data) == 0.5);
    CHECK(dice(a.data, shifted.data) == oracle::dice(a.data, shifted.data));
    const Mask2D empty(8, 8, 0);
    CHECK(dice(empty.data, empty.data) == 1.0);
    CHECK(dice(a.data, empty.data) == 0.0);

    const auto v = volume_of({a, shifted});
    CHECK(dsc_volume(v, v) == 1.0);
    auto other = v;
    other.shape.slices = 1;
    other.masks.resize(64);
    CHECK_THROWS_AS(dsc_volume(v, other), std::invalid_argument);
}

TEST_CASE("dsc is symmetric, bounded and permutation invariant") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
        const auto a = oracle::random_mask(rng, 12, 12), b = oracle::random_mask(rng, 12, 12);
        const double d = dice(a.data, b.data);
        CHECK(d == dice(b.data, a.data));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(d == oracle::dice(a.data, b.data));
        if (a.data != b.data) CHECK(d < 1.0);
        std::vector<std::size_t> perm(a.data.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::uint8_t> pa(perm.size()), pb(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) pa[i] = a.data[perm[i]], pb[i] = b.data[perm[i]];
        CHECK(dice(pa, pb) == d);
    }
}

TEST_CASE("surface_pixels") {
    Mask2D one(5, 5, 0);
    one(2, 3) = 1;
    const auto s1 = surface_pixels(one);
    REQUIRE(s1.size() == 1);
    CHECK(s1[0] == PixelCoord{2, 3});

    const auto sq = square(8, 8, 2, 2, 4);
    const auto perim = surface_pixels(sq);
    CHECK(perim.size() == 12);
    for (const auto& p : perim) CHECK((p.row == 2 || p.row == 5 || p.col == 2 || p.col == 5));

    CHECK(surface_pixels(Mask2D(4, 4, 0)).empty());
    // Foreground on the array border counts as boundary.
    CHECK(surface_pixels(Mask2D(3, 3, 1)).size() == 8);

    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto m = oracle::random_mask(rng, 10, 13);
        const auto got = surface_pixels(m);
        const auto want = oracle::boundary(m);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].row == want[i].r);
            CHECK(got[i].col == want[i].c);
        }
    }
}

TEST_CASE("distance transform matches brute force") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 30; ++t) {
        auto f = oracle::random_mask(rng, 9, 14);
        if (std::all_of(f.data.begin(), f.data.end(), [](auto v) { return v == 0; })) f(4, 4) = 1;
        const PlanarSpacing sp{1.5, 0.7};
        const auto d = distance_to_features(f, sp);
        for (long r = 0; r < f.height; ++r)
            for (long c = 0; c < f.width; ++c) {
                double best = INFINITY;
                for (long rr = 0; rr < f.height; ++rr)
                    for (long cc = 0; cc < f.width; ++cc)
                        if (f(rr, cc)) best = std::min(best, std::hypot((r - rr) * 1.5, (c - cc) * 0.7));
                CHECK(d(r, c) == doctest::Approx(best).epsilon(1e-12));
            }
    }
    const auto none = distance_to_features(Mask2D(3, 3, 0));
    for (double v : none.data) CHECK(std::isinf(v));
}

TEST_CASE("percentile_linear") {
    CHECK(percentile_linear({5.0}, 95) == 5.0);
    CHECK(percentile_linear({0.0, 10.0}, 95) == doctest::Approx(9.5));
    CHECK(percentile_linear({3, 1, 2, 4, 5}, 50) == 3.0);
    CHECK(percentile_linear({1, 2, 3}, 100) == 3.0);
    CHECK(percentile_linear({1, 2, 3}, 0) == 1.0);
    CHECK_THROWS(percentile_linear({}, 95));
}

TEST_CASE("hd95_slice examples") {
    const auto sq = square(10, 10, 3, 3, 4);
    const auto same = hd95_slice(sq, sq);
    CHECK(same.defined());
    CHECK(same.value == 0.0);

    Mask2D a(6, 6, 0), b(6, 6, 0);
    a(0, 0) = 1;
    b(3, 4) = 1;
    const auto five = hd95_slice(a, b);
    CHECK(five.defined());
    CHECK(five.value == doctest::Approx(5.0).epsilon(1e-15));

    const Mask2D empty(6, 6, 0);
    CHECK(hd95_slice(empty, empty).status == SliceStatus::both_empty);
    CHECK(hd95_slice(a, empty).status == SliceStatus::one_empty);
    CHECK(hd95_slice(empty, b).status == SliceStatus::one_empty);
    CHECK_THROWS_AS(hd95_slice(a, Mask2D(5, 6, 0)), std::invalid_argument);

    // Anisotropic spacing scales the axes separately.
    CHECK(hd95_slice(a, b, {2.0, 1.0}).value == doctest::Approx(std::hypot(6.0, 4.0)).epsilon(1e-15));
}

TEST_CASE("hd95_slice agrees with the brute-force oracle and its properties") {
    std::mt19937_64 rng(2024);
    int defined = 0;
    for (int t = 0; t < 150; ++t) {
        const auto a = oracle::random_mask(rng, 20, 20), b = oracle::random_mask(rng, 20, 20);
        const auto h = hd95_slice(a, b);
        const double want = oracle::hd95(a, b);
        if (std::isnan(want)) {
            CHECK(!h.defined());
            continue;
        }
        ++defined;
        REQUIRE(h.defined());
        CHECK(std::abs(h.value - want) <= 1e-9);
        CHECK(h.value == hd95_slice(b, a).value);
        CHECK(h.value <= oracle::max_pooled(a, b) + 1e-12);
    }
    CHECK(defined > 50);
}

TEST_CASE("hd95_slice is translation invariant") {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 40; ++t) {
        // Masks live in the top-left 12x12 of a 20x20 frame, so a shift of up
        // to 4 pixels keeps them off the border.
        auto small_a = oracle::random_mask(rng, 12, 12), small_b = oracle::random_mask(rng, 12, 12);
        auto place = [](const Mask2D& m, long dr, long dc) {
            Mask2D out(20, 20, 0);
            for (long r = 0; r < 12; ++r)
                for (long c = 0; c < 12; ++c) out(r + 2 + dr, c + 2 + dc) = m(r, c);
            return out;
        };
        const auto h0 = hd95_slice(place(small_a, 0, 0), place(small_b, 0, 0));
        const auto h1 = hd95_slice(place(small_a, 4, 3), place(small_b, 4, 3));
        CHECK(h0.status == h1.status);
        if (h0.defined()) CHECK(h0.value == doctest::Approx(h1.value).epsilon(1e-12));
    }
}

TEST_CASE("hd95_patient averages defined slices only") {
    Mask2D a(6, 6, 0), b1(6, 6, 0), b2(6, 6, 0);
    a(2, 2) = 1;
    b1(2, 3) = 1;  // distance 1
    b2(2, 4) = 1;  // distance 2
    const Mask2D empty(6, 6, 0);
    const auto pred = volume_of({a, a, empty, a});
    const auto gt = volume_of({b1, b2, empty, empty});
    const auto h = hd95_patient(pred, gt);
    REQUIRE(h.mean);
    CHECK(*h.mean == 1.5);
    CHECK(h.defined_slices == 2);
    CHECK(h.both_empty_slices == 1);
    CHECK(h.one_empty_slices == 1);
    CHECK(h.undefined_slices() == 2);

    CHECK(*hd95_patient(gt, gt).mean == 0.0);
    const auto none = hd95_patient(volume_of({empty}), volume_of({empty}));
    CHECK(!none.mean);
}

TEST_CASE("hd95 of a one-pixel 4-dilation") {
    const auto base = square(24, 24, 6, 6, 10);
    Mask2D disk(24, 24, 0);
    for (long r = 0; r < 24; ++r)
        for (long c = 0; c < 24; ++c)
            if ((r - 12) * (r - 12) + (c - 11) * (c - 11) <= 30) disk(r, c) = 1;
    const auto gt = volume_of({base, disk});
    const auto pred = volume_of({dilate4(base), dilate4(disk)});
    const auto h = hd95_patient(pred, gt);
    REQUIRE(h.mean);
    const double want = (oracle::hd95(dilate4(base), base) + oracle::hd95(dilate4(disk), disk)) / 2.0;
    CHECK(*h.mean == doctest::Approx(want).epsilon(1e-12));
    CHECK(hd95_slice(dilate4(base), base).value == 1.0);

    // Phantom organs: every slice where the organ is present.
    const auto patients = generate_phantom({0, 3, {16, 64, 64}, {2.5, 1, 1}});
    for (auto organ : {OrganId::heart, OrganId::right_lung, OrganId::spinal_cord}) {
        std::vector<Mask2D> g, p;
        for (std::int64_t s = 0; s < 16; ++s) {
            const auto m = organ_mask(patients[0].labels, s, organ);
            g.push_back(m);
            p.push_back(dilate4(m));
        }
        const auto ph = hd95_patient(volume_of(p), volume_of(g));
        REQUIRE(ph.mean);
        double sum = 0;
        int n = 0;
        for (std::size_t s = 0; s < g.size(); ++s) {
            const double o = oracle::hd95(p[s], g[s]);
            if (!std::isnan(o)) sum += o, ++n;
        }
        CHECK(*ph.mean == doctest::Approx(sum / n).epsilon(1e-12));
        CHECK(*ph.mean == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("summaries and metric rows") {
    const double v[] = {0.5, 1.0, 0.75};
    const auto s = summarize(v);
    CHECK(s.mean == 0.75);
    CHECK(s.min == 0.5);
    CHECK(s.max == 1.0);
    CHECK_THROWS(summarize(std::span<const double>{}));

    std::vector<PatientMetrics> patients(2);
    patients[0].dsc = 0.8;
    patients[0].hd95.mean = 2.0;
    patients[0].hd95.defined_slices = 3;
    patients[0].hd95.one_empty_slices = 1;
    patients[1].dsc = 0.6;
    patients[1].hd95.both_empty_slices = 2;
    const auto row = summarize_patients("heart", "unet", patients);
    CHECK(row.n_patients == 2);
    CHECK(row.dsc.mean == doctest::Approx(0.7));
    CHECK(row.hd95.mean == 2.0);
    CHECK(row.n_undefined_slices == 3);
    CHECK(row.n_one_empty_slices == 1);
    CHECK(row.dsc.min <= row.dsc.mean);
    CHECK(row.dsc.mean <= row.dsc.max);

    patients[0].hd95.mean.reset();
    const auto no_hd = summarize_patients("heart", "unet", patients);
    CHECK(std::isnan(no_hd.hd95.mean));
}

TEST_CASE("patient_metrics is independent of processing order") {
    std::mt19937_64 rng(5);
    std::vector<std::pair<BinaryMaskVolume, BinaryMaskVolume>> pairs;
    for (int p = 0; p < 4; ++p) {
        std::vector<Mask2D> a, b;
        for (int s = 0; s < 3; ++s) a.push_back(oracle::random_mask(rng, 10, 10)), b.push_back(oracle::random_mask(rng, 10, 10));
        pairs.emplace_back(volume_of(a), volume_of(b));
    }
    std::vector<double> forward, backward;
    for (const auto& [a, b] : pairs) forward.push_back(patient_metrics(a, b).dsc);
    for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) backward.push_back(patient_metrics(it->first, it->second).dsc);
    std::reverse(backward.begin(), backward.end());
    CHECK(forward == backward);
}
