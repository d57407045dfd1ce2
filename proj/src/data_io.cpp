#include "oarseg/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "oarseg/nifti.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace oarseg {

static_assert(std::endian::native == std::endian::little, "raw volume I/O assumes a little-endian host");

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kImageFile = "image.raw";
constexpr const char* kLabelFile = "label.raw";

std::vector<std::int16_t> read_int16_file(const fs::path& path) {
    if (!fs::exists(path)) throw std::runtime_error("missing file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 2 != 0) throw std::runtime_error("odd byte count in int16 file: " + path.string());
    std::vector<std::int16_t> values(bytes.size() / 2);
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return values;
}

void write_int16_file(const fs::path& path, const std::vector<std::int16_t>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 2));
}

LabelVolume labels_from_values(const std::string& id, Shape3 shape, const std::vector<double>& values) {
    LabelVolume labels{id, shape, {}};
    labels.labels.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (v < 0 || v > kMaxLabelCode || v != std::floor(v))
            throw std::runtime_error("invalid organ code " + std::to_string(v) + " in labels of " + id);
        labels.labels[i] = static_cast<std::uint8_t>(v);
    }
    return labels;
}

PatientVolumes load_raw(const fs::path& dir) {
    const fs::path meta_path = dir / kMetaFile;
    if (!fs::exists(meta_path)) throw std::runtime_error("missing file: " + meta_path.string());
    json meta;
    {
        std::ifstream in(meta_path);
        meta = json::parse(in);
    }
    const auto shape_arr = meta.at("shape").get<std::vector<std::int64_t>>();
    const auto spacing_arr = meta.at("spacing").get<std::vector<double>>();
    const auto dtype = meta.value("dtype", std::string("int16-le"));
    if (shape_arr.size() != 3 || spacing_arr.size() != 3)
        throw std::runtime_error("meta.json: shape and spacing need three components");
    if (dtype != "int16-le") throw std::runtime_error("meta.json: unsupported dtype '" + dtype + "'");

    const std::string id = dir.filename().string();
    PatientVolumes out;
    out.image.patient_id = id;
    out.image.shape = {shape_arr[0], shape_arr[1], shape_arr[2]};
    out.image.spacing = {spacing_arr[0], spacing_arr[1], spacing_arr[2]};
    out.image.voxels = read_int16_file(dir / kImageFile);
    if (out.image.voxels.size() != static_cast<std::size_t>(out.image.shape.voxel_count()))
        throw std::runtime_error("image.raw size does not match meta.json shape in " + dir.string());

    const auto raw_labels = read_int16_file(dir / kLabelFile);
    if (raw_labels.size() != out.image.voxels.size())
        throw std::runtime_error("shape mismatch between image and labels in " + dir.string());
    std::vector<double> values(raw_labels.begin(), raw_labels.end());
    out.labels = labels_from_values(id, out.image.shape, values);
    return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Splits "<dir>/<id>_image.nii[.gz]" into id and suffix.
bool parse_nifti_image_name(const fs::path& path, std::string& id, std::string& suffix) {
    const std::string name = path.filename().string();
    for (std::string_view candidate : {"_image.nii.gz", "_image.nii"}) {
        if (ends_with(name, candidate)) {
            id = name.substr(0, name.size() - candidate.size());
            suffix = std::string(candidate.substr(6));
            return !id.empty();
        }
    }
    return false;
}

PatientVolumes load_nifti_pair(const fs::path& image_path) {
    std::string id, suffix;
    if (!parse_nifti_image_name(image_path, id, suffix))
        throw std::runtime_error("expected a <id>_image.nii[.gz] path: " + image_path.string());
    const fs::path label_path = image_path.parent_path() / (id + "_label" + suffix);
    if (!fs::exists(image_path)) throw std::runtime_error("missing file: " + image_path.string());
    if (!fs::exists(label_path)) throw std::runtime_error("missing file: " + label_path.string());

    const auto image = nifti::read(image_path);
    const auto label = nifti::read(label_path);
    if (!(image.shape == label.shape)) throw std::runtime_error("shape mismatch between image and labels for " + id);

    PatientVolumes out;
    out.image.patient_id = id;
    out.image.shape = image.shape;
    out.image.spacing = image.spacing;
    out.image.voxels.resize(image.values.size());
    for (std::size_t i = 0; i < image.values.size(); ++i) {
        const double v = std::round(image.values[i]);
        out.image.voxels[i] = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
    }
    out.labels = labels_from_values(id, label.shape, label.values);
    return out;
}

// Uniform draw in [lo, hi) from the raw engine output; avoids the
// implementation-defined std::uniform_real_distribution.
double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

}  // namespace

void validate(const CtVolume& volume) {
    const auto& s = volume.shape;
    if (s.slices < 1 || s.height < 1 || s.width < 1)
        throw std::invalid_argument("CT volume " + volume.patient_id + " has an empty shape");
    if (!(volume.spacing.dz > 0 && volume.spacing.dy > 0 && volume.spacing.dx > 0))
        throw std::invalid_argument("CT volume " + volume.patient_id + " has non-positive spacing");
    if (volume.voxels.size() != static_cast<std::size_t>(s.voxel_count()))
        throw std::invalid_argument("CT volume " + volume.patient_id + " voxel count does not match shape");
    for (auto v : volume.voxels)
        if (v < kMinHu || v > kMaxHu)
            throw std::invalid_argument("CT volume " + volume.patient_id + " has HU value " + std::to_string(v) +
                                        " outside [-2048, 4095]");
}

void validate(const LabelVolume& labels) {
    if (labels.labels.size() != static_cast<std::size_t>(labels.shape.voxel_count()))
        throw std::invalid_argument("label volume " + labels.patient_id + " voxel count does not match shape");
    for (auto v : labels.labels)
        if (v > kMaxLabelCode)
            throw std::invalid_argument("invalid organ code " + std::to_string(v) + " in labels of " +
                                        labels.patient_id);
}

void validate_pair(const CtVolume& volume, const LabelVolume& labels) {
    validate(volume);
    validate(labels);
    if (!(volume.shape == labels.shape))
        throw std::invalid_argument("shape mismatch between image and labels for " + volume.patient_id);
}

PatientVolumes load_volume(const fs::path& path) {
    PatientVolumes out;
    if (fs::is_directory(path)) {
        out = load_raw(path);
    } else {
        std::string id, suffix;
        if (!parse_nifti_image_name(path, id, suffix)) {
            if (!fs::exists(path)) throw std::runtime_error("missing file: " + path.string());
            throw std::runtime_error("not a patient directory or <id>_image.nii[.gz] file: " + path.string());
        }
        out = load_nifti_pair(path);
    }
    validate_pair(out.image, out.labels);
    return out;
}

void write_raw_volume(const fs::path& dir, const CtVolume& volume, const LabelVolume& labels) {
    validate_pair(volume, labels);
    fs::create_directories(dir);
    json meta;
    meta["shape"] = {volume.shape.slices, volume.shape.height, volume.shape.width};
    meta["spacing"] = {volume.spacing.dz, volume.spacing.dy, volume.spacing.dx};
    meta["dtype"] = "int16-le";
    {
        std::ofstream out(dir / kMetaFile, std::ios::trunc);
        out << meta.dump(2) << '\n';
    }
    write_int16_file(dir / kImageFile, volume.voxels);
    write_int16_file(dir / kLabelFile, std::vector<std::int16_t>(labels.labels.begin(), labels.labels.end()));
}

std::vector<fs::path> discover_patients(const fs::path& root) {
    if (!fs::is_directory(root)) throw std::runtime_error("data directory not found: " + root.string());
    std::vector<std::pair<std::string, fs::path>> found;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / kMetaFile)) {
            found.emplace_back(entry.path().filename().string(), entry.path());
        } else if (entry.is_regular_file()) {
            std::string id, suffix;
            if (parse_nifti_image_name(entry.path(), id, suffix)) found.emplace_back(id, entry.path());
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> paths;
    for (auto& [id, path] : found) paths.push_back(path);
    return paths;
}

std::vector<PatientVolumes> load_dataset(const fs::path& root) {
    std::vector<PatientVolumes> out;
    for (const auto& path : discover_patients(root)) out.push_back(load_volume(path));
    if (out.empty()) throw std::runtime_error("no patients found under " + root.string());
    return out;
}

namespace {

void check_window(HuWindow window) {
    if (!(window.lo < window.hi)) throw std::invalid_argument("HU window requires lo < hi");
}

double normalize_unchecked(double hu, HuWindow window) {
    return std::clamp((hu - window.lo) / (window.hi - window.lo), 0.0, 1.0);
}

}  // namespace

double normalize_value(double hu, HuWindow window) {
    check_window(window);
    return normalize_unchecked(hu, window);
}

Image2D normalize_slice(const Grid2<std::int16_t>& hu, HuWindow window) {
    check_window(window);
    Image2D out(hu.height, hu.width);
    for (std::size_t i = 0; i < hu.data.size(); ++i) out.data[i] = normalize_unchecked(hu.data[i], window);
    return out;
}

DatasetSplit split_dataset(std::vector<std::string> ids, std::uint64_t seed) {
    if (ids.size() < 3) throw std::invalid_argument("split_dataset needs at least 3 patients");
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw std::invalid_argument("split_dataset: duplicate patient id");
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit index draw so the permutation does not
    // depend on the standard library's shuffle implementation.
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        const std::size_t j = rng() % (i + 1);
        std::swap(ids[i], ids[j]);
    }
    const auto n = static_cast<double>(ids.size());
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * n)));
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * n)));
    const auto n_train = ids.size() - n_val - n_test;

    DatasetSplit split;
    split.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                         ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    return split;
}

Grid2<std::int16_t> hu_slice(const CtVolume& volume, std::int64_t slice) {
    Grid2<std::int16_t> out(volume.shape.height, volume.shape.width);
    const auto offset = slice * volume.shape.slice_size();
    std::copy_n(volume.voxels.begin() + offset, out.data.size(), out.data.begin());
    return out;
}

Mask2D organ_mask(const LabelVolume& labels, std::int64_t slice, OrganId organ) {
    Mask2D out(labels.shape.height, labels.shape.width);
    const auto offset = static_cast<std::size_t>(slice * labels.shape.slice_size());
    const auto code = static_cast<std::uint8_t>(organ_code(organ));
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = labels.labels[offset + i] == code ? 1 : 0;
    return out;
}

std::vector<SliceSample> extract_slices(const CtVolume& volume, const LabelVolume& labels, OrganId organ,
                                        HuWindow window) {
    if (!(volume.shape == labels.shape))
        throw std::invalid_argument("shape mismatch between image and labels for " + volume.patient_id);
    std::vector<SliceSample> out;
    out.reserve(static_cast<std::size_t>(volume.shape.slices));
    for (std::int64_t s = 0; s < volume.shape.slices; ++s) {
        out.push_back({normalize_slice(hu_slice(volume, s), window), organ_mask(labels, s, organ),
                       volume.patient_id, static_cast<int>(s)});
    }
    return out;
}

PixelDistribution class_pixel_distribution(const std::vector<LabelVolume>& labels) {
    if (labels.empty()) throw std::invalid_argument("class_pixel_distribution: empty input");
    std::array<std::uint64_t, kMaxLabelCode + 1> counts{};
    std::uint64_t total = 0;
    for (const auto& volume : labels) {
        validate(volume);
        for (auto v : volume.labels) ++counts[v];
        total += volume.labels.size();
    }
    PixelDistribution dist;
    dist.total_voxels = total;
    if (total == 0) throw std::invalid_argument("class_pixel_distribution: no voxels");
    const auto t = static_cast<double>(total);
    dist.background = static_cast<double>(counts[0]) / t;
    for (int k = 0; k < kOrganCount; ++k) dist.organ[k] = static_cast<double>(counts[k + 1]) / t;
    return dist;
}

namespace {

void check_phantom_options(const PhantomOptions& options) {
    const Shape3 shape = options.shape;
    if (options.n_patients < 3) throw std::invalid_argument("phantom needs at least 3 patients");
    if (shape.slices < 16 || shape.height < 16 || shape.width < 16)
        throw std::invalid_argument("phantom shape too small to place all six structures (each dimension >= 16)");
    if (shape.height > 4096 || shape.width > 4096 || shape.slices > 4096)
        throw std::invalid_argument("phantom shape too large");
}

}  // namespace

std::vector<std::vector<PhantomSolid>> phantom_geometry(const PhantomOptions& options) {
    check_phantom_options(options);
    const double S = static_cast<double>(options.shape.slices);
    const double H = static_cast<double>(options.shape.height);
    const double W = static_cast<double>(options.shape.width);
    const double cz = (S - 1) / 2, cy = (H - 1) / 2, cx = (W - 1) / 2;
    const double tube_radius = std::max(1.0, 0.045 * W);
    constexpr double kFlat = 1e9;

    std::mt19937_64 rng(options.seed);
    auto jitter = [&](double extent) { return uniform(rng, -0.02, 0.02) * extent; };
    auto scale = [&] { return uniform(rng, 0.92, 1.08); };

    std::vector<std::vector<PhantomSolid>> patients;
    for (int p = 0; p < options.n_patients; ++p) {
        using I = PhantomIntensities;
        std::vector<PhantomSolid> solids;
        solids.push_back({0, I::body, cz, cy, cx, kFlat, 0.40 * H, 0.46 * W});
        const double lung_y = cy - 0.02 * H;
        for (double side : {-1.0, 1.0}) {
            const int code = organ_code(side < 0 ? OrganId::right_lung : OrganId::left_lung);
            const double z = cz + jitter(S), y = lung_y + jitter(H), x = cx + side * 0.22 * W + jitter(W);
            const double az = 0.42 * S * scale(), ay = 0.24 * H * scale(), ax = 0.12 * W * scale();
            solids.push_back({code, I::lung, z, y, x, az, ay, ax});
        }
        {
            const double z = cz + 0.1 * S + jitter(S), y = cy - 0.13 * H + jitter(H), x = cx + 0.02 * W + jitter(W);
            const double az = 0.30 * S * scale(), ay = 0.11 * H * scale(), ax = 0.08 * W * scale();
            solids.push_back({organ_code(OrganId::heart), I::heart, z, y, x, az, ay, ax});
        }
        auto tube = [&](OrganId organ, int hu, double y0, double x0) {
            const double y = y0 + jitter(H), x = x0 + jitter(W);
            const double r = tube_radius * scale();
            solids.push_back({organ_code(organ), hu, cz, y, x, kFlat, r, r});
        };
        tube(OrganId::esophagus, I::esophagus, cy + 0.16 * H, cx + 0.03 * W);
        tube(OrganId::trachea, I::trachea, cy + 0.04 * H, cx);
        tube(OrganId::spinal_cord, I::spinal_cord, cy + 0.30 * H, cx);
        patients.push_back(std::move(solids));
    }
    return patients;
}

std::vector<PatientVolumes> generate_phantom(const PhantomOptions& options) {
    const Shape3 shape = options.shape;
    const auto geometry = phantom_geometry(options);
    // Noise has its own stream so geometry is reproducible on its own.
    std::mt19937_64 noise(options.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto span = static_cast<std::uint64_t>(2 * PhantomIntensities::noise_amplitude + 1);

    std::vector<PatientVolumes> out;
    for (std::size_t p = 0; p < geometry.size(); ++p) {
        const auto& solids = geometry[p];
        char id[32];
        std::snprintf(id, sizeof(id), "phantom_%03zu", p);
        PatientVolumes pv;
        pv.image = {id, shape, options.spacing,
                    std::vector<std::int16_t>(static_cast<std::size_t>(shape.voxel_count()))};
        pv.labels = {id, shape, std::vector<std::uint8_t>(static_cast<std::size_t>(shape.voxel_count()))};

        std::size_t i = 0;
        for (std::int64_t s = 0; s < shape.slices; ++s) {
            for (std::int64_t r = 0; r < shape.height; ++r) {
                for (std::int64_t c = 0; c < shape.width; ++c, ++i) {
                    int hu = PhantomIntensities::air;
                    std::uint8_t code = 0;
                    for (const auto& solid : solids) {
                        if (solid.contains(static_cast<double>(s), static_cast<double>(r), static_cast<double>(c))) {
                            code = static_cast<std::uint8_t>(solid.code);
                            hu = solid.hu;
                        }
                    }
                    hu += static_cast<int>(noise() % span) - PhantomIntensities::noise_amplitude;
                    pv.image.voxels[i] = static_cast<std::int16_t>(std::clamp(hu, kMinHu, kMaxHu));
                    pv.labels.labels[i] = code;
                }
            }
        }

        std::array<bool, kMaxLabelCode + 1> present{};
        for (auto v : pv.labels.labels) present[v] = true;
        for (int k = 1; k <= kMaxLabelCode; ++k)
            if (!present[k])
                throw std::invalid_argument("phantom shape too small to place all six structures (" +
                                            std::string(organ_name(static_cast<OrganId>(k))) + " vanished)");
        out.push_back(std::move(pv));
    }
    return out;
}

std::vector<fs::path> synthesize_phantom(const fs::path& out, const PhantomOptions& options) {
    const auto patients = generate_phantom(options);
    std::vector<fs::path> dirs;
    for (const auto& pv : patients) {
        const fs::path dir = out / pv.image.patient_id;
        write_raw_volume(dir, pv.image, pv.labels);
        dirs.push_back(dir);
    }
    return dirs;
}

}  // namespace oarseg
