#include "oarseg/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>

namespace oarseg::nifti {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kSingleFileOffset = 352;

enum DataType : std::int16_t {
    kUint8 = 2,
    kInt16 = 4,
    kInt32 = 8,
    kFloat32 = 16,
    kFloat64 = 64,
    kInt8 = 256,
    kUint16 = 512,
};

struct GzCloser {
    void operator()(gzFile_s* f) const { gzclose(f); }
};

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::unique_ptr<gzFile_s, GzCloser> file(gzopen(path.c_str(), "rb"));
    if (!file) throw std::runtime_error("cannot open NIfTI file: " + path.string());
    std::vector<std::uint8_t> bytes;
    std::array<std::uint8_t, 1 << 16> chunk{};
    for (;;) {
        const int n = gzread(file.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) throw std::runtime_error("corrupt NIfTI stream: " + path.string());
        if (n == 0) break;
        bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + n);
    }
    return bytes;
}

template <typename T>
T load(const std::uint8_t* p, bool swap) {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), p, sizeof(T));
    if (swap) std::reverse(raw.begin(), raw.end());
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
}

template <typename T>
void store(std::uint8_t* p, T value) {
    static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
    std::memcpy(p, &value, sizeof(T));
}

std::size_t bytes_per_voxel(std::int16_t datatype) {
    switch (datatype) {
        case kUint8:
        case kInt8: return 1;
        case kInt16:
        case kUint16: return 2;
        case kInt32:
        case kFloat32: return 4;
        case kFloat64: return 8;
        default: throw std::runtime_error("unsupported NIfTI datatype " + std::to_string(datatype));
    }
}

double voxel_value(const std::uint8_t* p, std::int16_t datatype, bool swap) {
    switch (datatype) {
        case kUint8: return *p;
        case kInt8: return static_cast<std::int8_t>(*p);
        case kInt16: return load<std::int16_t>(p, swap);
        case kUint16: return load<std::uint16_t>(p, swap);
        case kInt32: return load<std::int32_t>(p, swap);
        case kFloat32: return load<float>(p, swap);
        case kFloat64: return load<double>(p, swap);
        default: throw std::runtime_error("unsupported NIfTI datatype " + std::to_string(datatype));
    }
}

}  // namespace

Volume read(const std::filesystem::path& path) {
    const auto bytes = read_all(path);
    if (bytes.size() < kHeaderSize) throw std::runtime_error("truncated NIfTI header: " + path.string());
    const std::uint8_t* h = bytes.data();

    bool swap = false;
    if (load<std::int32_t>(h, false) != kHeaderSize) {
        if (load<std::int32_t>(h, true) != kHeaderSize)
            throw std::runtime_error("not a NIfTI-1 file: " + path.string());
        swap = true;
    }
    if (std::memcmp(h + 344, "n+1", 3) != 0)
        throw std::runtime_error("only single-file NIfTI-1 (n+1) is supported: " + path.string());

    std::array<std::int16_t, 8> dim{};
    for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + 40 + 2 * i, swap);
    if (dim[0] < 2 || dim[0] > 7) throw std::runtime_error("invalid NIfTI dimensionality: " + path.string());
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[i] > 1) throw std::runtime_error("NIfTI volume has more than three dimensions: " + path.string());

    const auto datatype = load<std::int16_t>(h + 70, swap);
    std::array<float, 8> pixdim{};
    for (int i = 0; i < 8; ++i) pixdim[i] = load<float>(h + 76 + 4 * i, swap);
    const auto vox_offset = static_cast<std::size_t>(load<float>(h + 108, swap));
    float slope = load<float>(h + 112, swap);
    const float inter = load<float>(h + 116, swap);
    if (slope == 0.0f) slope = 1.0f;

    Volume volume;
    volume.shape = {dim[0] >= 3 ? dim[3] : 1, dim[2], dim[1]};
    auto positive = [](float v) { return v > 0.0f ? static_cast<double>(v) : 1.0; };
    volume.spacing = {dim[0] >= 3 ? positive(pixdim[3]) : 1.0, positive(pixdim[2]), positive(pixdim[1])};

    const auto count = static_cast<std::size_t>(volume.shape.voxel_count());
    const std::size_t width = bytes_per_voxel(datatype);
    if (vox_offset + count * width > bytes.size())
        throw std::runtime_error("truncated NIfTI data: " + path.string());

    volume.values.resize(count);
    const std::uint8_t* data = h + vox_offset;
    for (std::size_t i = 0; i < count; ++i)
        volume.values[i] = voxel_value(data + i * width, datatype, swap) * slope + inter;
    return volume;
}

void write_int16(const std::filesystem::path& path, Shape3 shape, Spacing spacing,
                 const std::vector<std::int16_t>& values) {
    if (values.size() != static_cast<std::size_t>(shape.voxel_count()))
        throw std::invalid_argument("NIfTI write: value count does not match shape");

    std::vector<std::uint8_t> out(kSingleFileOffset + values.size() * 2, 0);
    std::uint8_t* h = out.data();
    store<std::int32_t>(h, kHeaderSize);
    store<char>(h + 38, 'r');
    const std::array<std::int16_t, 8> dim = {3, static_cast<std::int16_t>(shape.width),
                                             static_cast<std::int16_t>(shape.height),
                                             static_cast<std::int16_t>(shape.slices), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) store<std::int16_t>(h + 40 + 2 * i, dim[i]);
    store<std::int16_t>(h + 70, kInt16);
    store<std::int16_t>(h + 72, 16);
    const std::array<float, 8> pixdim = {1.0f, static_cast<float>(spacing.dx), static_cast<float>(spacing.dy),
                                         static_cast<float>(spacing.dz), 1.0f, 1.0f, 1.0f, 1.0f};
    for (int i = 0; i < 8; ++i) store<float>(h + 76 + 4 * i, pixdim[i]);
    store<float>(h + 108, static_cast<float>(kSingleFileOffset));
    store<float>(h + 112, 1.0f);
    store<float>(h + 116, 0.0f);
    store<std::uint8_t>(h + 123, 2);  // millimeters
    std::memcpy(h + 344, "n+1\0", 4);
    std::memcpy(h + kSingleFileOffset, values.data(), values.size() * 2);

    const bool gz = path.extension() == ".gz";
    std::unique_ptr<gzFile_s, GzCloser> file(gzopen(path.c_str(), gz ? "wb6" : "wbT"));
    if (!file) throw std::runtime_error("cannot write NIfTI file: " + path.string());
    if (gzwrite(file.get(), out.data(), static_cast<unsigned>(out.size())) != static_cast<int>(out.size()))
        throw std::runtime_error("short write to NIfTI file: " + path.string());
}

}  // namespace oarseg::nifti
