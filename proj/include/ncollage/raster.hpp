#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace ncollage {

/**
 * Real-valued image with channel-planar, row-major storage.
 *
 * Sample (c, y, x) lives at data[(c * height + y) * width + x]. Values read
 * from files are in [0, 1]; anything in between load and save may leave that
 * range, and is only clamped when written back out.
 */
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    RasterImage() = default;
    RasterImage(int w, int h, int c, double fill = 0.0);

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    std::size_t size() const { return data.size(); }

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    std::span<double> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
    std::span<const double> plane(int c) const { return {data.data() + c * plane_size(), plane_size()}; }

    bool same_shape(const RasterImage& other) const
    {
        return width == other.width && height == other.height && channels == other.channels;
    }

    bool operator==(const RasterImage&) const = default;
};

enum class ImageFormat { pgm, ppm };

/// Reads a binary P5 (grey) or P6 (RGB) file. maxval up to 65535 is accepted.
RasterImage load_image(const std::filesystem::path& path);

/// Writes P5 for one channel, P6 for three, with maxval 255.
void save_image(const RasterImage& img, const std::filesystem::path& path);
void save_image(const RasterImage& img, const std::filesystem::path& path, ImageFormat format);

/// Square range cells tiling each channel plane, plus square (possibly
/// overlapping) domain cells sampled on a regular stride.
struct PartitionScheme {
    int range_size = 8;
    int domain_size = 16;
    int domain_stride = 16;

    bool operator==(const PartitionScheme&) const = default;
};

/// Counts derived from a scheme applied to a concrete image shape.
struct PartitionLayout {
    int width = 0;
    int height = 0;
    int channels = 1;
    PartitionScheme scheme;
    int ranges_x = 0;
    int ranges_y = 0;
    int domains_x = 0;
    int domains_y = 0;

    int pool_factor() const { return scheme.domain_size / scheme.range_size; }
    int cell_pixels() const { return scheme.range_size * scheme.range_size; }
    int ranges_per_plane() const { return ranges_x * ranges_y; }
    int domains_per_plane() const { return domains_x * domains_y; }
    int range_count() const { return ranges_per_plane() * channels; }
};

/// Validates the scheme against an image shape. Throws PartitionError.
PartitionLayout make_layout(int width, int height, int channels, const PartitionScheme& scheme);

struct RangeCell {
    int index = 0;
    int channel = 0;
    int y = 0;
    int x = 0;
};

/// K range cells: channel-major, then row-major within a plane.
std::vector<RangeCell> partition_ranges(const RasterImage& img, const PartitionScheme& scheme);
RangeCell range_cell(const PartitionLayout& layout, int k);

/// Where a bank cell came from.
struct DomainProvenance {
    int channel = 0;
    int domain_index = 0;   // within the channel plane
    int augmentation = 0;   // 0..7, see augment_cell
};

/// Pooled domain cells, each range_size x range_size.
struct DomainBank {
    int cell_size = 0;
    std::vector<double> values;
    std::vector<DomainProvenance> provenance;

    std::size_t size() const { return provenance.size(); }
    std::size_t cell_pixels() const { return static_cast<std::size_t>(cell_size) * cell_size; }
    std::span<const double> cell(std::size_t i) const { return {values.data() + i * cell_pixels(), cell_pixels()}; }
    std::span<double> cell(std::size_t i) { return {values.data() + i * cell_pixels(), cell_pixels()}; }
};

/// Average-pools every domain cell down to range size. Cells are ordered by
/// channel, then domain index (row-major over domain positions).
DomainBank extract_domains(const RasterImage& img, const PartitionScheme& scheme);

/// Average-pools domain `domain_index` of plane `channel` into `out`.
void pool_domain(const RasterImage& img, const PartitionLayout& layout, int channel, int domain_index,
                 std::span<double> out);

inline constexpr int kAugmentationCount = 8;

/**
 * Writes augmentation `id` of a square cell into `out`.
 *
 * id 0 identity, 1..3 clockwise rotation by 90/180/270 degrees, 4..7 the
 * same four with every value negated.
 */
void augment_cell(std::span<const double> in, int size, int id, std::span<double> out);

/// Index of the source pixel that lands on (y, x) under augmentation `id`,
/// together with the value sign.
struct AugmentedSource {
    int y;
    int x;
    double sign;
};
AugmentedSource augmented_source(int size, int id, int y, int x);

/// Expands every cell into its 8 augmentations, cell-major.
DomainBank augment_domains(const DomainBank& bank);

/// Overwrites the pixels of range cell k.
void place_range(RasterImage& canvas, const PartitionScheme& scheme, int k, std::span<const double> values);
std::vector<double> read_range(const RasterImage& img, const PartitionScheme& scheme, int k);

}  // namespace ncollage
