#include "ncollage/raster.hpp"

#include "ncollage/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace ncollage {

RasterImage::RasterImage(int w, int h, int c, double fill) : width(w), height(h), channels(c)
{
    if (w < 0 || h < 0 || c < 1) throw ShapeError("invalid image shape");
    data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

namespace {

class PnmHeaderReader {
public:
    explicit PnmHeaderReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    int next_int()
    {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw ParseError("malformed PNM header");
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > 1'000'000'000) throw ParseError("PNM header value out of range");
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset()
    {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw ParseError("malformed PNM header");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 2;
};

}  // namespace

RasterImage load_image(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw ParseError(path.string() + ": not a binary PGM/PPM file");
    const int channels = bytes[1] == '5' ? 1 : 3;

    PnmHeaderReader header(bytes);
    const int width = header.next_int();
    const int height = header.next_int();
    const int maxval = header.next_int();
    if (width <= 0 || height <= 0) throw ParseError(path.string() + ": empty image");
    if (maxval <= 0 || maxval > 65535) throw ParseError(path.string() + ": maxval out of range");
    const std::size_t offset = header.raster_offset();

    const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
    const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - offset < samples * bytes_per_sample) throw ParseError(path.string() + ": truncated raster");

    RasterImage img(width, height, channels);
    const double scale = 1.0 / maxval;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t s = (static_cast<std::size_t>(y) * width + x) * channels + c;
                const unsigned char* p = &bytes[offset + s * bytes_per_sample];
                const int v = bytes_per_sample == 2 ? (p[0] << 8) | p[1] : p[0];
                if (v > maxval) throw ParseError(path.string() + ": sample exceeds maxval");
                img.at(c, y, x) = v * scale;
            }
        }
    }
    return img;
}

void save_image(const RasterImage& img, const std::filesystem::path& path)
{
    if (img.channels == 1) return save_image(img, path, ImageFormat::pgm);
    if (img.channels == 3) return save_image(img, path, ImageFormat::ppm);
    throw ShapeError("only 1- or 3-channel images can be saved");
}

void save_image(const RasterImage& img, const std::filesystem::path& path, ImageFormat format)
{
    const int channels = format == ImageFormat::pgm ? 1 : 3;
    if (img.channels != channels) throw ShapeError("channel count does not match output format");
    if (img.size() != img.plane_size() * channels) throw ShapeError("image data length mismatch");

    std::string out = (format == ImageFormat::pgm ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + img.size());
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < channels; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                const std::size_t s = (static_cast<std::size_t>(y) * img.width + x) * channels + c;
                out[header + s] = static_cast<char>(std::lround(v * 255.0));
            }
        }
    }

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("write failed: " + path.string());
}

PartitionLayout make_layout(int width, int height, int channels, const PartitionScheme& scheme)
{
    const auto& s = scheme;
    if (s.range_size < 1 || s.domain_size < 1 || s.domain_stride < 1)
        throw PartitionError("partition sizes must be positive");
    if (width % s.range_size != 0 || height % s.range_size != 0)
        throw PartitionError("range size " + std::to_string(s.range_size) + " does not divide " +
                             std::to_string(width) + "x" + std::to_string(height));
    if (s.domain_size < s.range_size) throw PartitionError("domain cells must be at least range size");
    if (s.domain_size % s.range_size != 0) throw PartitionError("pooling factor domain/range must be integral");
    if (s.domain_stride > s.domain_size) throw PartitionError("domain stride exceeds domain size");
    if (s.domain_size > width || s.domain_size > height) throw PartitionError("domain cells exceed the image");

    PartitionLayout layout;
    layout.width = width;
    layout.height = height;
    layout.channels = channels;
    layout.scheme = scheme;
    layout.ranges_x = width / s.range_size;
    layout.ranges_y = height / s.range_size;
    layout.domains_x = (width - s.domain_size) / s.domain_stride + 1;
    layout.domains_y = (height - s.domain_size) / s.domain_stride + 1;
    return layout;
}

RangeCell range_cell(const PartitionLayout& layout, int k)
{
    if (k < 0 || k >= layout.range_count()) throw IndexError("range index " + std::to_string(k) + " out of bounds");
    const int per_plane = layout.ranges_per_plane();
    const int local = k % per_plane;
    return RangeCell{k, k / per_plane, (local / layout.ranges_x) * layout.scheme.range_size,
                     (local % layout.ranges_x) * layout.scheme.range_size};
}

std::vector<RangeCell> partition_ranges(const RasterImage& img, const PartitionScheme& scheme)
{
    const auto layout = make_layout(img.width, img.height, img.channels, scheme);
    std::vector<RangeCell> cells;
    cells.reserve(layout.range_count());
    for (int k = 0; k < layout.range_count(); ++k) cells.push_back(range_cell(layout, k));
    return cells;
}

void pool_domain(const RasterImage& img, const PartitionLayout& layout, int channel, int domain_index,
                 std::span<double> out)
{
    const int r = layout.scheme.range_size;
    const int f = layout.pool_factor();
    const int oy = (domain_index / layout.domains_x) * layout.scheme.domain_stride;
    const int ox = (domain_index % layout.domains_x) * layout.scheme.domain_stride;
    const double inv = 1.0 / (f * f);
    for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
            double sum = 0.0;
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) sum += img.at(channel, oy + y * f + dy, ox + x * f + dx);
            out[y * r + x] = sum * inv;
        }
    }
}

DomainBank extract_domains(const RasterImage& img, const PartitionScheme& scheme)
{
    const auto layout = make_layout(img.width, img.height, img.channels, scheme);
    DomainBank bank;
    bank.cell_size = scheme.range_size;
    const std::size_t count = static_cast<std::size_t>(layout.domains_per_plane()) * img.channels;
    bank.values.resize(count * bank.cell_pixels());
    bank.provenance.reserve(count);
    for (int c = 0; c < img.channels; ++c) {
        for (int n = 0; n < layout.domains_per_plane(); ++n) {
            pool_domain(img, layout, c, n, bank.cell(bank.provenance.size()));
            bank.provenance.push_back({c, n, 0});
        }
    }
    return bank;
}

AugmentedSource augmented_source(int size, int id, int y, int x)
{
    const int last = size - 1;
    const double sign = id >= 4 ? -1.0 : 1.0;
    switch (id % 4) {
    case 0: return {y, x, sign};
    case 1: return {last - x, y, sign};
    case 2: return {last - y, last - x, sign};
    default: return {x, last - y, sign};
    }
}

void augment_cell(std::span<const double> in, int size, int id, std::span<double> out)
{
    if (id < 0 || id >= kAugmentationCount) throw ArgumentError("augmentation id out of range");
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const auto src = augmented_source(size, id, y, x);
            out[y * size + x] = src.sign * in[src.y * size + src.x];
        }
    }
}

DomainBank augment_domains(const DomainBank& bank)
{
    DomainBank out;
    out.cell_size = bank.cell_size;
    out.values.resize(bank.values.size() * kAugmentationCount);
    out.provenance.reserve(bank.size() * kAugmentationCount);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        for (int id = 0; id < kAugmentationCount; ++id) {
            augment_cell(bank.cell(i), bank.cell_size, id, out.cell(out.provenance.size()));
            auto prov = bank.provenance[i];
            prov.augmentation = id;
            out.provenance.push_back(prov);
        }
    }
    return out;
}

void place_range(RasterImage& canvas, const PartitionScheme& scheme, int k, std::span<const double> values)
{
    const auto layout = make_layout(canvas.width, canvas.height, canvas.channels, scheme);
    const int r = scheme.range_size;
    if (values.size() != static_cast<std::size_t>(r) * r) throw ShapeError("range values have the wrong length");
    const auto cell = range_cell(layout, k);
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) canvas.at(cell.channel, cell.y + y, cell.x + x) = values[y * r + x];
}

std::vector<double> read_range(const RasterImage& img, const PartitionScheme& scheme, int k)
{
    const auto layout = make_layout(img.width, img.height, img.channels, scheme);
    const int r = scheme.range_size;
    const auto cell = range_cell(layout, k);
    std::vector<double> values(static_cast<std::size_t>(r) * r);
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) values[y * r + x] = img.at(cell.channel, cell.y + y, cell.x + x);
    return values;
}

}  // namespace ncollage
