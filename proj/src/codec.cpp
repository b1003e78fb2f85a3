#include "ncollage/codec.hpp"

#include "ncollage/error.hpp"
#include "ncollage/half.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

namespace ncollage {

void QuantizationSpec::validate() const
{
    if (epsilon < 2 || epsilon > 5) throw ArgumentError("epsilon must be in 2..5");
}

std::int64_t QuantizationSpec::levels() const
{
    std::int64_t p = 1;
    for (int i = 0; i < epsilon; ++i) p *= 10;
    return p;
}

std::int64_t quantize_value(double v, int epsilon)
{
    const std::int64_t limit = QuantizationSpec{epsilon}.levels() - 1;
    if (std::isnan(v)) throw NumericalError("cannot quantise NaN");
    const double scaled = std::clamp(v * static_cast<double>(limit + 1), -1e15, 1e15);
    return std::clamp<std::int64_t>(std::llround(scaled), -limit, limit);
}

double dequantize_value(std::int64_t q, int epsilon)
{
    return static_cast<double>(q) / static_cast<double>(QuantizationSpec{epsilon}.levels());
}

std::int64_t max_offset_level(int epsilon)
{
    return (std::int64_t{1} << (max_bit_width(epsilon) - 1)) - 1;
}

std::int64_t quantize_offset(double v, int epsilon)
{
    if (std::isnan(v)) throw NumericalError("cannot quantise NaN");
    const std::int64_t limit = max_offset_level(epsilon);
    const double scaled = std::clamp(v * static_cast<double>(QuantizationSpec{epsilon}.levels()), -1e15, 1e15);
    return std::clamp<std::int64_t>(std::llround(scaled), -limit, limit);
}

int signed_bit_width(std::int64_t max_abs)
{
    return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(max_abs))) + 1;
}

int max_bit_width(int epsilon)
{
    // 10^eps is never a power of two, so its bit length is ceil(log2 10^eps).
    return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(QuantizationSpec{epsilon}.levels()))) + 2;
}

namespace {

struct QuantizedRows {
    std::vector<std::int64_t> a;  // ranges x terms
    std::vector<std::int64_t> b;  // ranges
};

QuantizedRows quantized_rows(const CollageCode& code, int epsilon)
{
    const std::int64_t limit = QuantizationSpec{epsilon}.levels() - 1;
    const int t = code.terms();
    QuantizedRows rows;
    rows.a.resize(code.gamma.size());
    rows.b.resize(code.offset.size());
    for (int k = 0; k < code.ranges(); ++k) {
        const std::size_t row = static_cast<std::size_t>(k) * t;
        std::int64_t total = 0;
        for (int j = 0; j < t; ++j) {
            rows.a[row + j] = quantize_value(code.weight(k, j), epsilon);
            total += std::abs(rows.a[row + j]);
        }
        // Keep sum |gamma scale| inside the open unit bound; shrink the largest entries first.
        while (total > limit) {
            auto largest = std::max_element(rows.a.begin() + static_cast<std::ptrdiff_t>(row),
                                            rows.a.begin() + static_cast<std::ptrdiff_t>(row + t),
                                            [](std::int64_t l, std::int64_t r) { return std::abs(l) < std::abs(r); });
            *largest -= *largest > 0 ? 1 : -1;
            --total;
        }
        rows.b[k] = quantize_offset(code.offset[k], epsilon);
    }
    return rows;
}

// Rebuilds gamma / scale from stored products; the same path as the decoder.
void apply_rows(CollageCode& code, const QuantizedRows& rows, int epsilon)
{
    const int t = code.terms();
    std::vector<double> c(static_cast<std::size_t>(t));
    for (int k = 0; k < code.ranges(); ++k) {
        const std::size_t row = static_cast<std::size_t>(k) * t;
        for (int j = 0; j < t; ++j) c[j] = dequantize_value(rows.a[row + j], epsilon);
        factorize_row(c, 1.0, std::span<double>(code.gamma.data() + row, static_cast<std::size_t>(t)),
                      std::span<double>(code.scale.data() + row, static_cast<std::size_t>(t)));
        code.offset[k] = dequantize_value(rows.b[k], epsilon);
    }
    for (auto& u : code.aux) u = static_cast<double>(static_cast<float>(u));
}

std::int64_t max_abs(const std::vector<std::int64_t>& v)
{
    std::int64_t m = 0;
    for (auto x : v) m = std::max(m, std::abs(x));
    return m;
}

double pifs_half(double v, bool bounded)
{
    double h = round_to_half(v);
    if (bounded && std::abs(h) >= 1.0) h = std::copysign(static_cast<double>(half_to_float(0x3bffu)), v);
    return h;
}

}  // namespace

QuantizedCode quantize_code(const CollageCode& code, const QuantizationSpec& spec)
{
    spec.validate();
    code.check_shape();
    const auto rows = quantized_rows(code, spec.epsilon);
    QuantizedCode out;
    out.code = code;
    out.epsilon = spec.epsilon;
    apply_rows(out.code, rows, spec.epsilon);
    out.bits_a = signed_bit_width(max_abs(rows.a));
    out.bits_b = signed_bit_width(max_abs(rows.b));
    return out;
}

BlockwiseCode quantize(const BlockwiseCode& code, const QuantizationSpec& spec)
{
    spec.validate();
    BlockwiseCode out = code;
    for (auto& block : out.collage_blocks) block = quantize_code(block, spec).code;
    for (auto& block : out.pifs_blocks) {
        for (auto& rec : block.records) {
            rec.a = pifs_half(rec.a, true);
            rec.b = pifs_half(rec.b, false);
            rec.residual = 0.0;
        }
    }
    return out;
}

double collage_bpp_total(double K, double N, double V, double bpp_a, double bpp_b, double bpp_u)
{
    return K * (N + V) * bpp_a + K * bpp_b + V * bpp_u;
}

BppBreakdown bpp_collage(std::int64_t K, std::int64_t N, std::int64_t V, int bits_a, int bits_b,
                         std::int64_t aux_pixels, std::int64_t image_pixels, std::int64_t amortize_over)
{
    if (image_pixels <= 0 || amortize_over <= 0) throw ArgumentError("pixel and image counts must be positive");
    if (K < 0 || N < 0 || V < 0 || aux_pixels < 0) throw ArgumentError("counts must be non-negative");
    const double pixels = static_cast<double>(image_pixels);
    BppBreakdown out;
    out.bpp_a = bits_a / pixels;
    out.bpp_b = bits_b / pixels;
    out.bpp_u = 32.0 * static_cast<double>(aux_pixels) / (pixels * static_cast<double>(amortize_over));
    out.total = collage_bpp_total(static_cast<double>(K), static_cast<double>(N), static_cast<double>(V), out.bpp_a,
                                  out.bpp_b, out.bpp_u);
    out.payload_bits = out.total * pixels;
    return out;
}

PifsBpp bpp_pifs(std::int64_t K, std::int64_t N, int augmentations, std::int64_t image_pixels)
{
    if (K < 1 || N < 1 || augmentations < 1 || image_pixels <= 0) throw ArgumentError("counts must be positive");
    const auto candidates = static_cast<std::uint64_t>(N) * static_cast<std::uint64_t>(augmentations);
    PifsBpp out;
    out.address_bits = candidates <= 1 ? 0 : static_cast<int>(std::bit_width(candidates - 1));
    out.bits_per_range = 16 + 16 + out.address_bits;
    out.bpp = static_cast<double>(K) * out.bits_per_range / static_cast<double>(image_pixels);
    return out;
}

std::size_t ContainerHeader::blocks() const
{
    return static_cast<std::size_t>(width / block_width) * static_cast<std::size_t>(height / block_height);
}

std::uint64_t ContainerHeader::coded_bits() const
{
    const auto cell = static_cast<std::uint64_t>(scheme.range_size) * scheme.range_size;
    return payload_bits + 32u * static_cast<std::uint64_t>(aux_count) * cell;
}

BppBreakdown ContainerHeader::bpp() const
{
    const std::int64_t pixels = static_cast<std::int64_t>(width) * height * channels;
    const std::int64_t K = ranges_per_block * static_cast<std::int64_t>(blocks());
    if (kind == ContainerKind::collage) {
        return bpp_collage(K, domains_per_plane * augmentations, aux_count, bits_a, bits_b,
                           static_cast<std::int64_t>(scheme.range_size) * scheme.range_size, pixels);
    }
    const auto p = bpp_pifs(K, domains_per_plane, augmentations, pixels);
    BppBreakdown out;
    out.bpp_a = 16.0 / static_cast<double>(pixels);
    out.bpp_b = 16.0 / static_cast<double>(pixels);
    out.bpp_address = p.address_bits / static_cast<double>(pixels);
    out.total = p.bpp;
    out.payload_bits = static_cast<double>(K) * p.bits_per_range;
    return out;
}

namespace {

class BitWriter {
public:
    void put(std::uint64_t value, int bits)
    {
        for (int i = 0; i < bits; ++i) {
            if (used_ % 8 == 0) bytes_.push_back(0);
            if ((value >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(1u << (used_ % 8));
            ++used_;
        }
    }
    void put_signed(std::int64_t value, int bits)
    {
        put(static_cast<std::uint64_t>(value) & (bits >= 64 ? ~0ull : ((1ull << bits) - 1)), bits);
    }
    std::uint64_t bits() const { return used_; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint64_t used_ = 0;
};

class BitReader {
public:
    BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bits) : bytes_(bytes), limit_(bits) {}

    std::uint64_t get(int bits)
    {
        if (pos_ + static_cast<std::uint64_t>(bits) > limit_) throw FormatError("payload ends early");
        std::uint64_t value = 0;
        for (int i = 0; i < bits; ++i, ++pos_)
            if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1u) value |= 1ull << i;
        return value;
    }
    std::int64_t get_signed(int bits)
    {
        const std::uint64_t raw = get(bits);
        if (bits < 64 && (raw >> (bits - 1)) & 1u) return static_cast<std::int64_t>(raw | (~0ull << bits));
        return static_cast<std::int64_t>(raw);
    }
    std::uint64_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::uint64_t limit_;
    std::uint64_t pos_ = 0;
};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value)
{
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset)
{
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
    return static_cast<T>(v);
}

const std::vector<double>& shared_aux(const BlockwiseCode& code)
{
    static const std::vector<double> none;
    if (code.collage_blocks.empty()) return none;
    const auto& first = code.collage_blocks.front().aux;
    for (const auto& block : code.collage_blocks)
        if (block.aux != first) throw ArgumentError("blocks must share their aux patches to be stored together");
    return first;
}

void check_blocks(const BlockwiseCode& code)
{
    if (code.block_width < 1 || code.block_height < 1 || code.width % code.block_width != 0 ||
        code.height % code.block_height != 0)
        throw ShapeError("blocks do not tile the image");
    const std::size_t populated = code.method == Method::pifs ? code.pifs_blocks.size() : code.collage_blocks.size();
    if (populated != code.block_count() || populated == 0) throw ShapeError("block count does not match the image tiling");
}

}  // namespace

ContainerHeader describe(const BlockwiseCode& code, const QuantizationSpec& spec)
{
    spec.validate();
    check_blocks(code);
    ContainerHeader h;
    h.kind = code.method == Method::pifs ? ContainerKind::pifs : ContainerKind::collage;
    h.channels = code.channels;
    h.width = code.width;
    h.height = code.height;
    h.block_width = code.block_width;
    h.block_height = code.block_height;

    if (code.method == Method::pifs) {
        const auto& first = code.pifs_blocks.front();
        const auto layout = first.layout();
        h.scheme = first.scheme;
        h.augmentations = first.augmentations;
        h.ranges_per_block = layout.range_count();
        h.domains_per_plane = layout.domains_per_plane();
        h.bits_a = 16;
        h.bits_b = 16;
        h.bits_address = bpp_pifs(1, h.domains_per_plane, h.augmentations, 1).address_bits;
        h.payload_bits = static_cast<std::uint64_t>(h.ranges_per_block) * h.blocks() *
                         static_cast<std::uint64_t>(32 + h.bits_address);
        return h;
    }

    const auto& first = code.collage_blocks.front();
    const auto layout = first.layout();
    h.scheme = first.scheme;
    h.augmentations = first.augmentations;
    h.epsilon = spec.epsilon;
    h.ranges_per_block = layout.range_count();
    h.domains_per_plane = layout.domains_per_plane();
    h.aux_count = first.aux_count;
    std::int64_t max_a = 0;
    std::int64_t max_b = 0;
    for (const auto& block : code.collage_blocks) {
        const auto rows = quantized_rows(block, spec.epsilon);
        max_a = std::max(max_a, max_abs(rows.a));
        max_b = std::max(max_b, max_abs(rows.b));
    }
    h.bits_a = signed_bit_width(max_a);
    h.bits_b = signed_bit_width(max_b);
    const auto terms = static_cast<std::uint64_t>(first.terms());
    h.payload_bits = static_cast<std::uint64_t>(h.ranges_per_block) * h.blocks() *
                     (terms * static_cast<std::uint64_t>(h.bits_a) + static_cast<std::uint64_t>(h.bits_b));
    return h;
}

std::vector<std::uint8_t> to_bytes(const BlockwiseCode& code, const QuantizationSpec& spec)
{
    const auto h = describe(code, spec);
    for (const auto& block : code.collage_blocks) {
        if (block.scheme != h.scheme || block.augmentations != h.augmentations || block.aux_count != h.aux_count ||
            block.channels != h.channels || block.width != h.block_width || block.height != h.block_height)
            throw ShapeError("all blocks must share one geometry");
    }
    for (const auto& block : code.pifs_blocks) {
        if (block.scheme != h.scheme || block.augmentations != h.augmentations || block.channels != h.channels ||
            block.width != h.block_width || block.height != h.block_height)
            throw ShapeError("all blocks must share one geometry");
    }

    std::vector<std::uint8_t> out(kContainerMagic.begin(), kContainerMagic.end());
    put_le<std::uint16_t>(out, h.version);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.kind));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.channels));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.width));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.height));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.block_width));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.block_height));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(h.scheme.range_size));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(h.scheme.domain_size));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(h.scheme.domain_stride));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.augmentations));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.epsilon));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.ranges_per_block));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.domains_per_plane));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.aux_count));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.bits_a));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.bits_b));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.bits_address));
    put_le<std::uint8_t>(out, 0);
    put_le<std::uint64_t>(out, h.payload_bits);

    BitWriter bits;
    if (code.method == Method::pifs) {
        for (const auto& block : code.pifs_blocks) {
            for (const auto& rec : block.records) {
                bits.put(static_cast<std::uint64_t>(rec.domain_index) * h.augmentations + rec.augmentation, h.bits_address);
                bits.put(float_to_half(static_cast<float>(pifs_half(rec.a, true))), 16);
                bits.put(float_to_half(static_cast<float>(pifs_half(rec.b, false))), 16);
            }
        }
    } else {
        for (const auto& block : code.collage_blocks) {
            const auto rows = quantized_rows(block, spec.epsilon);
            const int t = block.terms();
            for (int k = 0; k < block.ranges(); ++k) {
                for (int j = 0; j < t; ++j) bits.put_signed(rows.a[static_cast<std::size_t>(k) * t + j], h.bits_a);
                bits.put_signed(rows.b[k], h.bits_b);
            }
        }
    }
    if (bits.bits() != h.payload_bits) throw FormatError("payload size disagrees with header arithmetic");
    out.insert(out.end(), bits.bytes().begin(), bits.bytes().end());

    for (double u : shared_aux(code)) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(u)));
    return out;
}

Container from_bytes(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kContainerHeaderBytes) throw FormatError("container shorter than its header");
    if (!std::equal(kContainerMagic.begin(), kContainerMagic.end(), bytes.begin())) throw FormatError("bad magic");

    ContainerHeader h;
    h.version = get_le<std::uint16_t>(bytes, 8);
    if (h.version != kContainerVersion) throw FormatError("unsupported container version " + std::to_string(h.version));
    const auto kind = get_le<std::uint8_t>(bytes, 10);
    if (kind > 1) throw FormatError("unknown code kind");
    h.kind = static_cast<ContainerKind>(kind);
    h.channels = get_le<std::uint8_t>(bytes, 11);
    h.width = static_cast<int>(get_le<std::uint32_t>(bytes, 12));
    h.height = static_cast<int>(get_le<std::uint32_t>(bytes, 16));
    h.block_width = static_cast<int>(get_le<std::uint32_t>(bytes, 20));
    h.block_height = static_cast<int>(get_le<std::uint32_t>(bytes, 24));
    h.scheme.range_size = get_le<std::uint16_t>(bytes, 28);
    h.scheme.domain_size = get_le<std::uint16_t>(bytes, 30);
    h.scheme.domain_stride = get_le<std::uint16_t>(bytes, 32);
    h.augmentations = get_le<std::uint8_t>(bytes, 34);
    h.epsilon = get_le<std::uint8_t>(bytes, 35);
    h.ranges_per_block = get_le<std::uint32_t>(bytes, 36);
    h.domains_per_plane = get_le<std::uint32_t>(bytes, 40);
    h.aux_count = get_le<std::uint32_t>(bytes, 44);
    h.bits_a = get_le<std::uint8_t>(bytes, 48);
    h.bits_b = get_le<std::uint8_t>(bytes, 49);
    h.bits_address = get_le<std::uint8_t>(bytes, 50);
    h.payload_bits = get_le<std::uint64_t>(bytes, 52);

    if (h.channels != 1 && h.channels != 3) throw FormatError("unsupported channel count");
    if (h.width < 1 || h.height < 1 || h.block_width < 1 || h.block_height < 1 || h.width % h.block_width != 0 ||
        h.height % h.block_height != 0)
        throw FormatError("blocks do not tile the image");

    PartitionLayout layout;
    try {
        layout = make_layout(h.block_width, h.block_height, h.channels, h.scheme);
    } catch (const PartitionError& e) {
        throw FormatError(std::string("invalid partition in header: ") + e.what());
    }
    if (h.ranges_per_block != layout.range_count() || h.domains_per_plane != layout.domains_per_plane())
        throw FormatError("header counts disagree with the partition");

    BlockwiseCode code;
    code.width = h.width;
    code.height = h.height;
    code.channels = h.channels;
    code.block_width = h.block_width;
    code.block_height = h.block_height;
    const std::uint64_t ranges = static_cast<std::uint64_t>(h.ranges_per_block) * h.blocks();
    const auto cell = static_cast<std::uint64_t>(layout.cell_pixels());

    std::uint64_t expected_bits = 0;
    if (h.kind == ContainerKind::pifs) {
        if (h.augmentations != 1 && h.augmentations != kAugmentationCount) throw FormatError("bad augmentation count");
        if (h.bits_address != bpp_pifs(1, h.domains_per_plane, h.augmentations, 1).address_bits || h.aux_count != 0)
            throw FormatError("PIFS header fields are inconsistent");
        expected_bits = ranges * static_cast<std::uint64_t>(32 + h.bits_address);
    } else {
        if (h.augmentations != 1 && h.augmentations != 4 && h.augmentations != kAugmentationCount)
            throw FormatError("bad augmentation count");
        if (h.epsilon < 2 || h.epsilon > 5) throw FormatError("epsilon out of range");
        const int limit = max_bit_width(h.epsilon);
        if (h.bits_a < 1 || h.bits_a > limit || h.bits_b < 1 || h.bits_b > limit)
            throw FormatError("field width out of range");
        const auto terms = static_cast<std::uint64_t>(h.domains_per_plane * h.augmentations + h.aux_count);
        expected_bits = ranges * (terms * static_cast<std::uint64_t>(h.bits_a) + static_cast<std::uint64_t>(h.bits_b));
    }
    if (h.payload_bits != expected_bits) throw FormatError("payload size disagrees with header arithmetic");

    const std::uint64_t payload_bytes = (h.payload_bits + 7) / 8;
    const std::uint64_t aux_bytes = 4u * static_cast<std::uint64_t>(h.aux_count) * cell;
    const std::uint64_t expected_size = kContainerHeaderBytes + payload_bytes + aux_bytes;
    if (bytes.size() < expected_size) throw FormatError("container is truncated");
    if (bytes.size() > expected_size) throw FormatError("container has trailing bytes");

    BitReader reader(bytes.subspan(kContainerHeaderBytes, payload_bytes), h.payload_bits);
    if (h.kind == ContainerKind::pifs) {
        code.method = Method::pifs;
        for (std::size_t b = 0; b < h.blocks(); ++b) {
            PifsCode block;
            block.width = h.block_width;
            block.height = h.block_height;
            block.channels = h.channels;
            block.scheme = h.scheme;
            block.augmentations = h.augmentations;
            block.records.resize(static_cast<std::size_t>(h.ranges_per_block));
            for (auto& rec : block.records) {
                const auto address = reader.get(h.bits_address);
                if (address >= static_cast<std::uint64_t>(h.domains_per_plane * h.augmentations))
                    throw FormatError("domain address out of range");
                rec.domain_index = static_cast<int>(address / h.augmentations);
                rec.augmentation = static_cast<int>(address % h.augmentations);
                rec.a = half_to_float(static_cast<std::uint16_t>(reader.get(16)));
                rec.b = half_to_float(static_cast<std::uint16_t>(reader.get(16)));
                if (!std::isfinite(rec.a) || !std::isfinite(rec.b)) throw FormatError("non-finite coefficient");
            }
            code.pifs_blocks.push_back(std::move(block));
        }
    } else {
        code.method = Method::collage;
        std::vector<double> aux(static_cast<std::size_t>(h.aux_count * cell));
        const std::size_t aux_offset = kContainerHeaderBytes + payload_bytes;
        for (std::size_t i = 0; i < aux.size(); ++i)
            aux[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, aux_offset + 4 * i));

        const std::int64_t limit = QuantizationSpec{h.epsilon}.levels() - 1;
        for (std::size_t b = 0; b < h.blocks(); ++b) {
            auto block = CollageCode::zeros(h.block_width, h.block_height, h.channels, h.scheme, h.augmentations,
                                            static_cast<int>(h.aux_count));
            block.aux = aux;
            const int t = block.terms();
            QuantizedRows rows;
            rows.a.resize(block.gamma.size());
            rows.b.resize(block.offset.size());
            for (int k = 0; k < block.ranges(); ++k) {
                std::int64_t total = 0;
                for (int j = 0; j < t; ++j) {
                    const auto q = reader.get_signed(h.bits_a);
                    total += std::abs(q);
                    rows.a[static_cast<std::size_t>(k) * t + j] = q;
                }
                rows.b[k] = reader.get_signed(h.bits_b);
                if (total > limit || std::abs(rows.b[k]) > max_offset_level(h.epsilon))
                    throw FormatError("quantised value out of range");
            }
            apply_rows(block, rows, h.epsilon);
            code.collage_blocks.push_back(std::move(block));
        }
    }
    if (reader.position() != h.payload_bits) throw FormatError("payload not fully consumed");
    return Container{h, std::move(code)};
}

void serialize(const BlockwiseCode& code, const QuantizationSpec& spec, const std::filesystem::path& path)
{
    const auto bytes = to_bytes(code, spec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Container deserialize(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

BppBreakdown code_bpp(const BlockwiseCode& code, const QuantizationSpec& spec)
{
    return describe(code, spec).bpp();
}

}  // namespace ncollage
