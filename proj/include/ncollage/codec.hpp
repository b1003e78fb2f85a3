#pragma once

#include "ncollage/blockwise.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ncollage {

/// Decimal quantisation to `epsilon` digits after the point.
struct QuantizationSpec {
    int epsilon = 3;

    void validate() const;
    /// 10^epsilon
    std::int64_t levels() const;
};

/// round(v * 10^eps), clamped inside the open interval (-10^eps, 10^eps).
std::int64_t quantize_value(double v, int epsilon);
double dequantize_value(std::int64_t q, int epsilon);

/// Offsets may leave (-1, 1); they clamp only at the widest field, +-(2^(max_bit_width - 1) - 1).
std::int64_t quantize_offset(double v, int epsilon);
std::int64_t max_offset_level(int epsilon);

/// Two's-complement width for integers in [-max_abs, max_abs]: ceil(log2(max_abs + 1)) + 1.
int signed_bit_width(std::int64_t max_abs);

/// Upper bound on any quantised field width: ceil(log2(10^eps)) + 2.
int max_bit_width(int epsilon);

/**
 * A Collage code snapped to the quantisation grid.
 *
 * Stored coefficients are the premultiplied products gamma * scale and the
 * per-range offsets. `code` is what a decoder reconstructs from them, so
 * quantising it again is a no-op.
 */
struct QuantizedCode {
    CollageCode code;
    int epsilon = 3;
    int bits_a = 1;
    int bits_b = 1;
};

QuantizedCode quantize_code(const CollageCode& code, const QuantizationSpec& spec);

/// Quantises every block: Collage blocks to the decimal grid (aux to float32),
/// PIFS scales and offsets to binary16.
BlockwiseCode quantize(const BlockwiseCode& code, const QuantizationSpec& spec);

struct BppBreakdown {
    double bpp_a = 0.0;  // per stored scale value
    double bpp_b = 0.0;  // per stored offset
    double bpp_u = 0.0;  // per aux patch, amortised
    double bpp_address = 0.0;  // per PIFS domain address
    double total = 0.0;
    double payload_bits = 0.0;
};

/// total = K (N + V) bpp_a + K bpp_b + V bpp_u.
double collage_bpp_total(double K, double N, double V, double bpp_a, double bpp_b, double bpp_u);

/// Rate of a Collage code: bpp_a = bits_a / pixels, bpp_b = bits_b / pixels,
/// bpp_u = 32 aux_pixels / (pixels * amortize_over).
BppBreakdown bpp_collage(std::int64_t K, std::int64_t N, std::int64_t V, int bits_a, int bits_b,
                         std::int64_t aux_pixels, std::int64_t image_pixels, std::int64_t amortize_over = 1);

struct PifsBpp {
    int address_bits = 0;
    int bits_per_range = 0;
    double bpp = 0.0;
};

/// 16-bit scale + 16-bit offset + ceil(log2(N * augmentations)) address bits per range.
PifsBpp bpp_pifs(std::int64_t K, std::int64_t N, int augmentations, std::int64_t image_pixels);

enum class ContainerKind : std::uint8_t { collage = 0, pifs = 1 };

inline constexpr std::array<char, 8> kContainerMagic{'N', 'C', 'O', 'L', 'L', 'A', 'G', 'E'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 60;

/// Fixed little-endian header; see README for the byte layout.
struct ContainerHeader {
    std::uint16_t version = kContainerVersion;
    ContainerKind kind = ContainerKind::collage;
    int channels = 1;
    int width = 0;
    int height = 0;
    int block_width = 0;
    int block_height = 0;
    PartitionScheme scheme;
    int augmentations = 1;
    int epsilon = 0;
    std::int64_t ranges_per_block = 0;
    std::int64_t domains_per_plane = 0;  // before augmentation
    std::int64_t aux_count = 0;
    int bits_a = 0;
    int bits_b = 0;
    int bits_address = 0;
    std::uint64_t payload_bits = 0;  // bit-packed section only

    std::size_t blocks() const;
    /// Bits counted by the rate: packed payload plus 32 per aux pixel.
    std::uint64_t coded_bits() const;
    BppBreakdown bpp() const;
};

struct Container {
    ContainerHeader header;
    BlockwiseCode code;
};

/// Quantises `code` and lays it out as a container.
std::vector<std::uint8_t> to_bytes(const BlockwiseCode& code, const QuantizationSpec& spec);
Container from_bytes(std::span<const std::uint8_t> bytes);

void serialize(const BlockwiseCode& code, const QuantizationSpec& spec, const std::filesystem::path& path);
Container deserialize(const std::filesystem::path& path);

/// Header of a container, as written by to_bytes.
ContainerHeader describe(const BlockwiseCode& code, const QuantizationSpec& spec);

/// Rate of any code as it would be stored.
BppBreakdown code_bpp(const BlockwiseCode& code, const QuantizationSpec& spec);

}  // namespace ncollage
