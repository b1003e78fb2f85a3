#pragma once

// Random fixtures and slow reference implementations shared by the unit
// tests and the acceptance runner. Nothing here calls into the encoder or
// solver code it is used to check.

#include "ncollage/collage.hpp"
#include "ncollage/pifs.hpp"
#include "ncollage/raster.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace testsupport {

using ncollage::CollageCode;
using ncollage::PartitionScheme;
using ncollage::RasterImage;

RasterImage random_image(std::mt19937_64& rng, int width, int height, int channels, double lo = 0.0, double hi = 1.0);

struct RandomCodeOptions {
    int max_side = 16;
    double max_L = 0.95;
    bool allow_color = true;
    bool allow_aux = true;
};

/// Random valid code whose domain row sums of |gamma scale| stay at or below a random L <= max_L.
CollageCode random_code(std::mt19937_64& rng, const RandomCodeOptions& opt = {});

/// Random PIFS code over `scheme` with |a| in [a_lo, a_hi].
ncollage::PifsCode random_pifs(std::mt19937_64& rng, int width, int height, int channels,
                               const PartitionScheme& scheme, bool augmented, double a_lo, double a_hi);

/// The bundled 128x128 self-similar test image (tests/data/selfsim128.pgm):
/// the attractor of a fixed PIFS code whose domains are rotated by multiples
/// of 90 degrees, stretched to [0, 1] and rounded to 8 bits. Uses only raw
/// generator output so every platform produces the same pixels.
RasterImage selfsim_fixture(int size = 128, std::uint64_t seed = 20240611);

// --- reference implementations -------------------------------------------

/// Rotates an n x n row-major cell clockwise by 90 degrees `quarter_turns` times.
std::vector<double> rotate_cw(const std::vector<double>& cell, int n, int quarter_turns);

/// Pooled domain `index` of `channel`, straight from the pixel loops.
std::vector<double> naive_pool(const RasterImage& img, const PartitionScheme& scheme, int channel, int index);

/// Range cell k in channel-major, row-major order.
std::vector<double> naive_range(const RasterImage& img, const PartitionScheme& scheme, int k);

/// Sequential exhaustive PIFS search over every (domain, augmentation) pair.
std::vector<ncollage::PifsRecord> naive_pifs(const RasterImage& x, const PartitionScheme& scheme, bool augmented,
                                             double a_max);

/// Operator output evaluated pixel by pixel.
RasterImage naive_apply(const RasterImage& z, const CollageCode& code);

/// Fixed point by Gaussian elimination on the operator's dense matrix (probed column by column).
RasterImage naive_fixed_point(const CollageCode& code);

/// max over ranges of sum_j |gamma scale| across domain terms.
double naive_lipschitz(const CollageCode& code);

/// Value encoded by a binary16 bit pattern, from its fields.
double half_value(std::uint16_t bits);

double linf(const RasterImage& a, const RasterImage& b);

}  // namespace testsupport
