#pragma once

#include "ncollage/raster.hpp"

#include <cstddef>
#include <vector>

namespace ncollage {

/**
 * Parameters of a Collage operator over one image shape.
 *
 * Every range cell k is rebuilt as a mixture over T = domains + aux_count
 * terms: term j < domains is the pooled domain j / augmentations of the
 * range's own channel, transformed by augmentation j % augmentations (ids
 * 0..augmentations-1, see augment_cell); term domains + v is the fixed
 * auxiliary patch v. The range output is
 *
 *     sum_j gamma[k,j] * scale[k,j] * term_j + offset[k]
 *
 * with gamma on the simplex per range and |scale| < 1. Offsets are stored
 * premultiplied, one per range. Augmented domain terms are recomputed from
 * the current iterate (they depend on z); aux patches do not.
 */
struct CollageCode {
    int width = 0;
    int height = 0;
    int channels = 1;
    PartitionScheme scheme;
    int augmentations = 1;   // 1, 4 or 8
    int domains = 0;         // per plane, counted after augmentation
    int aux_count = 0;
    std::vector<double> gamma;   // ranges() x terms()
    std::vector<double> scale;   // ranges() x terms()
    std::vector<double> offset;  // ranges()
    std::vector<double> aux;     // aux_count x range_size^2

    PartitionLayout layout() const { return make_layout(width, height, channels, scheme); }
    int ranges() const { return layout().range_count(); }
    int terms() const { return domains + aux_count; }
    std::size_t cell_pixels() const { return static_cast<std::size_t>(scheme.range_size) * scheme.range_size; }

    double gamma_at(int k, int j) const { return gamma[static_cast<std::size_t>(k) * terms() + j]; }
    double scale_at(int k, int j) const { return scale[static_cast<std::size_t>(k) * terms() + j]; }
    /// gamma * scale, the only product the operator ever uses.
    double weight(int k, int j) const { return gamma_at(k, j) * scale_at(k, j); }

    /// All-zero code (gamma uniform, scale 0, offset 0) with consistent shapes.
    static CollageCode zeros(int width, int height, int channels, const PartitionScheme& scheme,
                             int augmentations = 1, int aux_count = 0);

    /// Throws ShapeError on inconsistent sizes.
    void check_shape() const;
    /// Throws ArgumentError when gamma leaves the simplex (within `tol`) or |scale| >= 1.
    void check_invariants(double tol = 1e-9) const;

    bool operator==(const CollageCode&) const = default;
};

/// Pooled and augmented domain cells of every plane of z, indexed
/// [channel][term j < domains] as in CollageCode.
DomainBank collage_domain_bank(const RasterImage& z, const CollageCode& code);

/// One application of the operator.
RasterImage apply_collage(const RasterImage& z, const CollageCode& code, int threads = 1);

struct LipschitzReport {
    double L = 0.0;
    bool contractive = true;
};

/// Infinity-norm bound max_k sum_{j < domains} gamma |scale|.
LipschitzReport lipschitz_bound(const CollageCode& code);

enum class SolveMode { iterate, closed_form };

struct InitialGuess {
    enum class Kind { zeros, constant, image };
    Kind kind = Kind::zeros;
    double value = 0.0;
    RasterImage image;

    static InitialGuess zeros() { return {}; }
    static InitialGuess constant(double c) { return {Kind::constant, c, {}}; }
    static InitialGuess from(RasterImage img) { return {Kind::image, 0.0, std::move(img)}; }
};

struct SolveConfig {
    SolveMode mode = SolveMode::iterate;
    double tolerance = 1e-8;
    int max_iters = 200;
    InitialGuess init;
    bool allow_noncontractive = false;
    int threads = 1;
};

struct DecodeResult {
    RasterImage image;
    int iterations = 0;
    double final_step = 0.0;
    bool converged = false;
};

/// Largest image the dense closed-form solver accepts.
inline constexpr std::size_t kClosedFormMaxPixels = 4096;

/**
 * Fixed point of the operator.
 *
 * Iterate mode runs z <- F(z) until the infinity-norm step drops below the
 * tolerance or max_iters is hit. Closed-form mode builds the dense linear
 * part A and solves (I - A) z = c. Non-contractive codes throw
 * ContractivityError unless allow_noncontractive is set, in which case the
 * iteration runs capped and reports its final step.
 */
DecodeResult decode(const CollageCode& code, const SolveConfig& cfg = {});

/// Dense m x m linear part (row-major) and constant term of the operator.
struct AffineForm {
    std::size_t size = 0;
    std::vector<double> matrix;
    std::vector<double> constant;
};
AffineForm materialize(const CollageCode& code);

struct CollageBound {
    double bound = 0.0;
    double collage_error = 0.0;
    double L = 0.0;
};

/// Collage Theorem estimate: d(x, x*) <= d(x, F(x)) / (1 - L), infinity norm.
CollageBound ct_bound(const RasterImage& x, const CollageCode& code, int threads = 1);

/**
 * Decodes at s times the resolution.
 *
 * The s*W x s*H grid is split into s^2 polyphase sub-images (sub-image (p, q)
 * holds the pixels at offsets (p, q) mod s); each is iterated independently
 * with the same coefficients. An image-valued initial guess may be given at
 * either the base or the magnified size.
 */
DecodeResult decode_magnified(const CollageCode& code, int s, const SolveConfig& cfg = {});

/// Infinity-norm distance; throws ShapeError on mismatch.
double max_abs_diff(const RasterImage& a, const RasterImage& b);

}  // namespace ncollage
