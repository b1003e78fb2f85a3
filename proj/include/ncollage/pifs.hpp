#pragma once

#include "ncollage/collage.hpp"
#include "ncollage/raster.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ncollage {

/// Encoder knobs shared by the PIFS and Collage encoders.
struct EncoderConfig {
    bool use_augmentations = false;
    double a_max = 0.999;
    double ridge_lambda = 1e-4;   // LS penalty on the mixing coefficients
    double weight_decay = 1e-4;   // gradient-path penalty on the stored code
    int gd_steps = 200;
    double gd_rate = 0.05;
    int aux_count = 0;
    bool learn_aux = true;
    /// When non-empty, aux_count patches of range_size^2 values used as-is
    /// (never learned). Blockwise encoding shares one set across blocks.
    std::vector<double> fixed_aux;
    std::uint64_t seed = 0;
    int threads = 1;

    /// 0.999 scale bound, no augmentations, no aux.
    static EncoderConfig pifs_defaults();
    /// 0.9 scale bound, 3 learned aux patches.
    static EncoderConfig collage_defaults();

    void validate() const;
};

struct AffineMatch {
    double a = 0.0;
    double b = 0.0;
    double residual = 0.0;
};

/// Least-squares fit r ~ a d + b with a clamped to [-a_max, a_max]; a = 0
/// when d is flat (variance at rounding level, <= 1e-24 n mean(d)^2). residual is the sum of squared errors.
AffineMatch ls_affine_match(std::span<const double> d, std::span<const double> r, double a_max);

struct PifsRecord {
    int domain_index = 0;   // within the range's channel plane
    int augmentation = 0;   // 0..augmentations-1
    double a = 0.0;
    double b = 0.0;
    double residual = 0.0;

    bool operator==(const PifsRecord&) const = default;
};

/// Hard domain assignment per range cell.
struct PifsCode {
    int width = 0;
    int height = 0;
    int channels = 1;
    PartitionScheme scheme;
    int augmentations = 1;  // 1 or 8
    std::vector<PifsRecord> records;

    PartitionLayout layout() const { return make_layout(width, height, channels, scheme); }
    /// Candidates per range: domains per plane times augmentations.
    int candidates() const { return layout().domains_per_plane() * augmentations; }
    double total_residual() const;

    bool operator==(const PifsCode&) const = default;
};

/**
 * Exhaustive PIFS search: every range is matched against every pooled (and,
 * optionally, augmented) domain of its plane and the least-squares minimiser
 * kept. Ties go to the lowest (domain_index, augmentation). Ranges are
 * searched in parallel; the result does not depend on the thread count.
 */
PifsCode encode_pifs(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg);

/// Equivalent Collage code with one-hot mixing weights.
CollageCode to_collage(const PifsCode& code);

}  // namespace ncollage
