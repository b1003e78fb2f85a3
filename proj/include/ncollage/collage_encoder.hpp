#pragma once

#include "ncollage/collage.hpp"
#include "ncollage/pifs.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace ncollage {

struct CollageEncoding {
    CollageCode code;
    double surrogate_loss = 0.0;  // ||x - F(x)||^2
    double objective = 0.0;       // surrogate + weight_decay * ||w||^2
    bool ridge_fallback = false;  // singular normal equations forced lambda = 1e-8
};

/// Regulariser used when the configured ridge penalty leaves the normal equations singular.
inline constexpr double kFallbackRidge = 1e-8;

/// Aux patches: the mean range cell of x plus seeded uniform noise in [-0.05, 0.05].
std::vector<double> initial_aux(const RasterImage& x, const PartitionScheme& scheme, int count, std::uint64_t seed);

/// Splits premultiplied coefficients c into gamma = |c| / sum|c| and
/// scale = sign(c) * min(sum|c|, a_max). A zero row gives uniform gamma and zero scale.
void factorize_row(std::span<const double> c, double a_max, std::span<double> gamma, std::span<double> scale);

/**
 * Closed-form Collage fit on the surrogate ||x - F(x)||^2.
 *
 * Per range: ridge regression of the range cell on all pooled domain cells
 * of x and the aux patches (offset unpenalised), then the coefficients are
 * factorised into simplex weights and bounded scales, and the offset is
 * refit for the projected coefficients.
 */
CollageEncoding encode_collage_ls(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg);

/// Unconstrained coordinates of a code: gamma = softmax(logits) per range,
/// scale = a_max tanh(preact), raw offsets, raw aux pixels.
struct CollageParameters {
    CollageCode shape;
    std::vector<double> values;  // [logits | preact | offset | aux]

    std::size_t coefficients() const { return static_cast<std::size_t>(shape.ranges()) * shape.terms(); }
    std::size_t logits_begin() const { return 0; }
    std::size_t preact_begin() const { return coefficients(); }
    std::size_t offset_begin() const { return 2 * coefficients(); }
    std::size_t aux_begin() const { return offset_begin() + static_cast<std::size_t>(shape.ranges()); }
    std::size_t size() const { return values.size(); }
};

CollageParameters parameterize(const CollageCode& code, double a_max);
CollageCode realize(const CollageParameters& params, double a_max);

/// The gradient-path objective for one image. Range targets and pooled
/// domain terms of x are computed once.
class SurrogateObjective {
public:
    SurrogateObjective(const RasterImage& x, const CollageCode& shape, double weight_decay, double a_max,
                       bool learn_aux, int threads = 1);

    /// ||x - F(x)||^2 for a code of the bound shape.
    double surrogate(const CollageCode& code) const;
    /// surrogate + weight_decay * (sum (gamma scale)^2 + sum offset^2).
    double objective(const CollageCode& code) const;
    double value(const CollageParameters& params) const;
    /// Analytic gradient with respect to params.values. Aux entries are zero when aux is not learned.
    double value_and_gradient(const CollageParameters& params, std::vector<double>& grad) const;

private:
    double evaluate(const CollageCode& code, std::vector<double>* grad_c, std::vector<double>* grad_b,
                    std::vector<double>* grad_u) const;

    CollageCode shape_;
    std::vector<double> targets_;  // ranges x cell
    DomainBank bank_;              // channel-major, domains per plane
    double weight_decay_;
    double a_max_;
    bool learn_aux_;
    int threads_;
};

/**
 * Gradient refinement of `init` on the surrogate objective.
 *
 * Full-batch descent in the unconstrained coordinates. A step that raises
 * the objective is retried at half the rate (up to 20 times) before
 * stopping. The refined code replaces `init` only if it lowers the objective
 * without raising the surrogate loss.
 * Throws NumericalError on a non-finite objective.
 */
CollageEncoding encode_collage_gd(const RasterImage& x, const EncoderConfig& cfg, const CollageCode& init);

/// encode_collage_ls followed by encode_collage_gd.
CollageEncoding encode_collage(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg);

/**
 * Global self-similarity fit of a square image: one domain equal to the
 * whole image, mixed with its 90/180/270 degree rotations (recomputed from
 * the iterate while decoding). range_size 0 picks half the image side.
 */
CollageEncoding fractalize_encode(const RasterImage& x, const EncoderConfig& cfg, int range_size = 0);

/// Code with zero scales and each offset equal to its range mean.
CollageCode offset_only_code(const RasterImage& x, const CollageCode& shape);

}  // namespace ncollage
