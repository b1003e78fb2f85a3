#include "ncollage/collage.hpp"

#include "ncollage/error.hpp"
#include "ncollage/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace ncollage {

CollageCode CollageCode::zeros(int width, int height, int channels, const PartitionScheme& scheme,
                               int augmentations, int aux_count)
{
    CollageCode code;
    code.width = width;
    code.height = height;
    code.channels = channels;
    code.scheme = scheme;
    code.augmentations = augmentations;
    const auto layout = code.layout();
    code.domains = layout.domains_per_plane() * augmentations;
    code.aux_count = aux_count;
    const std::size_t k = static_cast<std::size_t>(layout.range_count());
    const std::size_t t = static_cast<std::size_t>(code.terms());
    code.gamma.assign(k * t, 1.0 / static_cast<double>(t));
    code.scale.assign(k * t, 0.0);
    code.offset.assign(k, 0.0);
    code.aux.assign(static_cast<std::size_t>(aux_count) * code.cell_pixels(), 0.0);
    code.check_shape();
    return code;
}

void CollageCode::check_shape() const
{
    if (augmentations != 1 && augmentations != 4 && augmentations != kAugmentationCount)
        throw ShapeError("augmentation count must be 1, 4 or 8");
    PartitionLayout l;
    try {
        l = layout();
    } catch (const PartitionError& e) {
        throw ShapeError(std::string("invalid code geometry: ") + e.what());
    }
    if (domains != l.domains_per_plane() * augmentations) throw ShapeError("domain count does not match scheme");
    if (aux_count < 0) throw ShapeError("negative aux count");
    const std::size_t k = static_cast<std::size_t>(l.range_count());
    const std::size_t t = static_cast<std::size_t>(terms());
    if (t == 0) throw ShapeError("code has no terms");
    if (gamma.size() != k * t || scale.size() != k * t) throw ShapeError("coefficient matrix has the wrong size");
    if (offset.size() != k) throw ShapeError("offset vector has the wrong size");
    if (aux.size() != static_cast<std::size_t>(aux_count) * cell_pixels()) throw ShapeError("aux patches have the wrong size");
}

void CollageCode::check_invariants(double tol) const
{
    check_shape();
    const int t = terms();
    for (int k = 0; k < ranges(); ++k) {
        double sum = 0.0;
        for (int j = 0; j < t; ++j) {
            const double g = gamma_at(k, j);
            if (!(g >= 0.0)) throw ArgumentError("negative mixing weight in range " + std::to_string(k));
            if (!(std::abs(scale_at(k, j)) < 1.0)) throw ArgumentError("|scale| >= 1 in range " + std::to_string(k));
            sum += g;
        }
        if (std::abs(sum - 1.0) > tol) throw ArgumentError("mixing weights of range " + std::to_string(k) + " do not sum to 1");
    }
}

DomainBank collage_domain_bank(const RasterImage& z, const CollageCode& code)
{
    const auto layout = code.layout();
    const int r = code.scheme.range_size;
    const std::size_t cell = code.cell_pixels();

    DomainBank bank;
    bank.cell_size = r;
    bank.values.resize(static_cast<std::size_t>(code.channels) * code.domains * cell);
    bank.provenance.reserve(static_cast<std::size_t>(code.channels) * code.domains);

    std::vector<double> pooled(cell);
    for (int c = 0; c < code.channels; ++c) {
        for (int n = 0; n < layout.domains_per_plane(); ++n) {
            pool_domain(z, layout, c, n, pooled);
            for (int g = 0; g < code.augmentations; ++g) {
                augment_cell(pooled, r, g, bank.cell(bank.provenance.size()));
                bank.provenance.push_back({c, n, g});
            }
        }
    }
    return bank;
}

RasterImage apply_collage(const RasterImage& z, const CollageCode& code, int threads)
{
    code.check_shape();
    if (z.width != code.width || z.height != code.height || z.channels != code.channels)
        throw ShapeError("image does not match code dimensions");

    const auto layout = code.layout();
    const auto bank = collage_domain_bank(z, code);
    const int r = code.scheme.range_size;
    const std::size_t cell = code.cell_pixels();
    const int t = code.terms();

    RasterImage out(z.width, z.height, z.channels);
    parallel_for(static_cast<std::size_t>(layout.range_count()), threads, [&](std::size_t idx) {
        const int k = static_cast<int>(idx);
        const auto rc = range_cell(layout, k);
        std::vector<double> acc(cell, code.offset[k]);
        for (int j = 0; j < t; ++j) {
            const double w = code.weight(k, j);
            if (w == 0.0) continue;
            const double* src = j < code.domains
                                    ? bank.cell(static_cast<std::size_t>(rc.channel) * code.domains + j).data()
                                    : code.aux.data() + static_cast<std::size_t>(j - code.domains) * cell;
            for (std::size_t p = 0; p < cell; ++p) acc[p] += w * src[p];
        }
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) out.at(rc.channel, rc.y + y, rc.x + x) = acc[y * r + x];
    });
    return out;
}

LipschitzReport lipschitz_bound(const CollageCode& code)
{
    code.check_shape();
    LipschitzReport report;
    for (int k = 0; k < code.ranges(); ++k) {
        double row = 0.0;
        for (int j = 0; j < code.domains; ++j) row += code.gamma_at(k, j) * std::abs(code.scale_at(k, j));
        report.L = std::max(report.L, row);
    }
    report.contractive = report.L < 1.0;
    return report;
}

double max_abs_diff(const RasterImage& a, const RasterImage& b)
{
    if (!a.same_shape(b) || a.size() != b.size()) throw ShapeError("images differ in shape");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
    return d;
}

AffineForm materialize(const CollageCode& code)
{
    code.check_shape();
    const auto layout = code.layout();
    const std::size_t m = static_cast<std::size_t>(code.width) * code.height * code.channels;
    if (m > kClosedFormMaxPixels)
        throw SizeError("dense operator limited to " + std::to_string(kClosedFormMaxPixels) + " pixels, got " +
                        std::to_string(m));

    AffineForm form;
    form.size = m;
    form.matrix.assign(m * m, 0.0);
    form.constant.assign(m, 0.0);

    const int r = code.scheme.range_size;
    const int f = layout.pool_factor();
    const double pool_weight = 1.0 / (f * f);
    auto flat = [&](int c, int y, int x) {
        return (static_cast<std::size_t>(c) * code.height + y) * code.width + x;
    };

    for (int k = 0; k < layout.range_count(); ++k) {
        const auto rc = range_cell(layout, k);
        for (int y = 0; y < r; ++y) {
            for (int x = 0; x < r; ++x) {
                const std::size_t row = flat(rc.channel, rc.y + y, rc.x + x);
                form.constant[row] += code.offset[k];
                for (int j = 0; j < code.terms(); ++j) {
                    const double w = code.weight(k, j);
                    if (w == 0.0) continue;
                    if (j >= code.domains) {
                        const std::size_t v = static_cast<std::size_t>(j - code.domains);
                        form.constant[row] += w * code.aux[v * code.cell_pixels() + y * r + x];
                        continue;
                    }
                    const int n = j / code.augmentations;
                    const auto src = augmented_source(r, j % code.augmentations, y, x);
                    const int oy = (n / layout.domains_x) * code.scheme.domain_stride + src.y * f;
                    const int ox = (n % layout.domains_x) * code.scheme.domain_stride + src.x * f;
                    for (int dy = 0; dy < f; ++dy)
                        for (int dx = 0; dx < f; ++dx)
                            form.matrix[row * m + flat(rc.channel, oy + dy, ox + dx)] += w * src.sign * pool_weight;
                }
            }
        }
    }
    return form;
}

namespace {

RasterImage initial_image(const CollageCode& code, const InitialGuess& init)
{
    switch (init.kind) {
    case InitialGuess::Kind::zeros: return RasterImage(code.width, code.height, code.channels, 0.0);
    case InitialGuess::Kind::constant: return RasterImage(code.width, code.height, code.channels, init.value);
    case InitialGuess::Kind::image:
        if (init.image.width != code.width || init.image.height != code.height || init.image.channels != code.channels)
            throw ShapeError("initial image does not match code dimensions");
        return init.image;
    }
    throw ArgumentError("unknown initial guess");
}

void require_contractive(const CollageCode& code, const SolveConfig& cfg)
{
    const auto report = lipschitz_bound(code);
    if (!report.contractive && !cfg.allow_noncontractive)
        throw ContractivityError("code is not contractive (L = " + std::to_string(report.L) + ")");
}

DecodeResult iterate(const CollageCode& code, RasterImage z, const SolveConfig& cfg)
{
    DecodeResult result;
    for (int t = 1; t <= cfg.max_iters; ++t) {
        RasterImage next = apply_collage(z, code, cfg.threads);
        result.final_step = max_abs_diff(next, z);
        z = std::move(next);
        result.iterations = t;
        if (!std::isfinite(result.final_step)) throw NumericalError("fixed-point iteration diverged");
        if (result.final_step < cfg.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.image = std::move(z);
    return result;
}

}  // namespace

DecodeResult decode(const CollageCode& code, const SolveConfig& cfg)
{
    if (!(cfg.tolerance > 0.0) || cfg.max_iters < 1) throw ArgumentError("invalid solver configuration");
    require_contractive(code, cfg);

    if (cfg.mode == SolveMode::iterate) return iterate(code, initial_image(code, cfg.init), cfg);

    const auto form = materialize(code);
    const auto m = static_cast<Eigen::Index>(form.size);
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) system(i, j) -= form.matrix[static_cast<std::size_t>(i) * form.size + j];
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(form.constant.data(), m);
    const Eigen::VectorXd solution = system.partialPivLu().solve(rhs);
    if (!solution.allFinite()) throw NumericalError("closed-form solve produced non-finite values");

    DecodeResult result;
    result.image = RasterImage(code.width, code.height, code.channels);
    std::copy(solution.data(), solution.data() + m, result.image.data.begin());
    result.converged = true;
    return result;
}

CollageBound ct_bound(const RasterImage& x, const CollageCode& code, int threads)
{
    const auto report = lipschitz_bound(code);
    if (!report.contractive) throw ContractivityError("Collage Theorem bound needs L < 1");
    CollageBound out;
    out.L = report.L;
    out.collage_error = max_abs_diff(x, apply_collage(x, code, threads));
    out.bound = out.collage_error / (1.0 - report.L);
    return out;
}

DecodeResult decode_magnified(const CollageCode& code, int s, const SolveConfig& cfg)
{
    if (s < 1) throw ArgumentError("magnification must be at least 1");
    if (s == 1) return decode(code, cfg);
    require_contractive(code, cfg);

    const bool magnified_init = cfg.init.kind == InitialGuess::Kind::image &&
                                cfg.init.image.width == s * code.width && cfg.init.image.height == s * code.height;

    const std::size_t phases = static_cast<std::size_t>(s) * s;
    std::vector<DecodeResult> parts(phases);
    parallel_for(phases, cfg.threads, [&](std::size_t i) {
        const int p = static_cast<int>(i) / s;
        const int q = static_cast<int>(i) % s;
        SolveConfig sub = cfg;
        sub.threads = 1;
        if (magnified_init) {
            if (cfg.init.image.channels != code.channels) throw ShapeError("initial image has the wrong channel count");
            RasterImage phase(code.width, code.height, code.channels);
            for (int c = 0; c < code.channels; ++c)
                for (int y = 0; y < code.height; ++y)
                    for (int x = 0; x < code.width; ++x) phase.at(c, y, x) = cfg.init.image.at(c, y * s + p, x * s + q);
            sub.init = InitialGuess::from(std::move(phase));
        }
        parts[i] = decode(code, sub);
    });

    DecodeResult result;
    result.image = RasterImage(code.width * s, code.height * s, code.channels);
    result.converged = true;
    for (std::size_t i = 0; i < phases; ++i) {
        const int p = static_cast<int>(i) / s;
        const int q = static_cast<int>(i) % s;
        const auto& part = parts[i];
        for (int c = 0; c < code.channels; ++c)
            for (int y = 0; y < code.height; ++y)
                for (int x = 0; x < code.width; ++x) result.image.at(c, y * s + p, x * s + q) = part.image.at(c, y, x);
        result.iterations = std::max(result.iterations, part.iterations);
        result.final_step = std::max(result.final_step, part.final_step);
        result.converged = result.converged && part.converged;
    }
    return result;
}

}  // namespace ncollage
