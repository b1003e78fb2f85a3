#include "ncollage/collage_encoder.hpp"

#include "ncollage/error.hpp"
#include "ncollage/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ncollage {

std::vector<double> initial_aux(const RasterImage& x, const PartitionScheme& scheme, int count, std::uint64_t seed)
{
    const auto layout = make_layout(x.width, x.height, x.channels, scheme);
    const std::size_t cell = static_cast<std::size_t>(layout.cell_pixels());
    std::vector<double> mean(cell, 0.0);
    for (int k = 0; k < layout.range_count(); ++k) {
        const auto values = read_range(x, scheme, k);
        for (std::size_t p = 0; p < cell; ++p) mean[p] += values[p];
    }
    for (auto& v : mean) v /= layout.range_count();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    std::vector<double> aux(static_cast<std::size_t>(count) * cell);
    for (std::size_t i = 0; i < aux.size(); ++i) aux[i] = mean[i % cell] + noise(rng);
    return aux;
}

void factorize_row(std::span<const double> c, double a_max, std::span<double> gamma, std::span<double> scale)
{
    double total = 0.0;
    for (double v : c) total += std::abs(v);
    if (total == 0.0) {
        std::fill(gamma.begin(), gamma.end(), 1.0 / static_cast<double>(c.size()));
        std::fill(scale.begin(), scale.end(), 0.0);
        return;
    }
    const double magnitude = std::min(total, a_max);
    for (std::size_t j = 0; j < c.size(); ++j) {
        gamma[j] = std::abs(c[j]) / total;
        scale[j] = c[j] > 0.0 ? magnitude : (c[j] < 0.0 ? -magnitude : 0.0);
    }
}

namespace {

CollageCode make_shape(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg, int augmentations)
{
    auto code = CollageCode::zeros(x.width, x.height, x.channels, scheme, augmentations, cfg.aux_count);
    if (!cfg.fixed_aux.empty()) {
        if (cfg.fixed_aux.size() != code.aux.size()) throw ShapeError("fixed aux patches have the wrong size");
        code.aux = cfg.fixed_aux;
    } else if (cfg.aux_count > 0) {
        code.aux = initial_aux(x, scheme, cfg.aux_count, cfg.seed);
    }
    return code;
}

// Solves (G + lambda I) c = rhs; reports whether G + lambda I was numerically singular.
bool solve_ridge(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, double lambda, Eigen::VectorXd& c)
{
    const auto t = gram.rows();
    const Eigen::MatrixXd system = gram + lambda * Eigen::MatrixXd::Identity(t, t);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
    const double scale = std::max(1.0, system.diagonal().cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || pivots.minCoeff() <= 1e-13 * scale) return false;
    c = ldlt.solve(rhs);
    return c.allFinite();
}

// Fills gamma/scale/offset of `code` in place from a per-range ridge fit on x.
// Returns true when any range needed the fallback regulariser.
bool fit_ranges_ls(const RasterImage& x, CollageCode& code, const EncoderConfig& cfg)
{
    const auto layout = code.layout();
    const auto bank = collage_domain_bank(x, code);
    const std::size_t cell = code.cell_pixels();
    const int t = code.terms();
    std::vector<char> fallback(static_cast<std::size_t>(layout.range_count()), 0);

    parallel_for(static_cast<std::size_t>(layout.range_count()), cfg.threads, [&](std::size_t idx) {
        const int k = static_cast<int>(idx);
        const auto target = read_range(x, code.scheme, k);
        const auto channel = static_cast<std::size_t>(range_cell(layout, k).channel);
        auto term = [&](int j) -> const double* {
            return j < code.domains ? bank.cell(channel * code.domains + j).data()
                                    : code.aux.data() + static_cast<std::size_t>(j - code.domains) * cell;
        };

        // Centre columns and target so the unpenalised offset drops out.
        Eigen::MatrixXd design(static_cast<Eigen::Index>(cell), t);
        for (int j = 0; j < t; ++j) {
            const double* col = term(j);
            const double mean = std::accumulate(col, col + cell, 0.0) / static_cast<double>(cell);
            for (std::size_t p = 0; p < cell; ++p) design(static_cast<Eigen::Index>(p), j) = col[p] - mean;
        }
        const double target_mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(cell);
        Eigen::VectorXd centred(static_cast<Eigen::Index>(cell));
        for (std::size_t p = 0; p < cell; ++p) centred(static_cast<Eigen::Index>(p)) = target[p] - target_mean;

        const Eigen::MatrixXd gram = design.transpose() * design;
        const Eigen::VectorXd rhs = design.transpose() * centred;
        Eigen::VectorXd c;
        if (!solve_ridge(gram, rhs, cfg.ridge_lambda, c)) {
            fallback[idx] = 1;
            if (!solve_ridge(gram, rhs, std::max(cfg.ridge_lambda, kFallbackRidge), c)) c = Eigen::VectorXd::Zero(t);
        }

        const std::size_t row = idx * static_cast<std::size_t>(t);
        std::span<double> gamma(code.gamma.data() + row, static_cast<std::size_t>(t));
        std::span<double> scale(code.scale.data() + row, static_cast<std::size_t>(t));
        factorize_row(std::span<const double>(c.data(), static_cast<std::size_t>(t)), cfg.a_max, gamma, scale);

        // Refit the offset for the projected coefficients.
        double residual_mean = 0.0;
        for (std::size_t p = 0; p < cell; ++p) {
            double v = target[p];
            for (int j = 0; j < t; ++j) v -= gamma[j] * scale[j] * term(j)[p];
            residual_mean += v;
        }
        code.offset[idx] = residual_mean / static_cast<double>(cell);
    });

    return std::any_of(fallback.begin(), fallback.end(), [](char f) { return f != 0; });
}

void score(const RasterImage& x, const EncoderConfig& cfg, CollageEncoding& result)
{
    const SurrogateObjective objective(x, result.code, cfg.weight_decay, cfg.a_max, false, cfg.threads);
    result.surrogate_loss = objective.surrogate(result.code);
    result.objective = objective.objective(result.code);
}

}  // namespace

CollageEncoding encode_collage_ls(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg)
{
    cfg.validate();
    CollageEncoding result;
    result.code = make_shape(x, scheme, cfg, cfg.use_augmentations ? kAugmentationCount : 1);
    result.ridge_fallback = fit_ranges_ls(x, result.code, cfg);
    score(x, cfg, result);
    return result;
}

CollageParameters parameterize(const CollageCode& code, double a_max)
{
    code.check_shape();
    CollageParameters p;
    p.shape = code;
    p.values.resize(p.aux_begin() + code.aux.size());
    const std::size_t n = p.coefficients();
    constexpr double kMaxRatio = 1.0 - 1e-4;
    for (std::size_t i = 0; i < n; ++i) {
        p.values[p.logits_begin() + i] = std::log(std::max(code.gamma[i], 1e-12));
        const double ratio = std::clamp(code.scale[i] / a_max, -kMaxRatio, kMaxRatio);
        p.values[p.preact_begin() + i] = std::atanh(ratio);
    }
    std::copy(code.offset.begin(), code.offset.end(), p.values.begin() + static_cast<std::ptrdiff_t>(p.offset_begin()));
    std::copy(code.aux.begin(), code.aux.end(), p.values.begin() + static_cast<std::ptrdiff_t>(p.aux_begin()));
    return p;
}

CollageCode realize(const CollageParameters& params, double a_max)
{
    CollageCode code = params.shape;
    const int t = code.terms();
    for (int k = 0; k < code.ranges(); ++k) {
        const std::size_t row = static_cast<std::size_t>(k) * t;
        const double* logits = params.values.data() + params.logits_begin() + row;
        const double peak = *std::max_element(logits, logits + t);
        double total = 0.0;
        for (int j = 0; j < t; ++j) total += std::exp(logits[j] - peak);
        for (int j = 0; j < t; ++j) {
            code.gamma[row + j] = std::exp(logits[j] - peak) / total;
            code.scale[row + j] = a_max * std::tanh(params.values[params.preact_begin() + row + j]);
        }
    }
    std::copy_n(params.values.begin() + static_cast<std::ptrdiff_t>(params.offset_begin()), code.offset.size(),
                code.offset.begin());
    std::copy_n(params.values.begin() + static_cast<std::ptrdiff_t>(params.aux_begin()), code.aux.size(),
                code.aux.begin());
    return code;
}

SurrogateObjective::SurrogateObjective(const RasterImage& x, const CollageCode& shape, double weight_decay,
                                       double a_max, bool learn_aux, int threads)
    : shape_(shape), weight_decay_(weight_decay), a_max_(a_max), learn_aux_(learn_aux), threads_(threads)
{
    shape.check_shape();
    if (x.width != shape.width || x.height != shape.height || x.channels != shape.channels)
        throw ShapeError("image does not match code dimensions");
    const std::size_t cell = shape.cell_pixels();
    targets_.resize(static_cast<std::size_t>(shape.ranges()) * cell);
    for (int k = 0; k < shape.ranges(); ++k) {
        const auto values = read_range(x, shape.scheme, k);
        std::copy(values.begin(), values.end(), targets_.begin() + static_cast<std::ptrdiff_t>(k * cell));
    }
    bank_ = collage_domain_bank(x, shape);
}

double SurrogateObjective::evaluate(const CollageCode& code, std::vector<double>* grad_c,
                                    std::vector<double>* grad_b, std::vector<double>* grad_u) const
{
    const auto layout = code.layout();
    const std::size_t cell = code.cell_pixels();
    const int t = code.terms();
    const std::size_t ranges = static_cast<std::size_t>(code.ranges());
    std::vector<double> losses(ranges, 0.0);
    std::vector<double> residuals(grad_u ? ranges * cell : 0);

    parallel_for(ranges, threads_, [&](std::size_t k) {
        const auto channel = static_cast<std::size_t>(range_cell(layout, static_cast<int>(k)).channel);
        auto term = [&](int j) -> const double* {
            return j < code.domains ? bank_.cell(channel * code.domains + j).data()
                                    : code.aux.data() + static_cast<std::size_t>(j - code.domains) * cell;
        };
        std::vector<double> res(cell, code.offset[k]);
        for (int j = 0; j < t; ++j) {
            const double w = code.weight(static_cast<int>(k), j);
            const double* src = term(j);
            for (std::size_t p = 0; p < cell; ++p) res[p] += w * src[p];
        }
        double loss = 0.0;
        double sum = 0.0;
        for (std::size_t p = 0; p < cell; ++p) {
            res[p] -= targets_[k * cell + p];
            loss += res[p] * res[p];
            sum += res[p];
        }
        double penalty = code.offset[k] * code.offset[k];
        for (int j = 0; j < t; ++j) {
            const double w = code.weight(static_cast<int>(k), j);
            penalty += w * w;
        }
        losses[k] = loss + weight_decay_ * penalty;

        if (grad_c) {
            for (int j = 0; j < t; ++j) {
                const double* src = term(j);
                double dot = 0.0;
                for (std::size_t p = 0; p < cell; ++p) dot += res[p] * src[p];
                (*grad_c)[k * t + j] = 2.0 * dot + 2.0 * weight_decay_ * code.weight(static_cast<int>(k), j);
            }
            (*grad_b)[k] = 2.0 * sum + 2.0 * weight_decay_ * code.offset[k];
        }
        if (grad_u) std::copy(res.begin(), res.end(), residuals.begin() + static_cast<std::ptrdiff_t>(k * cell));
    });

    if (grad_u) {
        // Summed in range order so the result is schedule independent.
        std::fill(grad_u->begin(), grad_u->end(), 0.0);
        for (std::size_t k = 0; k < ranges; ++k) {
            for (int v = 0; v < code.aux_count; ++v) {
                const double w = 2.0 * code.weight(static_cast<int>(k), code.domains + v);
                for (std::size_t p = 0; p < cell; ++p) (*grad_u)[v * cell + p] += w * residuals[k * cell + p];
            }
        }
    }
    return std::accumulate(losses.begin(), losses.end(), 0.0);
}

double SurrogateObjective::surrogate(const CollageCode& code) const
{
    SurrogateObjective plain = *this;
    plain.weight_decay_ = 0.0;
    return plain.evaluate(code, nullptr, nullptr, nullptr);
}

double SurrogateObjective::objective(const CollageCode& code) const
{
    return evaluate(code, nullptr, nullptr, nullptr);
}

double SurrogateObjective::value(const CollageParameters& params) const
{
    return evaluate(realize(params, a_max_), nullptr, nullptr, nullptr);
}

double SurrogateObjective::value_and_gradient(const CollageParameters& params, std::vector<double>& grad) const
{
    const CollageCode code = realize(params, a_max_);
    const int t = code.terms();
    const std::size_t n = params.coefficients();
    std::vector<double> grad_c(n);
    std::vector<double> grad_b(code.offset.size());
    std::vector<double> grad_u(code.aux.size());
    const double value = evaluate(code, &grad_c, &grad_b, learn_aux_ ? &grad_u : nullptr);

    grad.assign(params.size(), 0.0);
    for (int k = 0; k < code.ranges(); ++k) {
        const std::size_t row = static_cast<std::size_t>(k) * t;
        double mixed = 0.0;
        for (int j = 0; j < t; ++j) mixed += grad_c[row + j] * code.scale[row + j] * code.gamma[row + j];
        for (int j = 0; j < t; ++j) {
            const std::size_t i = row + j;
            const double g = code.gamma[i];
            grad[params.logits_begin() + i] = g * (grad_c[i] * code.scale[i] - mixed);
            const double th = std::tanh(params.values[params.preact_begin() + i]);
            grad[params.preact_begin() + i] = grad_c[i] * g * a_max_ * (1.0 - th * th);
        }
    }
    std::copy(grad_b.begin(), grad_b.end(), grad.begin() + static_cast<std::ptrdiff_t>(params.offset_begin()));
    if (learn_aux_) std::copy(grad_u.begin(), grad_u.end(), grad.begin() + static_cast<std::ptrdiff_t>(params.aux_begin()));
    return value;
}

CollageEncoding encode_collage_gd(const RasterImage& x, const EncoderConfig& cfg, const CollageCode& init)
{
    cfg.validate();
    init.check_shape();
    const bool learn_aux = cfg.learn_aux && cfg.fixed_aux.empty() && init.aux_count > 0;
    const SurrogateObjective problem(x, init, cfg.weight_decay, cfg.a_max, learn_aux, cfg.threads);

    CollageEncoding best;
    best.code = init;
    best.objective = problem.objective(init);
    if (!std::isfinite(best.objective)) throw NumericalError("initial objective is not finite");

    if (cfg.gd_steps > 0) {
        auto params = parameterize(init, cfg.a_max);
        std::vector<double> grad;
        double current = problem.value_and_gradient(params, grad);
        if (!std::isfinite(current)) throw NumericalError("objective is not finite");

        double rate = cfg.gd_rate;
        std::vector<double> trial(params.size());
        for (int step = 0; step < cfg.gd_steps; ++step) {
            bool accepted = false;
            for (int halving = 0; halving <= 20 && !accepted; ++halving) {
                for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = params.values[i] - rate * grad[i];
                std::swap(params.values, trial);
                const double candidate = problem.value(params);
                if (std::isfinite(candidate) && candidate <= current) {
                    accepted = true;
                    current = problem.value_and_gradient(params, grad);
                } else {
                    std::swap(params.values, trial);
                    rate *= 0.5;
                }
            }
            if (!accepted) break;
            rate = std::min(2.0 * rate, cfg.gd_rate);
        }

        CollageCode refined = realize(params, cfg.a_max);
        const double refined_objective = problem.objective(refined);
        if (refined_objective < best.objective && problem.surrogate(refined) <= problem.surrogate(init)) {
            best.code = std::move(refined);
            best.objective = refined_objective;
        }
    }
    best.surrogate_loss = problem.surrogate(best.code);
    return best;
}

CollageEncoding encode_collage(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg)
{
    const auto ls = encode_collage_ls(x, scheme, cfg);
    auto refined = encode_collage_gd(x, cfg, ls.code);
    refined.ridge_fallback = ls.ridge_fallback;
    return refined;
}

CollageEncoding fractalize_encode(const RasterImage& x, const EncoderConfig& cfg, int range_size)
{
    if (x.width != x.height) throw ArgumentError("fractalization needs a square image");
    if (range_size == 0) range_size = x.width / 2;
    if (range_size < 1 || x.width % range_size != 0) throw ArgumentError("range size must divide the image side");

    const PartitionScheme scheme{range_size, x.width, x.width};
    EncoderConfig fit = cfg;
    fit.aux_count = 0;
    fit.fixed_aux.clear();
    fit.use_augmentations = false;

    fit.validate();
    CollageEncoding ls;
    ls.code = CollageCode::zeros(x.width, x.height, x.channels, scheme, 4, 0);
    ls.ridge_fallback = fit_ranges_ls(x, ls.code, fit);

    auto refined = encode_collage_gd(x, fit, ls.code);
    refined.ridge_fallback = ls.ridge_fallback;
    return refined;
}

CollageCode offset_only_code(const RasterImage& x, const CollageCode& shape)
{
    CollageCode code = shape;
    std::fill(code.scale.begin(), code.scale.end(), 0.0);
    std::fill(code.gamma.begin(), code.gamma.end(), 1.0 / code.terms());
    for (int k = 0; k < code.ranges(); ++k) {
        const auto values = read_range(x, code.scheme, k);
        code.offset[k] = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    }
    return code;
}

}  // namespace ncollage
