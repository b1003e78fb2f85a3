#include "ncollage/pifs.hpp"

#include "ncollage/error.hpp"
#include "ncollage/parallel.hpp"

#include <algorithm>
#include <limits>

namespace ncollage {

EncoderConfig EncoderConfig::pifs_defaults()
{
    return {};
}

EncoderConfig EncoderConfig::collage_defaults()
{
    EncoderConfig cfg;
    cfg.a_max = 0.9;
    cfg.aux_count = 3;
    return cfg;
}

void EncoderConfig::validate() const
{
    if (!(a_max > 0.0 && a_max < 1.0)) throw ArgumentError("a_max must lie in (0, 1)");
    if (!(gd_rate > 0.0)) throw ArgumentError("gd_rate must be positive");
    if (!(ridge_lambda >= 0.0) || !(weight_decay >= 0.0)) throw ArgumentError("regularisation must be non-negative");
    if (gd_steps < 0 || aux_count < 0) throw ArgumentError("counts must be non-negative");
}

AffineMatch ls_affine_match(std::span<const double> d, std::span<const double> r, double a_max)
{
    if (d.size() != r.size() || d.empty()) throw ShapeError("domain and range cells differ in length");
    const double n = static_cast<double>(d.size());
    double mean_d = 0.0;
    double mean_r = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        mean_d += d[i];
        mean_r += r[i];
    }
    mean_d /= n;
    mean_r /= n;

    double cov = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double dd = d[i] - mean_d;
        cov += dd * (r[i] - mean_r);
        var += dd * dd;
    }

    AffineMatch m;
    // A flat cell can pick up variance from rounding in its mean; that is not signal.
    const bool flat = var <= 1e-24 * n * mean_d * mean_d;
    m.a = flat ? 0.0 : std::clamp(cov / var, -a_max, a_max);
    m.b = mean_r - m.a * mean_d;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double e = m.a * d[i] + m.b - r[i];
        m.residual += e * e;
    }
    return m;
}

double PifsCode::total_residual() const
{
    double total = 0.0;
    for (const auto& rec : records) total += rec.residual;
    return total;
}

PifsCode encode_pifs(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg)
{
    cfg.validate();
    const auto layout = make_layout(x.width, x.height, x.channels, scheme);

    PifsCode code;
    code.width = x.width;
    code.height = x.height;
    code.channels = x.channels;
    code.scheme = scheme;
    code.augmentations = cfg.use_augmentations ? kAugmentationCount : 1;

    DomainBank bank = extract_domains(x, scheme);
    if (cfg.use_augmentations) bank = augment_domains(bank);
    const std::size_t per_plane = static_cast<std::size_t>(layout.domains_per_plane()) * code.augmentations;

    code.records.resize(static_cast<std::size_t>(layout.range_count()));
    parallel_for(code.records.size(), cfg.threads, [&](std::size_t k) {
        const auto target = read_range(x, scheme, static_cast<int>(k));
        const auto channel = static_cast<std::size_t>(range_cell(layout, static_cast<int>(k)).channel);
        PifsRecord best;
        best.residual = std::numeric_limits<double>::infinity();
        // Bank order is (domain, augmentation) ascending, so strict < keeps the lowest tie.
        for (std::size_t i = 0; i < per_plane; ++i) {
            const std::size_t idx = channel * per_plane + i;
            const auto m = ls_affine_match(bank.cell(idx), target, cfg.a_max);
            if (m.residual < best.residual) {
                best = {bank.provenance[idx].domain_index, bank.provenance[idx].augmentation, m.a, m.b, m.residual};
            }
        }
        code.records[k] = best;
    });
    return code;
}

CollageCode to_collage(const PifsCode& code)
{
    auto out = CollageCode::zeros(code.width, code.height, code.channels, code.scheme, code.augmentations, 0);
    if (code.records.size() != static_cast<std::size_t>(out.ranges())) throw ShapeError("PIFS code has the wrong record count");
    std::fill(out.gamma.begin(), out.gamma.end(), 0.0);
    const int t = out.terms();
    for (int k = 0; k < out.ranges(); ++k) {
        const auto& rec = code.records[k];
        if (rec.augmentation < 0 || rec.augmentation >= code.augmentations || rec.domain_index < 0 ||
            rec.domain_index * code.augmentations >= out.domains)
            throw ShapeError("PIFS record addresses a missing domain");
        const std::size_t j = static_cast<std::size_t>(k) * t + rec.domain_index * code.augmentations + rec.augmentation;
        out.gamma[j] = 1.0;
        out.scale[j] = rec.a;
        out.offset[k] = rec.b;
    }
    return out;
}

}  // namespace ncollage
