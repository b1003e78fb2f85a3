#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace testsupport {

RasterImage random_image(std::mt19937_64& rng, int width, int height, int channels, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    RasterImage img(width, height, channels);
    for (auto& v : img.data) v = u(rng);
    return img;
}

namespace {

template <typename T>
T pick(std::mt19937_64& rng, std::initializer_list<T> items)
{
    std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
    return *(items.begin() + d(rng));
}

}  // namespace

CollageCode random_code(std::mt19937_64& rng, const RandomCodeOptions& opt)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int r = pick(rng, {2, 4});
    const int f = pick(rng, {1, 2});
    const int d = r * f;
    std::vector<int> sides;
    for (int s : {4, 8, 16})
        if (s <= opt.max_side && s >= d && s % r == 0) sides.push_back(s);
    std::uniform_int_distribution<std::size_t> side_pick(0, sides.size() - 1);
    const int w = sides[side_pick(rng)];
    const int h = sides[side_pick(rng)];
    const int stride = (d > 1 && u(rng) < 0.5) ? d / 2 : d;
    const int channels = opt.allow_color && u(rng) < 0.25 ? 3 : 1;
    const int augs = pick(rng, {1, 1, 4, 8});
    const int aux = opt.allow_aux ? pick(rng, {0, 0, 1, 2}) : 0;

    auto code = CollageCode::zeros(w, h, channels, PartitionScheme{r, d, stride}, augs, aux);
    for (std::size_t i = 0; i < code.aux.size(); ++i) code.aux[i] = u(rng);

    const double L = opt.max_L * u(rng);
    const int t = code.terms();
    for (int k = 0; k < code.ranges(); ++k) {
        const std::size_t row = static_cast<std::size_t>(k) * t;
        double total = 0.0;
        const bool one_hot = u(rng) < 0.2;
        std::uniform_int_distribution<int> hot(0, t - 1);
        const int chosen = hot(rng);
        for (int j = 0; j < t; ++j) {
            code.gamma[row + j] = one_hot ? (j == chosen ? 1.0 : 0.0) : u(rng);
            total += code.gamma[row + j];
        }
        for (int j = 0; j < t; ++j) {
            code.gamma[row + j] /= total;
            const double mag = j < code.domains ? L : 0.99;
            code.scale[row + j] = mag * (2.0 * u(rng) - 1.0);
        }
        code.offset[k] = -0.2 + 0.8 * u(rng);
    }
    return code;
}

ncollage::PifsCode random_pifs(std::mt19937_64& rng, int width, int height, int channels,
                               const PartitionScheme& scheme, bool augmented, double a_lo, double a_hi)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ncollage::PifsCode code;
    code.width = width;
    code.height = height;
    code.channels = channels;
    code.scheme = scheme;
    code.augmentations = augmented ? ncollage::kAugmentationCount : 1;
    const auto layout = code.layout();
    std::uniform_int_distribution<int> dom(0, layout.domains_per_plane() - 1);
    std::uniform_int_distribution<int> aug(0, code.augmentations - 1);
    for (int k = 0; k < layout.range_count(); ++k) {
        ncollage::PifsRecord rec;
        rec.domain_index = dom(rng);
        rec.augmentation = aug(rng);
        rec.a = (u(rng) < 0.5 ? -1.0 : 1.0) * (a_lo + (a_hi - a_lo) * u(rng));
        // Keep [0, 1] invariant: the effective multiplier includes a value flip.
        const double m = rec.augmentation >= 4 ? -rec.a : rec.a;
        rec.b = m >= 0.0 ? (1.0 - m) * u(rng) : -m + (1.0 + m) * u(rng);
        code.records.push_back(rec);
    }
    return code;
}

RasterImage selfsim_fixture(int size, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    ncollage::PifsCode code;
    code.width = code.height = size;
    code.channels = 1;
    code.scheme = {8, 16, 8};
    code.augmentations = ncollage::kAugmentationCount;
    const auto layout = code.layout();
    const auto domains = static_cast<std::uint64_t>(layout.domains_per_plane());
    for (int k = 0; k < layout.range_count(); ++k) {
        ncollage::PifsRecord rec;
        rec.domain_index = static_cast<int>(rng() % domains);
        rec.augmentation = static_cast<int>(rng() % 4);
        rec.a = (unit() < 0.5 ? -1.0 : 1.0) * (0.55 + 0.3 * unit());
        rec.b = rec.a >= 0.0 ? (1.0 - rec.a) * unit() : -rec.a + (1.0 + rec.a) * unit();
        code.records.push_back(rec);
    }
    ncollage::SolveConfig cfg;
    cfg.tolerance = 1e-13;
    cfg.max_iters = 10000;
    auto img = ncollage::decode(ncollage::to_collage(code), cfg).image;
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    const double l = *lo, span = std::max(*hi - *lo, 1e-12);
    for (auto& v : img.data) v = std::round((v - l) / span * 255.0) / 255.0;
    return img;
}

std::vector<double> rotate_cw(const std::vector<double>& cell, int n, int quarter_turns)
{
    std::vector<double> cur = cell;
    for (int t = 0; t < quarter_turns; ++t) {
        std::vector<double> next(cur.size());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) next[i * n + j] = cur[(n - 1 - j) * n + i];
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> naive_pool(const RasterImage& img, const PartitionScheme& scheme, int channel, int index)
{
    const int r = scheme.range_size;
    const int f = scheme.domain_size / r;
    const int per_row = (img.width - scheme.domain_size) / scheme.domain_stride + 1;
    const int oy = (index / per_row) * scheme.domain_stride;
    const int ox = (index % per_row) * scheme.domain_stride;
    std::vector<double> out(static_cast<std::size_t>(r) * r);
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) {
            double s = 0.0;
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) s += img.at(channel, oy + y * f + dy, ox + x * f + dx);
            out[static_cast<std::size_t>(y) * r + x] = s * (1.0 / (f * f));
        }
    return out;
}

namespace {

struct Geometry {
    int per_plane_ranges;
    int ranges_x;
    int domains;
};

Geometry geometry(const RasterImage& img, const PartitionScheme& s)
{
    const int rx = img.width / s.range_size;
    const int ry = img.height / s.range_size;
    const int dx = (img.width - s.domain_size) / s.domain_stride + 1;
    const int dy = (img.height - s.domain_size) / s.domain_stride + 1;
    return {rx * ry, rx, dx * dy};
}

std::vector<double> augmented(const std::vector<double>& cell, int n, int id)
{
    auto out = rotate_cw(cell, n, id % 4);
    if (id >= 4)
        for (auto& v : out) v = -v;
    return out;
}

}  // namespace

std::vector<double> naive_range(const RasterImage& img, const PartitionScheme& scheme, int k)
{
    const auto g = geometry(img, scheme);
    const int r = scheme.range_size;
    const int c = k / g.per_plane_ranges;
    const int local = k % g.per_plane_ranges;
    const int oy = (local / g.ranges_x) * r;
    const int ox = (local % g.ranges_x) * r;
    std::vector<double> out;
    for (int y = 0; y < r; ++y)
        for (int x = 0; x < r; ++x) out.push_back(img.at(c, oy + y, ox + x));
    return out;
}

std::vector<ncollage::PifsRecord> naive_pifs(const RasterImage& x, const PartitionScheme& scheme, bool augmented_search,
                                             double a_max)
{
    const auto g = geometry(x, scheme);
    const int n = scheme.range_size;
    const int augs = augmented_search ? 8 : 1;
    std::vector<ncollage::PifsRecord> out;
    for (int k = 0; k < g.per_plane_ranges * x.channels; ++k) {
        const auto r = naive_range(x, scheme, k);
        const int c = k / g.per_plane_ranges;
        ncollage::PifsRecord best;
        best.residual = std::numeric_limits<double>::infinity();
        for (int dom = 0; dom < g.domains; ++dom) {
            const auto pooled = naive_pool(x, scheme, c, dom);
            for (int id = 0; id < augs; ++id) {
                const auto d = augmented(pooled, n, id);
                const double m = static_cast<double>(d.size());
                double md = 0.0;
                double mr = 0.0;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    md += d[i];
                    mr += r[i];
                }
                md /= m;
                mr /= m;
                double cov = 0.0;
                double var = 0.0;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    cov += (d[i] - md) * (r[i] - mr);
                    var += (d[i] - md) * (d[i] - md);
                }
                const double a = var > 1e-24 * m * md * md ? std::clamp(cov / var, -a_max, a_max) : 0.0;
                const double b = mr - a * md;
                double res = 0.0;
                for (std::size_t i = 0; i < d.size(); ++i) res += (a * d[i] + b - r[i]) * (a * d[i] + b - r[i]);
                if (res < best.residual) best = {dom, id, a, b, res};
            }
        }
        out.push_back(best);
    }
    return out;
}

RasterImage naive_apply(const RasterImage& z, const CollageCode& code)
{
    const auto g = geometry(z, code.scheme);
    const int n = code.scheme.range_size;
    const int t = code.terms();
    const int base = code.domains / code.augmentations;
    RasterImage out(z.width, z.height, z.channels);
    for (int c = 0; c < z.channels; ++c) {
        std::vector<std::vector<double>> cells;
        for (int dom = 0; dom < base; ++dom) {
            const auto pooled = naive_pool(z, code.scheme, c, dom);
            for (int id = 0; id < code.augmentations; ++id) cells.push_back(augmented(pooled, n, id));
        }
        for (int local = 0; local < g.per_plane_ranges; ++local) {
            const int k = c * g.per_plane_ranges + local;
            const int oy = (local / g.ranges_x) * n;
            const int ox = (local % g.ranges_x) * n;
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * n + x;
                    double v = code.offset[k];
                    for (int j = 0; j < t; ++j) {
                        const double w = code.gamma[static_cast<std::size_t>(k) * t + j] *
                                         code.scale[static_cast<std::size_t>(k) * t + j];
                        const double term = j < code.domains ? cells[j][p] : code.aux[(j - code.domains) * n * n + p];
                        v += w * term;
                    }
                    out.at(c, oy + y, ox + x) = v;
                }
        }
    }
    return out;
}

RasterImage naive_fixed_point(const CollageCode& code)
{
    RasterImage zero(code.width, code.height, code.channels);
    const RasterImage c0 = naive_apply(zero, code);
    const std::size_t m = c0.data.size();
    // M = I - A, column i probed with a unit image.
    std::vector<double> M(m * m);
    for (std::size_t i = 0; i < m; ++i) {
        RasterImage e = zero;
        e.data[i] = 1.0;
        const auto col = naive_apply(e, code);
        for (std::size_t row = 0; row < m; ++row) M[row * m + i] = (row == i ? 1.0 : 0.0) - (col.data[row] - c0.data[row]);
    }
    std::vector<double> rhs = c0.data;
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t row = col + 1; row < m; ++row)
            if (std::abs(M[row * m + col]) > std::abs(M[piv * m + col])) piv = row;
        if (M[piv * m + col] == 0.0) throw std::runtime_error("singular system");
        if (piv != col) {
            for (std::size_t j = 0; j < m; ++j) std::swap(M[col * m + j], M[piv * m + j]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (std::size_t row = col + 1; row < m; ++row) {
            const double f = M[row * m + col] / M[col * m + col];
            if (f == 0.0) continue;
            for (std::size_t j = col; j < m; ++j) M[row * m + j] -= f * M[col * m + j];
            rhs[row] -= f * rhs[col];
        }
    }
    RasterImage out = zero;
    for (std::size_t i = m; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t j = i + 1; j < m; ++j) s -= M[i * m + j] * out.data[j];
        out.data[i] = s / M[i * m + i];
    }
    return out;
}

double naive_lipschitz(const CollageCode& code)
{
    double worst = 0.0;
    const int t = code.terms();
    for (int k = 0; k < code.ranges(); ++k) {
        double s = 0.0;
        for (int j = 0; j < code.domains; ++j)
            s += std::abs(code.gamma[static_cast<std::size_t>(k) * t + j] * code.scale[static_cast<std::size_t>(k) * t + j]);
        worst = std::max(worst, s);
    }
    return worst;
}

double half_value(std::uint16_t bits)
{
    const double sign = (bits & 0x8000u) ? -1.0 : 1.0;
    const int exponent = (bits >> 10) & 0x1f;
    const int mantissa = bits & 0x3ff;
    if (exponent == 0) return sign * std::ldexp(mantissa, -24);
    if (exponent == 31) return mantissa ? std::numeric_limits<double>::quiet_NaN() : sign * HUGE_VAL;
    return sign * std::ldexp(1024 + mantissa, exponent - 25);
}

double linf(const RasterImage& a, const RasterImage& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace testsupport
