#include "ncollage/metrics.hpp"

#include "ncollage/error.hpp"

#include <cmath>
#include <numbers>

namespace ncollage {

std::vector<double> dct_matrix(int n)
{
    if (n < 1) throw ArgumentError("DCT size must be positive");
    std::vector<double> m(static_cast<std::size_t>(n) * n);
    for (int u = 0; u < n; ++u) {
        const double norm = std::sqrt((u == 0 ? 1.0 : 2.0) / n);
        for (int i = 0; i < n; ++i)
            m[static_cast<std::size_t>(u) * n + i] = norm * std::cos(std::numbers::pi * (2 * i + 1) * u / (2.0 * n));
    }
    return m;
}

std::vector<double> dct2(std::span<const double> patch, int n, DctDirection direction)
{
    const auto c = dct_matrix(n);
    const auto nn = static_cast<std::size_t>(n);
    if (patch.size() != nn * nn) throw ShapeError("patch is not n x n");
    // forward: C P C^T, inverse: C^T P C
    auto basis = [&](std::size_t row, std::size_t col) {
        return direction == DctDirection::forward ? c[row * nn + col] : c[col * nn + row];
    };
    std::vector<double> tmp(nn * nn, 0.0);
    std::vector<double> out(nn * nn, 0.0);
    for (std::size_t u = 0; u < nn; ++u)
        for (std::size_t j = 0; j < nn; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < nn; ++i) s += basis(u, i) * patch[i * nn + j];
            tmp[u * nn + j] = s;
        }
    for (std::size_t u = 0; u < nn; ++u)
        for (std::size_t v = 0; v < nn; ++v) {
            double s = 0.0;
            for (std::size_t j = 0; j < nn; ++j) s += tmp[u * nn + j] * basis(v, j);
            out[u * nn + v] = s;
        }
    return out;
}

std::int64_t DctCode::patches() const
{
    return static_cast<std::int64_t>(width / patch_size) * (height / patch_size) * channels;
}

namespace {

void check_patch(int width, int height, int patch_size)
{
    if (patch_size < 1 || width % patch_size != 0 || height % patch_size != 0)
        throw PartitionError("patch size " + std::to_string(patch_size) + " does not divide " + std::to_string(width) +
                             "x" + std::to_string(height));
}

}  // namespace

DctCode block_dct_encode(const RasterImage& x, int patch_size)
{
    check_patch(x.width, x.height, patch_size);
    DctCode code{x.width, x.height, x.channels, patch_size, {}};
    const int px = x.width / patch_size;
    const int py = x.height / patch_size;
    const auto n = static_cast<std::size_t>(patch_size);
    code.dc.reserve(static_cast<std::size_t>(code.patches()));
    std::vector<double> patch(n * n);
    const auto c = dct_matrix(patch_size);
    for (int ch = 0; ch < x.channels; ++ch)
        for (int by = 0; by < py; ++by)
            for (int bx = 0; bx < px; ++bx) {
                // Only the (0,0) coefficient survives, so project onto it directly.
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        s += c[i] * c[j] * x.at(ch, by * patch_size + static_cast<int>(i), bx * patch_size + static_cast<int>(j));
                code.dc.push_back(s);
            }
    return code;
}

RasterImage block_dct_decode(const DctCode& code)
{
    check_patch(code.width, code.height, code.patch_size);
    if (code.dc.size() != static_cast<std::size_t>(code.patches())) throw ShapeError("DC coefficient count mismatch");
    RasterImage out(code.width, code.height, code.channels);
    const int px = code.width / code.patch_size;
    const int py = code.height / code.patch_size;
    const auto n = static_cast<std::size_t>(code.patch_size);
    std::vector<double> coeffs(n * n, 0.0);
    std::size_t idx = 0;
    for (int ch = 0; ch < code.channels; ++ch)
        for (int by = 0; by < py; ++by)
            for (int bx = 0; bx < px; ++bx) {
                coeffs[0] = code.dc[idx++];
                const auto patch = dct2(coeffs, code.patch_size, DctDirection::inverse);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        out.at(ch, by * code.patch_size + static_cast<int>(i), bx * code.patch_size + static_cast<int>(j)) =
                            patch[i * n + j];
            }
    return out;
}

double dct_bpp(int width, int height, int channels, int patch_size)
{
    check_patch(width, height, patch_size);
    const double patches = static_cast<double>(width / patch_size) * (height / patch_size) * channels;
    return 32.0 * patches / (static_cast<double>(width) * height * channels);
}

double dct_bpp(const DctCode& code)
{
    return dct_bpp(code.width, code.height, code.channels, code.patch_size);
}

double mse(const RasterImage& x, const RasterImage& y)
{
    if (!x.same_shape(y)) throw ShapeError("images differ in shape");
    if (x.data.empty()) throw ShapeError("empty image");
    double s = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - y.data[i];
        s += d * d;
    }
    return s / static_cast<double>(x.data.size());
}

double psnr(const RasterImage& x, const RasterImage& y, double peak)
{
    const double e = mse(x, y);
    if (e == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

double psnr_from_linf(double e, double peak)
{
    if (!(e > 0.0)) return kPsnrCap;
    return std::min(kPsnrCap, 20.0 * std::log10(peak / e));
}

}  // namespace ncollage
