#pragma once

#include "ncollage/raster.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ncollage {

enum class DctDirection { forward, inverse };

/// Orthonormal n x n DCT-II basis, row u holding frequency u.
std::vector<double> dct_matrix(int n);

/// Separable orthonormal DCT-II (forward) or DCT-III (inverse) of a row-major n x n patch.
std::vector<double> dct2(std::span<const double> patch, int n, DctDirection direction);

/// DC coefficients per channel-major patch; everything else is discarded.
struct DctCode {
    int width = 0;
    int height = 0;
    int channels = 1;
    int patch_size = 8;
    std::vector<double> dc;  // channel, patch row, patch column

    std::int64_t patches() const;
};

DctCode block_dct_encode(const RasterImage& x, int patch_size);
RasterImage block_dct_decode(const DctCode& code);

/// 32 bits per stored DC coefficient over all pixel values.
double dct_bpp(const DctCode& code);
double dct_bpp(int width, int height, int channels, int patch_size);

inline constexpr double kPsnrCap = 100.0;

double mse(const RasterImage& x, const RasterImage& y);
/// 10 log10(peak^2 / MSE); kPsnrCap when the images are identical.
double psnr(const RasterImage& x, const RasterImage& y, double peak = 1.0);
/// PSNR implied by an infinity-norm error bound e (MSE <= e^2).
double psnr_from_linf(double e, double peak = 1.0);

}  // namespace ncollage
