#pragma once

#include "ncollage/raster.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ncollage {

/// Methods understood by the harness: pifs, pifs-aug, collage, dct.
bool is_bench_method(std::string_view name);
const std::vector<std::string>& bench_methods();

struct BenchConfig {
    PartitionScheme scheme;
    int block_size = 0;  // 0: whole image
    int epsilon = 3;
    int aux_count = 3;   // collage only
    int gd_steps = 200;
    int dct_patch = 16;
    int repeats = 3;
    double tolerance = 1e-8;
    int max_iters = 200;
    std::uint64_t seed = 0;
    int threads = 1;

    /// FNV-1a of every field except threads, as 16 hex digits.
    std::string hash() const;
};

struct BenchImage {
    std::string id;
    RasterImage image;
};

struct BenchRow {
    std::string image;
    std::string method;
    double bpp = 0.0;
    double psnr_db = 0.0;
    double encode_s = 0.0;  // median wall-clock
    double decode_s = 0.0;
    std::string error;      // empty on success
};

struct BenchImageInfo {
    std::string id;
    int width = 0;
    int height = 0;
    int channels = 0;
};

struct BenchReport {
    std::string config_hash;
    int repeats = 0;
    std::vector<BenchImageInfo> images;
    std::vector<BenchRow> rows;  // sorted by (image, method)

    std::string to_csv() const;
    std::string to_json() const;
};

/**
 * Encodes, quantises and decodes every image with every method, `repeats`
 * times each, keeping median timings. PSNR is measured on the decode of the
 * stored (quantised) code. A failing method yields a row with `error` set.
 * Throws ArgumentError for empty inputs or unknown methods.
 */
BenchReport bench(const std::vector<BenchImage>& images, const std::vector<std::string>& methods, const BenchConfig& cfg);

}  // namespace ncollage
