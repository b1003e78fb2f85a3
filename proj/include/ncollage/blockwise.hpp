#pragma once

#include "ncollage/collage.hpp"
#include "ncollage/collage_encoder.hpp"
#include "ncollage/pifs.hpp"

#include <string_view>
#include <vector>

namespace ncollage {

enum class Method { pifs, collage };

Method parse_method(std::string_view name);
std::string_view method_name(Method m);

/**
 * An image coded as independent rectangular tiles, row-major. A whole-image
 * code is the single-tile case. Exactly one of pifs_blocks / collage_blocks
 * is populated, according to `method`.
 */
struct BlockwiseCode {
    int width = 0;
    int height = 0;
    int channels = 1;
    int block_width = 0;
    int block_height = 0;
    Method method = Method::collage;
    std::vector<PifsCode> pifs_blocks;
    std::vector<CollageCode> collage_blocks;

    int blocks_x() const { return width / block_width; }
    int blocks_y() const { return height / block_height; }
    std::size_t block_count() const { return static_cast<std::size_t>(blocks_x()) * blocks_y(); }

    bool operator==(const BlockwiseCode&) const = default;
};

/// Tile `index` (row-major) of an image split into block_width x block_height tiles.
RasterImage extract_block(const RasterImage& x, int block_width, int block_height, std::size_t index);
void insert_block(RasterImage& canvas, const RasterImage& block, std::size_t index);

/**
 * Encodes every block_size x block_size tile on its own with `scheme`.
 *
 * Blocks run in parallel (cfg.threads), each block's encoder single-threaded,
 * so codes are identical for any thread count. For the Collage method the aux
 * patches are computed once from the whole image and shared by every block;
 * they are not learned.
 */
BlockwiseCode encode_blockwise(const RasterImage& x, int block_size, const PartitionScheme& scheme,
                               const EncoderConfig& cfg, Method method);

/// Whole-image code wrapped as a single block (aux patches are learned).
BlockwiseCode encode_whole(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg, Method method);

/// Per-block Collage codes (PIFS blocks are converted).
std::vector<CollageCode> collage_blocks(const BlockwiseCode& code);

struct BlockwiseDecode {
    RasterImage image;
    int iterations = 0;
    double final_step = 0.0;
    bool converged = true;
};

/// Decodes each block at scale s and reassembles the image.
BlockwiseDecode decode_blockwise(const BlockwiseCode& code, const SolveConfig& cfg, int scale = 1);

}  // namespace ncollage
