#include "ncollage/blockwise.hpp"

#include "ncollage/error.hpp"
#include "ncollage/parallel.hpp"

#include <algorithm>
#include <string>

namespace ncollage {

Method parse_method(std::string_view name)
{
    if (name == "pifs") return Method::pifs;
    if (name == "collage") return Method::collage;
    throw ArgumentError("unknown method '" + std::string(name) + "'");
}

std::string_view method_name(Method m)
{
    return m == Method::pifs ? "pifs" : "collage";
}

RasterImage extract_block(const RasterImage& x, int block_width, int block_height, std::size_t index)
{
    const int bx = x.width / block_width;
    const int oy = static_cast<int>(index / bx) * block_height;
    const int ox = static_cast<int>(index % bx) * block_width;
    RasterImage block(block_width, block_height, x.channels);
    for (int c = 0; c < x.channels; ++c)
        for (int y = 0; y < block_height; ++y)
            for (int xx = 0; xx < block_width; ++xx) block.at(c, y, xx) = x.at(c, oy + y, ox + xx);
    return block;
}

void insert_block(RasterImage& canvas, const RasterImage& block, std::size_t index)
{
    const int bx = canvas.width / block.width;
    const int oy = static_cast<int>(index / bx) * block.height;
    const int ox = static_cast<int>(index % bx) * block.width;
    for (int c = 0; c < canvas.channels; ++c)
        for (int y = 0; y < block.height; ++y)
            for (int x = 0; x < block.width; ++x) canvas.at(c, oy + y, ox + x) = block.at(c, y, x);
}

namespace {

BlockwiseCode empty_code(const RasterImage& x, int block_width, int block_height, Method method)
{
    BlockwiseCode code;
    code.width = x.width;
    code.height = x.height;
    code.channels = x.channels;
    code.block_width = block_width;
    code.block_height = block_height;
    code.method = method;
    return code;
}

}  // namespace

BlockwiseCode encode_blockwise(const RasterImage& x, int block_size, const PartitionScheme& scheme,
                               const EncoderConfig& cfg, Method method)
{
    if (block_size < 1 || x.width % block_size != 0 || x.height % block_size != 0)
        throw PartitionError("block size " + std::to_string(block_size) + " does not divide the image");
    make_layout(block_size, block_size, x.channels, scheme);

    auto code = empty_code(x, block_size, block_size, method);
    EncoderConfig block_cfg = cfg;
    block_cfg.threads = 1;
    if (method == Method::collage && cfg.aux_count > 0 && cfg.fixed_aux.empty())
        block_cfg.fixed_aux = initial_aux(x, scheme, cfg.aux_count, cfg.seed);

    const std::size_t blocks = code.block_count();
    if (method == Method::pifs) code.pifs_blocks.resize(blocks);
    else code.collage_blocks.resize(blocks);

    parallel_for(blocks, cfg.threads, [&](std::size_t i) {
        const auto block = extract_block(x, block_size, block_size, i);
        if (method == Method::pifs) code.pifs_blocks[i] = encode_pifs(block, scheme, block_cfg);
        else code.collage_blocks[i] = encode_collage(block, scheme, block_cfg).code;
    });
    return code;
}

BlockwiseCode encode_whole(const RasterImage& x, const PartitionScheme& scheme, const EncoderConfig& cfg, Method method)
{
    auto code = empty_code(x, x.width, x.height, method);
    if (method == Method::pifs) code.pifs_blocks.push_back(encode_pifs(x, scheme, cfg));
    else code.collage_blocks.push_back(encode_collage(x, scheme, cfg).code);
    return code;
}

std::vector<CollageCode> collage_blocks(const BlockwiseCode& code)
{
    if (code.method == Method::collage) return code.collage_blocks;
    std::vector<CollageCode> out;
    out.reserve(code.pifs_blocks.size());
    for (const auto& block : code.pifs_blocks) out.push_back(to_collage(block));
    return out;
}

BlockwiseDecode decode_blockwise(const BlockwiseCode& code, const SolveConfig& cfg, int scale)
{
    if (scale < 1) throw ArgumentError("magnification must be at least 1");
    const auto blocks = collage_blocks(code);
    if (blocks.size() != code.block_count()) throw ShapeError("block count does not match the image tiling");

    std::vector<DecodeResult> parts(blocks.size());
    SolveConfig block_cfg = cfg;
    const bool parallel_blocks = blocks.size() > 1;
    if (parallel_blocks) block_cfg.threads = 1;
    const bool tiled_init = cfg.init.kind == InitialGuess::Kind::image && blocks.size() > 1;
    if (tiled_init && !cfg.init.image.same_shape(RasterImage(code.width, code.height, code.channels)))
        throw ShapeError("initial image does not match the coded image");
    parallel_for(blocks.size(), parallel_blocks ? cfg.threads : 1, [&](std::size_t i) {
        SolveConfig local = block_cfg;
        if (tiled_init)
            local.init = InitialGuess::from(extract_block(cfg.init.image, code.block_width, code.block_height, i));
        parts[i] = decode_magnified(blocks[i], scale, local);
    });

    BlockwiseDecode out;
    out.image = RasterImage(code.width * scale, code.height * scale, code.channels);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        insert_block(out.image, parts[i].image, i);
        out.iterations = std::max(out.iterations, parts[i].iterations);
        out.final_step = std::max(out.final_step, parts[i].final_step);
        out.converged = out.converged && parts[i].converged;
    }
    return out;
}

}  // namespace ncollage
