#include "ncollage/bench.hpp"
#include "ncollage/blockwise.hpp"
#include "ncollage/codec.hpp"
#include "ncollage/collage_encoder.hpp"
#include "ncollage/error.hpp"
#include "ncollage/metrics.hpp"
#include "ncollage/parallel.hpp"
#include "ncollage/raster.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ncollage;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

struct Options {
    std::string input;
    std::string second;
    std::string output;
    std::string method = "collage";
    int range = 8;
    int domain = 16;
    int stride = 16;
    int block = 0;
    int aux = -1;  // -1: method default
    int epsilon = 3;
    std::uint64_t seed = 0;
    int gd_steps = 200;
    bool augment = false;
    int threads = 0;
    int scale = 1;
    bool force = false;
    double tol = 1e-8;
    int max_iters = 200;
    std::string scales = "1,2,4";
    int fractal_range = 0;
    int patch = 16;
    std::string methods = "pifs,collage,dct";
    int repeats = 3;
};

int resolve_threads(int flag)
{
    if (const char* env = std::getenv("NCOLLAGE_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
        throw ArgumentError(std::string("NCOLLAGE_THREADS is not a positive integer: ") + env);
    }
    return flag > 0 ? flag : hardware_threads();
}

void emit(const json& j)
{
    std::cout << j.dump() << '\n';
}

std::vector<int> parse_int_list(const std::string& text)
{
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw ArgumentError("bad integer list: " + text);
        }
        if (used != item.size() || v < 1) throw ArgumentError("bad integer list: " + text);
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<std::string> parse_name_list(const std::string& text)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = text.find(',', pos);
        out.push_back(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

json bpp_json(const BppBreakdown& b)
{
    return {{"total", b.total}, {"bpp_a", b.bpp_a}, {"bpp_b", b.bpp_b}, {"bpp_u", b.bpp_u}, {"bpp_address", b.bpp_address}};
}

json header_json(const ContainerHeader& h)
{
    return {{"kind", h.kind == ContainerKind::pifs ? "pifs" : "collage"},
            {"version", h.version},
            {"channels", h.channels},
            {"width", h.width},
            {"height", h.height},
            {"block_width", h.block_width},
            {"block_height", h.block_height},
            {"range", h.scheme.range_size},
            {"domain", h.scheme.domain_size},
            {"stride", h.scheme.domain_stride},
            {"augmentations", h.augmentations},
            {"epsilon", h.epsilon},
            {"ranges_per_block", h.ranges_per_block},
            {"domains_per_plane", h.domains_per_plane},
            {"aux", h.aux_count},
            {"bits_a", h.bits_a},
            {"bits_b", h.bits_b},
            {"bits_address", h.bits_address},
            {"payload_bits", h.payload_bits},
            {"bpp", bpp_json(h.bpp())}};
}

SolveConfig solve_config(const Options& o, int threads)
{
    SolveConfig sc;
    sc.tolerance = o.tol;
    sc.max_iters = o.max_iters;
    sc.allow_noncontractive = o.force;
    sc.threads = threads;
    return sc;
}

int cmd_encode(const Options& o)
{
    const int threads = resolve_threads(o.threads);
    const Method method = parse_method(o.method);
    const PartitionScheme scheme{o.range, o.domain, o.stride};
    const QuantizationSpec spec{o.epsilon};
    spec.validate();

    EncoderConfig cfg = method == Method::pifs ? EncoderConfig::pifs_defaults() : EncoderConfig::collage_defaults();
    cfg.use_augmentations = o.augment;
    cfg.aux_count = o.aux >= 0 ? o.aux : (method == Method::pifs ? 0 : 3);
    if (method == Method::pifs && cfg.aux_count != 0) throw ArgumentError("--aux applies to the collage method only");
    cfg.gd_steps = o.gd_steps;
    cfg.seed = o.seed;
    cfg.threads = threads;

    const RasterImage x = load_image(o.input);
    const BlockwiseCode raw =
        o.block > 0 ? encode_blockwise(x, o.block, scheme, cfg, method) : encode_whole(x, scheme, cfg, method);
    serialize(raw, spec, o.output);
    const BlockwiseCode stored = quantize(raw, spec);
    const ContainerHeader header = describe(raw, spec);

    // Surrogate loss and collage bound of the stored code, per block.
    const auto blocks = collage_blocks(stored);
    double surrogate = 0.0;
    double worst_bound = 0.0;
    double worst_L = 0.0;
    bool contractive = true;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const RasterImage xb = extract_block(x, stored.block_width, stored.block_height, b);
        const RasterImage fx = apply_collage(xb, blocks[b], threads);
        for (std::size_t i = 0; i < xb.data.size(); ++i) surrogate += (xb.data[i] - fx.data[i]) * (xb.data[i] - fx.data[i]);
        const auto ct = ct_bound(xb, blocks[b], threads);
        worst_L = std::max(worst_L, ct.L);
        contractive = contractive && ct.L < 1.0;
        worst_bound = std::max(worst_bound, ct.bound);
    }

    json out{{"command", "encode"},
             {"output", o.output},
             {"header", header_json(header)},
             {"bpp", header.bpp().total},
             {"surrogate_loss", surrogate},
             {"lipschitz", worst_L},
             {"contractive", contractive}};
    if (contractive) {
        out["ct_bound_linf"] = worst_bound;
        out["psnr_lower_bound"] = psnr_from_linf(worst_bound);
        // Saving to 8 bits moves each pixel by at most half a level.
        out["psnr_lower_bound_8bit"] = psnr_from_linf(worst_bound + 0.5 / 255.0);
    }
    emit(out);
    return 0;
}

int cmd_decode(const Options& o)
{
    const int threads = resolve_threads(o.threads);
    if (o.scale < 1) throw ArgumentError("--scale must be at least 1");
    const Container c = deserialize(o.input);
    const auto result = decode_blockwise(c.code, solve_config(o, threads), o.scale);
    save_image(result.image, o.output);
    emit({{"command", "decode"},
          {"output", o.output},
          {"width", result.image.width},
          {"height", result.image.height},
          {"iterations", result.iterations},
          {"final_step", result.final_step},
          {"converged", result.converged}});
    return 0;
}

int cmd_fractalize(const Options& o)
{
    const int threads = resolve_threads(o.threads);
    const auto scales = parse_int_list(o.scales);
    const RasterImage x = load_image(o.input);
    if (x.width != x.height) throw ArgumentError("fractalize needs a square image");

    EncoderConfig cfg = EncoderConfig::collage_defaults();
    cfg.aux_count = 0;
    cfg.gd_steps = o.gd_steps;
    cfg.seed = o.seed;
    cfg.threads = threads;
    const auto enc = fractalize_encode(x, cfg, o.fractal_range);

    json files = json::array();
    const std::string ext = x.channels == 3 ? ".ppm" : ".pgm";
    for (int s : scales) {
        const auto result = decode_magnified(enc.code, s, solve_config(o, threads));
        const std::string path = o.output + "_x" + std::to_string(s) + ext;
        save_image(result.image, path);
        files.push_back({{"scale", s},
                         {"path", path},
                         {"width", result.image.width},
                         {"height", result.image.height},
                         {"iterations", result.iterations},
                         {"converged", result.converged}});
    }
    emit({{"command", "fractalize"},
          {"surrogate_loss", enc.surrogate_loss},
          {"lipschitz", lipschitz_bound(enc.code).L},
          {"outputs", files}});
    return 0;
}

int cmd_dct(const Options& o)
{
    const RasterImage x = load_image(o.input);
    const auto code = block_dct_encode(x, o.patch);
    const auto y = block_dct_decode(code);
    if (!o.output.empty()) save_image(y, o.output);
    emit({{"command", "dct"}, {"patch", o.patch}, {"patches", code.patches()}, {"bpp", dct_bpp(code)}, {"psnr_db", psnr(x, y)}});
    return 0;
}

int cmd_psnr(const Options& o)
{
    const RasterImage a = load_image(o.input);
    const RasterImage b = load_image(o.second);
    emit({{"command", "psnr"}, {"psnr_db", psnr(a, b)}, {"mse", mse(a, b)}});
    return 0;
}

int cmd_bench(const Options& o)
{
    const int threads = resolve_threads(o.threads);
    const auto methods = parse_name_list(o.methods);
    for (const auto& m : methods)
        if (!is_bench_method(m)) throw ArgumentError("unknown method: " + m);

    if (!fs::is_directory(o.input)) throw ArgumentError("not a directory: " + o.input);
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(o.input)) {
        const auto ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) paths.push_back(entry.path());
    }
    if (paths.empty()) throw ArgumentError("no .pgm/.ppm images in " + o.input);
    std::sort(paths.begin(), paths.end());

    std::vector<BenchImage> images;
    for (const auto& p : paths) images.push_back({p.filename().string(), load_image(p)});

    BenchConfig cfg;
    cfg.scheme = {o.range, o.domain, o.stride};
    cfg.block_size = o.block;
    cfg.epsilon = o.epsilon;
    cfg.aux_count = o.aux >= 0 ? o.aux : 3;
    cfg.gd_steps = o.gd_steps;
    cfg.dct_patch = o.patch;
    cfg.repeats = o.repeats;
    cfg.tolerance = o.tol;
    cfg.max_iters = o.max_iters;
    cfg.seed = o.seed;
    cfg.threads = threads;
    const auto report = bench(images, methods, cfg);

    const std::string csv_path = o.output + ".csv";
    const std::string json_path = o.output + ".json";
    std::ofstream(csv_path) << report.to_csv();
    std::ofstream(json_path) << report.to_json();
    if (!fs::exists(csv_path) || !fs::exists(json_path)) throw IoError("cannot write reports under " + o.output);

    std::size_t failures = 0;
    for (const auto& r : report.rows) failures += r.error.empty() ? 0 : 1;
    emit({{"command", "bench"},
          {"csv", csv_path},
          {"json", json_path},
          {"rows", report.rows.size()},
          {"failures", failures},
          {"config_hash", report.config_hash}});
    return 0;
}

int cmd_inspect(const Options& o)
{
    const Container c = deserialize(o.input);
    json out = header_json(c.header);
    out["command"] = "inspect";
    emit(out);
    return 0;
}

void add_scheme(CLI::App* sub, Options& o)
{
    sub->add_option("--range", o.range, "range cell size")->check(CLI::PositiveNumber);
    sub->add_option("--domain", o.domain, "domain cell size")->check(CLI::PositiveNumber);
    sub->add_option("--stride", o.stride, "domain stride")->check(CLI::PositiveNumber);
    sub->add_option("--block", o.block, "block size, 0 for the whole image")->check(CLI::NonNegativeNumber);
}

void add_threads(CLI::App* sub, Options& o)
{
    sub->add_option("--threads", o.threads, "worker threads (default: all cores; NCOLLAGE_THREADS wins)")
        ->check(CLI::NonNegativeNumber);
}

void add_solver(CLI::App* sub, Options& o)
{
    sub->add_option("--tol", o.tol, "fixed-point step tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--max-iters", o.max_iters, "iteration cap")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Self-similarity image codec"};
    app.require_subcommand(1);
    Options o;

    auto* encode = app.add_subcommand("encode", "encode an image into a code container");
    encode->add_option("input", o.input, "PGM/PPM image")->required();
    encode->add_option("output", o.output, "container path")->required();
    encode->add_option("--method", o.method, "pifs or collage");
    add_scheme(encode, o);
    encode->add_option("--aux", o.aux, "aux patches (collage)")->check(CLI::NonNegativeNumber);
    encode->add_option("--epsilon", o.epsilon, "decimal digits kept")->check(CLI::Range(2, 5));
    encode->add_option("--seed", o.seed, "aux noise seed");
    encode->add_option("--gd-steps", o.gd_steps, "gradient refinement steps")->check(CLI::NonNegativeNumber);
    encode->add_flag("--augment", o.augment, "search rotated/flipped/negated domains (pifs)");
    add_threads(encode, o);

    auto* decode = app.add_subcommand("decode", "decode a container to an image");
    decode->add_option("input", o.input, "container path")->required();
    decode->add_option("output", o.output, "image path")->required();
    decode->add_option("--scale", o.scale, "magnification factor")->check(CLI::PositiveNumber);
    decode->add_flag("--force", o.force, "decode even without a contractivity certificate");
    add_solver(decode, o);
    add_threads(decode, o);

    auto* fractalize = app.add_subcommand("fractalize", "fit a global self-similar code and decode it at several scales");
    fractalize->add_option("input", o.input, "square PGM/PPM image")->required();
    fractalize->add_option("prefix", o.output, "output path prefix")->required();
    fractalize->add_option("--scales", o.scales, "comma-separated magnifications");
    fractalize->add_option("--range", o.fractal_range, "range cell size, 0 for half the side")
        ->check(CLI::NonNegativeNumber);
    fractalize->add_option("--gd-steps", o.gd_steps, "gradient refinement steps")->check(CLI::NonNegativeNumber);
    fractalize->add_option("--seed", o.seed, "seed");
    add_solver(fractalize, o);
    add_threads(fractalize, o);

    auto* dct = app.add_subcommand("dct", "DC-only block DCT baseline");
    dct->add_option("input", o.input, "PGM/PPM image")->required();
    dct->add_option("output", o.output, "optional decoded image");
    dct->add_option("--patch", o.patch, "patch size")->check(CLI::PositiveNumber);

    auto* psnr_cmd = app.add_subcommand("psnr", "PSNR between two images");
    psnr_cmd->add_option("a", o.input, "image")->required();
    psnr_cmd->add_option("b", o.second, "image")->required();

    auto* bench_cmd = app.add_subcommand("bench", "rate/distortion/timing report over a directory");
    bench_cmd->add_option("dir", o.input, "directory of PGM/PPM images")->required();
    bench_cmd->add_option("prefix", o.output, "report path prefix (.csv and .json are appended)")->required();
    bench_cmd->add_option("--methods", o.methods, "comma-separated: pifs, pifs-aug, collage, dct");
    add_scheme(bench_cmd, o);
    bench_cmd->add_option("--aux", o.aux, "aux patches (collage)")->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--epsilon", o.epsilon, "decimal digits kept")->check(CLI::Range(2, 5));
    bench_cmd->add_option("--gd-steps", o.gd_steps, "gradient refinement steps")->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--patch", o.patch, "DCT patch size")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--repeats", o.repeats, "timed runs per cell")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", o.seed, "seed");
    add_solver(bench_cmd, o);
    add_threads(bench_cmd, o);

    auto* inspect = app.add_subcommand("inspect", "print a container header");
    inspect->add_option("input", o.input, "container path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*encode) return cmd_encode(o);
        if (*decode) return cmd_decode(o);
        if (*fractalize) return cmd_fractalize(o);
        if (*dct) return cmd_dct(o);
        if (*psnr_cmd) return cmd_psnr(o);
        if (*bench_cmd) return cmd_bench(o);
        if (*inspect) return cmd_inspect(o);
    } catch (const ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const PartitionError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ShapeError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitIo;
    } catch (const FormatError& e) {
        std::cerr << "FormatError: " << e.what() << '\n';
        return kExitIo;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitUsage;
}
