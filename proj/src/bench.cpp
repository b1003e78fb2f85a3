#include "ncollage/bench.hpp"

#include "ncollage/blockwise.hpp"
#include "ncollage/codec.hpp"
#include "ncollage/error.hpp"
#include "ncollage/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <tuple>

namespace ncollage {

const std::vector<std::string>& bench_methods()
{
    static const std::vector<std::string> names{"collage", "dct", "pifs", "pifs-aug"};
    return names;
}

bool is_bench_method(std::string_view name)
{
    const auto& names = bench_methods();
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string BenchConfig::hash() const
{
    std::ostringstream canon;
    canon.precision(17);
    canon << scheme.range_size << ',' << scheme.domain_size << ',' << scheme.domain_stride << ',' << block_size << ','
          << epsilon << ',' << aux_count << ',' << gd_steps << ',' << dct_patch << ',' << repeats << ',' << tolerance
          << ',' << max_iters << ',' << seed;
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : canon.str()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    double bpp = 0.0;
    double psnr_db = 0.0;
};

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
auto timed(F&& f, double& seconds)
{
    const auto start = Clock::now();
    auto result = f();
    seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

Outcome run_once(const RasterImage& x, const std::string& method, const BenchConfig& cfg, double& enc_s, double& dec_s)
{
    if (method == "dct") {
        const auto code = timed([&] { return block_dct_encode(x, cfg.dct_patch); }, enc_s);
        const auto y = timed([&] { return block_dct_decode(code); }, dec_s);
        return {dct_bpp(code), psnr(x, y)};
    }

    const Method m = method == "collage" ? Method::collage : Method::pifs;
    EncoderConfig ec = m == Method::collage ? EncoderConfig::collage_defaults() : EncoderConfig::pifs_defaults();
    ec.use_augmentations = method == "pifs-aug";
    ec.aux_count = m == Method::collage ? cfg.aux_count : 0;
    ec.gd_steps = cfg.gd_steps;
    ec.seed = cfg.seed;
    ec.threads = cfg.threads;
    const QuantizationSpec spec{cfg.epsilon};

    const auto stored = timed(
        [&] {
            const auto code = cfg.block_size > 0 ? encode_blockwise(x, cfg.block_size, cfg.scheme, ec, m)
                                                 : encode_whole(x, cfg.scheme, ec, m);
            return quantize(code, spec);
        },
        enc_s);

    SolveConfig sc;
    sc.tolerance = cfg.tolerance;
    sc.max_iters = cfg.max_iters;
    sc.threads = cfg.threads;
    const auto decoded = timed([&] { return decode_blockwise(stored, sc); }, dec_s);
    return {code_bpp(stored, spec).total, psnr(x, decoded.image)};
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

BenchReport bench(const std::vector<BenchImage>& images, const std::vector<std::string>& methods, const BenchConfig& cfg)
{
    if (images.empty()) throw ArgumentError("no images to benchmark");
    if (methods.empty()) throw ArgumentError("no methods to benchmark");
    if (cfg.repeats < 1) throw ArgumentError("repeats must be at least 1");
    for (const auto& m : methods)
        if (!is_bench_method(m)) throw ArgumentError("unknown method: " + m);

    BenchReport report;
    report.config_hash = cfg.hash();
    report.repeats = cfg.repeats;
    for (const auto& img : images)
        report.images.push_back({img.id, img.image.width, img.image.height, img.image.channels});

    // Methods run one after another so their timings do not overlap.
    for (const auto& img : images) {
        for (const auto& method : methods) {
            BenchRow row{img.id, method, 0.0, 0.0, 0.0, 0.0, {}};
            std::vector<double> enc;
            std::vector<double> dec;
            try {
                for (int r = 0; r < cfg.repeats; ++r) {
                    double e = 0.0;
                    double d = 0.0;
                    const auto out = run_once(img.image, method, cfg, e, d);
                    row.bpp = out.bpp;
                    row.psnr_db = out.psnr_db;
                    enc.push_back(e);
                    dec.push_back(d);
                }
                row.encode_s = median(enc);
                row.decode_s = median(dec);
            } catch (const std::exception& ex) {
                row = BenchRow{img.id, method, 0.0, 0.0, 0.0, 0.0, ex.what()};
            }
            report.rows.push_back(std::move(row));
        }
    }
    std::stable_sort(report.rows.begin(), report.rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.image, a.method) < std::tie(b.image, b.method);
    });
    return report;
}

std::string BenchReport::to_csv() const
{
    std::string out = "image,method,bpp,psnr_db,encode_s,decode_s,error\n";
    for (const auto& r : rows) {
        out += csv_field(r.image) + ',' + csv_field(r.method) + ',' + number(r.bpp) + ',' + number(r.psnr_db) + ',' +
               number(r.encode_s) + ',' + number(r.decode_s) + ',' + csv_field(r.error) + '\n';
    }
    return out;
}

std::string BenchReport::to_json() const
{
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["repeats"] = repeats;
    j["timing"] = "median wall-clock seconds, file I/O excluded, methods run sequentially";
    j["images"] = nlohmann::json::array();
    for (const auto& i : images)
        j["images"].push_back({{"id", i.id}, {"width", i.width}, {"height", i.height}, {"channels", i.channels}});
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
        j["rows"].push_back({{"image", r.image},
                             {"method", r.method},
                             {"bpp", r.bpp},
                             {"psnr_db", r.psnr_db},
                             {"encode_s", r.encode_s},
                             {"decode_s", r.decode_s},
                             {"error", r.error},
                             {"config_hash", config_hash}});
    }
    return j.dump(2) + '\n';
}

}  // namespace ncollage
