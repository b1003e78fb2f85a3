#include "doctest.h"
#include "support.hpp"

#include "ncollage/error.hpp"
#include "ncollage/raster.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

using namespace ncollage;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "ncollage_raster_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& p, const std::string& header, const std::vector<unsigned char>& body)
{
    std::ofstream out(p, std::ios::binary);
    out << header;
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
}

std::vector<unsigned char> read_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<unsigned char> payload(const fs::path& p, std::size_t n)
{
    const auto all = read_bytes(p);
    return {all.end() - static_cast<std::ptrdiff_t>(n), all.end()};
}

}  // namespace

TEST_SUITE("raster")
{
    TEST_CASE("P5 bytes scale to [0,1]")
    {
        const auto p = temp_file("a.pgm");
        write_bytes(p, "P5\n2 2\n255\n", {0, 255, 0, 255});
        const auto img = load_image(p);
        CHECK(img.width == 2);
        CHECK(img.height == 2);
        CHECK(img.channels == 1);
        CHECK(img.data == std::vector<double>{0, 1, 0, 1});
    }

    TEST_CASE("P6 is stored channel-planar")
    {
        const auto p = temp_file("b.ppm");
        write_bytes(p, "P6\n# red pixel\n1 1\n255\n", {255, 0, 0});
        const auto img = load_image(p);
        CHECK(img.channels == 3);
        CHECK(img.data == std::vector<double>{1, 0, 0});

        write_bytes(p, "P6\n2 1\n255\n", {10, 20, 30, 40, 50, 60});
        const auto two = load_image(p);
        CHECK(two.at(0, 0, 1) == doctest::Approx(40 / 255.0));
        CHECK(two.at(2, 0, 0) == doctest::Approx(30 / 255.0));
    }

    TEST_CASE("16-bit samples are big-endian")
    {
        const auto p = temp_file("c.pgm");
        write_bytes(p, "P5 2 1 65535\n", {0xff, 0xff, 0x80, 0x00});
        const auto img = load_image(p);
        CHECK(img.data[0] == 1.0);
        CHECK(img.data[1] == doctest::Approx(32768.0 / 65535.0));
    }

    TEST_CASE("malformed and truncated files")
    {
        const auto p = temp_file("bad.pgm");
        write_bytes(p, "P4\n2 2\n", {0});
        CHECK_THROWS_AS(load_image(p), ParseError);
        write_bytes(p, "P5\n2 2\n255\n", {1, 2, 3});
        CHECK_THROWS_AS(load_image(p), ParseError);
        write_bytes(p, "P5\n2 x\n255\n", {1, 2, 3, 4});
        CHECK_THROWS_AS(load_image(p), ParseError);
        write_bytes(p, "P5\n2 2\n70000\n", {1, 2, 3, 4});
        CHECK_THROWS_AS(load_image(p), ParseError);
        CHECK_THROWS_AS(load_image(temp_file("missing.pgm")), IoError);
    }

    TEST_CASE("save clamps, scales and rounds half away from zero")
    {
        const auto p = temp_file("s.pgm");
        RasterImage img(4, 1, 1);
        img.data = {0.0, 1.0, -0.2, 0.5};
        save_image(img, p);
        CHECK(payload(p, 4) == std::vector<unsigned char>{0, 255, 0, 128});
        CHECK_THROWS_AS(save_image(img, "/nonexistent_dir/x.pgm"), IoError);
    }

    TEST_CASE("save then load stays within half a level")
    {
        std::mt19937_64 rng(7);
        for (int channels : {1, 3}) {
            const auto img = testsupport::random_image(rng, 9, 5, channels, -0.3, 1.3);
            const auto p = temp_file(channels == 1 ? "r.pgm" : "r.ppm");
            save_image(img, p);
            const auto back = load_image(p);
            REQUIRE(back.same_shape(img));
            for (std::size_t i = 0; i < img.data.size(); ++i)
                CHECK(std::abs(back.data[i] - std::clamp(img.data[i], 0.0, 1.0)) <= 1.0 / 510 + 1e-12);
        }
    }

    TEST_CASE("range tiling")
    {
        RasterImage img(4, 4, 1);
        const auto cells = partition_ranges(img, {2, 2, 2});
        REQUIRE(cells.size() == 4);
        CHECK((cells[0].y == 0 && cells[0].x == 0));
        CHECK((cells[1].y == 0 && cells[1].x == 2));
        CHECK((cells[2].y == 2 && cells[2].x == 0));
        CHECK((cells[3].y == 2 && cells[3].x == 2));
        CHECK(partition_ranges(RasterImage(2, 2, 1), {2, 2, 2}).size() == 1);
        CHECK_THROWS_AS(partition_ranges(RasterImage(3, 3, 1), {2, 2, 2}), PartitionError);
    }

    TEST_CASE("ranges cover every pixel exactly once")
    {
        for (auto [w, h, c, r] : {std::tuple{8, 4, 1, 2}, std::tuple{12, 6, 3, 3}, std::tuple{16, 16, 1, 4}}) {
            RasterImage img(w, h, c);
            const auto cells = partition_ranges(img, {r, r, r});
            std::set<std::tuple<int, int, int>> seen;
            for (const auto& cell : cells)
                for (int y = 0; y < r; ++y)
                    for (int x = 0; x < r; ++x) CHECK(seen.insert({cell.channel, cell.y + y, cell.x + x}).second);
            CHECK(seen.size() == static_cast<std::size_t>(w * h * c));
        }
    }

    TEST_CASE("scheme validation")
    {
        CHECK_THROWS_AS(make_layout(8, 8, 1, {2, 3, 3}), PartitionError);  // non-integral pooling
        CHECK_THROWS_AS(make_layout(8, 8, 1, {4, 2, 2}), PartitionError);  // domain smaller than range
        CHECK_THROWS_AS(make_layout(8, 8, 1, {2, 4, 6}), PartitionError);  // stride beyond domain
        CHECK_THROWS_AS(make_layout(8, 8, 1, {2, 16, 16}), PartitionError);
        const auto l = make_layout(16, 8, 1, {4, 8, 4});
        CHECK(l.domains_per_plane() == 3 * 1);
        CHECK(l.range_count() == 8);
    }

    TEST_CASE("average pooling")
    {
        RasterImage img(4, 4, 1);
        for (int i = 0; i < 16; ++i) img.data[i] = i + 1;
        const auto bank = extract_domains(img, {2, 4, 4});
        REQUIRE(bank.size() == 1);
        CHECK(std::vector<double>(bank.cell(0).begin(), bank.cell(0).end()) == std::vector<double>{3.5, 5.5, 11.5, 13.5});

        const auto identity = extract_domains(img, {2, 2, 2});
        CHECK(identity.size() == 4);
        CHECK(std::vector<double>(identity.cell(1).begin(), identity.cell(1).end()) == std::vector<double>{3, 4, 7, 8});
    }

    TEST_CASE("pooling keeps constants and stays inside the input range")
    {
        std::mt19937_64 rng(3);
        RasterImage flat(8, 8, 1, 0.3);
        for (double v : extract_domains(flat, {2, 4, 2}).values) CHECK(v == doctest::Approx(0.3));
        const auto img = testsupport::random_image(rng, 8, 8, 1);
        const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
        for (double v : extract_domains(img, {2, 8, 4}).values) {
            CHECK(v >= *lo);
            CHECK(v <= *hi);
        }
    }

    TEST_CASE("augmentations")
    {
        const std::vector<double> cell{1, 2, 3, 4};
        std::vector<double> out(4);
        augment_cell(cell, 2, 1, out);
        CHECK(out == std::vector<double>{3, 1, 4, 2});
        augment_cell(cell, 2, 2, out);
        CHECK(out == std::vector<double>{4, 3, 2, 1});
        const std::vector<double> pair{0.5, -0.5, 0.25, 0.0};
        augment_cell(pair, 2, 4, out);
        CHECK(out == std::vector<double>{-0.5, 0.5, -0.25, -0.0});
        CHECK_THROWS_AS(augment_cell(cell, 2, 8, out), ArgumentError);
    }

    TEST_CASE("augmentations agree with explicit rotations")
    {
        std::mt19937_64 rng(11);
        const auto img = testsupport::random_image(rng, 5, 5, 1);
        for (int id = 0; id < kAugmentationCount; ++id) {
            std::vector<double> out(25);
            augment_cell(img.data, 5, id, out);
            auto expect = testsupport::rotate_cw(img.data, 5, id % 4);
            if (id >= 4)
                for (auto& v : expect) v = -v;
            CHECK(out == expect);
        }
    }

    TEST_CASE("rotation and flip closure")
    {
        std::mt19937_64 rng(5);
        const auto img = testsupport::random_image(rng, 4, 4, 1);
        std::vector<double> cur = img.data;
        std::vector<double> next(16);
        for (int t = 0; t < 4; ++t) {
            augment_cell(cur, 4, 1, next);
            cur = next;
        }
        CHECK(cur == img.data);
        augment_cell(img.data, 4, 4, next);
        augment_cell(std::vector<double>(next), 4, 4, cur);
        CHECK(cur == img.data);
    }

    TEST_CASE("augmented bank layout")
    {
        RasterImage img(4, 4, 2);
        const auto bank = augment_domains(extract_domains(img, {2, 2, 2}));
        REQUIRE(bank.size() == 2 * 4 * 8);
        CHECK(bank.provenance[9].domain_index == 1);
        CHECK(bank.provenance[9].augmentation == 1);
        CHECK(bank.provenance[32].channel == 1);
    }

    TEST_CASE("place and read ranges")
    {
        RasterImage canvas(4, 4, 1, 0.25);
        place_range(canvas, {2, 2, 2}, 0, std::vector<double>(4, 1.0));
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) CHECK(canvas.at(0, y, x) == ((y < 2 && x < 2) ? 1.0 : 0.25));
        const std::vector<double> v{0.1, 0.2, 0.3, 0.4};
        place_range(canvas, {2, 2, 2}, 3, v);
        CHECK(read_range(canvas, {2, 2, 2}, 3) == v);
        CHECK_THROWS_AS(place_range(canvas, {2, 2, 2}, 4, v), IndexError);
        CHECK_THROWS_AS(read_range(canvas, {2, 2, 2}, -1), IndexError);
    }
}
