#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "ismo/dataset.hpp"

using namespace ismo;
namespace fs = std::filesystem;

namespace {

void check_split_invariants(int m, const std::vector<int>& train, const std::vector<int>& test) {
    std::set<int> all;
    for (int s : train) all.insert(s);
    for (int s : test) {
        REQUIRE(all.count(s) == 0);  // disjoint
        all.insert(s);
    }
    REQUIRE(static_cast<int>(all.size()) == m);  // coverage
    REQUIRE(*all.begin() == 0);
    REQUIRE(*all.rbegin() == m - 1);
}

}  // namespace

TEST_CASE("paper split takes the final 20 of each block of 100") {
    std::vector<int> train, test;
    SUBCASE("one block") {
        split_dataset(100, "paper", train, test);
        CHECK(train.size() == 80);
        CHECK(test.size() == 20);
        for (int i = 0; i < 20; ++i) CHECK(test[i] == 80 + i);  // contiguous block
    }
    SUBCASE("two blocks") {
        split_dataset(200, "paper", train, test);
        CHECK(train.size() == 160);
        CHECK(test.size() == 40);
        CHECK(std::count(test.begin(), test.end(), 99) == 1);
        CHECK(std::count(test.begin(), test.end(), 179) == 0);
        CHECK(std::count(test.begin(), test.end(), 180) == 1);
    }
    SUBCASE("full-scale count with a trailing partial block") {
        split_dataset(4648, "paper", train, test);
        CHECK(train.size() == 3728);
        CHECK(test.size() == 920);
    }
    check_split_invariants(static_cast<int>(train.size() + test.size()), train, test);
}

TEST_CASE("small datasets fall back to a proportional split") {
    std::vector<int> train, test;
    split_dataset(50, "paper", train, test);  // below one full block
    CHECK(train.size() == 40);
    CHECK(test.size() == 10);
    check_split_invariants(50, train, test);

    split_dataset(10, "proportional", train, test);
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);
    check_split_invariants(10, train, test);

    CHECK_THROWS_AS(split_dataset(4, "paper", train, test), SplitError);
}

namespace {

std::vector<RenderedFrame> tiny_frames() {
    DeformationConfig dcfg;
    dcfg.seed = 17;
    const auto states = generate_states(3, dcfg);
    RenderConfig rcfg;
    const auto cams = default_cameras(1);
    const auto lights = default_lights(1);
    std::vector<RenderedFrame> frames;
    for (const auto& s : states)
        frames.push_back(render_state(s, 0, lights[0], 0, cams[0], 0, rcfg));
    return frames;
}

}  // namespace

TEST_CASE("zero-translation composites reproduce the footprint exactly") {
    const auto frames = tiny_frames();
    std::vector<ImageU8> black{ImageU8(224, 224)};
    MaskDatasetConfig cfg;
    cfg.count = 6;
    cfg.max_shift = 0;
    cfg.seed = 1;
    const auto samples = build_mask_dataset(frames, black, cfg);
    REQUIRE(samples.size() == 6);
    for (const auto& s : samples) {
        REQUIRE(s.frame_index >= 0);
        CHECK(s.dx == 0);
        CHECK(s.dy == 0);
        CHECK(mask_iou(s.mask, frames[s.frame_index].footprint) == 1.0);
        // composited over black, the image equals the render on the footprint
        CHECK(s.image.rgb == frames[s.frame_index].image.rgb);
    }
}

TEST_CASE("translated masks equal the shifted footprint cropped at borders") {
    const auto frames = tiny_frames();
    const auto backgrounds = make_backgrounds(3, 224, 5);
    MaskDatasetConfig cfg;
    cfg.count = 40;
    cfg.max_shift = 30;
    cfg.seed = 2;
    const auto samples = build_mask_dataset(frames, backgrounds, cfg);
    for (const auto& s : samples) {
        const Mask& fp = frames[s.frame_index].footprint;
        Mask expected(224, 224);
        for (int y = 0; y < 224; ++y)
            for (int x = 0; x < 224; ++x)
                if (fp.at(x, y) && expected.width > x + s.dx && x + s.dx >= 0 &&
                    expected.height > y + s.dy && y + s.dy >= 0)
                    expected.at(x + s.dx, y + s.dy) = 1;
        REQUIRE(s.mask.v == expected.v);
    }
}

TEST_CASE("bulk mask generation always yields well-formed samples") {
    const auto frames = tiny_frames();
    const auto backgrounds = make_backgrounds(3, 224, 7);
    MaskDatasetConfig cfg;
    cfg.count = 1000;
    cfg.seed = 3;
    const auto samples = build_mask_dataset(frames, backgrounds, cfg);
    REQUIRE(samples.size() == 1000);
    for (const auto& s : samples) {
        REQUIRE(s.mask.width == s.image.width);
        REQUIRE(s.mask.height == s.image.height);
        REQUIRE(s.mask.count_nonzero() >= 1);
    }
}

TEST_CASE("mask dataset rejects bad inputs") {
    const auto frames = tiny_frames();
    MaskDatasetConfig cfg;
    cfg.count = 2;
    CHECK_THROWS_AS(build_mask_dataset({}, make_backgrounds(1, 224, 0), cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_mask_dataset(frames, {}, cfg), std::invalid_argument);
    // translation range that cannot keep half the object visible
    MaskDatasetConfig far;
    far.count = 4;
    far.max_shift = 1000;
    far.min_in_frame = 0.99;
    CHECK_THROWS_AS(build_mask_dataset(frames, make_backgrounds(1, 224, 0), far),
                    std::invalid_argument);
}

TEST_CASE("generated datasets are reproducible byte for byte") {
    DatasetGenConfig cfg;
    cfg.states = 6;
    cfg.textures = 2;
    cfg.lights = 1;
    cfg.cameras = 1;
    cfg.seed = 11;
    const std::string dir_a = "ds_repro_a", dir_b = "ds_repro_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    const DatasetManifest a = generate_dataset(cfg, dir_a);
    const DatasetManifest b = generate_dataset(cfg, dir_b);

    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        REQUIRE(f.good());
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    // manifests identical except for the embedded root directory
    auto scrub = [&](std::string s, const std::string& dir) {
        std::size_t pos;
        while ((pos = s.find(dir)) != std::string::npos) s.replace(pos, dir.size(), "ROOT");
        return s;
    };
    CHECK(scrub(slurp(dir_a + "/manifest.json"), dir_a) ==
          scrub(slurp(dir_b + "/manifest.json"), dir_b));
    REQUIRE(a.renderings.size() == b.renderings.size());
    for (std::size_t i = 0; i < a.renderings.size(); ++i)
        CHECK(slurp(dir_a + "/" + a.renderings[i].image_path) ==
              slurp(dir_b + "/" + b.renderings[i].image_path));
    for (int s = 0; s < cfg.states; ++s)
        CHECK(slurp(dir_a + "/" + a.state_paths[s]) == slurp(dir_b + "/" + b.state_paths[s]));

    // manifest round trip preserves the structure
    const DatasetManifest loaded = load_manifest(dir_a + "/manifest.json");
    CHECK(loaded.num_states == a.num_states);
    CHECK(loaded.renders_per_state == a.renders_per_state);
    CHECK(loaded.renderings.size() == a.renderings.size());
    CHECK(loaded.train_states == a.train_states);
    CHECK(loaded.test_states == a.test_states);
    CHECK(loaded.config_hash == a.config_hash);
    CHECK(loaded.unknown_texture_id == a.unknown_texture_id);

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}
