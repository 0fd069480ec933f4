#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ismo/dataset.hpp"
#include "ismo/evaluator.hpp"
#include "json.hpp"

using namespace ismo;
namespace fs = std::filesystem;

namespace {

Tensor random_surface(int h, int w, Rng& rng) {
    Tensor t({h, w, 3});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2, 2);
    return t;
}

// one small dataset shared by the integration cases
const DatasetManifest& tiny_manifest() {
    static const DatasetManifest m = [] {
        DatasetGenConfig cfg;
        cfg.states = 6;
        cfg.textures = 3;
        cfg.lights = 2;
        cfg.cameras = 1;
        cfg.unknown_texture_id = 2;
        cfg.seed = 41;
        fs::remove_all("eval_ds");
        return generate_dataset(cfg, "eval_ds");
    }();
    return m;
}

}  // namespace

TEST_CASE("e3d agrees with a direct norm-ratio computation") {
    Rng rng(1);
    for (int it = 0; it < 100; ++it) {
        const Tensor gt = random_surface(9, 9, rng);
        const Tensor pred = random_surface(9, 9, rng);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            num += (gt[i] - pred[i]) * (gt[i] - pred[i]);
            den += gt[i] * gt[i];
        }
        const double want = std::sqrt(num / den);
        CHECK(e3d(pred, gt) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("e3d fixed points and invariances") {
    Rng rng(2);
    const Tensor gt = random_surface(7, 7, rng);
    CHECK(e3d(gt, gt) == 0.0);

    Tensor zeros(gt.shape());
    CHECK(e3d(zeros, gt) == 1.0);  // the residual is the ground truth itself

    // scaling both surfaces jointly leaves the ratio unchanged
    Tensor gs(gt.shape()), ps(gt.shape());
    const Tensor pred = random_surface(7, 7, rng);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        gs[i] = 3.7 * gt[i];
        ps[i] = 3.7 * pred[i];
    }
    CHECK(e3d(ps, gs) == doctest::Approx(e3d(pred, gt)).epsilon(1e-12));

    // batch form averages the per-sample ratios
    Tensor bp({2, 7, 7, 3}), bg({2, 7, 7, 3});
    const Tensor p2 = random_surface(7, 7, rng), g2 = random_surface(7, 7, rng);
    std::copy(pred.data(), pred.data() + pred.size(), bp.data());
    std::copy(p2.data(), p2.data() + p2.size(), bp.data() + pred.size());
    std::copy(gt.data(), gt.data() + gt.size(), bg.data());
    std::copy(g2.data(), g2.data() + g2.size(), bg.data() + gt.size());
    CHECK(e3d(bp, bg) == doctest::Approx(0.5 * (e3d(pred, gt) + e3d(p2, g2))).epsilon(1e-12));
}

TEST_CASE("e3d rejects malformed inputs and zero-norm ground truth") {
    Rng rng(3);
    const Tensor a = random_surface(5, 5, rng);
    CHECK_THROWS_AS(e3d(a, random_surface(6, 6, rng)), MetricError);

    Tensor bg({3, 5, 5, 3});
    Tensor bp({3, 5, 5, 3});
    for (std::size_t i = 0; i < bg.size(); ++i) {
        bg[i] = rng.uniform(-1, 1);
        bp[i] = rng.uniform(-1, 1);
    }
    // zero out sample 1's ground truth; the error must name that index
    std::fill(bg.data() + 75, bg.data() + 150, 0.0);
    CHECK_THROWS_WITH_AS(e3d(bp, bg), doctest::Contains("index 1"), MetricError);
}

TEST_CASE("evaluate partitions the test frames by texture and illumination") {
    const DatasetManifest& m = tiny_manifest();
    Rng rng(4);
    RecNet net(RecNetConfig::full(), rng);
    const EvalReport rep = evaluate(net, nullptr, m, {});

    const int expected = static_cast<int>(m.test_states.size()) * m.renders_per_state;
    CHECK(rep.overall.count == expected);
    CHECK(rep.overall.mean > 0);
    CHECK(rep.sad_mean > 0);

    int tex_total = 0, illum_total = 0;
    for (const auto& [k, v] : rep.per_texture) {
        CHECK(k >= 0);
        CHECK(k < m.num_textures);
        tex_total += v.count;
    }
    for (const auto& [k, v] : rep.per_illumination) {
        CHECK(k >= 0);
        CHECK(k < m.num_lights);
        illum_total += v.count;
    }
    CHECK(tex_total == expected);
    CHECK(illum_total == expected);
    CHECK(rep.unknown_texture_id == 2);
    CHECK(rep.known_texture_mean > 0);
    CHECK(rep.unknown_texture_mean > 0);
    // known/unknown means recombine to the overall mean (weighted by count)
    const int unk = rep.per_texture.at(2).count;
    const double recombined =
        (rep.known_texture_mean * (expected - unk) + rep.unknown_texture_mean * unk) / expected;
    CHECK(rep.overall.mean == doctest::Approx(recombined).epsilon(1e-12));
}

TEST_CASE("occlusion sweep contracts") {
    const DatasetManifest& m = tiny_manifest();
    Rng rng(5);
    RecNet net(RecNetConfig::full(), rng);
    OcclusionConfig cfg;
    cfg.radii = {0, 4};
    cfg.counts = {0, 2};
    cfg.images_per_cell = 2;
    cfg.seed = 6;
    const OcclusionResult res = occlusion_sweep(net, nullptr, m, cfg);
    REQUIRE(res.mean_e3d.size() == 2);
    REQUIRE(res.mean_e3d[0].size() == 2);
    // radius 0 or count 0 reproduces the unoccluded baseline bit for bit
    CHECK(res.mean_e3d[0][0] == res.baseline);
    CHECK(res.mean_e3d[0][1] == res.baseline);
    CHECK(res.mean_e3d[1][0] == res.baseline);
    CHECK(std::isfinite(res.mean_e3d[1][1]));

    const OcclusionResult again = occlusion_sweep(net, nullptr, m, cfg);
    CHECK(again.baseline == res.baseline);
    CHECK(again.mean_e3d == res.mean_e3d);

    OcclusionConfig bad = cfg;
    bad.radii = {4, 2000};
    CHECK_THROWS_AS(occlusion_sweep(net, nullptr, m, bad), std::invalid_argument);
    bad = cfg;
    bad.images_per_cell = 0;
    CHECK_THROWS_AS(occlusion_sweep(net, nullptr, m, bad), std::invalid_argument);
}

TEST_CASE("throughput measurement is well-formed") {
    Rng rng(7);
    RecNet net(RecNetConfig::full(), rng);
    SegmenterConfig sc;
    Rng rng2(8);
    ODNet od(sc, rng2);
    std::vector<ImageU8> frames(2, ImageU8(224, 224));
    Rng pix(9);
    for (auto& f : frames)
        for (auto& b : f.rgb) b = static_cast<std::uint8_t>(pix.uniform_int(0, 255));

    const ThroughputReport rep = measure_throughput(net, &od, frames, 0, 0);
    CHECK(rep.warmup == 3);   // floors enforced
    CHECK(rep.iters == 10);
    for (const TimingStats* st : {&rep.full_pipeline, &rep.reconstruct_only}) {
        REQUIRE(st->samples_s.size() == 10);
        const auto [mn, mx] = std::minmax_element(st->samples_s.begin(), st->samples_s.end());
        CHECK(st->mean_s >= *mn);
        CHECK(st->mean_s <= *mx);
        CHECK(st->p50_s >= *mn);
        CHECK(st->p50_s <= *mx);
        CHECK(st->p99_s >= st->p50_s);
        CHECK(st->fps == doctest::Approx(1.0 / st->mean_s));
    }
    // segmentation can only add work
    CHECK(rep.full_pipeline.mean_s >= 0.5 * rep.reconstruct_only.mean_s);
    CHECK_THROWS_AS(measure_throughput(net, nullptr, {}, 3, 10), std::invalid_argument);
}

TEST_CASE("report serialization carries every section") {
    const DatasetManifest& m = tiny_manifest();
    Rng rng(10);
    RecNet net(RecNetConfig::full(), rng);
    const EvalReport rep = evaluate(net, nullptr, m, {});
    OcclusionConfig ocfg;
    ocfg.radii = {0};
    ocfg.counts = {0};
    ocfg.images_per_cell = 1;
    const OcclusionResult occ = occlusion_sweep(net, nullptr, m, ocfg);
    std::vector<ImageU8> frames(1, ImageU8(224, 224));
    const ThroughputReport thr = measure_throughput(net, nullptr, frames, 3, 10);

    const auto j = nlohmann::json::parse(report_to_json(rep, &occ, &thr));
    CHECK(j["e3d"]["mean"].get<double>() == rep.overall.mean);
    CHECK(j["e3d"]["count"].get<int>() == rep.overall.count);
    CHECK(j["per_texture"].size() == rep.per_texture.size());
    CHECK(j["per_illumination"].size() == rep.per_illumination.size());
    CHECK(j["occlusion"]["baseline"].get<double>() == occ.baseline);
    CHECK(j["throughput"]["reconstruct_only"]["fps"].get<double>() ==
          thr.reconstruct_only.fps);

    // sections are optional
    const auto j2 = nlohmann::json::parse(report_to_json(rep, nullptr, nullptr));
    CHECK(!j2.contains("occlusion"));
    CHECK(!j2.contains("throughput"));

    fs::remove_all("eval_ds");
}
