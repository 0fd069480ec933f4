#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "ismo/geometry.hpp"

using namespace ismo;

namespace {

double edge_len(const Tensor& p, int y0, int x0, int y1, int x1) {
    double s = 0;
    for (int c = 0; c < 3; ++c) {
        const double d = p.at3(y0, x0, c) - p.at3(y1, x1, c);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("rest state is the exact flat grid") {
    const SurfaceState rest = make_rest_state(73);
    REQUIRE(rest.points.shape() == std::vector<int>{73, 73, 3});
    CHECK(rest.points.at3(0, 0, 0) == -1.0);
    CHECK(rest.points.at3(0, 0, 1) == -1.0);
    CHECK(rest.points.at3(72, 72, 0) == 1.0);
    CHECK(rest.points.at3(72, 72, 1) == 1.0);
    for (int y = 0; y < 73; ++y)
        for (int x = 0; x < 73; ++x) CHECK(rest.points.at3(y, x, 2) == 0.0);

    // all 4-neighbor edges exactly equal the rest spacing
    const double rest_edge = 2.0 / 72.0;
    for (int y = 0; y < 73; ++y)
        for (int x = 0; x + 1 < 73; ++x) {
            CHECK(edge_len(rest.points, y, x, y, x + 1) == doctest::Approx(rest_edge).epsilon(1e-15));
            CHECK(edge_len(rest.points, x, y, x + 1, y) == doctest::Approx(rest_edge).epsilon(1e-15));
        }
    const IsometryAudit audit = audit_isometry(rest);
    CHECK(audit.mean_rel_deviation == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(audit.max_rel_deviation < 1e-12);
    CHECK(deformation_magnitude(rest) == 0.0);
}

TEST_CASE("cylindrical bend preserves arc length to closed form") {
    // along the bend direction the chord between adjacent grid samples must
    // match the chord of a circular arc of the same arc length
    const double curvature = 2.0;
    const SurfaceState s = make_cylinder_state(73, curvature, 0.0);
    const double ds = 2.0 / 72.0;
    const double chord = 2.0 / curvature * std::sin(curvature * ds / 2.0);
    for (int y = 0; y < 73; y += 9)
        for (int x = 0; x + 1 < 73; ++x) {
            const double len = edge_len(s.points, y, x, y, x + 1);
            CHECK(std::abs(len - chord) / chord < 1e-9);
        }
    // chord shortening vs. true arc length stays inside the audit tolerance
    const IsometryAudit audit = audit_isometry(s);
    CHECK(audit.max_rel_deviation < 1e-3);
    // perpendicular direction is rigid
    for (int x = 0; x < 73; x += 9)
        for (int y = 0; y + 1 < 73; ++y)
            CHECK(edge_len(s.points, y, x, y + 1, x) == doctest::Approx(ds).epsilon(1e-12));
}

TEST_CASE("wave states pass the isometry audit in bulk") {
    DeformationConfig cfg;
    cfg.seed = 21;
    const auto states = generate_states(100, cfg);
    REQUIRE(states.size() == 100);
    CHECK(deformation_magnitude(states[0]) == 0.0);  // state 0 is the rest plane
    double mean_sum = 0;
    for (const auto& s : states) {
        const IsometryAudit a = audit_isometry(s);
        CHECK(a.mean_rel_deviation < cfg.mean_tolerance);
        CHECK(a.max_rel_deviation < cfg.max_tolerance);
        mean_sum += a.mean_rel_deviation;
    }
    CHECK(mean_sum / 100.0 < 0.02);
    // the set actually deforms
    int deformed = 0;
    for (const auto& s : states)
        if (deformation_magnitude(s) > 0.01) ++deformed;
    CHECK(deformed > 50);
}

TEST_CASE("generation is deterministic in the seed") {
    DeformationConfig cfg;
    cfg.seed = 5;
    const auto a = generate_states(10, cfg);
    const auto b = generate_states(10, cfg);
    for (int i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < a[i].points.size(); ++j)
            REQUIRE(a[i].points[j] == b[i].points[j]);
    cfg.seed = 6;
    const auto c = generate_states(10, cfg);
    bool any_diff = false;
    for (std::size_t j = 0; j < a[1].points.size(); ++j)
        if (a[1].points[j] != c[1].points[j]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("impossible deformation parameters raise a generation error") {
    DeformationConfig cfg;
    cfg.max_amplitude = 50.0;  // forces profile slopes past 1: not developable
    cfg.min_amplitude = 49.0;
    CHECK_THROWS_AS(generate_states(5, cfg), GenerationError);
    CHECK_THROWS_AS(generate_states(0, cfg), std::invalid_argument);
}

TEST_CASE("zero-amplitude wave config reduces to the rest plane") {
    DeformationConfig cfg;
    cfg.max_amplitude = 0.0;
    const auto states = generate_states(3, cfg);
    const SurfaceState rest = make_rest_state(cfg.grid_size);
    for (const auto& s : states)
        for (std::size_t j = 0; j < s.points.size(); ++j)
            CHECK(s.points[j] == doctest::Approx(rest.points[j]).epsilon(1e-12));
}

TEST_CASE("surface f32 files round trip") {
    DeformationConfig cfg;
    cfg.seed = 9;
    const auto states = generate_states(2, cfg);
    const std::string path = "surface_roundtrip.f32";
    save_surface_f32(path, states[1].points);
    const Tensor loaded = load_surface_f32(path, 73, 73);
    REQUIRE(loaded.shape() == states[1].points.shape());
    for (std::size_t i = 0; i < loaded.size(); ++i)
        CHECK(loaded[i] == doctest::Approx(states[1].points[i]).epsilon(1e-6));
    CHECK_THROWS(load_surface_f32("missing_surface.f32", 73, 73));
    CHECK_THROWS(load_surface_f32(path, 80, 80));  // truncated for that shape
    std::remove(path.c_str());
}
