#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ismo/rng.hpp"
#include "ismo/tensor.hpp"

namespace ismo {

// One deformation state: a fixed-topology grid of 3D points. The rest plane
// spans [-1,1]^2 at z=0 so all losses stay unit-free.
struct SurfaceState {
    int state_id = 0;
    Tensor points;  // (H, W, 3)

    int grid_h() const { return points.dim(0); }
    int grid_w() const { return points.dim(1); }
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deformation family: a 1-d height profile applied along a random in-plane
// direction via an arc-length preserving developable mapping. "cylinder"
// bends along a circular arc in closed form; "wave" superposes sines in the
// profile and integrates the planar coordinate so the map stays isometric.
struct DeformationConfig {
    int grid_size = 73;
    std::string mode = "wave";      // "rest" | "cylinder" | "wave"
    double min_amplitude = 0.0;
    double max_amplitude = 0.35;    // wave height amplitude bound (canonical units)
    double max_curvature = 2.0;     // cylinder curvature bound (1/radius)
    int max_harmonics = 2;
    double mean_tolerance = 0.02;   // isometry audit bounds
    double max_tolerance = 0.05;
    std::uint64_t seed = 0;
};

struct IsometryAudit {
    double mean_rel_deviation = 0.0;
    double max_rel_deviation = 0.0;
};

SurfaceState make_rest_state(int grid_size);
SurfaceState make_cylinder_state(int grid_size, double curvature, double direction_angle,
                                 int state_id = 0);
SurfaceState make_wave_state(int grid_size, const std::vector<double>& amplitudes,
                             const std::vector<double>& frequencies,
                             const std::vector<double>& phases, double direction_angle,
                             int state_id = 0);

// State 0 is the flat rest plane; every state is audited against the
// configured tolerance before it is returned.
std::vector<SurfaceState> generate_states(int count, const DeformationConfig& cfg);

// Relative deviation of 4-neighbor edge lengths from the rest edge length.
IsometryAudit audit_isometry(const SurfaceState& state);

// RMS point distance from the rest plane; used to rank deformation magnitude.
double deformation_magnitude(const SurfaceState& state);

// little-endian float32 (H, W, 3) row-major, one file per state
void save_surface_f32(const std::string& path, const Tensor& points);
Tensor load_surface_f32(const std::string& path, int grid_h, int grid_w);

}  // namespace ismo
