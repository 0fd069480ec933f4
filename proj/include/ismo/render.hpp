#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "ismo/geometry.hpp"
#include "ismo/image.hpp"

namespace ismo {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

struct Camera {
    Vec3 position;
    Vec3 target;        // look-at point
    double focal_px;    // pinhole focal length in pixels
};

struct PointLight {
    Vec3 position;
    double intensity = 1.0;
};

struct RenderConfig {
    int image_size = 224;
    bool textureless = false;       // uniform albedo, shading only
    double ambient = 0.18;
    std::array<std::uint8_t, 3> background{0, 0, 0};
};

struct RenderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RenderedFrame {
    ImageU8 image;
    Mask footprint;  // pixels covered by the surface
    int state_id = 0;
    int texture_id = 0;
    int illumination_id = 0;
    int camera_id = 0;
};

// Procedural stand-ins for the four dataset textures. Texture ids:
// 0 checker, 1 stripes, 2 noise, 3 gradient (held out as "unknown").
std::array<double, 3> sample_texture(int texture_id, double u, double v);
int texture_count();

// Default rigs: cameras orbit the origin, lights sit above the plane.
std::vector<Camera> default_cameras(int count);
std::vector<PointLight> default_lights(int count);

// Deterministic rasterization of the surface grid: two triangles per cell,
// z-buffer, two-sided Lambertian shading from a single point light.
RenderedFrame render_state(const SurfaceState& state, int texture_id, const PointLight& light,
                           int illumination_id, const Camera& camera, int camera_id,
                           const RenderConfig& cfg);

}  // namespace ismo
