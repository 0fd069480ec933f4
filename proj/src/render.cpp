#include "ismo/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ismo {

namespace {

Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(const Vec3& a) {
    const double n = norm(a);
    return n > 0 ? a * (1.0 / n) : a;
}

// deterministic value noise on the unit square
double hash01(int x, int y) {
    std::uint32_t h = static_cast<std::uint32_t>(x) * 374761393u +
                      static_cast<std::uint32_t>(y) * 668265263u;
    h = (h ^ (h >> 13)) * 1274126177u;
    return ((h ^ (h >> 16)) & 0xffffffu) / static_cast<double>(0xffffff);
}

double value_noise(double u, double v, double scale) {
    const double fu = u * scale, fv = v * scale;
    const int iu = static_cast<int>(std::floor(fu)), iv = static_cast<int>(std::floor(fv));
    const double du = fu - iu, dv = fv - iv;
    auto smooth = [](double t) { return t * t * (3 - 2 * t); };
    const double su = smooth(du), sv = smooth(dv);
    const double a = hash01(iu, iv), b = hash01(iu + 1, iv);
    const double c = hash01(iu, iv + 1), d = hash01(iu + 1, iv + 1);
    return (1 - sv) * ((1 - su) * a + su * b) + sv * ((1 - su) * c + su * d);
}

struct CamFrame {
    Vec3 origin, right, up, forward;
    double f;
    int size;

    // returns false if behind the camera
    bool project(const Vec3& p, double& px, double& py, double& depth) const {
        const Vec3 d = p - origin;
        depth = dot(d, forward);
        if (depth <= 1e-6) return false;
        px = f * dot(d, right) / depth + size / 2.0;
        py = f * dot(d, up) / depth + size / 2.0;
        return true;
    }
};

CamFrame make_cam_frame(const Camera& cam, int size) {
    CamFrame fr;
    fr.origin = cam.position;
    fr.forward = normalized(cam.target - cam.position);
    const Vec3 world_up{0, 1, 0};
    Vec3 right = cross(fr.forward, world_up);
    if (norm(right) < 1e-9) right = {1, 0, 0};
    fr.right = normalized(right);
    fr.up = cross(fr.right, fr.forward);
    fr.f = cam.focal_px;
    fr.size = size;
    return fr;
}

}  // namespace

std::array<double, 3> sample_texture(int texture_id, double u, double v) {
    switch (texture_id) {
        case 0: {  // checker
            const int cu = static_cast<int>(std::floor(u * 8)), cv = static_cast<int>(std::floor(v * 8));
            return ((cu + cv) & 1) ? std::array<double, 3>{0.85, 0.2, 0.15}
                                   : std::array<double, 3>{0.95, 0.9, 0.85};
        }
        case 1: {  // stripes
            const double s = 0.5 + 0.5 * std::sin(u * 40.0);
            return {0.15 + 0.7 * s, 0.35 + 0.45 * s, 0.8 - 0.5 * s};
        }
        case 2: {  // noise
            const double n = value_noise(u, v, 12.0);
            const double m = value_noise(v, u, 29.0);
            return {0.25 + 0.6 * n, 0.55 - 0.3 * m + 0.3 * n, 0.25 + 0.4 * m};
        }
        case 3: {  // gradient ("unknown", held out of training)
            return {0.2 + 0.75 * u, 0.25 + 0.55 * v, 0.85 - 0.6 * u * v};
        }
        default:
            throw std::invalid_argument("sample_texture: unknown texture id " +
                                        std::to_string(texture_id));
    }
}

int texture_count() { return 4; }

std::vector<Camera> default_cameras(int count) {
    std::vector<Camera> cams;
    const double radius = 2.6, f = 230.0;
    const double azimuth[] = {0.0, 0.35, -0.35, 0.12, -0.18};
    const double elevation[] = {0.0, 0.0, 0.1, 0.3, -0.25};
    for (int i = 0; i < count; ++i) {
        const double az = azimuth[i % 5] + (i / 5) * 0.05;
        const double el = elevation[i % 5];
        Camera c;
        c.position = {radius * std::sin(az) * std::cos(el), radius * std::sin(el),
                      radius * std::cos(az) * std::cos(el)};
        c.target = {0, 0, 0};
        c.focal_px = f;
        cams.push_back(c);
    }
    return cams;
}

std::vector<PointLight> default_lights(int count) {
    std::vector<PointLight> lights;
    const double px[] = {0.0, 1.8, -1.8, 1.2, -0.9};
    const double py[] = {0.0, 0.9, 0.8, -1.4, -1.7};
    const double pz[] = {3.0, 2.4, 2.4, 2.1, 2.2};
    for (int i = 0; i < count; ++i)
        lights.push_back({{px[i % 5], py[i % 5], pz[i % 5] + (i / 5) * 0.3}, 1.0});
    return lights;
}

RenderedFrame render_state(const SurfaceState& state, int texture_id, const PointLight& light,
                           int illumination_id, const Camera& camera, int camera_id,
                           const RenderConfig& cfg) {
    const int gs = state.grid_h();
    const int size = cfg.image_size;
    const CamFrame cam = make_cam_frame(camera, size);

    // project all grid points; the camera-z axis in this renderer points from
    // the camera toward the scene
    std::vector<double> px(static_cast<std::size_t>(gs) * gs), py(px.size()), pz(px.size());
    bool any_visible = false;
    for (int i = 0; i < gs; ++i)
        for (int j = 0; j < gs; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * gs + j;
            const Vec3 p{state.points.at3(i, j, 0), state.points.at3(i, j, 1),
                         state.points.at3(i, j, 2)};
            if (!cam.project(p, px[idx], py[idx], pz[idx])) {
                pz[idx] = -1;
                continue;
            }
            if (px[idx] >= 0 && px[idx] < size && py[idx] >= 0 && py[idx] < size)
                any_visible = true;
        }
    if (!any_visible)
        throw RenderError("render_state: surface entirely outside the camera frustum (state " +
                          std::to_string(state.state_id) + ", camera " +
                          std::to_string(camera_id) + ")");

    // per-vertex normals from grid neighbors
    std::vector<Vec3> normals(px.size());
    auto vertex = [&](int i, int j) {
        return Vec3{state.points.at3(i, j, 0), state.points.at3(i, j, 1),
                    state.points.at3(i, j, 2)};
    };
    for (int i = 0; i < gs; ++i)
        for (int j = 0; j < gs; ++j) {
            const Vec3 du = vertex(i, std::min(j + 1, gs - 1)) - vertex(i, std::max(j - 1, 0));
            const Vec3 dv = vertex(std::min(i + 1, gs - 1), j) - vertex(std::max(i - 1, 0), j);
            normals[static_cast<std::size_t>(i) * gs + j] = normalized(cross(du, dv));
        }

    RenderedFrame frame;
    frame.image = ImageU8(size, size);
    for (auto& b : frame.image.rgb) b = 0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            auto* p = frame.image.px(x, y);
            p[0] = cfg.background[0];
            p[1] = cfg.background[1];
            p[2] = cfg.background[2];
        }
    frame.footprint = Mask(size, size);
    frame.state_id = state.state_id;
    frame.texture_id = texture_id;
    frame.illumination_id = illumination_id;
    frame.camera_id = camera_id;

    std::vector<double> zbuf(static_cast<std::size_t>(size) * size,
                             std::numeric_limits<double>::infinity());

    // rasterize one triangle with vertex indices a, b, c
    auto raster = [&](std::size_t a, std::size_t b, std::size_t c) {
        if (pz[a] < 0 || pz[b] < 0 || pz[c] < 0) return;
        const double x0 = px[a], y0 = py[a], x1 = px[b], y1 = py[b], x2 = px[c], y2 = py[c];
        const double area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
        if (std::abs(area) < 1e-12) return;
        const int minx = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}))));
        const int maxx = std::min(size - 1, static_cast<int>(std::ceil(std::max({x0, x1, x2}))));
        const int miny = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}))));
        const int maxy = std::min(size - 1, static_cast<int>(std::ceil(std::max({y0, y1, y2}))));
        const int ia = static_cast<int>(a), ib = static_cast<int>(b), ic = static_cast<int>(c);
        const double ua = (ia % gs) / double(gs - 1), va = (ia / gs) / double(gs - 1);
        const double ub = (ib % gs) / double(gs - 1), vb = (ib / gs) / double(gs - 1);
        const double uc = (ic % gs) / double(gs - 1), vc = (ic / gs) / double(gs - 1);
        for (int y = miny; y <= maxy; ++y)
            for (int x = minx; x <= maxx; ++x) {
                const double cx = x + 0.5, cy = y + 0.5;
                double w0 = (x1 - cx) * (y2 - cy) - (x2 - cx) * (y1 - cy);
                double w1 = (x2 - cx) * (y0 - cy) - (x0 - cx) * (y2 - cy);
                double w2 = (x0 - cx) * (y1 - cy) - (x1 - cx) * (y0 - cy);
                w0 /= area;
                w1 /= area;
                w2 /= area;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                const double depth = w0 * pz[a] + w1 * pz[b] + w2 * pz[c];
                double& zb = zbuf[static_cast<std::size_t>(y) * size + x];
                if (depth >= zb) continue;
                zb = depth;
                frame.footprint.at(x, y) = 1;
                // interpolated shading point
                auto vat = [&](std::size_t idx) {
                    const int gi = static_cast<int>(idx) / gs, gj = static_cast<int>(idx) % gs;
                    return vertex(gi, gj);
                };
                const Vec3 pos = vat(a) * w0 + vat(b) * w1 + vat(c) * w2;
                const Vec3 nrm =
                    normalized(normals[a] * w0 + normals[b] * w1 + normals[c] * w2);
                const Vec3 to_light = light.position - pos;
                const double d2 = dot(to_light, to_light);
                const double lambert = std::abs(dot(nrm, normalized(to_light)));
                const double falloff = light.intensity / (1.0 + 0.08 * d2);
                const double shade = std::min(1.0, cfg.ambient + lambert * falloff);
                const double u = w0 * ua + w1 * ub + w2 * uc;
                const double v = w0 * va + w1 * vb + w2 * vc;
                const std::array<double, 3> albedo =
                    cfg.textureless ? std::array<double, 3>{0.82, 0.82, 0.82}
                                    : sample_texture(texture_id, u, v);
                auto* out = frame.image.px(x, y);
                for (int ch = 0; ch < 3; ++ch)
                    out[ch] =
                        static_cast<std::uint8_t>(std::clamp(albedo[ch] * shade, 0.0, 1.0) * 255.0 + 0.5);
            }
    };

    for (int i = 0; i + 1 < gs; ++i)
        for (int j = 0; j + 1 < gs; ++j) {
            const std::size_t a = static_cast<std::size_t>(i) * gs + j;
            const std::size_t b = a + 1;
            const std::size_t c = a + gs;
            const std::size_t d = c + 1;
            raster(a, b, c);
            raster(b, d, c);
        }
    return frame;
}

}  // namespace ismo
