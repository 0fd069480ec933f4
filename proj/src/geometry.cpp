#include "ismo/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ismo {

namespace {

// orthonormal in-plane frame for a deformation direction
struct Frame {
    double dx, dy;  // deformation direction
    double px, py;  // perpendicular
};

Frame make_frame(double angle) {
    return {std::cos(angle), std::sin(angle), -std::sin(angle), std::cos(angle)};
}

// Height profile h(s) = sum_k a_k sin(w_k s + phi_k) and its derivative.
struct Profile {
    std::vector<double> a, w, phi;

    double h(double s) const {
        double v = 0;
        for (std::size_t k = 0; k < a.size(); ++k) v += a[k] * std::sin(w[k] * s + phi[k]);
        return v;
    }
    double dh(double s) const {
        double v = 0;
        for (std::size_t k = 0; k < a.size(); ++k) v += a[k] * w[k] * std::cos(w[k] * s + phi[k]);
        return v;
    }
};

// u(s) with u' = sqrt(1 - h'^2) integrated from 0 on a fine regular grid,
// so that s is the arc length of the generating curve (u(s), h(s)).
class ArcLengthMap {
public:
    ArcLengthMap(const Profile& p, double s_max, int steps = 8192) : s_max_(s_max), n_(steps) {
        u_.resize(2 * n_ + 1);
        u_[n_] = 0.0;
        const double ds = s_max / n_;
        auto du = [&](double s) {
            const double d = p.dh(s);
            const double q = 1.0 - d * d;
            if (q <= 0.0)
                throw GenerationError("deformation slope reaches 1; profile is not embeddable");
            return std::sqrt(q);
        };
        for (int i = 0; i < n_; ++i) {
            const double s0 = i * ds, s1 = (i + 1) * ds;
            const double inc = 0.5 * ds * (du(s0) + du(s1)) ;
            u_[n_ + i + 1] = u_[n_ + i] + inc;
            u_[n_ - i - 1] = u_[n_ - i] - 0.5 * ds * (du(-s0) + du(-s1));
        }
    }

    double operator()(double s) const {
        const double t = (s / s_max_) * n_;  // in [-n, n]
        const double f = t + n_;
        int i0 = static_cast<int>(std::floor(f));
        i0 = std::max(0, std::min(2 * n_ - 1, i0));
        const double w = f - i0;
        return (1 - w) * u_[i0] + w * u_[i0 + 1];
    }

private:
    double s_max_;
    int n_;
    std::vector<double> u_;
};

}  // namespace

SurfaceState make_rest_state(int grid_size) {
    SurfaceState s;
    s.points = Tensor({grid_size, grid_size, 3});
    for (int i = 0; i < grid_size; ++i)
        for (int j = 0; j < grid_size; ++j) {
            s.points.at3(i, j, 0) = -1.0 + 2.0 * j / (grid_size - 1);
            s.points.at3(i, j, 1) = -1.0 + 2.0 * i / (grid_size - 1);
            s.points.at3(i, j, 2) = 0.0;
        }
    return s;
}

SurfaceState make_cylinder_state(int grid_size, double curvature, double direction_angle,
                                 int state_id) {
    SurfaceState s = make_rest_state(grid_size);
    s.state_id = state_id;
    if (std::abs(curvature) < 1e-12) return s;
    const Frame f = make_frame(direction_angle);
    const double r = 1.0 / curvature;
    for (int i = 0; i < grid_size; ++i)
        for (int j = 0; j < grid_size; ++j) {
            const double x = s.points.at3(i, j, 0), y = s.points.at3(i, j, 1);
            const double sc = x * f.dx + y * f.dy;  // arc-length coordinate
            const double tc = x * f.px + y * f.py;
            const double u = r * std::sin(sc / r);
            const double z = r * (1.0 - std::cos(sc / r));
            s.points.at3(i, j, 0) = u * f.dx + tc * f.px;
            s.points.at3(i, j, 1) = u * f.dy + tc * f.py;
            s.points.at3(i, j, 2) = z;
        }
    return s;
}

SurfaceState make_wave_state(int grid_size, const std::vector<double>& amplitudes,
                             const std::vector<double>& frequencies,
                             const std::vector<double>& phases, double direction_angle,
                             int state_id) {
    if (amplitudes.size() != frequencies.size() || amplitudes.size() != phases.size())
        throw GenerationError("wave profile: component lists must have equal length");
    Profile p{amplitudes, frequencies, phases};
    const double s_max = 1.6;  // covers the projection of [-1,1]^2 on any direction
    ArcLengthMap u(p, s_max);
    SurfaceState s = make_rest_state(grid_size);
    s.state_id = state_id;
    const Frame f = make_frame(direction_angle);
    for (int i = 0; i < grid_size; ++i)
        for (int j = 0; j < grid_size; ++j) {
            const double x = s.points.at3(i, j, 0), y = s.points.at3(i, j, 1);
            const double sc = x * f.dx + y * f.dy;
            const double tc = x * f.px + y * f.py;
            const double uc = u(sc);
            s.points.at3(i, j, 0) = uc * f.dx + tc * f.px;
            s.points.at3(i, j, 1) = uc * f.dy + tc * f.py;
            s.points.at3(i, j, 2) = p.h(sc);
        }
    return s;
}

std::vector<SurfaceState> generate_states(int count, const DeformationConfig& cfg) {
    if (count < 1) throw std::invalid_argument("generate_states: count must be >= 1");
    Rng rng(cfg.seed);
    std::vector<SurfaceState> states;
    states.reserve(count);
    states.push_back(make_rest_state(cfg.grid_size));
    for (int id = 1; id < count; ++id) {
        SurfaceState s;
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        if (cfg.mode == "rest" || cfg.max_amplitude <= 0.0) {
            s = make_rest_state(cfg.grid_size);
            s.state_id = id;
        } else if (cfg.mode == "cylinder") {
            const double kappa = rng.uniform(-cfg.max_curvature, cfg.max_curvature);
            s = make_cylinder_state(cfg.grid_size, kappa, angle, id);
        } else if (cfg.mode == "wave") {
            const int nh = rng.uniform_int(1, cfg.max_harmonics);
            std::vector<double> a(nh), w(nh), phi(nh);
            // keep sum a_k w_k below 1 so the developable map exists
            double slope_budget = 0.85;
            for (int k = 0; k < nh; ++k) {
                w[k] = rng.uniform(1.0, 4.5);
                const double a_cap = std::min(cfg.max_amplitude, slope_budget / (nh * w[k]));
                a[k] = rng.uniform(cfg.min_amplitude / nh, a_cap);
                phi[k] = rng.uniform(0.0, 2.0 * M_PI);
            }
            s = make_wave_state(cfg.grid_size, a, w, phi, angle, id);
        } else {
            throw std::invalid_argument("generate_states: unknown mode '" + cfg.mode + "'");
        }
        const IsometryAudit audit = audit_isometry(s);
        if (audit.mean_rel_deviation >= cfg.mean_tolerance ||
            audit.max_rel_deviation >= cfg.max_tolerance) {
            std::ostringstream msg;
            msg << "generate_states: state " << id << " (mode=" << cfg.mode
                << ", max_amplitude=" << cfg.max_amplitude
                << ", max_curvature=" << cfg.max_curvature << ") violates the isometry "
                << "tolerance: mean=" << audit.mean_rel_deviation
                << " max=" << audit.max_rel_deviation;
            throw GenerationError(msg.str());
        }
        states.push_back(std::move(s));
    }
    return states;
}

IsometryAudit audit_isometry(const SurfaceState& state) {
    const int h = state.grid_h(), w = state.grid_w();
    // compare each edge against the rest grid's edge at the same position:
    // the grid step is not exactly representable, so the ideal spacing would
    // leave the rest state itself a few ulp away from zero deviation
    const SurfaceState rest_state = make_rest_state(std::max(h, w));
    double sum = 0.0, worst = 0.0;
    std::size_t n = 0;
    auto edge = [&](int i0, int j0, int i1, int j1) {
        double d2 = 0, r2 = 0;
        for (int c = 0; c < 3; ++c) {
            const double d = state.points.at3(i0, j0, c) - state.points.at3(i1, j1, c);
            d2 += d * d;
            const double r = rest_state.points.at3(i0, j0, c) - rest_state.points.at3(i1, j1, c);
            r2 += r * r;
        }
        const double rest = std::sqrt(r2);
        const double rel = std::abs(std::sqrt(d2) - rest) / rest;
        sum += rel;
        worst = std::max(worst, rel);
        ++n;
    };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            if (j + 1 < w) edge(i, j, i, j + 1);
            if (i + 1 < h) edge(i, j, i + 1, j);
        }
    return {sum / static_cast<double>(n), worst};
}

double deformation_magnitude(const SurfaceState& state) {
    const SurfaceState rest = make_rest_state(state.grid_h());
    double s2 = 0;
    for (std::size_t i = 0; i < state.points.size(); ++i) {
        const double d = state.points[i] - rest.points[i];
        s2 += d * d;
    }
    return std::sqrt(s2 / (state.points.size() / 3));
}

void save_surface_f32(const std::string& path, const Tensor& points) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("surface: cannot open for writing: " + path);
    std::vector<float> buf(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) buf[i] = static_cast<float>(points[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw std::runtime_error("surface: write failed: " + path);
}

Tensor load_surface_f32(const std::string& path, int grid_h, int grid_w) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("surface: cannot open: " + path);
    Tensor t({grid_h, grid_w, 3});
    std::vector<float> buf(t.size());
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw std::runtime_error("surface: truncated file: " + path);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = buf[i];
    return t;
}

}  // namespace ismo
