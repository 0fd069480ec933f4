#include "ismo/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ismo/config.hpp"

namespace ismo {

namespace fs = std::filesystem;
using nlohmann::json;

void split_dataset(int num_states, const std::string& protocol, std::vector<int>& train,
                   std::vector<int>& test) {
    if (num_states < 5) throw SplitError("split_dataset: need at least 5 states");
    train.clear();
    test.clear();
    if (protocol == "paper" && num_states >= 100) {
        // the final 20 of every full block of 100 are held out; a trailing
        // partial block trains entirely
        for (int s = 0; s < num_states; ++s) {
            const int block = s / 100;
            const bool full_block = (block + 1) * 100 <= num_states;
            if (full_block && s % 100 >= 80)
                test.push_back(s);
            else
                train.push_back(s);
        }
    } else {
        const int n_test = std::max(1, num_states / 5);
        for (int s = 0; s < num_states; ++s)
            (s >= num_states - n_test ? test : train).push_back(s);
    }
}

namespace {

std::string state_filename(int id) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "states/state_%05d.f32", id);
    return buf;
}

std::string frame_filename(int state, int tex, int light, int cam) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "frames/frame_%05d_t%d_l%d_c%d.png", state, tex, light, cam);
    return buf;
}

std::uint64_t hash_gen_config(const DatasetGenConfig& cfg) {
    json j{{"states", cfg.states},
           {"textures", cfg.textures},
           {"lights", cfg.lights},
           {"cameras", cfg.cameras},
           {"seed", cfg.seed},
           {"protocol", cfg.protocol},
           {"mode", cfg.deformation.mode},
           {"grid", cfg.deformation.grid_size},
           {"max_amplitude", cfg.deformation.max_amplitude},
           {"max_curvature", cfg.deformation.max_curvature},
           {"image_size", cfg.render.image_size},
           {"textureless", cfg.render.textureless},
           {"unknown_texture", cfg.unknown_texture_id}};
    return fnv1a64(j.dump());
}

}  // namespace

DatasetManifest generate_dataset(const DatasetGenConfig& cfg, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "states");
    fs::create_directories(fs::path(out_dir) / "frames");

    DeformationConfig dcfg = cfg.deformation;
    dcfg.seed = cfg.seed;
    const auto states = generate_states(cfg.states, dcfg);
    const auto cameras = default_cameras(cfg.cameras);
    const auto lights = default_lights(cfg.lights);

    DatasetManifest m;
    m.num_states = cfg.states;
    m.renders_per_state = cfg.textures * cfg.lights * cfg.cameras;
    m.grid_size = dcfg.grid_size;
    m.image_size = cfg.render.image_size;
    m.num_textures = cfg.textures;
    m.num_lights = cfg.lights;
    m.num_cameras = cfg.cameras;
    m.unknown_texture_id = cfg.unknown_texture_id;
    m.seed = cfg.seed;
    m.config_hash = hash_gen_config(cfg);
    m.root = out_dir;

    for (const auto& s : states) {
        const std::string rel = state_filename(s.state_id);
        save_surface_f32((fs::path(out_dir) / rel).string(), s.points);
        m.state_paths.push_back(rel);
        for (int t = 0; t < cfg.textures; ++t)
            for (int l = 0; l < cfg.lights; ++l)
                for (int c = 0; c < cfg.cameras; ++c) {
                    RenderedFrame frame =
                        render_state(s, t, lights[l], l, cameras[c], c, cfg.render);
                    const std::string frel = frame_filename(s.state_id, t, l, c);
                    write_png((fs::path(out_dir) / frel).string(), frame.image);
                    m.renderings.push_back({s.state_id, t, l, c, frel});
                }
    }

    split_dataset(cfg.states, cfg.protocol, m.train_states, m.test_states);
    save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    json j;
    j["num_states"] = m.num_states;
    j["renders_per_state"] = m.renders_per_state;
    j["grid_size"] = m.grid_size;
    j["image_size"] = m.image_size;
    j["num_textures"] = m.num_textures;
    j["num_lights"] = m.num_lights;
    j["num_cameras"] = m.num_cameras;
    j["unknown_texture_id"] = m.unknown_texture_id;
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash;
    j["state_paths"] = m.state_paths;
    j["train_states"] = m.train_states;
    j["test_states"] = m.test_states;
    json renders = json::array();
    for (const auto& r : m.renderings)
        renders.push_back({{"state", r.state_id},
                           {"texture", r.texture_id},
                           {"illumination", r.illumination_id},
                           {"camera", r.camera_id},
                           {"path", r.image_path}});
    j["renderings"] = std::move(renders);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("manifest: cannot open for writing: " + path);
    os << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("manifest: cannot open: " + path);
    json j = json::parse(is);
    DatasetManifest m;
    m.num_states = j.at("num_states");
    m.renders_per_state = j.at("renders_per_state");
    m.grid_size = j.at("grid_size");
    m.image_size = j.at("image_size");
    m.num_textures = j.at("num_textures");
    m.num_lights = j.at("num_lights");
    m.num_cameras = j.at("num_cameras");
    m.unknown_texture_id = j.at("unknown_texture_id");
    m.seed = j.at("seed");
    m.config_hash = j.at("config_hash");
    m.state_paths = j.at("state_paths").get<std::vector<std::string>>();
    m.train_states = j.at("train_states").get<std::vector<int>>();
    m.test_states = j.at("test_states").get<std::vector<int>>();
    for (const auto& r : j.at("renderings"))
        m.renderings.push_back({r.at("state"), r.at("texture"), r.at("illumination"),
                                r.at("camera"), r.at("path")});
    m.root = fs::path(path).parent_path().string();
    return m;
}

std::vector<MaskSample> build_mask_dataset(const std::vector<RenderedFrame>& frames,
                                           const std::vector<ImageU8>& backgrounds,
                                           const MaskDatasetConfig& cfg) {
    if (frames.empty()) throw std::invalid_argument("build_mask_dataset: no frames");
    if (backgrounds.empty()) throw std::invalid_argument("build_mask_dataset: no backgrounds");
    Rng rng(cfg.seed);
    std::vector<MaskSample> samples;
    samples.reserve(cfg.count);
    for (int i = 0; i < cfg.count; ++i) {
        const int fi = rng.uniform_int(0, static_cast<int>(frames.size()) - 1);
        const RenderedFrame& fr = frames[fi];
        const ImageU8& bg = backgrounds[rng.uniform_int(0, static_cast<int>(backgrounds.size()) - 1)];
        if (bg.width != fr.image.width || bg.height != fr.image.height)
            throw std::invalid_argument("build_mask_dataset: background size mismatch");
        const std::size_t fg_total = fr.footprint.count_nonzero();
        if (fg_total == 0) throw std::invalid_argument("build_mask_dataset: empty footprint");

        int dx = 0, dy = 0;
        for (int attempt = 0;; ++attempt) {
            dx = cfg.max_shift ? rng.uniform_int(-cfg.max_shift, cfg.max_shift) : 0;
            dy = cfg.max_shift ? rng.uniform_int(-cfg.max_shift, cfg.max_shift) : 0;
            std::size_t visible = 0;
            for (int y = 0; y < fr.image.height; ++y)
                for (int x = 0; x < fr.image.width; ++x)
                    if (fr.footprint.at(x, y) && fr.image.in_bounds(x + dx, y + dy)) ++visible;
            if (static_cast<double>(visible) >= cfg.min_in_frame * static_cast<double>(fg_total))
                break;
            if (attempt > 64)
                throw std::invalid_argument(
                    "build_mask_dataset: translation range leaves less than the required "
                    "fraction of the object in frame");
        }

        MaskSample s;
        s.frame_index = fi;
        s.dx = dx;
        s.dy = dy;
        s.image = bg;
        s.mask = Mask(bg.width, bg.height);
        for (int y = 0; y < fr.image.height; ++y)
            for (int x = 0; x < fr.image.width; ++x) {
                if (!fr.footprint.at(x, y)) continue;
                const int nx = x + dx, ny = y + dy;
                if (!s.image.in_bounds(nx, ny)) continue;
                const auto* src = fr.image.px(x, y);
                auto* dst = s.image.px(nx, ny);
                dst[0] = src[0];
                dst[1] = src[1];
                dst[2] = src[2];
                s.mask.at(nx, ny) = 1;
            }
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<ImageU8> make_backgrounds(int count, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ImageU8> bgs;
    for (int i = 0; i < count; ++i) {
        ImageU8 img(size, size);
        const int kind = i % 3;
        const double j0 = rng.uniform(0, 10), j1 = rng.uniform(0, 10);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                auto* p = img.px(x, y);
                const double u = static_cast<double>(x) / size, v = static_cast<double>(y) / size;
                if (kind == 0) {  // sky: vertical gradient with soft clouds
                    const double cloud =
                        0.25 * std::sin(6 * u + j0) * std::sin(4 * v + j1) + 0.1 * std::sin(17 * u);
                    p[0] = static_cast<std::uint8_t>(std::clamp(120 + 60 * v + 40 * cloud, 0.0, 255.0));
                    p[1] = static_cast<std::uint8_t>(std::clamp(160 + 50 * v + 40 * cloud, 0.0, 255.0));
                    p[2] = static_cast<std::uint8_t>(std::clamp(210 + 30 * v + 30 * cloud, 0.0, 255.0));
                } else if (kind == 1) {  // office: blocky panels
                    const int bx = static_cast<int>(u * 6 + j0), by = static_cast<int>(v * 4 + j1);
                    const int tone = 90 + 25 * ((bx * 7 + by * 13) % 5);
                    p[0] = static_cast<std::uint8_t>(tone);
                    p[1] = static_cast<std::uint8_t>(tone - 10);
                    p[2] = static_cast<std::uint8_t>(tone - 20);
                } else {  // forest: green noise
                    const double n = 0.5 + 0.5 * std::sin(23 * u + 31 * v + j0) *
                                               std::cos(17 * v - 11 * u + j1);
                    p[0] = static_cast<std::uint8_t>(30 + 40 * n);
                    p[1] = static_cast<std::uint8_t>(80 + 90 * n);
                    p[2] = static_cast<std::uint8_t>(30 + 30 * n);
                }
            }
        bgs.push_back(std::move(img));
    }
    return bgs;
}

}  // namespace ismo
