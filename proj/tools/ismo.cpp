#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ismo/checkpoint.hpp"
#include "ismo/config.hpp"
#include "ismo/dataset.hpp"
#include "ismo/evaluator.hpp"
#include "ismo/plot.hpp"
#include "ismo/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ismo;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

// Snapshot the resolved configuration next to the run's outputs and return
// its content hash so artifacts can be traced back to the run.
std::uint64_t write_run_config(const std::string& out_dir, json cfg) {
    fs::create_directories(out_dir);
    const std::string dump = cfg.dump(2);
    const std::uint64_t hash = fnv1a64(dump);
    cfg["config_hash"] = hash;
    std::ofstream f(out_dir + "/run_config.json");
    if (!f) throw std::runtime_error("cannot write " + out_dir + "/run_config.json");
    f << cfg.dump(2) << "\n";
    std::printf("config_hash %016llx\n", static_cast<unsigned long long>(hash));
    return hash;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config file " + path);
    return json::parse(f);
}

void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        try {
            cfg[key] = json::parse(val);  // numbers, booleans, quoted strings
        } catch (const json::parse_error&) {
            cfg[key] = val;  // bare string
        }
    }
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs_rec = j.value("epochs_rec", c.epochs_rec);
    c.epochs_od = j.value("epochs_od", c.epochs_od);
    c.seed = j.value("seed", c.seed);
    c.gan_g_steps = j.value("gan_g_steps", c.gan_g_steps);
    c.gan_d_steps = j.value("gan_d_steps", c.gan_d_steps);
    c.shuffle = j.value("shuffle", c.shuffle);
    c.adv_weight = j.value("adv_weight", c.adv_weight);
    c.iso_weight = j.value("iso_weight", c.iso_weight);
    c.use_segmentation = j.value("use_segmentation", c.use_segmentation);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.iso.sigma = j.value("iso_sigma", c.iso.sigma);
    c.iso.kernel_size = j.value("iso_kernel_size", c.iso.kernel_size);
    c.iso.detach_smoothed = j.value("iso_detach", c.iso.detach_smoothed);
    if (c.learning_rate < 0 || c.batch_size < 1 || c.epochs_rec < 0 || c.epochs_od < 0)
        throw CLI::ValidationError("config", "hyperparameters out of range");
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"epochs_rec", c.epochs_rec},
                {"epochs_od", c.epochs_od},
                {"seed", c.seed},
                {"gan_g_steps", c.gan_g_steps},
                {"gan_d_steps", c.gan_d_steps},
                {"shuffle", c.shuffle},
                {"adv_weight", c.adv_weight},
                {"iso_weight", c.iso_weight},
                {"use_segmentation", c.use_segmentation},
                {"checkpoint_every", c.checkpoint_every},
                {"iso_sigma", c.iso.sigma},
                {"iso_kernel_size", c.iso.kernel_size},
                {"iso_detach", c.iso.detach_smoothed}};
}

std::vector<MaskSample> load_mask_dataset(const std::string& dir) {
    std::ifstream f(dir + "/masks_manifest.json");
    if (!f) throw std::runtime_error("cannot read " + dir + "/masks_manifest.json");
    const json j = json::parse(f);
    std::vector<MaskSample> samples;
    for (const auto& item : j.at("items")) {
        MaskSample s;
        s.image = read_png(dir + "/" + item.at("image").get<std::string>());
        s.mask = read_png_mask(dir + "/" + item.at("mask").get<std::string>());
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<Sample2D3D> load_rec_samples(const DatasetManifest& man, ODNet* od) {
    std::vector<char> in_train(man.num_states, 0);
    for (int s : man.train_states) in_train[s] = 1;
    std::vector<Sample2D3D> samples;
    std::map<int, Tensor> gt;
    for (const auto& r : man.renderings) {
        if (!in_train[r.state_id]) continue;
        if (r.texture_id == man.unknown_texture_id) continue;  // held-out texture
        auto it = gt.find(r.state_id);
        if (it == gt.end())
            it = gt.emplace(r.state_id, load_surface_f32(man.root + "/" + man.state_paths[r.state_id],
                                                         man.grid_size, man.grid_size))
                     .first;
        ImageU8 img = read_png(man.root + "/" + r.image_path);
        if (od) img = segment_image(*od, img, od->config().threshold).image;
        samples.push_back({image_to_tensor(img).reshaped({3, img.height, img.width}), it->second});
    }
    return samples;
}

int run(int argc, char** argv) {
    CLI::App app{"isometric surface reconstruction pipeline"};
    app.require_subcommand(1);

    // ---- dataset gen / masks / backgrounds
    auto* dataset = app.add_subcommand("dataset", "dataset generation");
    dataset->require_subcommand(1);

    auto* gen = dataset->add_subcommand("gen", "generate states and renderings");
    DatasetGenConfig gen_cfg;
    std::string out_dir;
    gen->add_option("--states", gen_cfg.states, "number of deformation states");
    gen->add_option("--textures", gen_cfg.textures, "texture count");
    gen->add_option("--lights", gen_cfg.lights, "illumination count");
    gen->add_option("--cams", gen_cfg.cameras, "camera count");
    gen->add_option("--seed", gen_cfg.seed, "rng seed");
    gen->add_option("--protocol", gen_cfg.protocol, "split protocol (paper|proportional)");
    gen->add_option("--unknown-texture", gen_cfg.unknown_texture_id,
                    "texture id excluded from training");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->callback([&] {
        write_run_config(out_dir, json{{"command", "dataset gen"},
                                       {"states", gen_cfg.states},
                                       {"textures", gen_cfg.textures},
                                       {"lights", gen_cfg.lights},
                                       {"cams", gen_cfg.cameras},
                                       {"seed", gen_cfg.seed},
                                       {"protocol", gen_cfg.protocol},
                                       {"unknown_texture", gen_cfg.unknown_texture_id}});
        const DatasetManifest man = generate_dataset(gen_cfg, out_dir);
        std::printf("generated %d states, %zu renderings under %s\n", man.num_states,
                    man.renderings.size(), out_dir.c_str());
    });

    auto* masks = dataset->add_subcommand("masks", "build the segmentation mask dataset");
    std::string frames_dir, backgrounds_dir;
    MaskDatasetConfig mask_cfg;
    int bg_count = 8;
    masks->add_option("--frames", frames_dir, "dataset directory with manifest.json")->required();
    masks->add_option("--backgrounds", backgrounds_dir, "directory of background PNGs");
    masks->add_option("--count", mask_cfg.count, "number of samples");
    masks->add_option("--max-shift", mask_cfg.max_shift, "max translation in px");
    masks->add_option("--seed", mask_cfg.seed, "rng seed");
    masks->add_option("--out", out_dir, "output directory")->required();
    masks->callback([&] {
        write_run_config(out_dir, json{{"command", "dataset masks"},
                                       {"frames", frames_dir},
                                       {"backgrounds", backgrounds_dir},
                                       {"count", mask_cfg.count},
                                       {"max_shift", mask_cfg.max_shift},
                                       {"seed", mask_cfg.seed}});
        const DatasetManifest man = load_manifest(frames_dir + "/manifest.json");
        std::vector<RenderedFrame> frames;
        for (const auto& r : man.renderings) {
            RenderedFrame fr;
            fr.image = read_png(man.root + "/" + r.image_path);
            // recover the footprint from the black-background render
            fr.footprint = Mask(fr.image.width, fr.image.height);
            for (int y = 0; y < fr.image.height; ++y)
                for (int x = 0; x < fr.image.width; ++x) {
                    const auto* p = fr.image.px(x, y);
                    fr.footprint.at(x, y) = (p[0] + p[1] + p[2] > 0) ? 1 : 0;
                }
            fr.state_id = r.state_id;
            frames.push_back(std::move(fr));
        }
        std::vector<ImageU8> backgrounds;
        if (backgrounds_dir.empty()) {
            backgrounds = make_backgrounds(bg_count, man.image_size, mask_cfg.seed ^ 0xb67);
        } else {
            for (const auto& e : fs::directory_iterator(backgrounds_dir))
                if (e.path().extension() == ".png") backgrounds.push_back(read_png(e.path()));
            if (backgrounds.empty())
                throw std::runtime_error("no PNG backgrounds in " + backgrounds_dir);
        }
        const auto samples = build_mask_dataset(frames, backgrounds, mask_cfg);
        json items = json::array();
        char name[64];
        for (std::size_t i = 0; i < samples.size(); ++i) {
            std::snprintf(name, sizeof name, "img_%05zu.png", i);
            write_png(out_dir + "/" + name, samples[i].image);
            json item{{"image", name}};
            std::snprintf(name, sizeof name, "msk_%05zu.png", i);
            write_png_gray(out_dir + "/" + name, samples[i].mask);
            item["mask"] = name;
            items.push_back(item);
        }
        std::ofstream mf(out_dir + "/masks_manifest.json");
        mf << json{{"count", samples.size()}, {"items", items}}.dump(2) << "\n";
        std::printf("wrote %zu mask samples under %s\n", samples.size(), out_dir.c_str());
    });

    auto* bgs = dataset->add_subcommand("backgrounds", "emit procedural backgrounds");
    int bg_n = 8, bg_size = 224;
    std::uint64_t bg_seed = 0;
    bgs->add_option("--count", bg_n, "number of images");
    bgs->add_option("--size", bg_size, "image size");
    bgs->add_option("--seed", bg_seed, "rng seed");
    bgs->add_option("--out", out_dir, "output directory")->required();
    bgs->callback([&] {
        write_run_config(out_dir, json{{"command", "dataset backgrounds"},
                                       {"count", bg_n},
                                       {"size", bg_size},
                                       {"seed", bg_seed}});
        const auto images = make_backgrounds(bg_n, bg_size, bg_seed);
        char name[64];
        for (std::size_t i = 0; i < images.size(); ++i) {
            std::snprintf(name, sizeof name, "bg_%03zu.png", i);
            write_png(out_dir + "/" + name, images[i]);
        }
        std::printf("wrote %zu backgrounds under %s\n", images.size(), out_dir.c_str());
    });

    // ---- train od|rec
    auto* train = app.add_subcommand("train", "train the networks");
    train->require_subcommand(1);
    std::string data_dir, config_file;
    std::vector<std::string> overrides;

    auto* train_od = train->add_subcommand("od", "train the segmentation network");
    train_od->add_option("--data", data_dir, "mask dataset directory")->required();
    train_od->add_option("--config", config_file, "JSON training config");
    train_od->add_option("--set", overrides, "config overrides (key=value)");
    train_od->add_option("--out", out_dir, "output directory")->required();
    train_od->callback([&] {
        json jc = load_config_file(config_file);
        apply_overrides(jc, overrides);
        TrainConfig cfg = train_config_from_json(jc);
        json resolved = train_config_to_json(cfg);
        resolved["command"] = "train od";
        resolved["data"] = data_dir;
        cfg.config_hash = write_run_config(out_dir, resolved);
        cfg.out_dir = out_dir;

        const auto samples = load_mask_dataset(data_dir);
        SegmenterConfig seg_cfg;
        Rng rng(cfg.seed);
        ODNet net(seg_cfg, rng);
        const auto history = train_odnet(net, samples, cfg);
        plot_lines(out_dir + "/odnet_loss.png", {history});
        std::printf("trained od-net for %zu epochs, final mse %.6g\n", history.size(),
                    history.back());
    });

    auto* train_rec = train->add_subcommand("rec", "adversarial reconstruction training");
    std::string od_weights;
    train_rec->add_option("--data", data_dir, "dataset directory with manifest.json")->required();
    train_rec->add_option("--config", config_file, "JSON training config");
    train_rec->add_option("--set", overrides, "config overrides (key=value)");
    train_rec->add_option("--od-weights", od_weights, "segmentation checkpoint for input masking");
    train_rec->add_option("--out", out_dir, "output directory")->required();
    train_rec->callback([&] {
        json jc = load_config_file(config_file);
        apply_overrides(jc, overrides);
        TrainConfig cfg = train_config_from_json(jc);
        json resolved = train_config_to_json(cfg);
        resolved["command"] = "train rec";
        resolved["data"] = data_dir;
        resolved["od_weights"] = od_weights;
        cfg.config_hash = write_run_config(out_dir, resolved);
        cfg.out_dir = out_dir;
        if (cfg.use_segmentation && od_weights.empty())
            throw CLI::ValidationError("--od-weights",
                                       "required when use_segmentation is enabled");

        const DatasetManifest man = load_manifest(data_dir + "/manifest.json");
        SegmenterConfig seg_cfg;
        Rng seg_rng(cfg.seed);
        ODNet od(seg_cfg, seg_rng);
        if (cfg.use_segmentation) {
            load_checkpoint(od_weights, od);
            od.set_train(false);
        }
        const auto samples = load_rec_samples(man, cfg.use_segmentation ? &od : nullptr);
        Rng rng(cfg.seed);
        Rng g_rng = rng.fork(1), d_rng = rng.fork(2);
        RecNet gen(RecNetConfig::full(), g_rng);
        Discriminator disc(d_rng);
        const auto history = train_adversarial(gen, disc, samples, cfg);
        std::vector<double> l3d, total;
        for (const auto& h : history) {
            l3d.push_back(h.l3d);
            total.push_back(h.total);
        }
        plot_lines(out_dir + "/rec_loss.png", {l3d, total});
        std::printf("trained rec-net for %zu epochs, final l3d %.6g\n", history.size(),
                    history.back().l3d);
    });

    // ---- segment
    auto* seg = app.add_subcommand("segment", "segment one image");
    std::string weights, in_path, out_mask, out_seg;
    seg->add_option("--weights", weights, "od-net checkpoint")->required();
    seg->add_option("--in", in_path, "input PNG")->required();
    seg->add_option("--out-mask", out_mask, "binary mask PNG");
    seg->add_option("--out-seg", out_seg, "segmented image PNG");
    seg->callback([&] {
        SegmenterConfig seg_cfg;
        Rng rng(0);
        ODNet net(seg_cfg, rng);
        load_checkpoint(weights, net);
        net.set_train(false);
        const ImageU8 img = read_png(in_path);
        const Tensor conf = net.predict_confidence(img);
        const Mask binary = binarize(conf, seg_cfg.threshold);
        const ObjectMask obj = extract_object_mask(binary);
        if (!out_mask.empty()) write_png_gray(out_mask, obj.mask);
        if (!out_seg.empty())
            write_png(out_seg, obj.empty ? img : apply_mask(img, obj.mask));
        std::printf("segmented %s (%s)\n", in_path.c_str(),
                    obj.empty ? "empty mask, fallback" : "ok");
    });

    // ---- reconstruct
    auto* rec = app.add_subcommand("reconstruct", "reconstruct a surface from one image");
    std::string out_surface;
    bool no_segment = false;
    rec->add_option("--weights", weights, "rec-net checkpoint")->required();
    rec->add_option("--od-weights", od_weights, "od-net checkpoint for segmentation");
    rec->add_option("--in", in_path, "input PNG")->required();
    rec->add_option("--out", out_surface, "output surface (.f32)")->required();
    rec->add_flag("--no-segment", no_segment, "skip segmentation");
    rec->callback([&] {
        if (!no_segment && od_weights.empty())
            throw CLI::ValidationError("--od-weights", "required unless --no-segment is given");
        Rng rng(0);
        RecNet net(RecNetConfig::full(), rng);
        load_checkpoint(weights, net);
        SegmenterConfig seg_cfg;
        Rng seg_rng(0);
        ODNet od(seg_cfg, seg_rng);
        if (!no_segment) load_checkpoint(od_weights, od);
        const ImageU8 img = read_png(in_path);
        const Tensor surface = reconstruct_image(net, no_segment ? nullptr : &od, img);
        save_surface_f32(out_surface, surface);
        std::printf("wrote %s\n", out_surface.c_str());
    });

    // ---- eval
    auto* ev = app.add_subcommand("eval", "evaluate a trained model");
    std::string report_path;
    bool with_occlusion = false, with_throughput = false;
    std::uint64_t eval_seed = 0;
    ev->add_option("--weights", weights, "rec-net checkpoint")->required();
    ev->add_option("--od-weights", od_weights, "od-net checkpoint (enables segmentation)");
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--report", report_path, "output JSON path")->required();
    ev->add_option("--seed", eval_seed, "rng seed for the occlusion sweep");
    ev->add_flag("--occlusion", with_occlusion, "run the occlusion sweep");
    ev->add_flag("--throughput", with_throughput, "measure per-frame latency");
    ev->callback([&] {
        const std::string report_dir = fs::path(report_path).parent_path().string();
        write_run_config(report_dir.empty() ? "." : report_dir,
                         json{{"command", "eval"},
                              {"weights", weights},
                              {"od_weights", od_weights},
                              {"data", data_dir},
                              {"occlusion", with_occlusion},
                              {"throughput", with_throughput},
                              {"seed", eval_seed}});
        Rng rng(0);
        RecNet net(RecNetConfig::full(), rng);
        load_checkpoint(weights, net);
        SegmenterConfig seg_cfg;
        Rng seg_rng(0);
        ODNet od(seg_cfg, seg_rng);
        ODNet* odp = nullptr;
        if (!od_weights.empty()) {
            load_checkpoint(od_weights, od);
            odp = &od;
        }
        const DatasetManifest man = load_manifest(data_dir + "/manifest.json");
        EvalOptions opts;
        opts.use_segmentation = odp != nullptr;
        const EvalReport rep = evaluate(net, odp, man, opts);

        OcclusionResult occ;
        ThroughputReport thr;
        if (with_occlusion) {
            OcclusionConfig oc;
            oc.seed = eval_seed;
            occ = occlusion_sweep(net, odp, man, oc);
            plot_heatmap((report_dir.empty() ? "." : report_dir) + std::string("/occlusion.png"),
                         occ.mean_e3d);
        }
        if (with_throughput) {
            std::vector<ImageU8> frames;
            for (const auto& r : man.renderings) {
                frames.push_back(read_png(man.root + "/" + r.image_path));
                if (frames.size() >= 4) break;
            }
            thr = measure_throughput(net, odp, frames, 3, 10);
        }
        std::ofstream f(report_path);
        if (!f) throw std::runtime_error("cannot write " + report_path);
        f << report_to_json(rep, with_occlusion ? &occ : nullptr,
                            with_throughput ? &thr : nullptr)
          << "\n";
        std::printf("e3d %.6g (+/- %.6g) over %d frames\n", rep.overall.mean, rep.overall.stddev,
                    rep.overall.count);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // help text, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return kExitUsage;
    } catch (const TrainError& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return kExitNumeric;
    } catch (const MetricError& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        if (msg.find("non-finite") != std::string::npos) {
            std::fprintf(stderr, "error: numeric: %s\n", msg.c_str());
            return kExitNumeric;
        }
        std::fprintf(stderr, "error: io: %s\n", msg.c_str());
        return kExitIo;
    }
}
