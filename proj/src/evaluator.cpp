#include "ismo/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace ismo {

namespace {

double pair_e3d(const double* pred, const double* gt, std::size_t n, int index) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = gt[i] - pred[i];
        num += d * d;
        den += gt[i] * gt[i];
    }
    if (den == 0.0)
        throw MetricError("e3d: zero-norm ground truth at batch index " + std::to_string(index));
    return std::sqrt(num) / std::sqrt(den);
}

FactorStats stats_of(const std::vector<double>& xs) {
    FactorStats s;
    s.count = static_cast<int>(xs.size());
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double var = 0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(var / xs.size());
    return s;
}

std::string join_path(const std::string& root, const std::string& rel) {
    if (root.empty()) return rel;
    return root + "/" + rel;
}

}  // namespace

double e3d(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt))
        throw MetricError("e3d: shape mismatch " + Tensor::shape_str(pred.shape()) + " vs " +
                          Tensor::shape_str(gt.shape()));
    if (pred.ndim() == 3) return pair_e3d(pred.data(), gt.data(), pred.size(), 0);
    if (pred.ndim() != 4) throw MetricError("e3d: expected (H,W,3) or (B,H,W,3)");
    const int b = pred.dim(0);
    const std::size_t n = pred.size() / b;
    double sum = 0;
    for (int i = 0; i < b; ++i)
        sum += pair_e3d(pred.data() + i * n, gt.data() + i * n, n, i);
    return sum / b;
}

Tensor reconstruct_image(RecNet& net, ODNet* od, const ImageU8& image) {
    net.set_train(false);
    const ImageU8* input = &image;
    SegmentedImage seg;
    if (od) {
        od->set_train(false);
        seg = segment_image(*od, image, od->config().threshold);
        input = &seg.image;
    }
    Tensor x = image_to_tensor(*input);
    Tensor out = net.forward(x);
    return out.reshaped({out.dim(1), out.dim(2), 3});
}

EvalReport evaluate(RecNet& net, ODNet* od, const DatasetManifest& manifest,
                    const EvalOptions& options) {
    EvalReport rep;
    rep.unknown_texture_id = manifest.unknown_texture_id;
    std::vector<char> in_test(manifest.num_states, 0);
    for (int s : manifest.test_states) in_test[s] = 1;

    std::map<int, Tensor> gt_cache;
    std::vector<double> all, known, unknown;
    std::map<int, std::vector<double>> by_tex, by_illum;
    double sad_sum = 0;
    int frames = 0;
    for (const auto& r : manifest.renderings) {
        if (!in_test[r.state_id]) continue;
        auto it = gt_cache.find(r.state_id);
        if (it == gt_cache.end()) {
            Tensor g = load_surface_f32(join_path(manifest.root, manifest.state_paths[r.state_id]),
                                        manifest.grid_size, manifest.grid_size);
            it = gt_cache.emplace(r.state_id, std::move(g)).first;
        }
        const ImageU8 img = read_png(join_path(manifest.root, r.image_path));
        const Tensor pred = reconstruct_image(net, options.use_segmentation ? od : nullptr, img);
        const double err = e3d(pred, it->second);
        all.push_back(err);
        by_tex[r.texture_id].push_back(err);
        by_illum[r.illumination_id].push_back(err);
        if (r.texture_id == manifest.unknown_texture_id)
            unknown.push_back(err);
        else
            known.push_back(err);
        double sad = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) sad += std::abs(pred[i] - it->second[i]);
        sad_sum += sad;
        ++frames;
    }
    if (frames == 0) throw MetricError("evaluate: empty test split");
    rep.overall = stats_of(all);
    rep.sad_mean = sad_sum / frames;
    for (auto& [k, v] : by_tex) rep.per_texture[k] = stats_of(v);
    for (auto& [k, v] : by_illum) rep.per_illumination[k] = stats_of(v);
    rep.known_texture_mean = stats_of(known).mean;
    rep.unknown_texture_mean = stats_of(unknown).mean;
    return rep;
}

namespace {

// bounding box of pixels that are not (near) background black
bool object_bbox(const ImageU8& img, int& x0, int& y0, int& x1, int& y1) {
    x0 = img.width;
    y0 = img.height;
    x1 = -1;
    y1 = -1;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.px(x, y);
            if (p[0] + p[1] + p[2] > 24) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    return x1 >= 0;
}

}  // namespace

OcclusionResult occlusion_sweep(RecNet& net, ODNet* od, const DatasetManifest& manifest,
                                const OcclusionConfig& cfg) {
    if (cfg.radii.empty() || cfg.counts.empty() || cfg.images_per_cell < 1)
        throw std::invalid_argument("occlusion_sweep: radii/counts non-empty, images_per_cell >= 1");
    for (int r : cfg.radii)
        if (r > manifest.image_size)
            throw std::invalid_argument("occlusion_sweep: radius " + std::to_string(r) +
                                        " exceeds image size");

    // rank test states by deformation magnitude, keep the top decile
    std::vector<std::pair<double, int>> ranked;
    std::map<int, Tensor> gts;
    for (int s : manifest.test_states) {
        Tensor g = load_surface_f32(join_path(manifest.root, manifest.state_paths[s]),
                                    manifest.grid_size, manifest.grid_size);
        SurfaceState st{s, g};
        ranked.emplace_back(deformation_magnitude(st), s);
        gts.emplace(s, std::move(g));
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    const int top = std::max<std::size_t>(1, (ranked.size() + 9) / 10);
    std::vector<char> in_top(manifest.num_states, 0);
    for (int i = 0; i < top; ++i) in_top[ranked[i].second] = 1;

    std::vector<int> candidates;
    for (std::size_t i = 0; i < manifest.renderings.size(); ++i)
        if (in_top[manifest.renderings[i].state_id]) candidates.push_back(static_cast<int>(i));
    if (candidates.empty()) throw MetricError("occlusion_sweep: no frames in the top decile");

    Rng rng(cfg.seed);
    std::vector<int> chosen;
    for (int i = 0; i < cfg.images_per_cell; ++i)
        chosen.push_back(candidates[rng.uniform_int(0, static_cast<int>(candidates.size()) - 1)]);

    std::vector<ImageU8> base_images;
    std::vector<const Tensor*> base_gt;
    for (int idx : chosen) {
        const auto& r = manifest.renderings[idx];
        base_images.push_back(read_png(join_path(manifest.root, r.image_path)));
        base_gt.push_back(&gts.at(r.state_id));
    }

    auto mean_err = [&](const std::vector<ImageU8>& imgs) {
        double sum = 0;
        for (std::size_t i = 0; i < imgs.size(); ++i)
            sum += e3d(reconstruct_image(net, od, imgs[i]), *base_gt[i]);
        return sum / imgs.size();
    };
    OcclusionResult res;
    res.radii = cfg.radii;
    res.counts = cfg.counts;
    res.baseline = mean_err(base_images);

    for (std::size_t ri = 0; ri < cfg.radii.size(); ++ri) {
        res.mean_e3d.emplace_back();
        for (std::size_t ci = 0; ci < cfg.counts.size(); ++ci) {
            const int radius = cfg.radii[ri], count = cfg.counts[ci];
            if (radius == 0 || count == 0) {
                res.mean_e3d.back().push_back(res.baseline);
                continue;
            }
            Rng cell_rng = rng.fork((ri + 1) * 1000 + ci + 1);
            std::vector<ImageU8> occluded = base_images;
            for (auto& img : occluded) {
                int x0, y0, x1, y1;
                if (!object_bbox(img, x0, y0, x1, y1)) {
                    x0 = y0 = 0;
                    x1 = img.width - 1;
                    y1 = img.height - 1;
                }
                for (int k = 0; k < count; ++k)
                    draw_filled_circle(img, cell_rng.uniform_int(x0, x1),
                                       cell_rng.uniform_int(y0, y1), radius, cfg.color);
            }
            res.mean_e3d.back().push_back(mean_err(occluded));
        }
    }
    return res;
}

ThroughputReport measure_throughput(RecNet& net, ODNet* od, const std::vector<ImageU8>& frames,
                                    int warmup, int iters) {
    if (frames.empty()) throw std::invalid_argument("measure_throughput: no frames");
    warmup = std::max(warmup, 3);
    iters = std::max(iters, 10);
    ThroughputReport rep;
    rep.warmup = warmup;
    rep.iters = iters;

    auto timed = [&](bool with_seg) {
        TimingStats st;
        for (int i = 0; i < warmup; ++i)
            reconstruct_image(net, with_seg ? od : nullptr, frames[i % frames.size()]);
        for (int i = 0; i < iters; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            reconstruct_image(net, with_seg ? od : nullptr, frames[i % frames.size()]);
            const auto t1 = std::chrono::steady_clock::now();
            st.samples_s.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::vector<double> sorted = st.samples_s;
        std::sort(sorted.begin(), sorted.end());
        st.mean_s = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
        st.p50_s = sorted[sorted.size() / 2];
        st.p99_s = sorted[std::min(sorted.size() - 1,
                                   static_cast<std::size_t>(0.99 * sorted.size()))];
        st.fps = st.mean_s > 0 ? 1.0 / st.mean_s : 0.0;
        return st;
    };
    rep.full_pipeline = timed(od != nullptr);
    rep.reconstruct_only = timed(false);
    return rep;
}

std::string report_to_json(const EvalReport& report, const OcclusionResult* occlusion,
                           const ThroughputReport* throughput) {
    nlohmann::json j;
    auto fs = [](const FactorStats& s) {
        return nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
    };
    j["e3d"] = fs(report.overall);
    j["sad_mean"] = report.sad_mean;
    for (const auto& [k, v] : report.per_texture) j["per_texture"][std::to_string(k)] = fs(v);
    for (const auto& [k, v] : report.per_illumination)
        j["per_illumination"][std::to_string(k)] = fs(v);
    j["unknown_texture_id"] = report.unknown_texture_id;
    j["known_texture_mean"] = report.known_texture_mean;
    j["unknown_texture_mean"] = report.unknown_texture_mean;
    if (occlusion) {
        j["occlusion"]["radii"] = occlusion->radii;
        j["occlusion"]["counts"] = occlusion->counts;
        j["occlusion"]["mean_e3d"] = occlusion->mean_e3d;
        j["occlusion"]["baseline"] = occlusion->baseline;
    }
    if (throughput) {
        auto ts = [](const TimingStats& t) {
            return nlohmann::json{{"mean_s", t.mean_s},
                                  {"p50_s", t.p50_s},
                                  {"p99_s", t.p99_s},
                                  {"fps", t.fps}};
        };
        j["throughput"]["full_pipeline"] = ts(throughput->full_pipeline);
        j["throughput"]["reconstruct_only"] = ts(throughput->reconstruct_only);
        j["throughput"]["warmup"] = throughput->warmup;
        j["throughput"]["iters"] = throughput->iters;
    }
    return j.dump(2);
}

}  // namespace ismo
