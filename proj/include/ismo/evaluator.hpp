#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ismo/dataset.hpp"
#include "ismo/recnet.hpp"
#include "ismo/segmenter.hpp"

namespace ismo {

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Normalized reconstruction error: mean over the batch of the ratio of the
// Frobenius norm of the residual to the Frobenius norm of the ground truth.
// Accepts (H,W,3) pairs or (B,H,W,3) batches.
double e3d(const Tensor& pred, const Tensor& gt);

struct FactorStats {
    double mean = 0, stddev = 0;
    int count = 0;
};

struct EvalReport {
    FactorStats overall;
    double sad_mean = 0;  // per-frame sum of absolute differences, canonical units
    std::map<int, FactorStats> per_texture;
    std::map<int, FactorStats> per_illumination;
    int unknown_texture_id = -1;
    // means over the texture groups; unknown_texture < 0 disables the split
    double known_texture_mean = 0;
    double unknown_texture_mean = 0;
};

struct EvalOptions {
    bool use_segmentation = false;  // run frames through OD-Net first
};

// Runs the model over the manifest's test renderings and aggregates e3d by
// texture and illumination. od may be null when segmentation is off.
EvalReport evaluate(RecNet& net, ODNet* od, const DatasetManifest& manifest,
                    const EvalOptions& options);

struct OcclusionConfig {
    std::vector<int> radii{3, 5, 7, 9, 11};
    std::vector<int> counts{1, 2, 3, 4, 5};
    int images_per_cell = 10;
    std::array<std::uint8_t, 3> color{128, 128, 128};
    std::uint64_t seed = 0;
};

struct OcclusionResult {
    std::vector<int> radii;
    std::vector<int> counts;
    std::vector<std::vector<double>> mean_e3d;  // [radius index][count index]
    double baseline = 0;                        // unoccluded e3d of the same frames
};

// Grey-circle occlusion robustness sweep over frames of the most strongly
// deformed test states (top decile by RMS deviation from the rest plane,
// chosen with the configured seed). Radius or count 0 reproduces the
// unoccluded baseline exactly.
OcclusionResult occlusion_sweep(RecNet& net, ODNet* od, const DatasetManifest& manifest,
                                const OcclusionConfig& cfg);

struct TimingStats {
    double mean_s = 0, p50_s = 0, p99_s = 0, fps = 0;
    std::vector<double> samples_s;
};

struct ThroughputReport {
    TimingStats full_pipeline;      // segment + reconstruct
    TimingStats reconstruct_only;
    int warmup = 0, iters = 0;
};

// Wall-clock per-frame latency; warmup >= 3 and iters >= 10 are enforced.
ThroughputReport measure_throughput(RecNet& net, ODNet* od, const std::vector<ImageU8>& frames,
                                    int warmup, int iters);

// Single-image inference path shared by evaluation and the CLI: optional
// segmentation, then reconstruction in eval mode. Returns (73,73,3).
Tensor reconstruct_image(RecNet& net, ODNet* od, const ImageU8& image);

std::string report_to_json(const EvalReport& report, const OcclusionResult* occlusion,
                           const ThroughputReport* throughput);

}  // namespace ismo
