#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ismo/dataset.hpp"
#include "ismo/discriminator.hpp"
#include "ismo/losses.hpp"
#include "ismo/recnet.hpp"
#include "ismo/segmenter.hpp"

namespace ismo {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 8;
    int epochs_rec = 130;
    int epochs_od = 30;
    std::uint64_t seed = 0;
    int gan_g_steps = 1;  // G:D step ratio per batch
    int gan_d_steps = 1;
    bool shuffle = true;
    double adv_weight = 1.0;  // 0: adversarial terms reported but not applied
    double iso_weight = 1.0;
    bool use_segmentation = true;  // feed masked rather than raw renders
    int checkpoint_every = 0;      // epochs between checkpoints; 0 = final only
    std::string out_dir;           // when set: history CSV + checkpoints
    std::uint64_t config_hash = 0;
    IsometryConfig iso;
};

// One paired training example for the reconstruction stage.
struct Sample2D3D {
    Tensor image;    // (3, S, S), values in [0,1]
    Tensor surface;  // (73, 73, 3)
};

// Supervised mask regression with MSE. Returns the per-epoch train MSE.
// A non-finite loss aborts with the weights of the last finished epoch
// restored (and checkpointed when out_dir is set).
std::vector<double> train_odnet(ODNet& net, const std::vector<MaskSample>& samples,
                                const TrainConfig& cfg);

// Alternating generator/discriminator optimization. Returns per-epoch
// averages of all loss terms; with out_dir set, writes history.csv and
// recnet.ckpt / disc.ckpt.
std::vector<LossBreakdown> train_adversarial(RecNet& gen, Discriminator& disc,
                                             const std::vector<Sample2D3D>& samples,
                                             const TrainConfig& cfg);

// epoch, l3d, liso, lg, ld, total rows with full double precision
void write_history_csv(const std::string& path, const std::vector<LossBreakdown>& history);
void write_history_csv(const std::string& path, const std::vector<double>& mse_history);

// Stacks samples [i0, i1) into an (N,3,S,S) batch and a (N,73,73,3) batch.
void stack_batch(const std::vector<Sample2D3D>& samples, const std::vector<int>& order, int i0,
                 int i1, Tensor& images, Tensor& surfaces);

}  // namespace ismo
