#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ismo/nn.hpp"

namespace ismo {

// Residual encoder-decoder regressing a point grid from a segmented image.
// Encoder blocks are {conv3x3, batchnorm, leaky ReLU, maxpool}; the decoder
// mirrors them with transposed convolutions and additive skip connections at
// matching resolutions, then resizes to the output grid.
struct RecNetConfig {
    std::string variant = "full";  // descriptive only
    int input_size = 224;
    std::vector<int> encoder_channels;  // conv output channels per block
    int extra_pool = 0;                 // extra poolings before the latent conv
    int latent_channels = 0;
    int latent_kernel = 3;
    int latent_pad = 1;
    struct Deconv {
        int cout, k, stride, pad;
    };
    std::vector<Deconv> deconvs;
    int refine_channels = 0;  // optional conv3x3 block before the output head
    int out_grid = 73;
    double leaky_slope = 0.2;

    static RecNetConfig full();
    // two encoder and two decoder blocks fewer, latent 11x11x256, 31x31 grid
    static RecNetConfig reduced();
    // small instance for gradient tests; still emits a 73x73x3 grid
    static RecNetConfig toy();
};

class RecNet : public nn::Module {
public:
    RecNet(const RecNetConfig& cfg, Rng& rng);

    // x: (N, 3, S, S) in [0,1]; returns surfaces (N, out_grid, out_grid, 3)
    Tensor forward(const Tensor& x);
    // dsurf: (N, out_grid, out_grid, 3); returns d(input)
    Tensor backward(const Tensor& dsurf);

    std::vector<nn::Param*> params() override;
    std::vector<std::pair<std::string, Tensor*>> buffers() override;
    void set_train(bool t) override;

    const RecNetConfig& config() const { return cfg_; }
    std::vector<int> latent_shape() const { return latent_shape_; }

private:
    RecNetConfig cfg_;
    struct EncBlock {
        std::unique_ptr<nn::Conv2d> conv;
        std::unique_ptr<nn::BatchNorm2d> bn;
        std::unique_ptr<nn::LeakyReLU> act;
        std::unique_ptr<nn::MaxPool2d> pool;
        std::vector<int> pooled_shape;  // filled during forward
    };
    struct DecBlock {
        std::unique_ptr<nn::ConvTranspose2d> deconv;
        std::unique_ptr<nn::BatchNorm2d> bn;
        std::unique_ptr<nn::LeakyReLU> act;
        int skip_from = -1;  // encoder block whose pooled output is added
    };
    std::vector<EncBlock> enc_;
    std::vector<std::unique_ptr<nn::MaxPool2d>> extra_pools_;
    std::unique_ptr<nn::Conv2d> latent_conv_;
    std::unique_ptr<nn::BatchNorm2d> latent_bn_;
    std::unique_ptr<nn::LeakyReLU> latent_act_;
    std::vector<DecBlock> dec_;
    std::unique_ptr<nn::Conv2d> refine_conv_;
    std::unique_ptr<nn::BatchNorm2d> refine_bn_;
    std::unique_ptr<nn::LeakyReLU> refine_act_;
    std::unique_ptr<nn::BilinearResize> resize_;
    std::unique_ptr<nn::Conv2d> head_;
    std::vector<int> latent_shape_;
    std::vector<Tensor> pooled_cache_;  // pooled encoder outputs for skips
};

// total trainable parameter count for a config
std::size_t count_parameters(const RecNetConfig& cfg);

// (N,3,H,W) <-> (N,H,W,3) layout conversions for surfaces
Tensor chw_to_surface(const Tensor& x);
Tensor surface_to_chw(const Tensor& s);

}  // namespace ismo
