#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ismo/image.hpp"
#include "ismo/nn.hpp"

namespace ismo {

// Foreground confidence predictor with a U-net structure: one down/up block
// fewer than the 4/4 reference baseline. Skips are additive at matching
// resolutions; upsampling doubles width and height by bilinear interpolation.
struct SegmenterConfig {
    int depth = 3;
    int base_channels = 4;
    int input_size = 224;
    std::string threshold = "otsu";  // or "fixed:<t>"
    double leaky_slope = 0.2;
};

class ODNet : public nn::Module {
public:
    ODNet(const SegmenterConfig& cfg, Rng& rng);

    // x: (N, 3, S, S) -> confidence maps (N, 1, S, S) in [0,1]
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dout);

    std::vector<nn::Param*> params() override;
    std::vector<std::pair<std::string, Tensor*>> buffers() override;
    void set_train(bool t) override;
    const SegmenterConfig& config() const { return cfg_; }

    // single-image convenience; returns (S, S) map
    Tensor predict_confidence(const ImageU8& image);

private:
    SegmenterConfig cfg_;
    struct Block {
        std::unique_ptr<nn::Conv2d> conv;
        std::unique_ptr<nn::BatchNorm2d> bn;
        std::unique_ptr<nn::LeakyReLU> act;
    };
    std::vector<Block> enc_;
    std::vector<std::unique_ptr<nn::MaxPool2d>> pools_;
    Block bottleneck_;
    std::vector<std::unique_ptr<nn::BilinearResize>> ups_;
    std::vector<Block> dec_;
    std::unique_ptr<nn::Conv2d> head_;
    std::unique_ptr<nn::Sigmoid> out_act_;
    std::vector<Tensor> skip_cache_;  // pre-pool activations
};

// Global thresholding of a (H, W) confidence map. "otsu" maximizes the
// between-class variance of the 256-bin histogram; "fixed:t" thresholds at t.
// A constant map under "otsu" falls back to fixed 0.5 with a warning.
Mask binarize(const Tensor& confidence, const std::string& method);

struct ObjectMask {
    Mask mask;
    bool empty = false;  // no foreground found; caller falls back to the raw image
};

// Outer-contour extraction by border following on the largest foreground
// component; all pixels inside the contour are filled.
ObjectMask extract_object_mask(const Mask& binary);

struct SegmentedImage {
    ImageU8 image;
    bool fallback = false;  // empty mask: the unsegmented image was passed through
};

// background to black, foreground untouched
ImageU8 apply_mask(const ImageU8& image, const Mask& mask);

// full post-processing chain: confidence -> binary -> contour fill -> masking
SegmentedImage segment_image(ODNet& net, const ImageU8& image, const std::string& threshold);

}  // namespace ismo
