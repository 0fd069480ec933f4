#pragma once

#include <memory>
#include <vector>

#include "ismo/nn.hpp"

namespace ismo {

// Surface classifier: four {conv, leaky ReLU} blocks (batchnorm from the
// second block on), flattening a 7x7x64 activation to 3136, then a dense
// layer and a sigmoid producing the probability that a 73x73x3 grid is a
// ground-truth surface.
class Discriminator : public nn::Module {
public:
    explicit Discriminator(Rng& rng);

    // surfaces: (N, 73, 73, 3) -> probabilities (N, 1)
    Tensor forward(const Tensor& surfaces);
    // dprob: (N, 1); returns d(surfaces), shape (N, 73, 73, 3)
    Tensor backward(const Tensor& dprob);

    std::vector<nn::Param*> params() override;
    std::vector<std::pair<std::string, Tensor*>> buffers() override;
    void set_train(bool t) override;

    // (C, H, W) of the activation entering the dense head
    std::vector<int> pre_head_shape() const { return {64, 7, 7}; }

private:
    struct Block {
        std::unique_ptr<nn::Conv2d> conv;
        std::unique_ptr<nn::BatchNorm2d> bn;  // null in block 0
        std::unique_ptr<nn::LeakyReLU> act;
    };
    std::vector<Block> blocks_;
    std::unique_ptr<nn::Dense> head_;
    std::unique_ptr<nn::Sigmoid> out_act_;
    int batch_ = 0;
};

}  // namespace ismo
