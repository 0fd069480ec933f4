#include "ismo/discriminator.hpp"

#include <stdexcept>

#include "ismo/recnet.hpp"

namespace ismo {

Discriminator::Discriminator(Rng& rng) {
    struct Spec {
        int cin, cout, k, stride, pad;
        bool bn;
    };
    // 73 -> 36 -> 18 -> 9 -> 7 spatially; flattened head input 64*7*7 = 3136
    const Spec specs[] = {
        {3, 16, 4, 2, 1, false},
        {16, 32, 4, 2, 1, true},
        {32, 64, 4, 2, 1, true},
        {64, 64, 3, 1, 0, true},
    };
    int idx = 0;
    for (const auto& s : specs) {
        const std::string n = "disc.b" + std::to_string(idx);
        Block b;
        b.conv = std::make_unique<nn::Conv2d>(n + ".conv", s.cin, s.cout, s.k, s.stride, s.pad, rng);
        if (s.bn) b.bn = std::make_unique<nn::BatchNorm2d>(n + ".bn", s.cout);
        b.act = std::make_unique<nn::LeakyReLU>(n + ".act", 0.2);
        blocks_.push_back(std::move(b));
        ++idx;
    }
    head_ = std::make_unique<nn::Dense>("disc.head", 64 * 7 * 7, 1, rng);
    out_act_ = std::make_unique<nn::Sigmoid>("disc.sigmoid");
}

Tensor Discriminator::forward(const Tensor& surfaces) {
    Tensor s = surfaces;
    if (s.ndim() == 3) s = s.reshaped({1, s.dim(0), s.dim(1), s.dim(2)});
    if (s.ndim() != 4 || s.dim(1) != 73 || s.dim(2) != 73 || s.dim(3) != 3)
        throw std::invalid_argument("discriminator: expected (N,73,73,3) surfaces, got " +
                                    Tensor::shape_str(surfaces.shape()));
    batch_ = s.dim(0);
    Tensor a = surface_to_chw(s);
    for (auto& b : blocks_) {
        a = b.conv->forward(a);
        if (b.bn) a = b.bn->forward(a);
        a = b.act->forward(a);
    }
    a = out_act_->forward(head_->forward(a.reshaped({batch_, 64 * 7 * 7})));
    nn::check_finite(a, "disc.head");
    return a;
}

Tensor Discriminator::backward(const Tensor& dprob) {
    Tensor g = head_->backward(out_act_->backward(dprob));
    g = g.reshaped({batch_, 64, 7, 7});
    for (std::size_t i = blocks_.size(); i-- > 0;) {
        auto& b = blocks_[i];
        g = b.act->backward(g);
        if (b.bn) g = b.bn->backward(g);
        g = b.conv->backward(g);
    }
    return chw_to_surface(g);
}

std::vector<nn::Param*> Discriminator::params() {
    std::vector<nn::Param*> ps;
    for (auto& b : blocks_) {
        for (auto* p : b.conv->params()) ps.push_back(p);
        if (b.bn)
            for (auto* p : b.bn->params()) ps.push_back(p);
    }
    for (auto* p : head_->params()) ps.push_back(p);
    return ps;
}

std::vector<std::pair<std::string, Tensor*>> Discriminator::buffers() {
    std::vector<std::pair<std::string, Tensor*>> bs;
    for (auto& b : blocks_)
        if (b.bn) {
            bs.emplace_back(b.bn->name() + ".running_mean", &b.bn->running_mean());
            bs.emplace_back(b.bn->name() + ".running_var", &b.bn->running_var());
        }
    return bs;
}

void Discriminator::set_train(bool t) {
    for (auto& b : blocks_)
        if (b.bn) b.bn->set_train(t);
}

}  // namespace ismo
