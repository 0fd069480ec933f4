#include "ismo/recnet.hpp"

namespace ismo {

RecNetConfig RecNetConfig::full() {
    RecNetConfig c;
    c.variant = "full";
    c.input_size = 224;
    c.encoder_channels = {4, 8, 16, 32, 128};
    c.latent_channels = 128;  // latent activation 7x7x128
    c.latent_kernel = 3;
    c.latent_pad = 1;
    c.deconvs = {{32, 4, 2, 1}, {16, 4, 2, 1}, {8, 4, 2, 1}};
    c.refine_channels = 8;
    c.out_grid = 73;
    return c;
}

RecNetConfig RecNetConfig::reduced() {
    RecNetConfig c;
    c.variant = "reduced";
    c.input_size = 224;
    c.encoder_channels = {8, 16, 32};
    c.extra_pool = 1;  // 28 -> 14 before the latent conv
    c.latent_channels = 256;  // latent activation 11x11x256
    c.latent_kernel = 4;
    c.latent_pad = 0;
    c.deconvs = {{16, 4, 2, 1}, {8, 3, 1, 1}};
    c.refine_channels = 0;
    c.out_grid = 31;
    return c;
}

RecNetConfig RecNetConfig::toy() {
    RecNetConfig c;
    c.variant = "toy";
    c.input_size = 32;
    c.encoder_channels = {4, 8};
    c.latent_channels = 8;
    c.deconvs = {{4, 4, 2, 1}};
    c.refine_channels = 0;
    c.out_grid = 73;
    return c;
}

RecNet::RecNet(const RecNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    int cin = 3;
    int res = cfg.input_size;
    int idx = 0;
    for (int cout : cfg.encoder_channels) {
        EncBlock b;
        const std::string n = "rec.enc" + std::to_string(idx);
        b.conv = std::make_unique<nn::Conv2d>(n + ".conv", cin, cout, 3, 1, 1, rng);
        b.bn = std::make_unique<nn::BatchNorm2d>(n + ".bn", cout);
        b.act = std::make_unique<nn::LeakyReLU>(n + ".act", cfg.leaky_slope);
        b.pool = std::make_unique<nn::MaxPool2d>(n + ".pool");
        enc_.push_back(std::move(b));
        cin = cout;
        res /= 2;
        ++idx;
    }
    for (int i = 0; i < cfg.extra_pool; ++i) {
        extra_pools_.push_back(std::make_unique<nn::MaxPool2d>("rec.extra_pool" + std::to_string(i)));
        res /= 2;
    }
    latent_conv_ = std::make_unique<nn::Conv2d>("rec.latent.conv", cin, cfg.latent_channels,
                                                cfg.latent_kernel, 1, cfg.latent_pad, rng);
    latent_bn_ = std::make_unique<nn::BatchNorm2d>("rec.latent.bn", cfg.latent_channels);
    latent_act_ = std::make_unique<nn::LeakyReLU>("rec.latent.act", cfg.leaky_slope);
    res = res + 2 * cfg.latent_pad - cfg.latent_kernel + 1;
    latent_shape_ = {cfg.latent_channels, res, res};

    cin = cfg.latent_channels;
    idx = 0;
    for (const auto& d : cfg.deconvs) {
        DecBlock b;
        const std::string n = "rec.dec" + std::to_string(idx);
        b.deconv =
            std::make_unique<nn::ConvTranspose2d>(n + ".deconv", cin, d.cout, d.k, d.stride, d.pad, rng);
        b.bn = std::make_unique<nn::BatchNorm2d>(n + ".bn", d.cout);
        b.act = std::make_unique<nn::LeakyReLU>(n + ".act", cfg.leaky_slope);
        dec_.push_back(std::move(b));
        cin = d.cout;
        ++idx;
    }
    if (cfg.refine_channels > 0) {
        refine_conv_ = std::make_unique<nn::Conv2d>("rec.refine.conv", cin, cfg.refine_channels, 3,
                                                    1, 1, rng);
        refine_bn_ = std::make_unique<nn::BatchNorm2d>("rec.refine.bn", cfg.refine_channels);
        refine_act_ = std::make_unique<nn::LeakyReLU>("rec.refine.act", cfg.leaky_slope);
        cin = cfg.refine_channels;
    }
    resize_ = std::make_unique<nn::BilinearResize>("rec.resize", cfg.out_grid, cfg.out_grid);
    head_ = std::make_unique<nn::Conv2d>("rec.head", cin, 3, 3, 1, 1, rng);  // linear output
}

Tensor RecNet::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.input_size ||
        x.dim(3) != cfg_.input_size)
        throw std::invalid_argument("recnet: expected (N,3," + std::to_string(cfg_.input_size) +
                                    "," + std::to_string(cfg_.input_size) + "), got " +
                                    Tensor::shape_str(x.shape()));
    Tensor a = x;
    pooled_cache_.clear();
    for (auto& b : enc_) {
        a = b.pool->forward(b.act->forward(b.bn->forward(b.conv->forward(a))));
        b.pooled_shape = a.shape();
        pooled_cache_.push_back(a);
    }
    for (auto& p : extra_pools_) a = p->forward(a);
    a = latent_act_->forward(latent_bn_->forward(latent_conv_->forward(a)));
    for (std::size_t j = 0; j < dec_.size(); ++j) {
        auto& d = dec_[j];
        a = d.act->forward(d.bn->forward(d.deconv->forward(a)));
        d.skip_from = -1;
        for (std::size_t i = 0; i < enc_.size(); ++i) {
            if (pooled_cache_[i].shape() == a.shape()) {
                for (std::size_t t = 0; t < a.size(); ++t) a[t] += pooled_cache_[i][t];
                d.skip_from = static_cast<int>(i);
                break;
            }
        }
    }
    if (refine_conv_)
        a = refine_act_->forward(refine_bn_->forward(refine_conv_->forward(a)));
    a = resize_->forward(a);
    a = head_->forward(a);
    nn::check_finite(a, "rec.head");
    return chw_to_surface(a);
}

Tensor RecNet::backward(const Tensor& dsurf) {
    Tensor g = surface_to_chw(dsurf);
    g = head_->backward(g);
    g = resize_->backward(g);
    if (refine_conv_)
        g = refine_conv_->backward(refine_bn_->backward(refine_act_->backward(g)));
    std::vector<Tensor> pending(enc_.size());
    for (std::size_t jr = dec_.size(); jr-- > 0;) {
        auto& d = dec_[jr];
        if (d.skip_from >= 0) pending[d.skip_from] = g;  // the add splits the gradient
        g = d.deconv->backward(d.bn->backward(d.act->backward(g)));
    }
    g = latent_conv_->backward(latent_bn_->backward(latent_act_->backward(g)));
    for (std::size_t pr = extra_pools_.size(); pr-- > 0;) g = extra_pools_[pr]->backward(g);
    for (std::size_t ir = enc_.size(); ir-- > 0;) {
        auto& b = enc_[ir];
        if (!pending[ir].empty())
            for (std::size_t t = 0; t < g.size(); ++t) g[t] += pending[ir][t];
        g = b.conv->backward(b.bn->backward(b.act->backward(b.pool->backward(g))));
    }
    return g;
}

std::vector<nn::Param*> RecNet::params() {
    std::vector<nn::Param*> ps;
    auto add = [&](nn::Layer& l) {
        for (auto* p : l.params()) ps.push_back(p);
    };
    for (auto& b : enc_) {
        add(*b.conv);
        add(*b.bn);
    }
    add(*latent_conv_);
    add(*latent_bn_);
    for (auto& d : dec_) {
        add(*d.deconv);
        add(*d.bn);
    }
    if (refine_conv_) {
        add(*refine_conv_);
        add(*refine_bn_);
    }
    add(*head_);
    return ps;
}

std::vector<std::pair<std::string, Tensor*>> RecNet::buffers() {
    std::vector<std::pair<std::string, Tensor*>> bs;
    auto add = [&](nn::BatchNorm2d& bn) {
        bs.emplace_back(bn.name() + ".running_mean", &bn.running_mean());
        bs.emplace_back(bn.name() + ".running_var", &bn.running_var());
    };
    for (auto& b : enc_) add(*b.bn);
    add(*latent_bn_);
    for (auto& d : dec_) add(*d.bn);
    if (refine_bn_) add(*refine_bn_);
    return bs;
}

void RecNet::set_train(bool t) {
    for (auto& b : enc_) b.bn->set_train(t);
    latent_bn_->set_train(t);
    for (auto& d : dec_) d.bn->set_train(t);
    if (refine_bn_) refine_bn_->set_train(t);
}

std::size_t count_parameters(const RecNetConfig& cfg) {
    Rng rng(0);
    RecNet net(cfg, rng);
    return net.parameter_count();
}

Tensor chw_to_surface(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor s({n, h, w, c});
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    s[((static_cast<std::size_t>(i) * h + y) * w + xx) * c + ci] =
                        x.at4(i, ci, y, xx);
    return s;
}

Tensor surface_to_chw(const Tensor& s) {
    const int n = s.dim(0), h = s.dim(1), w = s.dim(2), c = s.dim(3);
    Tensor x({n, c, h, w});
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    x.at4(i, ci, y, xx) =
                        s[((static_cast<std::size_t>(i) * h + y) * w + xx) * c + ci];
    return x;
}

}  // namespace ismo
