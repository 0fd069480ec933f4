#include "ismo/segmenter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>

namespace ismo {

ODNet::ODNet(const SegmenterConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.depth < 1) throw std::invalid_argument("odnet: depth must be >= 1");
    int cin = 3;
    for (int i = 0; i < cfg.depth; ++i) {
        const int cout = cfg.base_channels << i;
        const std::string n = "od.enc" + std::to_string(i);
        Block b;
        b.conv = std::make_unique<nn::Conv2d>(n + ".conv", cin, cout, 3, 1, 1, rng);
        b.bn = std::make_unique<nn::BatchNorm2d>(n + ".bn", cout);
        b.act = std::make_unique<nn::LeakyReLU>(n + ".act", cfg.leaky_slope);
        enc_.push_back(std::move(b));
        pools_.push_back(std::make_unique<nn::MaxPool2d>(n + ".pool"));
        cin = cout;
    }
    bottleneck_.conv = std::make_unique<nn::Conv2d>("od.mid.conv", cin, cin, 3, 1, 1, rng);
    bottleneck_.bn = std::make_unique<nn::BatchNorm2d>("od.mid.bn", cin);
    bottleneck_.act = std::make_unique<nn::LeakyReLU>("od.mid.act", cfg.leaky_slope);
    int res = cfg.input_size >> cfg.depth;
    for (int i = cfg.depth - 1; i >= 0; --i) {
        res *= 2;
        ups_.push_back(std::make_unique<nn::BilinearResize>("od.up" + std::to_string(i), res, res));
        // after the skip add the channel count equals the encoder block output
        const int cskip = cfg.base_channels << i;
        const int cout = i > 0 ? (cfg.base_channels << (i - 1)) : cfg.base_channels;
        const std::string n = "od.dec" + std::to_string(i);
        Block b;
        b.conv = std::make_unique<nn::Conv2d>(n + ".conv", cskip, cout, 3, 1, 1, rng);
        b.bn = std::make_unique<nn::BatchNorm2d>(n + ".bn", cout);
        b.act = std::make_unique<nn::LeakyReLU>(n + ".act", cfg.leaky_slope);
        dec_.push_back(std::move(b));
        cin = cout;
    }
    head_ = std::make_unique<nn::Conv2d>("od.head", cin, 1, 1, 1, 0, rng);
    out_act_ = std::make_unique<nn::Sigmoid>("od.sigmoid");
}

Tensor ODNet::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.input_size ||
        x.dim(3) != cfg_.input_size)
        throw std::invalid_argument("odnet: expected (N,3," + std::to_string(cfg_.input_size) +
                                    "," + std::to_string(cfg_.input_size) + "), got " +
                                    Tensor::shape_str(x.shape()));
    Tensor a = x;
    skip_cache_.clear();
    for (int i = 0; i < cfg_.depth; ++i) {
        a = enc_[i].act->forward(enc_[i].bn->forward(enc_[i].conv->forward(a)));
        skip_cache_.push_back(a);
        a = pools_[i]->forward(a);
    }
    a = bottleneck_.act->forward(bottleneck_.bn->forward(bottleneck_.conv->forward(a)));
    for (std::size_t j = 0; j < dec_.size(); ++j) {
        a = ups_[j]->forward(a);
        const Tensor& skip = skip_cache_[cfg_.depth - 1 - j];
        for (std::size_t t = 0; t < a.size(); ++t) a[t] += skip[t];
        a = dec_[j].act->forward(dec_[j].bn->forward(dec_[j].conv->forward(a)));
    }
    a = out_act_->forward(head_->forward(a));
    return a;
}

Tensor ODNet::backward(const Tensor& dout) {
    Tensor g = head_->backward(out_act_->backward(dout));
    std::vector<Tensor> pending(cfg_.depth);
    for (std::size_t jr = dec_.size(); jr-- > 0;) {
        g = dec_[jr].conv->backward(dec_[jr].bn->backward(dec_[jr].act->backward(g)));
        pending[cfg_.depth - 1 - jr] = g;  // add node splits the gradient
        g = ups_[jr]->backward(g);
    }
    g = bottleneck_.conv->backward(bottleneck_.bn->backward(bottleneck_.act->backward(g)));
    for (int ir = cfg_.depth - 1; ir >= 0; --ir) {
        g = pools_[ir]->backward(g);
        if (!pending[ir].empty())
            for (std::size_t t = 0; t < g.size(); ++t) g[t] += pending[ir][t];
        g = enc_[ir].conv->backward(enc_[ir].bn->backward(enc_[ir].act->backward(g)));
    }
    return g;
}

std::vector<nn::Param*> ODNet::params() {
    std::vector<nn::Param*> ps;
    auto add = [&](Block& b) {
        for (auto* p : b.conv->params()) ps.push_back(p);
        for (auto* p : b.bn->params()) ps.push_back(p);
    };
    for (auto& b : enc_) add(b);
    add(bottleneck_);
    for (auto& b : dec_) add(b);
    for (auto* p : head_->params()) ps.push_back(p);
    return ps;
}

std::vector<std::pair<std::string, Tensor*>> ODNet::buffers() {
    std::vector<std::pair<std::string, Tensor*>> bs;
    auto add = [&](Block& b) {
        bs.emplace_back(b.bn->name() + ".running_mean", &b.bn->running_mean());
        bs.emplace_back(b.bn->name() + ".running_var", &b.bn->running_var());
    };
    for (auto& b : enc_) add(b);
    add(bottleneck_);
    for (auto& b : dec_) add(b);
    return bs;
}

void ODNet::set_train(bool t) {
    for (auto& b : enc_) b.bn->set_train(t);
    bottleneck_.bn->set_train(t);
    for (auto& b : dec_) b.bn->set_train(t);
}

Tensor ODNet::predict_confidence(const ImageU8& image) {
    Tensor x = image_to_tensor(image);
    if (x.dim(2) != cfg_.input_size || x.dim(3) != cfg_.input_size)
        throw std::invalid_argument("predict_confidence: image must be " +
                                    std::to_string(cfg_.input_size) + "x" +
                                    std::to_string(cfg_.input_size));
    Tensor out = forward(x);
    return out.reshaped({cfg_.input_size, cfg_.input_size});
}

Mask binarize(const Tensor& confidence, const std::string& method) {
    if (confidence.ndim() != 2) throw std::invalid_argument("binarize: expected a (H, W) map");
    const int h = confidence.dim(0), w = confidence.dim(1);
    for (std::size_t i = 0; i < confidence.size(); ++i)
        if (confidence[i] < 0.0 || confidence[i] > 1.0)
            throw std::invalid_argument("binarize: confidence values must lie in [0,1]");

    double threshold;
    if (method.rfind("fixed:", 0) == 0) {
        threshold = std::stod(method.substr(6));
    } else if (method == "otsu") {
        std::array<std::size_t, 256> hist{};
        for (std::size_t i = 0; i < confidence.size(); ++i) {
            int bin = static_cast<int>(confidence[i] * 255.0);
            hist[std::clamp(bin, 0, 255)]++;
        }
        const double total = static_cast<double>(confidence.size());
        double sum_all = 0;
        for (int i = 0; i < 256; ++i) sum_all += i * static_cast<double>(hist[i]);
        double best_var = -1.0;
        int best_t = -1;
        double w0 = 0, sum0 = 0;
        for (int t = 0; t < 255; ++t) {
            w0 += static_cast<double>(hist[t]);
            sum0 += t * static_cast<double>(hist[t]);
            const double w1 = total - w0;
            if (w0 == 0 || w1 == 0) continue;
            const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
            const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
            if (var > best_var) {
                best_var = var;
                best_t = t;
            }
        }
        if (best_t < 0) {
            std::fprintf(stderr, "warning: otsu on a constant map, falling back to fixed 0.5\n");
            threshold = 0.5;
        } else {
            threshold = (best_t + 0.5) / 255.0;
        }
    } else {
        throw std::invalid_argument("binarize: unknown method '" + method + "'");
    }

    Mask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at(x, y) = confidence[static_cast<std::size_t>(y) * w + x] > threshold ? 1 : 0;
    return m;
}

namespace {

// Moore-neighbor border following around one 8-connected component,
// starting from its topmost-leftmost pixel.
std::vector<std::pair<int, int>> trace_outer_contour(const Mask& comp, int sx, int sy) {
    static const int dx8[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    static const int dy8[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    auto is_fg = [&](int x, int y) {
        return x >= 0 && x < comp.width && y >= 0 && y < comp.height && comp.at(x, y);
    };
    std::vector<std::pair<int, int>> contour{{sx, sy}};
    // single-pixel component
    bool isolated = true;
    for (int d = 0; d < 8; ++d)
        if (is_fg(sx + dx8[d], sy + dy8[d])) isolated = false;
    if (isolated) return contour;

    int cx = sx, cy = sy;
    int backtrack = 6;  // came from above (the start pixel is topmost-leftmost)
    while (true) {
        int d = (backtrack + 1) % 8;
        int found = -1;
        for (int i = 0; i < 8; ++i) {
            const int dd = (d + i) % 8;
            if (is_fg(cx + dx8[dd], cy + dy8[dd])) {
                found = dd;
                break;
            }
        }
        if (found < 0) break;
        cx += dx8[found];
        cy += dy8[found];
        if (cx == sx && cy == sy && contour.size() > 1) break;
        contour.emplace_back(cx, cy);
        backtrack = (found + 4) % 8;
    }
    return contour;
}

// fill the inside of the traced contour: flood the exterior 4-connectedly
// from the border, everything unreachable is inside. The component pixels
// join the wall so the region interior includes any internal holes.
Mask fill_contour(const std::vector<std::pair<int, int>>& contour, const Mask& comp) {
    const int w = comp.width, h = comp.height;
    Mask wall = comp;
    for (auto [x, y] : contour) wall.at(x, y) = 1;
    Mask outside(w, h);
    std::deque<std::pair<int, int>> q;
    auto push = [&](int x, int y) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        if (wall.at(x, y) || outside.at(x, y)) return;
        outside.at(x, y) = 1;
        q.emplace_back(x, y);
    };
    for (int x = 0; x < w; ++x) {
        push(x, 0);
        push(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        push(0, y);
        push(w - 1, y);
    }
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        push(x + 1, y);
        push(x - 1, y);
        push(x, y + 1);
        push(x, y - 1);
    }
    Mask filled(w, h);
    for (std::size_t i = 0; i < filled.v.size(); ++i) filled.v[i] = outside.v[i] ? 0 : 1;
    return filled;
}

}  // namespace

ObjectMask extract_object_mask(const Mask& binary) {
    const int w = binary.width, h = binary.height;
    // 8-connected component labeling
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    int ncomp = 0;
    std::vector<std::pair<int, int>> starts;  // topmost-leftmost pixel per component
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!binary.at(x, y) || label[static_cast<std::size_t>(y) * w + x] >= 0) continue;
            const int id = ncomp++;
            starts.emplace_back(x, y);
            std::deque<std::pair<int, int>> q{{x, y}};
            label[static_cast<std::size_t>(y) * w + x] = id;
            while (!q.empty()) {
                auto [cx, cy] = q.front();
                q.pop_front();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        if (!binary.at(nx, ny)) continue;
                        auto& l = label[static_cast<std::size_t>(ny) * w + nx];
                        if (l < 0) {
                            l = id;
                            q.emplace_back(nx, ny);
                        }
                    }
            }
        }
    if (ncomp == 0) {
        ObjectMask om;
        om.mask = Mask(w, h);
        om.empty = true;
        return om;
    }

    // fill each component's outer contour, keep the largest filled area;
    // ties go to the component whose contour starts topmost-leftmost
    Mask best;
    std::size_t best_area = 0;
    for (int id = 0; id < ncomp; ++id) {
        Mask comp(w, h);
        for (std::size_t i = 0; i < comp.v.size(); ++i) comp.v[i] = label[i] == id ? 1 : 0;
        const auto contour = trace_outer_contour(comp, starts[id].first, starts[id].second);
        Mask filled = fill_contour(contour, comp);
        const std::size_t area = filled.count_nonzero();
        if (area > best_area) {
            best_area = area;
            best = std::move(filled);
        }
    }
    return {std::move(best), false};
}

ImageU8 apply_mask(const ImageU8& image, const Mask& mask) {
    if (image.width != mask.width || image.height != mask.height)
        throw std::invalid_argument("apply_mask: size mismatch");
    ImageU8 out = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            if (!mask.at(x, y)) {
                auto* p = out.px(x, y);
                p[0] = p[1] = p[2] = 0;
            }
    return out;
}

SegmentedImage segment_image(ODNet& net, const ImageU8& image, const std::string& threshold) {
    const Tensor conf = net.predict_confidence(image);
    const Mask binary = binarize(conf, threshold);
    ObjectMask om = extract_object_mask(binary);
    SegmentedImage seg;
    if (om.empty) {
        seg.image = image;  // fall back to the unsegmented input
        seg.fallback = true;
        return seg;
    }
    seg.image = apply_mask(image, om.mask);
    return seg;
}

}  // namespace ismo
