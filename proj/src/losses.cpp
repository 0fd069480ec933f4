#include "ismo/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ismo {

namespace {

int batch_of(const Tensor& t) {
    if (t.ndim() == 3) return 1;
    if (t.ndim() == 4) return t.dim(0);
    throw std::invalid_argument("loss: expected (H,W,3) or (B,H,W,3) surfaces");
}

double clamp_prob(double p) {
    if (p < kProbEps) return kProbEps;
    if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
    return p;
}

void warn_if_degenerate(const std::vector<double>& probs, const char* what) {
    for (double p : probs)
        if (p <= 0.0 || p >= 1.0) {
            std::fprintf(stderr, "warning: %s received probability %g, clamping to (%g, %g)\n",
                         what, p, kProbEps, 1.0 - kProbEps);
            return;
        }
}

}  // namespace

double loss_3d(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt))
        throw std::invalid_argument("loss_3d: shape mismatch " +
                                    Tensor::shape_str(pred.shape()) + " vs " +
                                    Tensor::shape_str(gt.shape()));
    const int b = batch_of(pred);
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - gt[i]);
    return sum / b;
}

Tensor loss_3d_grad(const Tensor& pred, const Tensor& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("loss_3d_grad: shape mismatch");
    const int b = batch_of(pred);
    Tensor g(pred.shape());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - gt[i];
        g[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / b;
    }
    return g;
}

std::vector<double> gaussian_kernel(const IsometryConfig& cfg) {
    if (cfg.kernel_size < 3 || cfg.kernel_size % 2 == 0)
        throw std::invalid_argument("gaussian_kernel: kernel_size must be odd and >= 3");
    const int k = cfg.kernel_size, r = k / 2;
    std::vector<double> kern(static_cast<std::size_t>(k) * k);
    double sum = 0;
    for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x) {
            double v;
            if (cfg.sigma <= 0.0)
                v = (x == 0 && y == 0) ? 1.0 : 0.0;  // delta in the sigma -> 0 limit
            else
                v = std::exp(-(x * x + y * y) / (2.0 * cfg.sigma * cfg.sigma));
            kern[static_cast<std::size_t>(y + r) * k + (x + r)] = v;
            sum += v;
        }
    for (double& v : kern) v /= sum;
    return kern;
}

namespace {

// 2D convolution with replicate padding of every channel of one (H, W, 3)
// grid, plus its adjoint for the gradient
void smooth_one(const Tensor& in, Tensor& out, const std::vector<double>& kern, int k,
                bool adjoint) {
    const int h = in.dim(in.ndim() - 3), w = in.dim(in.ndim() - 2);
    const int r = k / 2;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!adjoint) {
                    double acc = 0;
                    for (int ky = -r; ky <= r; ++ky)
                        for (int kx = -r; kx <= r; ++kx) {
                            const int sy = std::min(h - 1, std::max(0, y + ky));
                            const int sx = std::min(w - 1, std::max(0, x + kx));
                            acc += kern[static_cast<std::size_t>(ky + r) * k + (kx + r)] *
                                   in.at3(sy, sx, c);
                        }
                    out.at3(y, x, c) = acc;
                } else {
                    const double g = in.at3(y, x, c);
                    for (int ky = -r; ky <= r; ++ky)
                        for (int kx = -r; kx <= r; ++kx) {
                            const int sy = std::min(h - 1, std::max(0, y + ky));
                            const int sx = std::min(w - 1, std::max(0, x + kx));
                            out.at3(sy, sx, c) +=
                                g * kern[static_cast<std::size_t>(ky + r) * k + (kx + r)];
                        }
                }
            }
}

// views a batch item of (B,H,W,3) as (H,W,3) without copying shape gymnastics
Tensor slice_surface(const Tensor& batch, int b) {
    const int h = batch.dim(1), w = batch.dim(2);
    Tensor s({h, w, 3});
    const std::size_t n = s.size();
    const double* src = batch.data() + static_cast<std::size_t>(b) * n;
    std::copy(src, src + n, s.data());
    return s;
}

}  // namespace

Tensor smooth_surface(const Tensor& surface, const IsometryConfig& cfg) {
    const auto kern = gaussian_kernel(cfg);
    if (surface.ndim() == 3) {
        Tensor out(surface.shape());
        smooth_one(surface, out, kern, cfg.kernel_size, false);
        return out;
    }
    Tensor out(surface.shape());
    const int b = surface.dim(0);
    const std::size_t n = surface.size() / b;
    for (int i = 0; i < b; ++i) {
        Tensor s = slice_surface(surface, i);
        Tensor o({surface.dim(1), surface.dim(2), 3});
        smooth_one(s, o, kern, cfg.kernel_size, false);
        std::copy(o.data(), o.data() + n, out.data() + static_cast<std::size_t>(i) * n);
    }
    return out;
}

double loss_iso(const Tensor& pred, const IsometryConfig& cfg) {
    const Tensor smoothed = smooth_surface(pred, cfg);
    const int b = batch_of(pred);
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(smoothed[i] - pred[i]);
    return sum / b;
}

Tensor loss_iso_grad(const Tensor& pred, const IsometryConfig& cfg) {
    const Tensor smoothed = smooth_surface(pred, cfg);
    const int b = batch_of(pred);
    // sign of (smoothed - pred); gradient flows through both paths unless the
    // smoothed surface is detached
    Tensor sgn(pred.shape());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = smoothed[i] - pred[i];
        sgn[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / b;
    }
    Tensor grad(pred.shape());
    if (!cfg.detach_smoothed) {
        const auto kern = gaussian_kernel(cfg);
        if (pred.ndim() == 3) {
            smooth_one(sgn, grad, kern, cfg.kernel_size, true);
        } else {
            const int nb = pred.dim(0);
            const std::size_t n = pred.size() / nb;
            for (int i = 0; i < nb; ++i) {
                Tensor s = slice_surface(sgn, i);
                Tensor o({pred.dim(1), pred.dim(2), 3});
                smooth_one(s, o, kern, cfg.kernel_size, true);
                std::copy(o.data(), o.data() + n, grad.data() + static_cast<std::size_t>(i) * n);
            }
        }
    }
    for (std::size_t i = 0; i < pred.size(); ++i) grad[i] -= sgn[i];
    return grad;
}

double loss_adv_generator(const std::vector<double>& d_on_fake) {
    if (d_on_fake.empty()) throw std::invalid_argument("loss_adv_generator: empty batch");
    warn_if_degenerate(d_on_fake, "loss_adv_generator");
    double sum = 0;
    for (double p : d_on_fake) sum += -std::log(clamp_prob(p));
    return sum / d_on_fake.size();
}

double loss_adv_discriminator(const std::vector<double>& d_on_real,
                              const std::vector<double>& d_on_fake) {
    if (d_on_real.empty() || d_on_real.size() != d_on_fake.size())
        throw std::invalid_argument("loss_adv_discriminator: batch size mismatch");
    warn_if_degenerate(d_on_real, "loss_adv_discriminator");
    warn_if_degenerate(d_on_fake, "loss_adv_discriminator");
    double sum = 0;
    for (std::size_t i = 0; i < d_on_real.size(); ++i)
        sum += -std::log(clamp_prob(d_on_real[i])) - std::log(clamp_prob(1.0 - d_on_fake[i]));
    return sum / d_on_real.size();
}

std::vector<double> loss_adv_generator_grad(const std::vector<double>& d_on_fake) {
    std::vector<double> g(d_on_fake.size());
    const double n = static_cast<double>(d_on_fake.size());
    for (std::size_t i = 0; i < d_on_fake.size(); ++i)
        g[i] = -1.0 / (clamp_prob(d_on_fake[i]) * n);
    return g;
}

void loss_adv_discriminator_grad(const std::vector<double>& d_on_real,
                                 const std::vector<double>& d_on_fake,
                                 std::vector<double>& d_real_grad,
                                 std::vector<double>& d_fake_grad) {
    const double n = static_cast<double>(d_on_real.size());
    d_real_grad.resize(d_on_real.size());
    d_fake_grad.resize(d_on_fake.size());
    for (std::size_t i = 0; i < d_on_real.size(); ++i) {
        d_real_grad[i] = -1.0 / (clamp_prob(d_on_real[i]) * n);
        d_fake_grad[i] = 1.0 / (clamp_prob(1.0 - d_on_fake[i]) * n);
    }
}

double loss_total(const LossBreakdown& parts) {
    const double t = parts.l3d + parts.liso + parts.lg + parts.ld;
    if (!std::isfinite(t)) throw std::runtime_error("loss_total: non-finite component");
    return t;
}

}  // namespace ismo
