#include "ismo/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

namespace ismo::nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

namespace {

void init_scaled_normal(Tensor& w, int fan_in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, stddev);
}

// x: single sample (C, H, W) at base pointer. Fills col (C*k*k, ho*wo) row-major.
void im2col(const double* x, int c, int h, int w, int k, int stride, int pad,
            int ho, int wo, double* col) {
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) *
                                        (static_cast<std::size_t>(ho) * wo);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    double* dst = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::memset(dst, 0, sizeof(double) * wo);
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(ci) * h + iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix < 0 || ix >= w) ? 0.0 : src[ix];
                    }
                }
            }
        }
    }
}

// scatter-add of col (C*k*k, ho*wo) back into x (C, H, W)
void col2im_add(const double* col, int c, int h, int w, int k, int stride, int pad,
                int ho, int wo, double* x) {
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) *
                                              (static_cast<std::size_t>(ho) * wo);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = x + (static_cast<std::size_t>(ci) * h + iy) * w;
                    const double* src = row + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int cin, int cout, int k, int stride, int pad, Rng& rng)
    : name_(std::move(name)), cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
      w_(name_ + ".w", {cout, cin * k * k}), b_(name_ + ".b", {cout}) {
    init_scaled_normal(w_.value, cin * k * k, rng);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != cin_)
        throw std::invalid_argument(name_ + ": bad input shape " + Tensor::shape_str(x.shape()));
    x_ = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int ho = out_size(h), wo = out_size(w);
    if (ho <= 0 || wo <= 0) throw std::invalid_argument(name_ + ": input too small");
    Tensor out({n, cout_, ho, wo});
    col_.resize(static_cast<std::size_t>(cin_) * k_ * k_ * ho * wo);
    CMapRM wm(w_.value.data(), cout_, cin_ * k_ * k_);
    for (int i = 0; i < n; ++i) {
        im2col(x.data() + static_cast<std::size_t>(i) * cin_ * h * w, cin_, h, w, k_, stride_,
               pad_, ho, wo, col_.data());
        CMapRM cm(col_.data(), cin_ * k_ * k_, ho * wo);
        MapRM om(out.data() + static_cast<std::size_t>(i) * cout_ * ho * wo, cout_, ho * wo);
        om.noalias() = wm * cm;
        for (int co = 0; co < cout_; ++co) om.row(co).array() += b_.value[co];
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& dout) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const int ho = dout.dim(2), wo = dout.dim(3);
    Tensor dx(x_.shape());
    MapRM dwm(w_.grad.data(), cout_, cin_ * k_ * k_);
    CMapRM wm(w_.value.data(), cout_, cin_ * k_ * k_);
    std::vector<double> dcol(static_cast<std::size_t>(cin_) * k_ * k_ * ho * wo);
    for (int i = 0; i < n; ++i) {
        CMapRM dom(dout.data() + static_cast<std::size_t>(i) * cout_ * ho * wo, cout_, ho * wo);
        im2col(x_.data() + static_cast<std::size_t>(i) * cin_ * h * w, cin_, h, w, k_, stride_,
               pad_, ho, wo, col_.data());
        CMapRM cm(col_.data(), cin_ * k_ * k_, ho * wo);
        dwm.noalias() += dom * cm.transpose();
        // scalar reduction: Eigen's vectorized .sum() over a mapped row
        // splits at an alignment-dependent offset and is not bit-reproducible
        for (int co = 0; co < cout_; ++co) {
            double acc = 0;
            for (int t = 0; t < dom.cols(); ++t) acc += dom(co, t);
            b_.grad[co] += acc;
        }
        MapRM dcm(dcol.data(), cin_ * k_ * k_, ho * wo);
        dcm.noalias() = wm.transpose() * dom;
        col2im_add(dcol.data(), cin_, h, w, k_, stride_, pad_, ho, wo,
                   dx.data() + static_cast<std::size_t>(i) * cin_ * h * w);
    }
    return dx;
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(std::string name, int cin, int cout, int k, int stride, int pad,
                                 Rng& rng)
    : name_(std::move(name)), cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
      w_(name_ + ".w", {cin, cout * k * k}), b_(name_ + ".b", {cout}) {
    init_scaled_normal(w_.value, cin, rng);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != cin_)
        throw std::invalid_argument(name_ + ": bad input shape " + Tensor::shape_str(x.shape()));
    x_ = x;
    const int n = x.dim(0), hi = x.dim(2), wi = x.dim(3);
    const int ho = out_size(hi), wo = out_size(wi);
    if (ho <= 0 || wo <= 0) throw std::invalid_argument(name_ + ": input too small");
    Tensor out({n, cout_, ho, wo});
    col_.resize(static_cast<std::size_t>(cout_) * k_ * k_ * hi * wi);
    CMapRM wm(w_.value.data(), cin_, cout_ * k_ * k_);
    for (int i = 0; i < n; ++i) {
        CMapRM xm(x.data() + static_cast<std::size_t>(i) * cin_ * hi * wi, cin_, hi * wi);
        MapRM cm(col_.data(), cout_ * k_ * k_, hi * wi);
        cm.noalias() = wm.transpose() * xm;
        double* ob = out.data() + static_cast<std::size_t>(i) * cout_ * ho * wo;
        // the transposed convolution scatters with the forward-conv geometry
        // that maps (ho, wo) -> (hi, wi)
        col2im_add(col_.data(), cout_, ho, wo, k_, stride_, pad_, hi, wi, ob);
        MapRM om(ob, cout_, ho * wo);
        for (int co = 0; co < cout_; ++co) om.row(co).array() += b_.value[co];
    }
    return out;
}

Tensor ConvTranspose2d::backward(const Tensor& dout) {
    const int n = x_.dim(0), hi = x_.dim(2), wi = x_.dim(3);
    const int ho = dout.dim(2), wo = dout.dim(3);
    Tensor dx(x_.shape());
    CMapRM wm(w_.value.data(), cin_, cout_ * k_ * k_);
    MapRM dwm(w_.grad.data(), cin_, cout_ * k_ * k_);
    for (int i = 0; i < n; ++i) {
        const double* db = dout.data() + static_cast<std::size_t>(i) * cout_ * ho * wo;
        im2col(db, cout_, ho, wo, k_, stride_, pad_, hi, wi, col_.data());
        CMapRM cm(col_.data(), cout_ * k_ * k_, hi * wi);
        CMapRM xm(x_.data() + static_cast<std::size_t>(i) * cin_ * hi * wi, cin_, hi * wi);
        dwm.noalias() += xm * cm.transpose();
        CMapRM dom(db, cout_, ho * wo);
        // scalar reduction: Eigen's vectorized .sum() over a mapped row
        // splits at an alignment-dependent offset and is not bit-reproducible
        for (int co = 0; co < cout_; ++co) {
            double acc = 0;
            for (int t = 0; t < dom.cols(); ++t) acc += dom(co, t);
            b_.grad[co] += acc;
        }
        MapRM dxm(dx.data() + static_cast<std::size_t>(i) * cin_ * hi * wi, cin_, hi * wi);
        dxm.noalias() = wm * cm;
    }
    return dx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels)
    : name_(std::move(name)), c_(channels), gamma_(name_ + ".gamma", {channels}),
      beta_(name_ + ".beta", {channels}), running_mean_({channels}), running_var_({channels}) {
    gamma_.value.fill(1.0);
    running_var_.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != c_)
        throw std::invalid_argument(name_ + ": bad input shape " + Tensor::shape_str(x.shape()));
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n) * plane;
    Tensor out(x.shape());
    xhat_ = Tensor(x.shape());
    invstd_.assign(c_, 0.0);
    for (int c = 0; c < c_; ++c) {
        double mean, var;
        if (train_) {
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = x.data() + (static_cast<std::size_t>(i) * c_ + c) * plane;
                for (std::size_t j = 0; j < plane; ++j) {
                    s += p[j];
                    s2 += p[j] * p[j];
                }
            }
            mean = s / m;
            var = s2 / m - mean * mean;
            if (var < 0) var = 0;
            running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean;
            running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * var;
        } else {
            mean = running_mean_[c];
            var = running_var_[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        invstd_[c] = inv;
        const double g = gamma_.value[c], b = beta_.value[c];
        for (int i = 0; i < n; ++i) {
            const std::size_t base = (static_cast<std::size_t>(i) * c_ + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const double xh = (x[base + j] - mean) * inv;
                xhat_[base + j] = xh;
                out[base + j] = g * xh + b;
            }
        }
    }
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& dout) {
    const int n = dout.dim(0), h = dout.dim(2), w = dout.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n) * plane;
    Tensor dx(dout.shape());
    for (int c = 0; c < c_; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t base = (static_cast<std::size_t>(i) * c_ + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                sum_dy += dout[base + j];
                sum_dy_xh += dout[base + j] * xhat_[base + j];
            }
        }
        gamma_.grad[c] += sum_dy_xh;
        beta_.grad[c] += sum_dy;
        const double g = gamma_.value[c], inv = invstd_[c];
        if (train_) {
            const double k1 = g * inv / m;
            for (int i = 0; i < n; ++i) {
                const std::size_t base = (static_cast<std::size_t>(i) * c_ + c) * plane;
                for (std::size_t j = 0; j < plane; ++j)
                    dx[base + j] =
                        k1 * (m * dout[base + j] - sum_dy - xhat_[base + j] * sum_dy_xh);
            }
        } else {
            const double k = g * inv;
            for (int i = 0; i < n; ++i) {
                const std::size_t base = (static_cast<std::size_t>(i) * c_ + c) * plane;
                for (std::size_t j = 0; j < plane; ++j) dx[base + j] = k * dout[base + j];
            }
        }
    }
    return dx;
}

// ------------------------------------------------------------ pointwise

Tensor LeakyReLU::forward(const Tensor& x) {
    x_ = x;
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : slope_ * x[i];
    return out;
}

Tensor LeakyReLU::backward(const Tensor& dout) {
    Tensor dx(dout.shape());
    for (std::size_t i = 0; i < dout.size(); ++i)
        dx[i] = x_[i] > 0 ? dout[i] : slope_ * dout[i];
    return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
    y_ = Tensor(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y_[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return y_;
}

Tensor Sigmoid::backward(const Tensor& dout) {
    Tensor dx(dout.shape());
    for (std::size_t i = 0; i < dout.size(); ++i) dx[i] = dout[i] * y_[i] * (1.0 - y_[i]);
    return dx;
}

// -------------------------------------------------------------- pooling

Tensor MaxPool2d::forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int ho = h / 2, wo = w / 2;
    in_shape_ = x.shape();
    Tensor out({n, c, ho, wo});
    argmax_.assign(out.size(), 0);
    std::size_t oi = 0;
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            const double* pl = x.data() + (static_cast<std::size_t>(i) * c + ci) *
                                              (static_cast<std::size_t>(h) * w);
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox, ++oi) {
                    std::size_t best = static_cast<std::size_t>(2 * oy) * w + 2 * ox;
                    double bv = pl[best];
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t idx =
                                static_cast<std::size_t>(2 * oy + dy) * w + 2 * ox + dx;
                            if (pl[idx] > bv) {
                                bv = pl[idx];
                                best = idx;
                            }
                        }
                    out[oi] = bv;
                    argmax_[oi] = (static_cast<std::size_t>(i) * c + ci) *
                                      (static_cast<std::size_t>(h) * w) +
                                  best;
                }
        }
    return out;
}

Tensor MaxPool2d::backward(const Tensor& dout) {
    Tensor dx(in_shape_);
    for (std::size_t i = 0; i < dout.size(); ++i) dx[argmax_[i]] += dout[i];
    return dx;
}

// ------------------------------------------------------- BilinearResize

Tensor BilinearResize::forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape();
    Tensor out({n, c, oh_, ow_});
    const double sy = oh_ > 1 ? static_cast<double>(h - 1) / (oh_ - 1) : 0.0;
    const double sx = ow_ > 1 ? static_cast<double>(w - 1) / (ow_ - 1) : 0.0;
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            const double* src = x.data() + (static_cast<std::size_t>(i) * c + ci) *
                                               (static_cast<std::size_t>(h) * w);
            double* dst = out.data() + (static_cast<std::size_t>(i) * c + ci) *
                                           (static_cast<std::size_t>(oh_) * ow_);
            for (int oy = 0; oy < oh_; ++oy) {
                const double fy = oy * sy;
                const int y0 = static_cast<int>(fy);
                const int y1 = std::min(y0 + 1, h - 1);
                const double wy = fy - y0;
                for (int ox = 0; ox < ow_; ++ox) {
                    const double fx = ox * sx;
                    const int x0 = static_cast<int>(fx);
                    const int x1 = std::min(x0 + 1, w - 1);
                    const double wx = fx - x0;
                    dst[static_cast<std::size_t>(oy) * ow_ + ox] =
                        (1 - wy) * ((1 - wx) * src[static_cast<std::size_t>(y0) * w + x0] +
                                    wx * src[static_cast<std::size_t>(y0) * w + x1]) +
                        wy * ((1 - wx) * src[static_cast<std::size_t>(y1) * w + x0] +
                              wx * src[static_cast<std::size_t>(y1) * w + x1]);
                }
            }
        }
    return out;
}

Tensor BilinearResize::backward(const Tensor& dout) {
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    Tensor dx(in_shape_);
    const double sy = oh_ > 1 ? static_cast<double>(h - 1) / (oh_ - 1) : 0.0;
    const double sx = ow_ > 1 ? static_cast<double>(w - 1) / (ow_ - 1) : 0.0;
    for (int i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            double* dst = dx.data() + (static_cast<std::size_t>(i) * c + ci) *
                                          (static_cast<std::size_t>(h) * w);
            const double* src = dout.data() + (static_cast<std::size_t>(i) * c + ci) *
                                                  (static_cast<std::size_t>(oh_) * ow_);
            for (int oy = 0; oy < oh_; ++oy) {
                const double fy = oy * sy;
                const int y0 = static_cast<int>(fy);
                const int y1 = std::min(y0 + 1, h - 1);
                const double wy = fy - y0;
                for (int ox = 0; ox < ow_; ++ox) {
                    const double fx = ox * sx;
                    const int x0 = static_cast<int>(fx);
                    const int x1 = std::min(x0 + 1, w - 1);
                    const double wx = fx - x0;
                    const double g = src[static_cast<std::size_t>(oy) * ow_ + ox];
                    dst[static_cast<std::size_t>(y0) * w + x0] += (1 - wy) * (1 - wx) * g;
                    dst[static_cast<std::size_t>(y0) * w + x1] += (1 - wy) * wx * g;
                    dst[static_cast<std::size_t>(y1) * w + x0] += wy * (1 - wx) * g;
                    dst[static_cast<std::size_t>(y1) * w + x1] += wy * wx * g;
                }
            }
        }
    return dx;
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::string name, int in_features, int out_features, Rng& rng)
    : name_(std::move(name)), in_(in_features), out_(out_features),
      w_(name_ + ".w", {out_features, in_features}), b_(name_ + ".b", {out_features}) {
    init_scaled_normal(w_.value, in_features, rng);
}

Tensor Dense::forward(const Tensor& x) {
    const std::size_t n = x.size() / in_;
    if (n * in_ != x.size())
        throw std::invalid_argument(name_ + ": bad input size " + Tensor::shape_str(x.shape()));
    x_ = x.reshaped({static_cast<int>(n), in_});
    Tensor out({static_cast<int>(n), out_});
    // plain loops: Eigen's matrix-vector kernel splits the reduction at an
    // alignment-dependent boundary, which breaks bit-exact reproducibility
    for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < out_; ++j) {
            const double* xr = x_.data() + i * in_;
            const double* wr = w_.value.data() + static_cast<std::size_t>(j) * in_;
            double acc = b_.value[j];
            for (int k = 0; k < in_; ++k) acc += xr[k] * wr[k];
            out[i * out_ + j] = acc;
        }
    return out;
}

Tensor Dense::backward(const Tensor& dout) {
    const int n = x_.dim(0);
    Tensor dx(x_.shape());
    dx.zero();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_; ++j) {
            const double d = dout[static_cast<std::size_t>(i) * out_ + j];
            const double* xr = x_.data() + static_cast<std::size_t>(i) * in_;
            const double* wr = w_.value.data() + static_cast<std::size_t>(j) * in_;
            double* dwr = w_.grad.data() + static_cast<std::size_t>(j) * in_;
            double* dxr = dx.data() + static_cast<std::size_t>(i) * in_;
            for (int k = 0; k < in_; ++k) {
                dwr[k] += d * xr[k];
                dxr[k] += d * wr[k];
            }
            b_.grad[j] += d;
        }
    return dx;
}

// ---------------------------------------------------------------- Module

std::size_t Module::parameter_count() {
    std::size_t n = 0;
    for (Param* p : params()) n += p->value.size();
    return n;
}

void Module::zero_grad() {
    for (Param* p : params()) p->grad.zero();
}

void check_finite(const Tensor& t, const std::string& where) {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t[i]))
            throw std::runtime_error("non-finite activation in " + where);
}

}  // namespace ismo::nn
