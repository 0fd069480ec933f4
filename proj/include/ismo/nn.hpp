#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ismo/rng.hpp"
#include "ismo/tensor.hpp"

namespace ismo::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

// A layer owns its parameters and the activation cache needed for one
// backward pass. forward/backward operate on NCHW batches.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    // dout has the shape of the last forward output; returns d(input) and
    // accumulates parameter gradients.
    virtual Tensor backward(const Tensor& dout) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual void set_train(bool) {}
    virtual std::string name() const = 0;
};

class Conv2d : public Layer {
public:
    Conv2d(std::string name, int cin, int cout, int k, int stride, int pad, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dout) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }
    std::string name() const override { return name_; }
    int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

private:
    std::string name_;
    int cin_, cout_, k_, stride_, pad_;
    Param w_, b_;  // w: (cout, cin*k*k)
    Tensor x_;     // cached input
    std::vector<double> col_;
};

class ConvTranspose2d : public Layer {
public:
    ConvTranspose2d(std::string name, int cin, int cout, int k, int stride, int pad, Rng& rng);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dout) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }
    std::string name() const override { return name_; }
    int out_size(int in) const { return (in - 1) * stride_ - 2 * pad_ + k_; }

private:
    std::string name_;
    int cin_, cout_, k_, stride_, pad_;
    Param w_, b_;  // w: (cin, cout*k*k)
    Tensor x_;
    std::vector<double> col_;
};

class BatchNorm2d : public Layer {
public:
    BatchNorm2d(std::string name, int channels);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dout) override;
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    void set_train(bool t) override { train_ = t; }
    std::string name() const override { return name_; }
    // running statistics are buffers, serialized with checkpoints
    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }

private:
    std::string name_;
    int c_;
    bool train_ = true;
    double eps_ = 1e-5, momentum_ = 0.1;
    Param gamma_, beta_;
    Tensor running_mean_, running_var_;
    Tensor xhat_;
    std::vector<double> invstd_;
};

class LeakyReLU : public Layer {
public:
    LeakyReLU(std::string name, double slope = 0.2) : name_(std::move(name)), slope_(slope) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dout) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    double slope_;
    Tensor x_;
};

class Sigmoid : public Layer {
public:
    explicit Sigmoid(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dout) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    Tensor y_;
};

class MaxPool2d : public Layer {
public:
    explicit MaxPool2d(std::string name) : name_(std::move(name)) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dout) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

// Bilinear resize to a fixed output size (align_corners convention).
class BilinearResize : public Layer {
public:
    BilinearResize(std::string name, int out_h, int out_w)
        : name_(std::move(name)), oh_(out_h), ow_(out_w) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& dout) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    int oh_, ow_;
    std::vector<int> in_shape_;
};

class Dense : public Layer {
public:
    Dense(std::string name, int in_features, int out_features, Rng& rng);
    Tensor forward(const Tensor& x) override;  // x: (N, in) or any shape of size N*in
    Tensor backward(const Tensor& dout) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }
    std::string name() const override { return name_; }

private:
    std::string name_;
    int in_, out_;
    Param w_, b_;
    Tensor x_;
};

// Aggregate view over a network's parts.
class Module {
public:
    virtual ~Module() = default;
    virtual std::vector<Param*> params() = 0;
    virtual void set_train(bool) = 0;
    // named buffers (e.g. batchnorm running stats) for checkpointing
    virtual std::vector<std::pair<std::string, Tensor*>> buffers() { return {}; }
    std::size_t parameter_count();
    void zero_grad();
};

void check_finite(const Tensor& t, const std::string& where);

}  // namespace ismo::nn
