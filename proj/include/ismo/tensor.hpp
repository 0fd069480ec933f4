#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ismo {

// Dense row-major tensor of doubles. Layout conventions used throughout:
// images/activations are NCHW, surfaces are (H, W, 3).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        v_.assign(count(shape_), 0.0);
    }
    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static std::size_t count(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

    // 4-d accessor (NCHW)
    double& at4(int n, int c, int h, int w) {
        return v_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double at4(int n, int c, int h, int w) const {
        return v_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    // 3-d accessor (H, W, C) for surfaces
    double& at3(int h, int w, int c) {
        return v_[(static_cast<std::size_t>(h) * shape_[1] + w) * shape_[2] + c];
    }
    double at3(int h, int w, int c) const {
        return v_[(static_cast<std::size_t>(h) * shape_[1] + w) * shape_[2] + c];
    }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }
    void zero() { fill(0.0); }

    Tensor reshaped(std::vector<int> shape) const {
        if (count(shape) != size()) throw std::invalid_argument("tensor: reshape size mismatch");
        Tensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::string shape_str(const std::vector<int>& s) {
        std::string r = "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) r += ",";
            r += std::to_string(s[i]);
        }
        return r + ")";
    }

private:
    std::vector<int> shape_;
    std::vector<double> v_;
};

inline void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what) {
    if (t.shape() != shape)
        throw std::invalid_argument(std::string(what) + ": expected shape " + Tensor::shape_str(shape) +
                                    ", got " + Tensor::shape_str(t.shape()));
}

}  // namespace ismo
