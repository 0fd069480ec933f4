#pragma once

#include <cmath>
#include <vector>

#include "ismo/nn.hpp"

namespace ismo::nn {

class Adam {
public:
    Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (Param* p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Param* p = params_[pi];
            Tensor& m = m_[pi];
            Tensor& v = v_[pi];
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                const double g = p->grad[i];
                m[i] = b1_ * m[i] + (1 - b1_) * g;
                v[i] = b2_ * v[i] + (1 - b2_) * g * g;
                p->value[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            }
        }
    }

    double lr() const { return lr_; }

private:
    std::vector<Param*> params_;
    std::vector<Tensor> m_, v_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
};

}  // namespace ismo::nn
