#pragma once

#include <vector>

#include "ismo/tensor.hpp"

namespace ismo {

// Gaussian used by the isometry prior. The discretized kernel is normalized
// to sum 1; borders use replicate padding.
struct IsometryConfig {
    double sigma = 1.0;       // grid units
    int kernel_size = 5;      // odd, >= 3
    bool detach_smoothed = false;  // treat the smoothed surface as a constant target
};

struct LossBreakdown {
    double l3d = 0, liso = 0, lg = 0, ld = 0, total = 0;
};

// surfaces are batched as (B, H, W, 3)

// mean over the batch of the per-sample sum of absolute differences
double loss_3d(const Tensor& pred, const Tensor& gt);
// d loss / d pred
Tensor loss_3d_grad(const Tensor& pred, const Tensor& gt);

std::vector<double> gaussian_kernel(const IsometryConfig& cfg);

// per-channel 2D convolution of one (H, W, 3) grid with the Gaussian
Tensor smooth_surface(const Tensor& surface, const IsometryConfig& cfg);

double loss_iso(const Tensor& pred, const IsometryConfig& cfg);
Tensor loss_iso_grad(const Tensor& pred, const IsometryConfig& cfg);

// BCE terms over batches of discriminator probabilities; inputs outside
// (eps, 1-eps) are clamped.
double loss_adv_generator(const std::vector<double>& d_on_fake);
double loss_adv_discriminator(const std::vector<double>& d_on_real,
                              const std::vector<double>& d_on_fake);
// derivatives w.r.t. each probability
std::vector<double> loss_adv_generator_grad(const std::vector<double>& d_on_fake);
void loss_adv_discriminator_grad(const std::vector<double>& d_on_real,
                                 const std::vector<double>& d_on_fake,
                                 std::vector<double>& d_real_grad,
                                 std::vector<double>& d_fake_grad);

// unweighted sum per the total objective
double loss_total(const LossBreakdown& parts);

inline constexpr double kProbEps = 1e-7;

}  // namespace ismo
