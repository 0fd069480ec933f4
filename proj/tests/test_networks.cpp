#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "ismo/discriminator.hpp"
#include "ismo/losses.hpp"
#include "ismo/recnet.hpp"

using namespace ismo;

namespace {

Tensor random_input(int n, int s, Rng& rng) {
    Tensor t({n, 3, s, s});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0, 1);
    return t;
}

Tensor random_surface_batch(int n, Rng& rng) {
    Tensor t({n, 73, 73, 3});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1, 1);
    return t;
}

// Central finite difference of loss_fn w.r.t. one parameter entry. The losses
// contain absolute values and leaky-ReLU kinks, so a perturbation can cross a
// kink and contaminate the estimate; retry with a smaller step in that case
// (a genuine gradient bug fails at every step size).
bool fd_matches(const std::function<double()>& loss_fn, double& slot, double analytic,
                double tol_rel, double floor) {
    for (double eps : {1e-4, 1e-5, 1e-6}) {
        slot += eps;
        const double lp = loss_fn();
        slot -= 2 * eps;
        const double lm = loss_fn();
        slot += eps;
        const double fd = (lp - lm) / (2 * eps);
        if (std::abs(analytic - fd) < tol_rel * std::max({std::abs(analytic), std::abs(fd), floor}))
            return true;
    }
    return false;
}

}  // namespace

TEST_CASE("rec-net output shape, finiteness and determinism") {
    Rng rng(1);
    RecNet net(RecNetConfig::full(), rng);
    net.set_train(false);
    Rng in_rng(2);
    const Tensor x = random_input(2, 224, in_rng);
    const Tensor y = net.forward(x);
    REQUIRE(y.shape() == std::vector<int>{2, 73, 73, 3});
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(std::isfinite(y[i]));
    const Tensor y2 = net.forward(x);
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == y2[i]);

    CHECK_THROWS_AS(net.forward(random_input(1, 73, in_rng)), std::invalid_argument);
    CHECK(net.latent_shape() == std::vector<int>{128, 7, 7});
}

TEST_CASE("reduced variant pins the latent space and stays smaller") {
    Rng rng(3);
    RecNet net(RecNetConfig::reduced(), rng);
    CHECK(net.latent_shape() == std::vector<int>{256, 11, 11});
    net.set_train(false);
    Rng in_rng(4);
    const Tensor y = net.forward(random_input(1, 224, in_rng));
    REQUIRE(y.shape() == std::vector<int>{1, 31, 31, 3});

    const std::size_t full = count_parameters(RecNetConfig::full());
    const std::size_t reduced = count_parameters(RecNetConfig::reduced());
    CHECK(reduced < full);
    CHECK(count_parameters(RecNetConfig::full()) == full);  // deterministic
}

TEST_CASE("toy parameter count matches closed-form arithmetic") {
    // enc 3->4, 4->8 (k3), latent 8->8 (k3), deconv 8->4 (k4), head 4->3 (k3),
    // each conv block carrying a batchnorm (2 channels of affine parameters)
    const std::size_t conv1 = 4 * 3 * 9 + 4, bn1 = 8;
    const std::size_t conv2 = 8 * 4 * 9 + 8, bn2 = 16;
    const std::size_t latent = 8 * 8 * 9 + 8, bnl = 16;
    const std::size_t deconv = 8 * 4 * 16 + 4, bnd = 8;
    const std::size_t head = 3 * 4 * 9 + 3;
    const std::size_t expected = conv1 + bn1 + conv2 + bn2 + latent + bnl + deconv + bnd + head;
    CHECK(count_parameters(RecNetConfig::toy()) == expected);
}

TEST_CASE("skip connections keep the decoder tied to the encoder") {
    Rng rng(5);
    RecNet net(RecNetConfig::toy(), rng);
    net.set_train(false);
    // cut the non-skip path: zero the latent and transposed convolutions so
    // information can only reach the head through the residual additions
    for (auto* p : net.params())
        if (p->name.find("latent") != std::string::npos ||
            p->name.find("deconv") != std::string::npos)
            p->value.zero();
    Rng in_rng(6);
    const Tensor a = net.forward(random_input(1, 32, in_rng));
    const Tensor b = net.forward(random_input(1, 32, in_rng));
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    CHECK(diff > 1e-3);  // a skip-less network would collapse to a constant
}

TEST_CASE("rec-net gradients match finite differences on the toy variant") {
    Rng rng(7);
    RecNet net(RecNetConfig::toy(), rng);
    net.set_train(true);
    Rng in_rng(8);
    const Tensor x = random_input(2, 32, in_rng);
    Tensor gt({2, 73, 73, 3});
    for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = in_rng.uniform(-1, 1);

    const Tensor pred = net.forward(x);
    net.zero_grad();
    net.backward(loss_3d_grad(pred, gt));

    Rng pick(9);
    int checked = 0;
    for (auto* p : net.params()) {
        for (int s = 0; s < 3; ++s) {
            const std::size_t i = pick.uniform_int(0, static_cast<int>(p->value.size()) - 1);
            INFO(p->name, "[", i, "]");
            CHECK(fd_matches([&] { return loss_3d(net.forward(x), gt); }, p->value[i], p->grad[i],
                             1e-3, 1e-4));
            ++checked;
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("discriminator range, determinism and the 3136-wide head") {
    Rng rng(10);
    Discriminator disc(rng);
    disc.set_train(false);
    const auto pre = disc.pre_head_shape();
    CHECK(pre == std::vector<int>{64, 7, 7});
    CHECK(pre[0] * pre[1] * pre[2] == 3136);

    Rng in_rng(11);
    const Tensor s = random_surface_batch(3, in_rng);
    const Tensor p = disc.forward(s);
    REQUIRE(p.shape() == std::vector<int>{3, 1});
    for (int i = 0; i < 3; ++i) {
        REQUIRE(p[i] > 0.0);
        REQUIRE(p[i] < 1.0);
    }
    const Tensor p2 = disc.forward(s);
    for (int i = 0; i < 3; ++i) REQUIRE(p[i] == p2[i]);

    // single unbatched surface is accepted
    Tensor one({73, 73, 3});
    const Tensor q = disc.forward(one);
    REQUIRE(q.shape() == std::vector<int>{1, 1});

    Tensor bad({2, 31, 31, 3});
    CHECK_THROWS_AS(disc.forward(bad), std::invalid_argument);
}

TEST_CASE("discriminator gradients match finite differences") {
    Rng rng(12);
    Discriminator disc(rng);
    disc.set_train(true);
    Rng in_rng(13);
    const Tensor s = random_surface_batch(2, in_rng);

    auto loss_of = [&] {
        const Tensor p = disc.forward(s);
        return loss_adv_generator({p[0], p[1]});
    };
    const Tensor p = disc.forward(s);
    const auto gprob = loss_adv_generator_grad({p[0], p[1]});
    disc.zero_grad();
    Tensor dprob({2, 1});
    dprob[0] = gprob[0];
    dprob[1] = gprob[1];
    disc.backward(dprob);

    Rng pick(14);
    for (auto* param : disc.params()) {
        for (int k = 0; k < 3; ++k) {
            const std::size_t i = pick.uniform_int(0, static_cast<int>(param->value.size()) - 1);
            INFO(param->name, "[", i, "]");
            CHECK(fd_matches(loss_of, param->value[i], param->grad[i], 1e-3, 1e-6));
        }
    }
}

TEST_CASE("non-finite inputs are rejected with the failing stage named") {
    Rng rng(15);
    Discriminator disc(rng);
    Tensor s({1, 73, 73, 3});
    s[100] = std::nan("");
    CHECK_THROWS_WITH_AS(disc.forward(s), doctest::Contains("disc"), std::runtime_error);

    RecNet net(RecNetConfig::toy(), rng);
    Tensor x({1, 3, 32, 32});
    x[5] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(net.forward(x), doctest::Contains("rec"), std::runtime_error);
}
