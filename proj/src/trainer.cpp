#include "ismo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "ismo/adam.hpp"
#include "ismo/checkpoint.hpp"

namespace ismo {

namespace {

std::vector<int> epoch_order(int n, int epoch, bool shuffle, Rng& rng) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (shuffle) {
        Rng r = rng.fork(static_cast<std::uint64_t>(epoch) + 1);
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[r.uniform_int(0, i)]);
    }
    return order;
}

std::vector<Tensor> snapshot(const std::vector<nn::Param*>& ps) {
    std::vector<Tensor> s;
    s.reserve(ps.size());
    for (auto* p : ps) s.push_back(p->value);
    return s;
}

void restore(const std::vector<nn::Param*>& ps, const std::vector<Tensor>& s) {
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s[i];
}

// the last optimizer step of an epoch is never validated by a loss
// evaluation, so only advance the fallback snapshot over finite weights
bool params_finite(const std::vector<nn::Param*>& ps) {
    for (const auto* p : ps)
        for (std::size_t i = 0; i < p->value.size(); ++i)
            if (!std::isfinite(p->value[i])) return false;
    return true;
}

}  // namespace

void stack_batch(const std::vector<Sample2D3D>& samples, const std::vector<int>& order, int i0,
                 int i1, Tensor& images, Tensor& surfaces) {
    const int b = i1 - i0;
    const auto& first = samples[order[i0]];
    const int s = first.image.dim(1), gh = first.surface.dim(0), gw = first.surface.dim(1);
    images = Tensor({b, 3, s, s});
    surfaces = Tensor({b, gh, gw, 3});
    for (int i = 0; i < b; ++i) {
        const auto& smp = samples[order[i0 + i]];
        std::copy(smp.image.data(), smp.image.data() + smp.image.size(),
                  images.data() + static_cast<std::size_t>(i) * smp.image.size());
        std::copy(smp.surface.data(), smp.surface.data() + smp.surface.size(),
                  surfaces.data() + static_cast<std::size_t>(i) * smp.surface.size());
    }
}

std::vector<double> train_odnet(ODNet& net, const std::vector<MaskSample>& samples,
                                const TrainConfig& cfg) {
    if (samples.empty()) throw TrainError("train_odnet: empty training set");
    const int s = net.config().input_size;
    const int n = static_cast<int>(samples.size());
    const int bs = std::min(cfg.batch_size, n);
    Rng rng(cfg.seed);
    nn::Adam opt(net.params(), cfg.learning_rate);
    net.set_train(true);

    std::vector<double> history;
    std::vector<Tensor> last_good = snapshot(net.params());
    for (int epoch = 0; epoch < cfg.epochs_od; ++epoch) {
        const auto order = epoch_order(n, epoch, cfg.shuffle, rng);
        double epoch_sum = 0;
        int epoch_batches = 0;
        for (int i0 = 0; i0 < n; i0 += bs) {
            const int i1 = std::min(i0 + bs, n);
            const int b = i1 - i0;
            Tensor x({b, 3, s, s}), target({b, 1, s, s});
            for (int i = 0; i < b; ++i) {
                const auto& smp = samples[order[i0 + i]];
                image_to_tensor(smp.image, x, i);
                for (int y = 0; y < s; ++y)
                    for (int xx = 0; xx < s; ++xx)
                        target.at4(i, 0, y, xx) = smp.mask.at(xx, y);
            }
            Tensor out = net.forward(x);
            double mse = 0;
            Tensor dout(out.shape());
            const double inv = 1.0 / static_cast<double>(out.size());
            for (std::size_t t = 0; t < out.size(); ++t) {
                const double d = out[t] - target[t];
                mse += d * d * inv;
                dout[t] = 2.0 * d * inv;
            }
            if (!std::isfinite(mse)) {
                restore(net.params(), last_good);
                if (!cfg.out_dir.empty())
                    save_checkpoint(cfg.out_dir + "/odnet_last_good.ckpt", net, cfg.config_hash);
                throw TrainError("train_odnet: non-finite MSE at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(i0 / bs));
            }
            net.zero_grad();
            net.backward(dout);
            opt.step();
            epoch_sum += mse;
            ++epoch_batches;
        }
        history.push_back(epoch_sum / epoch_batches);
        if (params_finite(net.params())) last_good = snapshot(net.params());
        if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0)
            save_checkpoint(cfg.out_dir + "/odnet.ckpt", net, cfg.config_hash);
    }
    if (!cfg.out_dir.empty()) {
        save_checkpoint(cfg.out_dir + "/odnet.ckpt", net, cfg.config_hash);
        write_history_csv(cfg.out_dir + "/odnet_history.csv", history);
    }
    return history;
}

std::vector<LossBreakdown> train_adversarial(RecNet& gen, Discriminator& disc,
                                             const std::vector<Sample2D3D>& samples,
                                             const TrainConfig& cfg) {
    if (samples.empty()) throw TrainError("train_adversarial: empty training set");
    const int n = static_cast<int>(samples.size());
    const int bs = std::min(cfg.batch_size, n);
    Rng rng(cfg.seed);
    nn::Adam opt_g(gen.params(), cfg.learning_rate);
    nn::Adam opt_d(disc.params(), cfg.learning_rate);
    gen.set_train(true);
    disc.set_train(true);
    const bool apply_adv = cfg.adv_weight > 0.0;

    std::vector<LossBreakdown> history;
    std::vector<Tensor> good_g = snapshot(gen.params());
    std::vector<Tensor> good_d = snapshot(disc.params());
    auto abort = [&](const std::string& what, int epoch, int batch) {
        restore(gen.params(), good_g);
        restore(disc.params(), good_d);
        if (!cfg.out_dir.empty()) {
            save_checkpoint(cfg.out_dir + "/recnet_last_good.ckpt", gen, cfg.config_hash);
            save_checkpoint(cfg.out_dir + "/disc_last_good.ckpt", disc, cfg.config_hash);
        }
        throw TrainError("train_adversarial: non-finite " + what + " at epoch " +
                         std::to_string(epoch) + ", batch " + std::to_string(batch));
    };

    for (int epoch = 0; epoch < cfg.epochs_rec; ++epoch) {
        const auto order = epoch_order(n, epoch, cfg.shuffle, rng);
        LossBreakdown acc{};
        int batches = 0;
        for (int i0 = 0; i0 < n; i0 += bs) {
            const int i1 = std::min(i0 + bs, n);
            const int b = i1 - i0;
            Tensor images, gt;
            stack_batch(samples, order, i0, i1, images, gt);
            const int batch_idx = i0 / bs;

            LossBreakdown part{};
            Tensor pred;
            auto run_steps = [&] {
                // ---- generator steps: minimize L_3D + L_iso (+ L_G) with D frozen
                if (cfg.gan_g_steps == 0) pred = gen.forward(images);
                for (int gs = 0; gs < cfg.gan_g_steps; ++gs) {
                    pred = gen.forward(images);
                    part.l3d = loss_3d(pred, gt);
                    part.liso = loss_iso(pred, cfg.iso);
                    Tensor dsurf = loss_3d_grad(pred, gt);
                    const Tensor diso = loss_iso_grad(pred, cfg.iso);
                    for (std::size_t t = 0; t < dsurf.size(); ++t)
                        dsurf[t] += cfg.iso_weight * diso[t];

                    const Tensor p_fake = disc.forward(pred);
                    std::vector<double> pf(p_fake.data(), p_fake.data() + b);
                    part.lg = loss_adv_generator(pf);
                    if (apply_adv) {
                        const auto gprob = loss_adv_generator_grad(pf);
                        Tensor dprob({b, 1});
                        for (int i = 0; i < b; ++i) dprob[i] = cfg.adv_weight * gprob[i];
                        const Tensor dadv = disc.backward(dprob);  // D grads discarded below
                        for (std::size_t t = 0; t < dsurf.size(); ++t) dsurf[t] += dadv[t];
                    }
                    if (!std::isfinite(part.l3d + part.liso + part.lg))
                        abort("generator loss", epoch, batch_idx);
                    gen.zero_grad();
                    gen.backward(dsurf);
                    opt_g.step();
                }

                // ---- discriminator steps: minimize L_D with G frozen; the fake
                // batch is the generator output from before its own update
                for (int ds = 0; ds < cfg.gan_d_steps; ++ds) {
                    // separate real and fake passes; each forward overwrites the
                    // activation cache, so backward follows its own pass directly
                    disc.zero_grad();
                    const Tensor p_fake_t = disc.forward(pred);
                    std::vector<double> pf(p_fake_t.data(), p_fake_t.data() + b);
                    std::vector<double> gr, gf;
                    if (apply_adv) {
                        loss_adv_discriminator_grad(pf, pf, gr, gf);  // gf depends on pf only
                        Tensor dfake({b, 1});
                        for (int i = 0; i < b; ++i) dfake[i] = gf[i];
                        disc.backward(dfake);
                    }
                    const Tensor p_real_t = disc.forward(gt);
                    std::vector<double> pr(p_real_t.data(), p_real_t.data() + b);
                    part.ld = loss_adv_discriminator(pr, pf);
                    if (!std::isfinite(part.ld)) abort("discriminator loss", epoch, batch_idx);
                    if (apply_adv) {
                        loss_adv_discriminator_grad(pr, pf, gr, gf);
                        Tensor dreal({b, 1});
                        for (int i = 0; i < b; ++i) dreal[i] = gr[i];
                        disc.backward(dreal);
                        opt_d.step();
                    }
                }
            };
            try {
                run_steps();
            } catch (const TrainError&) {
                throw;
            } catch (const std::runtime_error& e) {
                // a non-finite activation surfaced inside a network
                abort(std::string("value (") + e.what() + ")", epoch, batch_idx);
            }

            part.total = loss_total(part);
            acc.l3d += part.l3d;
            acc.liso += part.liso;
            acc.lg += part.lg;
            acc.ld += part.ld;
            acc.total += part.total;
            ++batches;
        }
        acc.l3d /= batches;
        acc.liso /= batches;
        acc.lg /= batches;
        acc.ld /= batches;
        acc.total /= batches;
        history.push_back(acc);
        if (params_finite(gen.params()) && params_finite(disc.params())) {
            good_g = snapshot(gen.params());
            good_d = snapshot(disc.params());
        }
        if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0) {
            save_checkpoint(cfg.out_dir + "/recnet.ckpt", gen, cfg.config_hash);
            save_checkpoint(cfg.out_dir + "/disc.ckpt", disc, cfg.config_hash);
        }
    }
    if (!cfg.out_dir.empty()) {
        save_checkpoint(cfg.out_dir + "/recnet.ckpt", gen, cfg.config_hash);
        save_checkpoint(cfg.out_dir + "/disc.ckpt", disc, cfg.config_hash);
        write_history_csv(cfg.out_dir + "/history.csv", history);
    }
    return history;
}

void write_history_csv(const std::string& path, const std::vector<LossBreakdown>& history) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + path);
    std::fprintf(f, "epoch,l3d,liso,lg,ld,total\n");
    for (std::size_t i = 0; i < history.size(); ++i)
        std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, history[i].l3d, history[i].liso,
                     history[i].lg, history[i].ld, history[i].total);
    std::fclose(f);
}

void write_history_csv(const std::string& path, const std::vector<double>& mse_history) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + path);
    std::fprintf(f, "epoch,mse\n");
    for (std::size_t i = 0; i < mse_history.size(); ++i)
        std::fprintf(f, "%zu,%.17g\n", i, mse_history[i]);
    std::fclose(f);
}

}  // namespace ismo
