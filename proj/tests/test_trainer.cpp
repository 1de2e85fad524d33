#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "camlab/instgen.hpp"
#include "camlab/trainer.hpp"

using namespace camlab;

namespace {

std::vector<ExpertSample> tiny_dataset() {
    std::vector<MilpInstance> insts;
    // Independent-set instances at this size reliably have fractional LP
    // relaxations, so every instance contributes branching decisions.
    for (int i = 0; i < 6; ++i)
        insts.push_back(instgen::gen_max_ind_set(15, 0.25, 900 + i));
    auto samples = collect_expert_samples(insts, 4);
    REQUIRE(samples.size() >= 6);
    return samples;
}

}  // namespace

TEST_CASE("supervised loss is the negative log-likelihood") {
    VectorXd p(3);
    p << 0.2, 0.5, 0.3;
    CHECK(loss_sup(p, 1) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(loss_sup(p, 3), std::invalid_argument);
}

TEST_CASE("infoNCE unit values") {
    VectorXd e1 = VectorXd::Zero(4), e2 = VectorXd::Zero(4);
    e1[0] = 1.0;
    e2[1] = 1.0;
    // Batch of one: the positive is the whole denominator.
    CHECK(loss_infonce({e1}, {e1}) == doctest::Approx(0.0).epsilon(1e-12));
    // Orthonormal batch of two: 2 * ln(1 + e^{-1}).
    CHECK(loss_infonce({e1, e2}, {e1, e2}) ==
          doctest::Approx(2.0 * std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));
    CHECK_THROWS_AS(loss_infonce({}, {}), std::invalid_argument);
}

TEST_CASE("consistency loss is the summed squared distance") {
    VectorXd a(2), b(2);
    a << 0.7, 0.3;
    b << 0.4, 0.6;
    CHECK(loss_aux({a}, {a}) == 0.0);
    CHECK(loss_aux({a}, {b}) == doctest::Approx(0.09 + 0.09).epsilon(1e-12));
    CHECK(loss_aux({a, a}, {b, a}) == doctest::Approx(0.18).epsilon(1e-12));
}

TEST_CASE("config defaults match the published hyperparameters") {
    TrainConfig c;
    CHECK(c.lambda1 == 0.05);
    CHECK(c.lambda2 == 0.01);
    CHECK(c.adam_beta1 == 0.9);
    CHECK(c.adam_beta2 == 0.999);
    CHECK(c.plateau_patience == 10);
    CHECK(c.plateau_factor == 0.2);
    CHECK(kHidden == 64);
}

TEST_CASE("config file parsing") {
    auto path = (std::filesystem::temp_directory_path() / "camlab_cfg.txt").string();
    {
        std::ofstream f(path);
        f << "# comment\nlambda1 = 0.5\nmax_epochs=7\nsupervise_augmented=false\n";
    }
    TrainConfig c = load_train_config(path);
    CHECK(c.lambda1 == 0.5);
    CHECK(c.max_epochs == 7);
    CHECK_FALSE(c.supervise_augmented);
    CHECK(c.lambda2 == 0.01);  // untouched default
    {
        std::ofstream f(path);
        f << "lambda_one=0.5\n";
    }
    CHECK_THROWS(load_train_config(path));
    std::filesystem::remove(path);
}

TEST_CASE("total_loss gradients match finite differences") {
    auto samples = tiny_dataset();
    std::mt19937_64 rng(17);
    std::vector<ExpertSample> augs;
    std::vector<TrainPair> batch;
    for (int i = 0; i < 3; ++i) {
        augs.push_back(augment_sample(
            samples[i], sample_shift(samples[i].instance, 5.0, rng), i));
    }
    for (int i = 0; i < 3; ++i) batch.push_back({&samples[i], &augs[i]});

    GcnnParams p = make_zero_params(8);
    init_params(p, 23);
    TrainConfig cfg;
    GcnnParams grads = make_zero_params(8);
    total_loss(p, batch, cfg, &grads);
    auto theta = flatten(p);
    auto analytic = flatten(grads);

    std::uniform_int_distribution<std::size_t> pick(0, theta.size() - 1);
    const double h = 1e-5;
    for (int probe = 0; probe < 25; ++probe) {
        std::size_t idx = pick(rng);
        GcnnParams pp = p;
        auto tp = theta;
        tp[idx] += h;
        unflatten(pp, tp);
        double up = total_loss(pp, batch, cfg).total;
        tp[idx] = theta[idx] - h;
        unflatten(pp, tp);
        double dn = total_loss(pp, batch, cfg).total;
        double fd = (up - dn) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(analytic[idx]), 1e-6});
        CHECK(std::abs(fd - analytic[idx]) / denom <= 1e-4);
    }
}

TEST_CASE("augmented labels survive an expert recompute") {
    auto samples = tiny_dataset();
    std::mt19937_64 rng(3);
    std::vector<ExpertSample> data;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        data.push_back(samples[i]);
        data.push_back(augment_sample(
            samples[i], sample_shift(samples[i].instance, 10.0, rng),
            static_cast<long>(i)));
    }
    auto rep = spot_check_labels(data, 1.0, rng);
    CHECK(rep.checked == static_cast<long>(samples.size()));
    CHECK(rep.mismatches == 0);
    CHECK(rep.pass());
}

TEST_CASE("training reduces the supervised loss and is deterministic") {
    auto samples = tiny_dataset();
    TrainConfig cfg;
    cfg.max_epochs = 8;
    cfg.batch_size = 8;
    cfg.augmentations_per_sample = 2;
    cfg.seed = 5;
    TrainResult a = train(cfg, samples);
    REQUIRE(a.history.size() == 8);
    CHECK(a.history.back().l_sup < a.history.front().l_sup);
    for (const auto& e : a.history) {
        CHECK(std::isfinite(e.l_sup));
        CHECK(e.l_nce >= 0.0);
        CHECK(e.l_aux >= 0.0);
        CHECK(e.lr > 0.0);
    }
    TrainResult b = train(cfg, samples);
    CHECK(flatten(a.params) == flatten(b.params));
    CHECK(a.history_csv() == b.history_csv());
    CHECK(a.history_csv().substr(0, 36) == "epoch,l_sup,l_nce,l_aux,val_acc1,lr\n");
}

TEST_CASE("pre-augmented datasets are consumed as-is") {
    auto samples = tiny_dataset();
    std::mt19937_64 rng(9);
    std::vector<ExpertSample> data;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        data.push_back(samples[i]);
        for (int a = 0; a < 2; ++a)
            data.push_back(augment_sample(
                samples[i], sample_shift(samples[i].instance, 10.0, rng),
                static_cast<long>(i)));
    }
    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.augmentations_per_sample = 0;  // ignored: partners come from the data
    TrainResult r = train(cfg, data);
    CHECK(r.history.size() == 2);
    CHECK(r.history.back().l_nce > 0.0);  // contrastive pairs were present
}

TEST_CASE("plateau schedule decays the learning rate by 0.2") {
    auto samples = tiny_dataset();
    TrainConfig cfg;
    cfg.max_epochs = 6;
    cfg.plateau_patience = 2;
    cfg.learning_rate = 0.0;  // loss can never improve -> decay must trigger
    cfg.augmentations_per_sample = 0;
    TrainResult r = train(cfg, samples);
    CHECK(r.history[0].lr == 0.0);
    bool decayed = true;  // lr stays 0; use a positive lr for the ratio check
    cfg.learning_rate = 1e-9;
    r = train(cfg, samples);
    decayed = false;
    for (std::size_t i = 1; i < r.history.size(); ++i)
        if (r.history[i].lr < r.history[i - 1].lr) {
            CHECK(r.history[i].lr ==
                  doctest::Approx(r.history[i - 1].lr * 0.2).epsilon(1e-12));
            decayed = true;
        }
    CHECK(decayed);
}

TEST_CASE("eval_topk ranks the expert action") {
    auto samples = tiny_dataset();
    GcnnParams p = make_random_params(1);
    auto t = eval_topk(p, samples, {1, 5, 10});
    REQUIRE(t.acc.size() == 3);
    CHECK(t.samples == static_cast<long>(samples.size()));
    CHECK(t.acc[0] >= 0.0);
    CHECK(t.acc[0] <= t.acc[1]);
    CHECK(t.acc[1] <= t.acc[2]);
    CHECK(t.acc[2] <= 1.0);
}

TEST_CASE("adam optimizer moves against the gradient") {
    AdamOptimizer adam(2, 0.9, 0.999, 1e-8);
    std::vector<double> theta = {1.0, -1.0};
    adam.step(theta, {0.5, -0.5}, 0.1);
    CHECK(theta[0] < 1.0);
    CHECK(theta[1] > -1.0);
}
