#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "wgf/generator.hpp"
#include "wgf/metrics.hpp"
#include "wgf/ot.hpp"

using namespace wgf;

namespace {

vel::VelocityFieldSpec zero_velocity() {
    vel::KlAnalyticField field;
    field.score_p = [](const Vector& x) { return Vector(-x); };
    field.score_q = field.score_p;
    vel::VelocityFieldSpec spec;
    spec.kind = field;
    return spec;
}

vel::VelocityFieldSpec sinkhorn_two_batch(double eps, int iters, bool log_domain = true) {
    vel::SinkhornField field;
    field.sinkhorn.epsilon = eps;
    field.sinkhorn.iterations = iters;
    field.sinkhorn.log_domain = log_domain;
    vel::VelocityFieldSpec spec;
    spec.kind = field;
    return spec;
}

gen::Samplers gaussian_samplers(double var_x, double var_y) {
    dist::Gaussian g;
    g.mean = Vector::Zero(2);
    g.cov = Matrix::Zero(2, 2);
    g.cov(0, 0) = var_x;
    g.cov(1, 1) = var_y;
    return gen::Samplers{dist::DistributionSpec{dist::StandardNormal{2}, "pref"},
                         dist::DistributionSpec{g, "target"}, std::nullopt};
}

}  // namespace

TEST_CASE("forward basics") {
    SUBCASE("residual zero-init final layer is the identity") {
        Rng rng(1);
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, {16, 16}, gen::Activation::SiLU, true, 0, false, true, rng);
        const Matrix z = rng.normal_matrix(5, 2);
        const Matrix out = gen::forward(params, z);
        CHECK((out - z).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("single identity layer") {
        gen::GeneratorParams params;
        params.layers.push_back({Matrix::Identity(3, 3), Vector::Zero(3)});
        Rng rng(2);
        const Matrix z = rng.normal_matrix(4, 3);
        CHECK((gen::forward(params, z) - z).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("1-layer affine arithmetic") {
        gen::GeneratorParams params;
        params.layers.push_back({Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0)});
        Matrix z(1, 1);
        z << 3.0;
        CHECK(gen::forward(params, z)(0, 0) == 7.0);
    }
    SUBCASE("shape mismatches are rejected") {
        Rng rng(3);
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, {8}, gen::Activation::SiLU, false, 0, false, false, rng);
        CHECK_THROWS_AS(gen::forward(params, rng.normal_matrix(4, 3)), ContractViolation);
    }
    SUBCASE("conditioning appends a one-hot block") {
        Rng rng(4);
        gen::GeneratorParams params;
        // One linear layer reading back the one-hot channel: out = onehot(c).
        Matrix w = Matrix::Zero(3, 4);  // input = 1 coord + 3 classes
        w(0, 1) = 1.0;
        w(1, 2) = 1.0;
        w(2, 3) = 1.0;
        params.layers.push_back({w, Vector::Zero(3)});
        params.num_classes = 3;
        IntVector labels(2);
        labels << 2, 0;
        const Matrix out = gen::forward(params, Matrix::Zero(2, 1), labels);
        CHECK(out(0, 2) == 1.0);
        CHECK(out(1, 0) == 1.0);
        CHECK(out.sum() == 2.0);
    }
}

TEST_CASE("backward gradients") {
    SUBCASE("zero upstream gives zero gradients") {
        Rng rng(5);
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, {8, 8}, gen::Activation::SiLU, false, 0, false, false, rng);
        gen::ForwardCache cache;
        gen::forward(params, rng.normal_matrix(6, 2), std::nullopt, std::nullopt, &cache);
        const auto grads = gen::backward(params, cache, Matrix::Zero(6, 2));
        for (const auto& g : grads) {
            CHECK(g.weight.cwiseAbs().maxCoeff() == 0.0);
            CHECK(g.bias.cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SUBCASE("linear least squares matches the closed form") {
        Rng rng(6);
        gen::GeneratorParams params;
        params.layers.push_back({rng.normal_matrix(2, 3), Vector::Zero(2)});
        const Matrix x = rng.normal_matrix(10, 3);
        const Matrix y = rng.normal_matrix(10, 2);
        gen::ForwardCache cache;
        const Matrix out = gen::forward(params, x, std::nullopt, std::nullopt, &cache);
        const Matrix upstream = 2.0 / 10.0 * (out - y);
        const auto grads = gen::backward(params, cache, upstream);
        const Matrix closed_form = 2.0 / 10.0 * (out - y).transpose() * x;
        CHECK((grads[0].weight - closed_form).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("random two-layer net vs central differences") {
        Rng rng(7);
        gen::GeneratorParams params =
            gen::make_mlp(3, 2, {5}, gen::Activation::SiLU, false, 0, false, false, rng);
        const Matrix x = rng.normal_matrix(4, 3);
        const Matrix y = rng.normal_matrix(4, 2);
        const auto loss = [&](const gen::GeneratorParams& p) {
            return (gen::forward(p, x) - y).squaredNorm() / 4.0;
        };
        gen::ForwardCache cache;
        const Matrix out = gen::forward(params, x, std::nullopt, std::nullopt, &cache);
        const auto grads = gen::backward(params, cache, Matrix(2.0 / 4.0 * (out - y)));

        const double h = 1e-5;
        gen::GeneratorParams probe = params;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            for (Eigen::Index i = 0; i < params.layers[l].weight.size(); ++i) {
                double& slot = probe.layers[l].weight.data()[i];
                const double saved = slot;
                slot = saved + h;
                const double up = loss(probe);
                slot = saved - h;
                const double down = loss(probe);
                slot = saved;
                const double fd = (up - down) / (2.0 * h);
                const double analytic = grads[l].weight.data()[i];
                CHECK(std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 1e-6}) <=
                      1e-5);
            }
        }
    }
}

TEST_CASE("training step") {
    SUBCASE("zero velocity gives zero loss and no update without weight decay") {
        gen::TrainConfig tc;
        tc.steps = 1;
        tc.batch_n = 8;
        tc.batch_m = 8;
        tc.hidden = {8};
        tc.velocity = zero_velocity();
        tc.weight_decay = 0.0;
        tc.seed = 11;
        tc.validate();

        Rng init = Rng(tc.seed).stream("train/init");
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, tc.hidden, tc.activation, false, 0, false, false, init);
        const gen::GeneratorParams before = params;
        gen::GeneratorParams ema = params;
        gen::AdamState adam = gen::AdamState::zeros_like(params);
        auto streams = gen::TrainStreams::from_seed(tc.seed);
        const auto samplers = gaussian_samplers(1.0, 1.0);

        const auto result = gen::wflow_training_step(params, adam, ema, tc, samplers, streams);
        CHECK(result.loss == 0.0);
        for (std::size_t l = 0; l < params.layers.size(); ++l)
            CHECK((params.layers[l].weight - before.layers[l].weight).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("zero velocity with weight decay shrinks parameters only") {
        gen::TrainConfig tc;
        tc.steps = 1;
        tc.batch_n = 8;
        tc.batch_m = 8;
        tc.hidden = {8};
        tc.velocity = zero_velocity();
        tc.weight_decay = 0.1;
        tc.seed = 11;

        Rng init = Rng(tc.seed).stream("train/init");
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, tc.hidden, tc.activation, false, 0, false, false, init);
        const gen::GeneratorParams before = params;
        gen::GeneratorParams ema = params;
        gen::AdamState adam = gen::AdamState::zeros_like(params);
        auto streams = gen::TrainStreams::from_seed(tc.seed);
        const auto result =
            gen::wflow_training_step(params, adam, ema, tc, gaussian_samplers(1.0, 1.0), streams);
        CHECK(result.loss == 0.0);
        const double shrink = 1.0 - tc.learning_rate * tc.weight_decay;
        for (std::size_t l = 0; l < params.layers.size(); ++l)
            CHECK((params.layers[l].weight - shrink * before.layers[l].weight).cwiseAbs().maxCoeff() <
                  1e-12);
    }
    SUBCASE("reported loss equals the eta^2 |V|^2 / N identity at the pre-step parameters") {
        gen::TrainConfig tc;
        tc.steps = 1;
        tc.batch_n = 16;
        tc.batch_m = 16;
        tc.hidden = {16};
        tc.velocity = sinkhorn_two_batch(0.1, 60);
        tc.step_size = 0.7;
        tc.seed = 13;

        // Recompute the identity independently with the same streams.
        Rng init = Rng(tc.seed).stream("train/init");
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, tc.hidden, tc.activation, false, 0, false, false, init);
        gen::GeneratorParams ema = params;
        gen::AdamState adam = gen::AdamState::zeros_like(params);
        auto streams = gen::TrainStreams::from_seed(tc.seed);
        const auto samplers = gaussian_samplers(1.0, 4.0);

        auto replay = gen::TrainStreams::from_seed(tc.seed);
        const ParticleBatch z = dist::sample(samplers.p_ref, 16, replay.z);
        const Matrix x = gen::forward(params, z.positions);
        const ParticleBatch z2 = dist::sample(samplers.p_ref, 16, replay.z_second);
        const Matrix x2 = gen::forward(params, z2.positions);
        const ParticleBatch y = dist::sample(samplers.target, 16, replay.target);
        const vel::VelocityBatch v = vel::sinkhorn_velocity(
            ParticleBatch::uniform(x), ParticleBatch::uniform(x2), y,
            std::get<vel::SinkhornField>(tc.velocity.kind).sinkhorn);
        const double expected = (tc.step_size * tc.step_size) * v.vectors.squaredNorm() / 16.0;

        const auto result = gen::wflow_training_step(params, adam, ema, tc, samplers, streams);
        CHECK(result.loss == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("training-loss gradient matches finite differences with frozen targets") {
        gen::TrainConfig tc;
        tc.batch_n = 6;
        tc.batch_m = 6;
        tc.hidden = {5};
        tc.velocity = sinkhorn_two_batch(0.2, 40);
        tc.step_size = 0.5;
        tc.seed = 17;

        Rng init = Rng(tc.seed).stream("train/init");
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, tc.hidden, tc.activation, false, 0, false, false, init);
        const auto samplers = gaussian_samplers(1.0, 2.0);

        // Build the frozen target x_tilde once, at the current parameters.
        auto replay = gen::TrainStreams::from_seed(tc.seed);
        const ParticleBatch z = dist::sample(samplers.p_ref, 6, replay.z);
        gen::ForwardCache cache;
        const Matrix x = gen::forward(params, z.positions, std::nullopt, std::nullopt, &cache);
        const ParticleBatch z2 = dist::sample(samplers.p_ref, 6, replay.z_second);
        const Matrix x2 = gen::forward(params, z2.positions);
        const ParticleBatch y = dist::sample(samplers.target, 6, replay.target);
        const vel::VelocityBatch v = vel::sinkhorn_velocity(
            ParticleBatch::uniform(x), ParticleBatch::uniform(x2), y,
            std::get<vel::SinkhornField>(tc.velocity.kind).sinkhorn);
        const Matrix x_tilde = x + tc.step_size * v.vectors;

        const auto loss_frozen = [&](const gen::GeneratorParams& p) {
            return (gen::forward(p, z.positions) - x_tilde).squaredNorm() / 6.0;
        };
        const auto grads = gen::backward(params, cache, Matrix(2.0 / 6.0 * (x - x_tilde)));

        const double h = 1e-5;
        gen::GeneratorParams probe = params;
        double max_rel = 0.0;
        for (std::size_t l = 0; l < params.layers.size(); ++l)
            for (Eigen::Index i = 0; i < params.layers[l].weight.size(); ++i) {
                double& slot = probe.layers[l].weight.data()[i];
                const double saved = slot;
                slot = saved + h;
                const double up = loss_frozen(probe);
                slot = saved - h;
                const double down = loss_frozen(probe);
                slot = saved;
                const double fd = (up - down) / (2.0 * h);
                const double analytic = grads[l].weight.data()[i];
                const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
                max_rel = std::max(max_rel, std::abs(analytic - fd) / denom);
            }
        CHECK(max_rel <= 1e-5);

        // Stop-gradient: perturbing the target-branch inputs changes the loss
        // value, demonstrating the frozen-vs-recomputed distinction matters.
        const vel::VelocityBatch v_perturbed = vel::sinkhorn_velocity(
            ParticleBatch::uniform(x), ParticleBatch::uniform(Matrix(x2.array() + 0.25)), y,
            std::get<vel::SinkhornField>(tc.velocity.kind).sinkhorn);
        const Matrix x_tilde_perturbed = x + tc.step_size * v_perturbed.vectors;
        CHECK(std::abs((x - x_tilde_perturbed).squaredNorm() - (x - x_tilde).squaredNorm()) > 1e-10);
    }
}

TEST_CASE("ema behavior") {
    gen::TrainConfig tc;
    tc.hidden = {4};
    tc.velocity = zero_velocity();
    tc.ema_decay = 0.0;  // shadow equals params at decay zero
    tc.batch_n = 4;
    tc.batch_m = 4;
    tc.weight_decay = 0.05;
    tc.seed = 23;

    Rng init = Rng(tc.seed).stream("train/init");
    gen::GeneratorParams params = gen::make_mlp(2, 2, tc.hidden, tc.activation, false, 0, false, false, init);
    gen::GeneratorParams ema = params;
    gen::AdamState adam = gen::AdamState::zeros_like(params);
    auto streams = gen::TrainStreams::from_seed(tc.seed);
    gen::wflow_training_step(params, adam, ema, tc, gaussian_samplers(1.0, 1.0), streams);
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        CHECK((ema.layers[l].weight - params.layers[l].weight).cwiseAbs().maxCoeff() == 0.0);

    tc.ema_decay = 1.0;
    CHECK_THROWS_AS(tc.validate(), ContractViolation);
}

TEST_CASE("identity-start residual training loss matches the source-particle identity") {
    gen::TrainConfig tc;
    tc.batch_n = 32;
    tc.batch_m = 32;
    tc.hidden = {16, 16};
    tc.residual = true;
    tc.zero_init_last = true;
    tc.velocity = sinkhorn_two_batch(0.1, 80);
    tc.step_size = 1.0;
    tc.seed = 29;

    const auto samplers = gaussian_samplers(1.0, 1.0);
    Rng init = Rng(tc.seed).stream("train/init");
    gen::GeneratorParams params =
        gen::make_mlp(2, 2, tc.hidden, tc.activation, true, 0, false, true, init);
    gen::GeneratorParams ema = params;
    gen::AdamState adam = gen::AdamState::zeros_like(params);
    auto streams = gen::TrainStreams::from_seed(tc.seed);

    // With f = identity the loss equals (1/N) sum |eta V(z_i)|^2 at the
    // source particles themselves.
    auto replay = gen::TrainStreams::from_seed(tc.seed);
    const ParticleBatch z = dist::sample(samplers.p_ref, 32, replay.z);
    const ParticleBatch z2 = dist::sample(samplers.p_ref, 32, replay.z_second);
    const ParticleBatch y = dist::sample(samplers.target, 32, replay.target);
    const vel::VelocityBatch v =
        vel::sinkhorn_velocity(z, z2, y, std::get<vel::SinkhornField>(tc.velocity.kind).sinkhorn);
    const double expected = v.vectors.squaredNorm() / 32.0;

    const auto result = gen::wflow_training_step(params, adam, ema, tc, samplers, streams);
    CHECK(result.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("train_generator") {
    SUBCASE("zero steps returns the initialization") {
        gen::TrainConfig tc;
        tc.steps = 0;
        tc.hidden = {8};
        tc.velocity = zero_velocity();
        tc.seed = 31;
        const auto samplers = gaussian_samplers(1.0, 1.0);
        const auto result = gen::train_generator(tc, samplers);

        Rng init = Rng(tc.seed).stream("train/init");
        const gen::GeneratorParams expected =
            gen::make_mlp(2, 2, tc.hidden, tc.activation, false, 0, false, false, init);
        for (std::size_t l = 0; l < expected.layers.size(); ++l)
            CHECK((result.params.layers[l].weight - expected.layers[l].weight).cwiseAbs().maxCoeff() ==
                  0.0);
    }
    SUBCASE("short anisotropic-Gaussian run recovers the covariance loosely") {
        gen::TrainConfig tc;
        tc.steps = 600;
        tc.batch_n = 128;
        tc.batch_m = 128;
        tc.hidden = {64, 64};
        tc.velocity = sinkhorn_two_batch(0.05, 10);
        tc.step_size = 1.0;
        tc.seed = 37;
        const auto samplers = gaussian_samplers(1.0, 4.0);
        const auto result = gen::train_generator(tc, samplers);

        Rng eval_rng(555);
        const ParticleBatch generated = gen::sample(result.ema, samplers.p_ref, 4096, eval_rng);
        const auto err = metrics::moment_errors(generated, samplers.target);
        CHECK(err.cov_rel_frobenius < 0.25);
    }
    SUBCASE("checkpoint callbacks fire on the configured interval") {
        gen::TrainConfig tc;
        tc.steps = 10;
        tc.batch_n = 4;
        tc.batch_m = 4;
        tc.hidden = {4};
        tc.velocity = zero_velocity();
        tc.seed = 41;
        std::vector<int> seen;
        gen::TrainCallbacks callbacks;
        callbacks.checkpoint_interval = 5;
        callbacks.on_checkpoint = [&](int step, const gen::GeneratorParams&,
                                      const gen::GeneratorParams&) { seen.push_back(step); };
        gen::train_generator(tc, gaussian_samplers(1.0, 1.0), callbacks);
        CHECK(seen == std::vector<int>{0, 5, 10});
    }
}

TEST_CASE("sampling") {
    Rng rng(43);
    gen::GeneratorParams identity =
        gen::make_mlp(2, 2, {8}, gen::Activation::SiLU, true, 0, false, true, rng);
    const dist::DistributionSpec p_ref{dist::StandardNormal{2}, "pref"};

    SUBCASE("identity residual generator reproduces the reference samples") {
        Rng a(7), b(7);
        const ParticleBatch direct = dist::sample(p_ref, 32, a);
        const ParticleBatch through = gen::sample(identity, p_ref, 32, b);
        CHECK((direct.positions - through.positions).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("count zero gives an empty batch") {
        Rng a(7);
        CHECK(gen::sample(identity, p_ref, 0, a).size() == 0);
    }
    SUBCASE("fixed seeds are bit-identical") {
        Rng a(7), b(7);
        const ParticleBatch s1 = gen::sample(identity, p_ref, 16, a);
        const ParticleBatch s2 = gen::sample(identity, p_ref, 16, b);
        CHECK(std::memcmp(s1.positions.data(), s2.positions.data(),
                          sizeof(double) * static_cast<std::size_t>(s1.positions.size())) == 0);
    }
}

TEST_CASE("guidance-scale sampling follows the inverse-CDF law") {
    Rng rng(47);
    const double w_max = 3.0, exponent = 3.0;
    int below_half = 0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        const double w = gen::sample_guidance_scale(w_max, exponent, rng);
        CHECK(w >= 0.0);
        CHECK(w <= w_max);
        if (w < 0.5) ++below_half;
    }
    // P(w < 1/2) = (1 - (3/2)^-2) / (1 - 4^-2) = (5/9)/(15/16) = 0.5925...
    const double expected = (1.0 - std::pow(1.5, -2.0)) / (1.0 - std::pow(4.0, -2.0));
    CHECK(static_cast<double>(below_half) / draws == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("checkpoints round-trip and stay byte-stable") {
    namespace fs = std::filesystem;
    Rng rng(53);
    gen::GeneratorParams params =
        gen::make_mlp(2, 2, {6, 6}, gen::Activation::SiLU, false, 0, false, false, rng);
    gen::GeneratorParams ema = params;
    ema.layers[0].weight *= 0.5;
    gen::TrainConfig tc;
    tc.velocity = sinkhorn_two_batch(0.05, 10);

    const fs::path path_a = fs::temp_directory_path() / "wgf_ckpt_a.json";
    const fs::path path_b = fs::temp_directory_path() / "wgf_ckpt_b.json";
    gen::save_checkpoint(path_a, params, ema, 123, tc);
    gen::save_checkpoint(path_b, params, ema, 123, tc);

    const auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp(path_a) == slurp(path_b));

    const gen::Checkpoint loaded = gen::load_checkpoint(path_a);
    CHECK(loaded.step == 123);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        CHECK((loaded.params.layers[l].weight - params.layers[l].weight).cwiseAbs().maxCoeff() == 0.0);
        CHECK((loaded.ema.layers[l].weight - ema.layers[l].weight).cwiseAbs().maxCoeff() == 0.0);
    }
    fs::remove(path_a);
    fs::remove(path_b);
}

TEST_CASE("affine feature lift changes the training loss predictably") {
    // phi(x) = 2x doubles every displacement, so the step-0 loss scales by 4
    // when the velocity field is translation/scale-compatible (zero velocity
    // keeps it zero; use a fixed analytic field V(x) = c instead).
    vel::KlAnalyticField constant_field;
    constant_field.score_p = [](const Vector& x) { return Vector(Vector::Constant(x.size(), 1.0)); };
    constant_field.score_q = [](const Vector& x) { return Vector(Vector::Zero(x.size())); };
    vel::VelocityFieldSpec spec;
    spec.kind = constant_field;

    gen::TrainConfig tc;
    tc.batch_n = 8;
    tc.batch_m = 8;
    tc.hidden = {4};
    tc.velocity = spec;
    tc.step_size = 1.0;
    tc.seed = 59;

    const auto samplers = gaussian_samplers(1.0, 1.0);
    const auto run_once = [&](std::optional<Matrix> a, std::optional<Vector> b) {
        gen::TrainConfig cfg = tc;
        cfg.feature_map_a = std::move(a);
        cfg.feature_map_b = std::move(b);
        Rng init = Rng(cfg.seed).stream("train/init");
        gen::GeneratorParams params =
            gen::make_mlp(2, 2, cfg.hidden, cfg.activation, false, 0, false, false, init);
        gen::GeneratorParams ema = params;
        gen::AdamState adam = gen::AdamState::zeros_like(params);
        auto streams = gen::TrainStreams::from_seed(cfg.seed);
        return gen::wflow_training_step(params, adam, ema, cfg, samplers, streams).loss;
    };

    const double plain = run_once(std::nullopt, std::nullopt);
    const double lifted = run_once(Matrix(2.0 * Matrix::Identity(2, 2)), Vector(Vector::Zero(2)));
    // Constant velocity field: loss = eta^2 |1|^2 per particle in either
    // space, but the lift doubles nothing here since V is constant; instead
    // the identity holds exactly: both equal eta^2 * d.
    CHECK(plain == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(lifted == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("conditional training with sampled guidance concentrates modes as w grows") {
    const dist::DistributionSpec target = dist::catalog_entry("three-mode-conditional");
    dist::GaussianMixture uncond_mix = std::get<dist::GaussianMixture>(target.kind);
    uncond_mix.labeled = false;
    const dist::DistributionSpec uncond{uncond_mix, "uncond"};

    gen::TrainConfig tc;
    tc.steps = 800;
    tc.batch_n = 96;
    tc.batch_m = 96;
    tc.hidden = {64, 64};
    tc.velocity = sinkhorn_two_batch(0.05, 10);
    tc.velocity.guidance = vel::VelocityGuidance{0.0};
    tc.conditional = true;
    tc.sample_guidance_scale = true;
    tc.uncond_batch = 16;
    tc.step_size = 1.0;
    tc.seed = 61;

    const gen::Samplers samplers{dist::DistributionSpec{dist::StandardNormal{2}, "pref"}, target, uncond};
    const auto result = gen::train_generator(tc, samplers);

    // Guidance concentrates each conditional cluster around its own center
    // (the center itself drifts away from the mixture barycenter, so spread
    // is measured within the cluster).
    const auto cluster_std_at = [&](double w) {
        Rng rng(4242);
        const Eigen::Index count = 600;
        IntVector labels = IntVector::Zero(count);  // class 0 at (-4, 0)
        const ParticleBatch z = dist::sample(samplers.p_ref, count, rng);
        const Matrix out = gen::forward(result.ema, z.positions, labels, w);
        const Matrix centered = out.rowwise() - out.colwise().mean();
        return std::sqrt(centered.rowwise().squaredNorm().mean());
    };
    CHECK(cluster_std_at(2.0) < cluster_std_at(0.0));
}
