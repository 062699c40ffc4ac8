#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "wgf/generator.hpp"
#include "wgf/metrics.hpp"

using namespace wgf;

TEST_CASE("exact_w2 basics") {
    Rng rng(1);
    SUBCASE("identical clouds have zero distance") {
        const Matrix x = oracle::random_points(10, 2, rng);
        CHECK(metrics::exact_w2(ParticleBatch::uniform(x), ParticleBatch::uniform(x)) == 0.0);
    }
    SUBCASE("singletons reduce to the Euclidean distance") {
        Matrix x(1, 2), y(1, 2);
        x << 0.0, 0.0;
        y << 3.0, 4.0;
        CHECK(metrics::exact_w2(ParticleBatch::uniform(x), ParticleBatch::uniform(y)) ==
              doctest::Approx(5.0).epsilon(1e-14));
    }
    SUBCASE("swapped pair is matched perfectly") {
        Matrix x(2, 2), y(2, 2);
        x << 0.0, 0.0, 1.0, 0.0;
        y << 1.0, 0.0, 0.0, 0.0;
        CHECK(metrics::exact_w2(ParticleBatch::uniform(x), ParticleBatch::uniform(y)) <= 1e-15);
    }
    SUBCASE("unequal sizes and non-uniform weights are unsupported") {
        const Matrix x = oracle::random_points(4, 2, rng);
        const Matrix y = oracle::random_points(5, 2, rng);
        CHECK_THROWS_AS(metrics::exact_w2(ParticleBatch::uniform(x), ParticleBatch::uniform(y)),
                        UnsupportedError);
        Vector w(4);
        w << 0.4, 0.3, 0.2, 0.1;
        CHECK_THROWS_AS(
            metrics::exact_w2(ParticleBatch(x, w), ParticleBatch::uniform(oracle::random_points(4, 2, rng))),
            UnsupportedError);
    }
}

TEST_CASE("exact_w2 agrees with brute-force enumeration") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const Matrix x = oracle::random_points(6, 2, rng);
        const Matrix y = oracle::random_points(6, 2, rng);
        const double hungarian = metrics::exact_w2(ParticleBatch::uniform(x), ParticleBatch::uniform(y));
        const double brute = oracle::brute_force_w2(x, y);
        CHECK(hungarian == doctest::Approx(brute).epsilon(1e-12));
    }
}

TEST_CASE("exact_w2 metric properties") {
    Rng rng(3);
    SUBCASE("symmetry") {
        for (int t = 0; t < 10; ++t) {
            const ParticleBatch q = ParticleBatch::uniform(oracle::random_points(16, 2, rng));
            const ParticleBatch p = ParticleBatch::uniform(oracle::random_points(16, 2, rng));
            CHECK(metrics::exact_w2(q, p) == doctest::Approx(metrics::exact_w2(p, q)).epsilon(1e-12));
        }
    }
    SUBCASE("triangle inequality on random triples") {
        for (int t = 0; t < 100; ++t) {
            const ParticleBatch a = ParticleBatch::uniform(oracle::random_points(8, 2, rng));
            const ParticleBatch b = ParticleBatch::uniform(oracle::random_points(8, 2, rng));
            const ParticleBatch c = ParticleBatch::uniform(oracle::random_points(8, 2, rng));
            CHECK(metrics::exact_w2(a, c) <= metrics::exact_w2(a, b) + metrics::exact_w2(b, c) + 1e-9);
        }
    }
    SUBCASE("optimum lower-bounds random permutations") {
        const Matrix x = oracle::random_points(12, 2, rng);
        const Matrix y = oracle::random_points(12, 2, rng);
        const double opt = metrics::exact_w2(ParticleBatch::uniform(x), ParticleBatch::uniform(y));
        std::vector<Eigen::Index> perm(12);
        std::iota(perm.begin(), perm.end(), 0);
        for (int t = 0; t < 20; ++t) {
            for (Eigen::Index i = 11; i > 0; --i)
                std::swap(perm[i], perm[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
            double total = 0.0;
            for (Eigen::Index i = 0; i < 12; ++i) total += (x.row(i) - y.row(perm[i])).squaredNorm();
            CHECK(opt <= std::sqrt(total / 12.0) + 1e-12);
        }
    }
}

TEST_CASE("exact_w2_1d quantile coupling handles unequal sizes") {
    Matrix x(2, 1), y(4, 1);
    x << 0.0, 1.0;
    y << 0.0, 0.0, 1.0, 1.0;
    CHECK(metrics::exact_w2_1d(ParticleBatch::uniform(x), ParticleBatch::uniform(y)) <= 1e-12);

    Rng rng(5);
    const Matrix a = oracle::random_points(8, 1, rng);
    const Matrix b = oracle::random_points(8, 1, rng);
    CHECK(metrics::exact_w2_1d(ParticleBatch::uniform(a), ParticleBatch::uniform(b)) ==
          doctest::Approx(metrics::exact_w2(ParticleBatch::uniform(a), ParticleBatch::uniform(b)))
              .epsilon(1e-12));
}

TEST_CASE("mmd_squared values") {
    Rng rng(7);
    SUBCASE("identical batches give zero") {
        const ParticleBatch q = ParticleBatch::uniform(oracle::random_points(9, 2, rng));
        CHECK(std::abs(metrics::mmd_squared(q, q, 0.7)) < 1e-12);
    }
    SUBCASE("singleton pair at distance sigma*sqrt(2)") {
        Matrix x(1, 1), y(1, 1);
        x << 0.0;
        const double sigma = 0.8;
        y << sigma * std::sqrt(2.0);
        const double expected = 2.0 - 2.0 * std::exp(-1.0);
        CHECK(metrics::mmd_squared(ParticleBatch::uniform(x), ParticleBatch::uniform(y), sigma) ==
              doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("symmetry and nonnegativity on random batches") {
        for (int t = 0; t < 25; ++t) {
            const ParticleBatch q = ParticleBatch::uniform(oracle::random_points(6, 2, rng));
            const ParticleBatch p = ParticleBatch::uniform(oracle::random_points(7, 2, rng));
            const double qp = metrics::mmd_squared(q, p, 0.5);
            CHECK(qp >= -1e-12);
            CHECK(qp == doctest::Approx(metrics::mmd_squared(p, q, 0.5)).epsilon(1e-12));
        }
    }
}

TEST_CASE("mode coverage") {
    std::vector<metrics::Mode> modes;
    Vector c0 = Vector::Zero(2);
    Vector c1 = Vector::Constant(2, 5.0);
    modes.push_back({c0, 1.0});
    modes.push_back({c1, 1.0});

    SUBCASE("all samples at one center cover only that mode") {
        const ParticleBatch samples = ParticleBatch::uniform(Matrix::Zero(50, 2));
        const auto report = metrics::mode_coverage(samples, modes, 0.01, {1});
        CHECK(report.covered[0]);
        CHECK_FALSE(report.covered[1]);
        CHECK(report.counts[0] == 50);
        CHECK(report.minority_mass_fraction == 0.0);
    }
    SUBCASE("empty sample set covers nothing") {
        ParticleBatch empty;
        empty.positions = Matrix(0, 2);
        empty.weights = Vector(0);
        const auto report = metrics::mode_coverage(empty, modes, 0.01);
        CHECK_FALSE(report.covered[0]);
        CHECK_FALSE(report.covered[1]);
    }
    SUBCASE("samples from the imbalanced catalog target cover all 8 modes") {
        const auto target = dist::catalog_entry("imbalanced-6+2");
        Rng rng(11);
        const ParticleBatch samples = dist::sample(target, 10000, rng);
        const auto catalog_modes = metrics::modes_from_mixture(target, 3.0);
        const auto report = metrics::mode_coverage(samples, catalog_modes, 0.01, {6, 7});
        for (const bool covered : report.covered) CHECK(covered);
        CHECK(report.minority_mass_fraction > 0.05);
        CHECK(report.minority_mass_fraction < 0.15);
    }
}

TEST_CASE("moment errors") {
    Rng rng(13);
    dist::Gaussian g;
    g.mean = Vector::Constant(2, 1.0);
    g.cov = Matrix::Identity(2, 2) * 2.0;
    const dist::DistributionSpec spec{g, ""};

    SUBCASE("self-sampled reference stays under 2% covariance error") {
        const ParticleBatch samples = dist::sample(spec, 100000, rng);
        const auto err = metrics::moment_errors(samples, spec);
        CHECK(err.cov_rel_frobenius < 0.02);
    }
    SUBCASE("all samples at the mean give relative error one") {
        Matrix pos(100, 2);
        pos.rowwise() = g.mean.transpose();
        const auto err = metrics::moment_errors(ParticleBatch::uniform(pos), spec);
        CHECK(err.cov_rel_frobenius == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(err.mean_error < 1e-12);
    }
    SUBCASE("doubling samples quadruples the empirical covariance exactly") {
        const Matrix pos = oracle::random_points(200, 2, rng);
        const auto cov_of = [](const Matrix& p) {
            const Matrix centered = p.rowwise() - p.colwise().mean();
            return Matrix(centered.transpose() * centered / static_cast<double>(p.rows()));
        };
        CHECK((cov_of(Matrix(2.0 * pos)) - 4.0 * cov_of(pos)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("transport distance histogram") {
    Rng rng(17);
    const Matrix z = oracle::random_points(40, 2, rng);
    SUBCASE("identity map gives all zeros") {
        const auto h = metrics::transport_distance_histogram(ParticleBatch::uniform(z),
                                                             ParticleBatch::uniform(z));
        CHECK(h.max == 0.0);
        CHECK(h.mean == 0.0);
    }
    SUBCASE("constant shift gives the shift norm everywhere") {
        Matrix shifted = z;
        shifted.col(0).array() += 3.0;
        shifted.col(1).array() += 4.0;
        const auto h = metrics::transport_distance_histogram(ParticleBatch::uniform(z),
                                                             ParticleBatch::uniform(shifted));
        CHECK(h.mean == doctest::Approx(5.0).epsilon(1e-14));
        CHECK(h.median == doctest::Approx(5.0).epsilon(1e-14));
    }
    SUBCASE("mean matches direct recomputation") {
        const Matrix g = oracle::random_points(40, 2, rng);
        const auto h = metrics::transport_distance_histogram(ParticleBatch::uniform(z),
                                                             ParticleBatch::uniform(g));
        CHECK(h.mean == doctest::Approx((g - z).rowwise().norm().mean()).epsilon(1e-14));
    }
}

TEST_CASE("landscape slice construction") {
    Rng rng(19);
    // Synthetic checkpoints of a small net; no training needed for geometry.
    std::vector<gen::GeneratorParams> checkpoints;
    Rng init = rng.stream("init");
    gen::GeneratorParams base =
        gen::make_mlp(2, 2, {8}, gen::Activation::SiLU, false, 0, false, false, init);
    checkpoints.push_back(base);
    for (int k = 1; k < 4; ++k) {
        Vector theta = gen::flatten_parameters(checkpoints.back());
        theta += 0.05 * rng.normal_vector(theta.size());
        checkpoints.push_back(gen::unflatten_parameters(base, theta));
    }

    metrics::LandscapeEvalSpec eval;
    eval.sinkhorn.epsilon = 0.2;
    eval.sinkhorn.iterations = 30;
    eval.target = ParticleBatch::uniform(oracle::random_points(32, 2, rng));
    eval.eval_inputs = rng.normal_matrix(32, 2);

    metrics::LandscapeGrid grid;
    grid.x_min = 0.0;
    grid.x_max = 3.0;
    grid.y_extent = 1.0;
    grid.nx = 4;  // integer x grid hits the checkpoints exactly
    grid.ny = 3;

    const auto slice = metrics::landscape_slice(checkpoints, 555, grid, eval);

    SUBCASE("grid coordinate (k, 0) evaluates checkpoint k exactly") {
        for (int k = 0; k < 4; ++k) {
            const Matrix out = gen::forward(checkpoints[static_cast<std::size_t>(k)], eval.eval_inputs);
            const double direct =
                ot::sinkhorn_divergence(ParticleBatch::uniform(out), eval.target, eval.sinkhorn);
            CHECK(slice.energy(1, k) == direct);  // middle row is y = 0
        }
    }
    SUBCASE("transverse direction is unit and orthogonal to every displacement") {
        CHECK(slice.transverse.norm() == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t k = 0; k + 1 < checkpoints.size(); ++k) {
            const Vector d = gen::flatten_parameters(checkpoints[k + 1]) -
                             gen::flatten_parameters(checkpoints[k]);
            CHECK(std::abs(slice.transverse.dot(d)) <= 1e-9);
        }
    }
    SUBCASE("identical checkpoints are degenerate") {
        std::vector<gen::GeneratorParams> same = {base, base, base};
        CHECK_THROWS_AS(metrics::landscape_slice(same, 1, grid, eval), DegenerateTrajectoryError);
    }
}

TEST_CASE("converged training run descends along the landscape axis") {
    // Small run on the ring target; the energy at the last checkpoint must
    // sit below the energy at the first.
    const auto target = dist::catalog_entry("eight-gaussians-ring");
    gen::TrainConfig tc;
    tc.steps = 500;
    tc.batch_n = 96;
    tc.batch_m = 96;
    tc.hidden = {48, 48};
    vel::SinkhornField field;
    field.sinkhorn.epsilon = 0.05;
    field.sinkhorn.iterations = 10;
    field.sinkhorn.log_domain = true;
    tc.velocity.kind = field;
    tc.step_size = 1.0;
    tc.seed = 71;

    std::vector<gen::GeneratorParams> checkpoints;
    gen::TrainCallbacks callbacks;
    callbacks.checkpoint_interval = 100;
    callbacks.on_checkpoint = [&](int, const gen::GeneratorParams& p, const gen::GeneratorParams&) {
        checkpoints.push_back(p);
    };
    const gen::Samplers samplers{dist::DistributionSpec{dist::StandardNormal{2}, "pref"}, target,
                                 std::nullopt};
    gen::train_generator(tc, samplers, callbacks);
    REQUIRE(checkpoints.size() >= 2);

    Rng rng(72);
    metrics::LandscapeEvalSpec eval;
    eval.sinkhorn = field.sinkhorn;
    eval.target = dist::sample(target, 128, rng);
    eval.eval_inputs = rng.normal_matrix(128, 2);

    metrics::LandscapeGrid grid;
    grid.x_min = 0.0;
    grid.x_max = static_cast<double>(checkpoints.size() - 1);
    grid.y_extent = 0.0;
    grid.nx = static_cast<int>(checkpoints.size());
    grid.ny = 1;
    const auto slice = metrics::landscape_slice(checkpoints, 17, grid, eval);
    CHECK(slice.energy(0, grid.nx - 1) < slice.energy(0, 0));
}
