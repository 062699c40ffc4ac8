#include "wgf/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wgf/experiments.hpp"
#include "wgf/flow.hpp"
#include "wgf/generator.hpp"
#include "wgf/io.hpp"
#include "wgf/metrics.hpp"
#include "wgf/ot.hpp"
#include "wgf/velocity.hpp"

namespace wgf::checks {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) { return io::format_double(v); }

Matrix uniform_square_points(Eigen::Index n, Rng& rng) {
    Matrix pts(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        pts(i, 0) = rng.uniform();
        pts(i, 1) = rng.uniform();
    }
    return pts;
}

ot::SinkhornSpec sinkhorn_spec(double epsilon, int iterations, bool log_domain = false) {
    ot::SinkhornSpec spec;
    spec.epsilon = epsilon;
    spec.iterations = iterations;
    spec.log_domain = log_domain;
    return spec;
}

dist::DistributionSpec gaussian_spec(const Vector& mean, const Matrix& cov, const std::string& label) {
    return dist::DistributionSpec{dist::Gaussian{mean, cov}, label};
}

dist::DistributionSpec std_normal_2d() {
    return dist::DistributionSpec{dist::StandardNormal{2}, "p_ref"};
}

vel::VelocityFieldSpec sinkhorn_field(double epsilon, int iterations, bool log_domain,
                                      vel::SelfEstimator estimator) {
    vel::VelocityFieldSpec spec;
    vel::SinkhornField field;
    field.sinkhorn = sinkhorn_spec(epsilon, iterations, log_domain);
    field.self_estimator = estimator;
    spec.kind = field;
    return spec;
}

// ------------------------------------------------------------------ 1

CheckResult check_sinkhorn_feasibility() {
    const int instances = 200;
    const Eigen::Index n = 128;
    const ot::SinkhornSpec spec = sinkhorn_spec(0.05, 200);
    Rng rng(20260808);

    double worst_violation = 0.0;
    double worst_debias = 0.0;
    for (int t = 0; t < instances; ++t) {
        const ParticleBatch q = ParticleBatch::uniform(uniform_square_points(n, rng));
        const ParticleBatch p = ParticleBatch::uniform(uniform_square_points(n, rng));
        const ot::CostMatrix cost = ot::build_cost_matrix(q, p, spec.cost_kind);
        const ot::Coupling coupling = ot::sinkhorn_scaling(cost, q.weights, p.weights, spec);
        const double row =
            (coupling.plan.rowwise().sum() - q.weights).cwiseAbs().maxCoeff();
        const double col =
            (coupling.plan.colwise().sum().transpose() - p.weights).cwiseAbs().maxCoeff();
        worst_violation = std::max({worst_violation, row, col});
        worst_debias = std::max(worst_debias, std::abs(ot::sinkhorn_divergence(q, q, spec)));
    }
    CheckResult r{"criterion-1",
                  "Sinkhorn feasibility: marginal violation <= 1e-6 and S(q,q) <= 1e-9 on 200 instances",
                  worst_violation <= 1e-6 && worst_debias <= 1e-9,
                  "max_violation=" + fmt(worst_violation) + " max_self_divergence=" + fmt(worst_debias)};
    return r;
}

// ------------------------------------------------------------------ 2

CheckResult check_singleton_divergence() {
    Matrix x(1, 2), y(1, 2);
    x << 0.0, 0.0;
    y << 3.0, 4.0;
    const ParticleBatch q = ParticleBatch::uniform(x);
    const ParticleBatch p = ParticleBatch::uniform(y);

    double worst = 0.0;
    for (const double eps : {0.01, 0.05, 0.5}) {
        const double s = ot::sinkhorn_divergence(q, p, sinkhorn_spec(eps, 50, true));
        worst = std::max(worst, std::abs(s - 12.5));
    }
    return {"criterion-2", "singleton Sinkhorn divergence equals 12.5 +- 1e-9 for eps in {0.01,0.05,0.5}",
            worst <= 1e-9, "max_abs_error=" + fmt(worst)};
}

// ------------------------------------------------------------------ 3

CheckResult check_epsilon_limit() {
    const int pairs = 50;
    const ot::SinkhornSpec spec = sinkhorn_spec(1e-3, 30000, true);
    Rng rng(77001);

    double worst_rel = 0.0;
    for (int t = 0; t < pairs; ++t) {
        Matrix xq = uniform_square_points(4, rng);
        Matrix xp = uniform_square_points(4, rng);
        xp.col(0).array() += 2.0;  // disjoint supports
        const ParticleBatch q = ParticleBatch::uniform(xq);
        const ParticleBatch p = ParticleBatch::uniform(xp);
        const double s = ot::sinkhorn_divergence(q, p, spec);
        const double w2 = metrics::exact_w2(q, p);
        const double half_w2_sq = 0.5 * w2 * w2;
        worst_rel = std::max(worst_rel, std::abs(s - half_w2_sq) / half_w2_sq);
    }
    return {"criterion-3", "S_{1e-3} matches 0.5*W2^2 within 2% on 50 disjoint 4-point pairs",
            worst_rel <= 0.02, "max_rel_error=" + fmt(worst_rel)};
}

// ------------------------------------------------------------------ 4

CheckResult check_equilibrium_vanishing() {
    const int trials = 20;
    const ot::SinkhornSpec spec = sinkhorn_spec(0.05, 200);
    Rng rng(424242);

    auto mean_velocity_norm = [&](Eigen::Index n) {
        const ParticleBatch q = ParticleBatch::uniform(rng.normal_matrix(n, 2));
        const ParticleBatch q2 = ParticleBatch::uniform(rng.normal_matrix(n, 2));
        const ParticleBatch p = ParticleBatch::uniform(rng.normal_matrix(n, 2));
        const vel::VelocityBatch v = vel::sinkhorn_velocity(q, q2, p, spec);
        return v.vectors.rowwise().norm().mean();
    };

    int wins = 0;
    for (int t = 0; t < trials; ++t) {
        const double small = mean_velocity_norm(64);
        const double large = mean_velocity_norm(1024);
        if (large < small) ++wins;
    }
    return {"criterion-4",
            "equilibrium vanishing: mean |V| at N=1024 below N=64 in >= 18/20 iid-Gaussian trials",
            wins >= 18, "wins=" + std::to_string(wins) + "/20"};
}

// ------------------------------------------------------------------ 5

struct TailsRun {
    double cov_rel_err;
    double trace;
};

TailsRun run_tails_training(std::uint64_t seed, vel::SelfEstimator estimator) {
    gen::TrainConfig tc;
    tc.steps = 2000;
    tc.batch_n = 256;
    tc.batch_m = 256;
    tc.step_size = 1.0;
    tc.seed = seed;
    tc.velocity = sinkhorn_field(0.05, 10, true, estimator);

    Vector mean = Vector::Zero(2);
    Matrix cov = Matrix::Zero(2, 2);
    cov(0, 0) = 1.0;
    cov(1, 1) = 4.0;
    const dist::DistributionSpec target = gaussian_spec(mean, cov, "tails-target");
    const gen::Samplers samplers{std_normal_2d(), target, std::nullopt};
    const gen::TrainResult result = gen::train_generator(tc, samplers);

    Rng eval_rng = Rng(seed).stream("tails/eval");
    const ParticleBatch generated = gen::sample(result.ema, samplers.p_ref, 8192, eval_rng);
    const metrics::MomentErrors err = metrics::moment_errors(generated, target);
    const Matrix centered = generated.positions.rowwise() - generated.positions.colwise().mean();
    const double trace =
        (centered.transpose() * centered / static_cast<double>(generated.size())).trace();
    return {err.cov_rel_frobenius, trace};
}

CheckResult check_two_batch_vs_one_batch(bool progress) {
    const int seeds = 20;
    int cov_ok = 0;
    int trace_ok = 0;
    for (int s = 0; s < seeds; ++s) {
        const std::uint64_t seed = 9000 + static_cast<std::uint64_t>(s);
        const TailsRun two = run_tails_training(seed, vel::SelfEstimator::TwoBatch);
        const TailsRun one = run_tails_training(seed, vel::SelfEstimator::OneBatch);
        if (two.cov_rel_err <= 0.10) ++cov_ok;
        if (one.trace < two.trace) ++trace_ok;
        if (progress)
            std::cerr << "  [criterion-5] seed " << s << ": two-batch cov_err=" << two.cov_rel_err
                      << " trace_two=" << two.trace << " trace_one=" << one.trace << "\n";
    }
    return {"criterion-5",
            "two-batch cov error <= 10% and one-batch trace shrinkage in >= 18/20 seeds (Fig. 3)",
            cov_ok >= 18 && trace_ok >= 18,
            "cov_ok=" + std::to_string(cov_ok) + "/20 trace_ok=" + std::to_string(trace_ok) + "/20"};
}

// ------------------------------------------------------------------ 6

flow::FlowConfig kl_gaussian_flow(double eta, int steps, std::uint64_t seed) {
    flow::FlowConfig fc;
    fc.step_size = eta;
    fc.num_steps = steps;
    vel::KlAnalyticField field;
    field.score_p = [](const Vector& x) { return Vector(-x); };
    field.score_q = field.score_p;  // replaced per step by the refit
    field.refit_score_q = true;
    fc.velocity.kind = field;
    Vector mean = Vector::Zero(1);
    fc.target = gaussian_spec(mean, Matrix::Identity(1, 1), "kl-target");
    fc.target_batch = 1;
    fc.record_energy = false;
    fc.seed = seed;
    return fc;
}

CheckResult check_order_one_euler() {
    const double horizon = 1.0;
    const Eigen::Index n = 4096;
    Rng init_rng(5150);
    Matrix pos = init_rng.normal_matrix(n, 1);
    pos.array() += 4.0;
    const ParticleBatch init = ParticleBatch::uniform(pos);
    const double m0 = init.positions.col(0).mean();
    const double exact = m0 * std::exp(-horizon);

    std::vector<double> errors;
    for (const double eta : {0.2, 0.1, 0.05}) {
        const int steps = static_cast<int>(std::lround(horizon / eta));
        const flow::FlowTrajectory traj = flow::simulate_flow(init, kl_gaussian_flow(eta, steps, 31));
        errors.push_back(std::abs(traj.steps.back().particles.positions.col(0).mean() - exact));
    }
    const double r1 = errors[0] / errors[1];
    const double r2 = errors[1] / errors[2];
    const bool pass = r1 >= 1.7 && r1 <= 2.3 && r2 >= 1.7 && r2 <= 2.3;
    return {"criterion-6", "order-1 Euler convergence: error halves (ratio in [1.7,2.3]) per eta halving",
            pass, "ratios=" + fmt(r1) + "," + fmt(r2)};
}

// ------------------------------------------------------------------ 7 & 8

flow::FlowTrajectory offset_gaussian_flow(Eigen::Index n, int steps, double eta, double epsilon,
                                          int iterations, std::uint64_t seed,
                                          vel::SelfEstimator estimator, bool resample_target) {
    flow::FlowConfig fc;
    fc.step_size = eta;
    fc.num_steps = steps;
    fc.velocity = sinkhorn_field(epsilon, iterations, false, estimator);
    fc.resample_target_each_step = resample_target;
    Vector mean(2);
    mean << 4.0, 0.0;
    fc.target = gaussian_spec(mean, Matrix::Identity(2, 2), "offset-target");
    fc.target_batch = static_cast<int>(n);
    fc.seed = seed;

    Rng init_rng = Rng(seed).stream("init");
    const ParticleBatch init = ParticleBatch::uniform(init_rng.normal_matrix(n, 2));
    return flow::simulate_flow(init, fc);
}

CheckResult check_energy_descent(flow::FlowTrajectory& out_trajectory) {
    // Theorem-style particle dynamics: velocity V_{q_k, p_M} with the full
    // one-batch self-coupling against one fixed empirical target measure.
    out_trajectory =
        offset_gaussian_flow(512, 100, 0.5, 0.05, 200, 1234, vel::SelfEstimator::OneBatch, false);
    const auto& steps = out_trajectory.steps;

    bool monotone = true;
    for (std::size_t k = 0; k + 1 < steps.size(); ++k)
        if (steps[k + 1].energy > 1.10 * steps[k].energy) monotone = false;
    const double initial = steps.front().energy;
    const double terminal = steps.back().energy;
    const bool small_terminal = terminal <= 0.05 * initial;
    return {"criterion-7",
            "energy descent: S_eps non-increasing (10% step tolerance) and terminal <= 5% of initial",
            monotone && small_terminal,
            "initial=" + fmt(initial) + " terminal=" + fmt(terminal) +
                " monotone=" + (monotone ? std::string("yes") : std::string("no"))};
}

CheckResult check_support_bound(const flow::FlowTrajectory& descent_trajectory) {
    int violations = 0;
    auto tally = [&](const flow::FlowTrajectory& traj) {
        const double r0 = traj.steps.front().support_radius;
        const double r = flow::max_target_radius(traj);
        violations += flow::check_support_bound(traj, r0, r).violations;
    };
    tally(descent_trajectory);
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        tally(offset_gaussian_flow(128, 40, 0.5, 0.05, 200, 555 + seed,
                                   vel::SelfEstimator::TwoBatch, true));
    return {"criterion-8", "support bound: zero violations of the discrete recursion on all Sinkhorn runs",
            violations == 0, "violations=" + std::to_string(violations)};
}

// ------------------------------------------------------------------ 9

// Central differences at h = 1e-5 carry an absolute noise floor of about
// eps*|loss|/h ~ 5e-11, so entries whose gradient is below atol/rtol cannot
// be certified at 1e-5 *relative* precision by the oracle itself; they are
// held to the absolute bound instead (1e-9, orders below any real defect).
struct FdCheck {
    double max_rel = 0.0;       // over entries where 1e-5 relative is resolvable
    double max_small_abs = 0.0;  // |g - fd| over entries below the floor
    bool pass = true;
};

FdCheck fd_gradient_check(const gen::GeneratorParams& params, const Matrix& inputs,
                          const Matrix& targets) {
    const auto loss_at = [&](const gen::GeneratorParams& p) {
        const Matrix out = gen::forward(p, inputs);
        return (out - targets).squaredNorm() / static_cast<double>(inputs.rows());
    };

    gen::ForwardCache cache;
    const Matrix out = gen::forward(params, inputs, std::nullopt, std::nullopt, &cache);
    const Matrix upstream = 2.0 * (out - targets) / static_cast<double>(inputs.rows());
    const std::vector<gen::Layer> grads = gen::backward(params, cache, upstream);

    const double h = 1e-5;
    const double rtol = 1e-5;
    const double atol = 1e-9;
    FdCheck result;
    gen::GeneratorParams probe = params;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto probe_entry = [&](double& slot, double analytic) {
            const double saved = slot;
            slot = saved + h;
            const double up = loss_at(probe);
            slot = saved - h;
            const double down = loss_at(probe);
            slot = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max(std::abs(fd), std::abs(analytic));
            const double diff = std::abs(analytic - fd);
            if (denom >= atol / rtol) {
                result.max_rel = std::max(result.max_rel, diff / denom);
                if (diff / denom > rtol) result.pass = false;
            } else {
                result.max_small_abs = std::max(result.max_small_abs, diff);
                if (diff > atol + rtol * denom) result.pass = false;
            }
        };
        for (Eigen::Index i = 0; i < params.layers[l].weight.rows(); ++i)
            for (Eigen::Index j = 0; j < params.layers[l].weight.cols(); ++j)
                probe_entry(probe.layers[l].weight(i, j), grads[l].weight(i, j));
        for (Eigen::Index i = 0; i < params.layers[l].bias.size(); ++i)
            probe_entry(probe.layers[l].bias(i), grads[l].bias(i));
    }
    return result;
}

CheckResult check_gradient_exactness() {
    Rng rng(808);
    const Matrix inputs = rng.normal_matrix(2, 2);
    const Matrix targets = rng.normal_matrix(2, 2);
    const std::vector<int> hidden = {256, 256, 256, 256};

    Rng init_a = rng.stream("plain");
    gen::GeneratorParams plain =
        gen::make_mlp(2, 2, hidden, gen::Activation::SiLU, false, 0, false, false, init_a);
    Rng init_b = rng.stream("residual");
    gen::GeneratorParams residual =
        gen::make_mlp(2, 2, hidden, gen::Activation::SiLU, true, 0, false, true, init_b);

    const FdCheck plain_check = fd_gradient_check(plain, inputs, targets);
    const FdCheck residual_check = fd_gradient_check(residual, inputs, targets);
    const bool pass = plain_check.pass && residual_check.pass;
    return {"criterion-9",
            "gradient exactness: finite-difference rel error <= 1e-5 over every parameter (4x256 net)",
            pass,
            "plain_rel=" + fmt(plain_check.max_rel) + " residual_rel=" + fmt(residual_check.max_rel) +
                " below_floor_absdiff=" +
                fmt(std::max(plain_check.max_small_abs, residual_check.max_small_abs))};
}

// ------------------------------------------------------------------ 10

CheckResult check_mode_coverage(bool progress) {
    const dist::DistributionSpec target = dist::catalog_entry("imbalanced-6+2");
    const auto modes = metrics::modes_from_mixture(target, 3.0);
    const std::vector<int> minority = {6, 7};

    int pass_count = 0;
    for (int s = 0; s < 10; ++s) {
        gen::TrainConfig tc;
        tc.steps = 5000;
        tc.batch_n = 256;
        tc.batch_m = 256;
        tc.step_size = 1.0;
        tc.seed = 7700 + static_cast<std::uint64_t>(s);
        tc.velocity = sinkhorn_field(0.05, 10, true, vel::SelfEstimator::TwoBatch);

        const gen::Samplers samplers{std_normal_2d(), target, std::nullopt};
        const gen::TrainResult result = gen::train_generator(tc, samplers);
        Rng eval_rng = Rng(tc.seed).stream("coverage/eval");
        const ParticleBatch generated = gen::sample(result.ema, samplers.p_ref, 10000, eval_rng);
        const metrics::CoverageReport report = metrics::mode_coverage(generated, modes, 0.01, minority);

        const bool all_covered =
            std::all_of(report.covered.begin(), report.covered.end(), [](bool c) { return c; });
        const bool minority_ok =
            report.minority_mass_fraction >= 0.05 && report.minority_mass_fraction <= 0.15;
        if (all_covered && minority_ok) ++pass_count;
        if (progress)
            std::cerr << "  [criterion-10] seed " << s << ": covered="
                      << std::count(report.covered.begin(), report.covered.end(), true)
                      << "/8 minority=" << report.minority_mass_fraction << "\n";
    }
    return {"criterion-10",
            "mode coverage: all 8 modes covered with minority mass in [0.05,0.15] in >= 8/10 seeds",
            pass_count >= 8, "passing_seeds=" + std::to_string(pass_count) + "/10"};
}

// ------------------------------------------------------------------ 11

CheckResult check_domain_transfer() {
    const dist::DistributionSpec source = dist::catalog_entry("oval-source");
    const dist::DistributionSpec target = dist::catalog_entry("circle-target");

    gen::TrainConfig tc;
    tc.steps = 2000;
    tc.batch_n = 256;
    tc.batch_m = 256;
    tc.step_size = 1.0;
    tc.seed = 606;
    tc.residual = true;
    tc.zero_init_last = true;
    tc.velocity = sinkhorn_field(0.05, 10, true, vel::SelfEstimator::TwoBatch);

    const gen::TrainResult result = gen::train_generator(tc, gen::Samplers{source, target, std::nullopt});
    Rng eval_rng = Rng(tc.seed).stream("transfer/eval");
    const ParticleBatch z = dist::sample(source, 2048, eval_rng);
    const ParticleBatch generated = ParticleBatch::uniform(gen::forward(result.ema, z.positions));

    const double mean_distance = metrics::transport_distance_histogram(z, generated).mean;
    const double gap = metrics::oval_circle_mean_radial_gap(3.0, 1.5, 2.0);
    const Vector radii = generated.positions.rowwise().norm();
    const double in_band =
        static_cast<double>((radii.array() >= 1.8 && radii.array() <= 2.2).count()) /
        static_cast<double>(radii.size());

    const bool pass = mean_distance <= 1.25 * gap && in_band >= 0.95;
    return {"criterion-11",
            "domain transfer: mean |f(z)-z| <= 1.25x analytic radial gap and 95% radii in [1.8,2.2]",
            pass,
            "mean_distance=" + fmt(mean_distance) + " bound=" + fmt(1.25 * gap) +
                " radius_in_band=" + fmt(in_band)};
}

// ------------------------------------------------------------------ 12

CheckResult check_guided_tilt() {
    flow::FlowConfig fc;
    fc.step_size = 0.1;
    fc.num_steps = 150;
    vel::KlAnalyticField field;
    field.score_p = [](const Vector& x) { return Vector(Vector::Constant(1, 1.0) - x); };  // N(1,1)
    field.score_q = field.score_p;  // replaced by refit
    field.score_p_uncond = [](const Vector& x) { return Vector(-x); };  // N(0,1)
    field.refit_score_q = true;
    fc.velocity.kind = field;
    fc.velocity.guidance = vel::VelocityGuidance{1.0};
    Vector mean = Vector::Zero(1);
    fc.target = gaussian_spec(mean, Matrix::Identity(1, 1), "tilt-target");
    fc.target_batch = 1;
    fc.record_energy = false;
    fc.seed = 99;

    Rng init_rng(4096);
    const ParticleBatch init = ParticleBatch::uniform(init_rng.normal_matrix(4096, 1));
    const flow::FlowTrajectory traj = flow::simulate_flow(init, fc);
    const double terminal_mean = traj.steps.back().particles.positions.col(0).mean();
    return {"criterion-12",
            "KL velocity-guidance tilt: guided stationary mean 2.0 +- 0.1 (w=1, N(1,1) vs N(0,1))",
            std::abs(terminal_mean - 2.0) <= 0.1, "terminal_mean=" + fmt(terminal_mean)};
}

// ------------------------------------------------------------------ 13

CheckResult check_guidance_degenerations() {
    Rng rng(313);
    const ParticleBatch q = ParticleBatch::uniform(rng.normal_matrix(16, 2));
    const ParticleBatch q2 = ParticleBatch::uniform(rng.normal_matrix(16, 2));
    const ParticleBatch pc = ParticleBatch::uniform(rng.normal_matrix(12, 2));
    const ParticleBatch pu = ParticleBatch::uniform(rng.normal_matrix(10, 2));
    const ot::SinkhornSpec spec = sinkhorn_spec(0.1, 50);

    const vel::VelocityBatch base = vel::sinkhorn_velocity(q, q2, pc, spec);
    const vel::VelocityBatch guided = vel::velocity_guidance(q, q2, pc, pu, spec, 0.0);
    const bool bitwise =
        guided.vectors.rows() == base.vectors.rows() &&
        std::memcmp(guided.vectors.data(), base.vectors.data(),
                    sizeof(double) * static_cast<std::size_t>(base.vectors.size())) == 0;

    const ParticleBatch repulsive = vel::apply_distribution_guidance(q, pu, 0.0);
    const bool unchanged =
        repulsive.size() == q.size() &&
        std::memcmp(repulsive.positions.data(), q.positions.data(),
                    sizeof(double) * static_cast<std::size_t>(q.positions.size())) == 0 &&
        std::memcmp(repulsive.weights.data(), q.weights.data(),
                    sizeof(double) * static_cast<std::size_t>(q.weights.size())) == 0;

    return {"criterion-13",
            "guidance degenerations at w=0: velocity bit-for-bit, distribution batch unchanged",
            bitwise && unchanged,
            std::string("velocity_bitwise=") + (bitwise ? "yes" : "no") +
                " batch_unchanged=" + (unchanged ? "yes" : "no")};
}

// ------------------------------------------------------------------ 14

bool files_identical(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

CheckResult check_cli_determinism() {
    const fs::path base = fs::temp_directory_path() / "wgf-lab-determinism";
    std::error_code ec;
    fs::remove_all(base, ec);

    nlohmann::json cfg = experiments::default_config("gaussian-tails");
    cfg["seed"] = 7;
    cfg["train"]["steps"] = 120;
    cfg["eval_samples"] = 1024;

    bool identical = true;
    std::string detail;
    for (const char* name : {"gaussian-tails", "flow-convergence"}) {
        nlohmann::json run_cfg =
            std::string(name) == "gaussian-tails" ? cfg : experiments::default_config(name);
        run_cfg["seed"] = 7;
        const fs::path dir_a = base / (std::string(name) + "-a");
        const fs::path dir_b = base / (std::string(name) + "-b");
        experiments::run_experiment(run_cfg, dir_a);
        experiments::run_experiment(run_cfg, dir_b);
        for (const auto& entry : fs::directory_iterator(dir_a)) {
            if (entry.path().extension() != ".csv") continue;
            if (!files_identical(entry.path(), dir_b / entry.path().filename())) {
                identical = false;
                detail += entry.path().filename().string() + " differs; ";
            }
        }
    }
    fs::remove_all(base, ec);
    return {"criterion-14", "determinism: re-running an experiment with a fixed seed is byte-identical",
            identical, identical ? "all CSVs byte-identical" : detail};
}

void append(std::vector<CheckResult>& out, CheckResult r, bool progress) {
    if (progress)
        std::cerr << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << " " << r.measured << "\n";
    out.push_back(std::move(r));
}

}  // namespace

std::vector<std::string> suite_names() { return {"ot-core", "velocity", "flow", "generator", "all"}; }

std::vector<CheckResult> run_suite(const std::string& suite, bool progress) {
    const bool all = suite == "all";
    if (!all && suite != "ot-core" && suite != "velocity" && suite != "flow" && suite != "generator")
        throw ConfigError("unknown check suite '" + suite + "'");

    std::vector<CheckResult> results;
    if (all || suite == "ot-core") {
        append(results, check_sinkhorn_feasibility(), progress);
        append(results, check_singleton_divergence(), progress);
        append(results, check_epsilon_limit(), progress);
    }
    if (all || suite == "velocity") {
        append(results, check_equilibrium_vanishing(), progress);
        append(results, check_guided_tilt(), progress);
        append(results, check_guidance_degenerations(), progress);
    }
    if (all || suite == "flow") {
        append(results, check_order_one_euler(), progress);
        flow::FlowTrajectory descent;
        append(results, check_energy_descent(descent), progress);
        append(results, check_support_bound(descent), progress);
    }
    if (all || suite == "generator") {
        append(results, check_two_batch_vs_one_batch(progress), progress);
        append(results, check_gradient_exactness(), progress);
        append(results, check_mode_coverage(progress), progress);
        append(results, check_domain_transfer(), progress);
    }
    if (all) append(results, check_cli_determinism(), progress);

    std::sort(results.begin(), results.end(), [](const CheckResult& a, const CheckResult& b) {
        const auto num = [](const CheckResult& r) {
            return std::stoi(r.id.substr(r.id.find('-') + 1));
        };
        return num(a) < num(b);
    });
    return results;
}

}  // namespace wgf::checks
