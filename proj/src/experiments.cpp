#include "wgf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <variant>

#include "wgf/flow.hpp"
#include "wgf/generator.hpp"
#include "wgf/io.hpp"
#include "wgf/metrics.hpp"
#include "wgf/serialization.hpp"

namespace wgf::experiments {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json merge(json base, const json& overrides) {
    if (!overrides.is_object() || !base.is_object()) return overrides;
    for (const auto& [key, value] : overrides.items()) {
        if (base.contains(key) && base[key].is_object() && value.is_object())
            base[key] = merge(base[key], value);
        else
            base[key] = value;
    }
    return base;
}

double positive(const json& j, const std::string& path, double v) {
    (void)j;
    if (!(v > 0.0)) throw ConfigError(path + " must be positive");
    return v;
}

json sinkhorn_velocity_json(double epsilon, int iterations, bool log_domain,
                            const std::string& estimator, const std::string& guidance_mode,
                            double w) {
    return json{{"kind", "sinkhorn"},
                {"sinkhorn",
                 {{"epsilon", epsilon},
                  {"iterations", iterations},
                  {"cost_kind", "half_squared_euclidean"},
                  {"log_domain", log_domain},
                  {"cost_normalization", false},
                  {"early_stop", false},
                  {"early_stop_tol", 1e-9}}},
                {"self_estimator", estimator},
                {"guidance", {{"mode", guidance_mode}, {"w", w}}}};
}

json default_train_block(int steps, bool log_domain = true) {
    return json{{"steps", steps},
                {"batch_n", 256},
                {"batch_m", 256},
                {"learning_rate", 1e-3},
                {"beta1", 0.9},
                {"beta2", 0.95},
                {"weight_decay", 0.0},
                {"grad_clip", 5.0},
                {"ema_decay", 0.999},
                {"step_size", 1.0},
                {"hidden", {256, 256, 256, 256}},
                {"residual", false},
                {"zero_init_last", false},
                {"conditional", false},
                {"sample_guidance_scale", false},
                {"w_max", 3.0},
                {"w_exponent", 3.0},
                {"uncond_batch", 16},
                {"eval_ema", true},
                {"velocity", sinkhorn_velocity_json(0.05, 10, log_domain, "two_batch", "none", 0.0)}};
}

gen::TrainConfig train_config_from(const json& t, std::uint64_t seed) {
    gen::TrainConfig c;
    c.steps = t.value("steps", c.steps);
    c.batch_n = t.value("batch_n", c.batch_n);
    c.batch_m = t.value("batch_m", c.batch_m);
    c.learning_rate = t.value("learning_rate", c.learning_rate);
    c.beta1 = t.value("beta1", c.beta1);
    c.beta2 = t.value("beta2", c.beta2);
    c.weight_decay = t.value("weight_decay", c.weight_decay);
    c.grad_clip = t.value("grad_clip", c.grad_clip);
    c.ema_decay = t.value("ema_decay", c.ema_decay);
    c.step_size = t.value("step_size", c.step_size);
    c.hidden = t.value("hidden", c.hidden);
    c.residual = t.value("residual", false);
    c.zero_init_last = t.value("zero_init_last", false);
    c.conditional = t.value("conditional", false);
    c.sample_guidance_scale = t.value("sample_guidance_scale", false);
    c.w_max = t.value("w_max", c.w_max);
    c.w_exponent = t.value("w_exponent", c.w_exponent);
    c.uncond_batch = t.value("uncond_batch", c.uncond_batch);
    c.eval_ema = t.value("eval_ema", true);
    c.seed = seed;
    if (t.contains("velocity")) c.velocity = t.at("velocity").get<vel::VelocityFieldSpec>();

    if (!(c.step_size > 0.0)) throw ConfigError("train.step_size must be positive");
    if (!(c.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (c.steps < 0) throw ConfigError("train.steps must be >= 0");
    if (c.batch_n < 1) throw ConfigError("train.batch_n must be >= 1");
    if (c.batch_m < 1) throw ConfigError("train.batch_m must be >= 1");
    try {
        c.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    return c;
}

dist::DistributionSpec spec_from(const json& j, const std::string& path) {
    try {
        return j.get<dist::DistributionSpec>();
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    } catch (const ContractViolation& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

const ParticleBatch& eval_model_batch(const gen::TrainResult& result, bool eval_ema,
                                      ParticleBatch& storage, const dist::DistributionSpec& p_ref,
                                      Eigen::Index count, Rng& rng) {
    const gen::GeneratorParams& model = eval_ema ? result.ema : result.params;
    storage = gen::sample(model, p_ref, count, rng);
    return storage;
}

void echo_config(const json& config, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream out(out_dir / "config.json");
    if (!out) throw ConfigError("output directory not writable: " + out_dir.string());
    out << config.dump(2) << '\n';
}

// ---------------------------------------------------------------- gaussian-tails

void run_gaussian_tails(const json& cfg, const fs::path& out) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const auto target = spec_from(cfg.at("target"), "target");
    const auto p_ref = spec_from(cfg.at("p_ref"), "p_ref");
    const Eigen::Index eval_n = cfg.value("eval_samples", 8192);

    const Matrix target_cov = dist::covariance_of(target);
    std::vector<std::pair<std::string, double>> rows;
    rows.emplace_back("target/trace", target_cov.trace());

    io::SvgPlot plot("one-batch vs two-batch self-transport");
    Rng target_rng = Rng(seed).stream("eval/target");
    plot.add_scatter(dist::sample(target, 1024, target_rng).positions, "#bbbbbb", 1.5, "target");

    const std::vector<std::pair<std::string, std::string>> variants = {
        {"two_batch", "#1f77b4"}, {"one_batch", "#d62728"}};
    for (const auto& [estimator, color] : variants) {
        json train = cfg.at("train");
        train["velocity"]["self_estimator"] = estimator;
        const gen::TrainConfig tc = train_config_from(train, seed);
        const gen::Samplers samplers{p_ref, target, std::nullopt};
        const gen::TrainResult result = gen::train_generator(tc, samplers);

        Rng eval_rng = Rng(seed).stream("eval/" + estimator);
        ParticleBatch generated;
        eval_model_batch(result, tc.eval_ema, generated, p_ref, eval_n, eval_rng);

        const metrics::MomentErrors err = metrics::moment_errors(generated, target);
        const Matrix centered =
            generated.positions.rowwise() - generated.positions.colwise().mean();
        const Matrix cov = centered.transpose() * centered / static_cast<double>(generated.size());
        rows.emplace_back(estimator + "/cov_rel_frobenius", err.cov_rel_frobenius);
        rows.emplace_back(estimator + "/mean_error", err.mean_error);
        rows.emplace_back(estimator + "/trace", cov.trace());

        io::write_samples_csv(out / ("samples_" + estimator + ".csv"), generated);
        plot.add_scatter(generated.positions.topRows(std::min<Eigen::Index>(1024, generated.size())),
                         color, 1.5, estimator);
    }
    io::write_metrics_csv(out / "metrics.csv", rows);
    plot.write(out / "samples.svg");
}

// ---------------------------------------------------------------- mode-coverage

void run_mode_coverage(const json& cfg, const fs::path& out) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const auto target = spec_from(cfg.at("target"), "target");
    const auto p_ref = spec_from(cfg.at("p_ref"), "p_ref");
    const Eigen::Index eval_n = cfg.value("eval_samples", 10000);
    const double radius_sigmas = cfg.at("coverage").value("radius_sigmas", 3.0);
    const double min_fraction = cfg.at("coverage").value("min_fraction", 0.01);
    const std::vector<int> minority = cfg.at("coverage").value("minority_components", std::vector<int>{});

    const gen::TrainConfig tc = train_config_from(cfg.at("train"), seed);
    const gen::TrainResult result = gen::train_generator(tc, gen::Samplers{p_ref, target, std::nullopt});

    Rng eval_rng = Rng(seed).stream("eval");
    ParticleBatch generated;
    eval_model_batch(result, tc.eval_ema, generated, p_ref, eval_n, eval_rng);

    const auto modes = metrics::modes_from_mixture(target, radius_sigmas);
    const metrics::CoverageReport report = metrics::mode_coverage(generated, modes, min_fraction, minority);

    std::vector<std::pair<std::string, double>> rows;
    for (std::size_t k = 0; k < report.counts.size(); ++k) {
        rows.emplace_back("mode" + std::to_string(k) + "/count", static_cast<double>(report.counts[k]));
        rows.emplace_back("mode" + std::to_string(k) + "/covered", report.covered[k] ? 1.0 : 0.0);
    }
    rows.emplace_back("minority_mass_fraction", report.minority_mass_fraction);
    rows.emplace_back("modes_covered",
                      static_cast<double>(std::count(report.covered.begin(), report.covered.end(), true)));
    io::write_metrics_csv(out / "metrics.csv", rows);
    io::write_samples_csv(out / "samples.csv", generated);

    io::SvgPlot plot("mode coverage on the imbalanced 6+2 mixture");
    Rng target_rng = Rng(seed).stream("eval/target");
    plot.add_scatter(dist::sample(target, 2000, target_rng).positions, "#bbbbbb", 1.5, "target");
    plot.add_scatter(generated.positions.topRows(std::min<Eigen::Index>(2000, generated.size())),
                     "#1f77b4", 1.5, "generated");
    plot.write(out / "samples.svg");
}

// ---------------------------------------------------------------- domain-transfer

void run_domain_transfer(const json& cfg, const fs::path& out) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const auto source = spec_from(cfg.at("source"), "source");
    const auto target = spec_from(cfg.at("target"), "target");
    const Eigen::Index eval_n = cfg.value("eval_samples", 2048);

    const gen::TrainConfig tc = train_config_from(cfg.at("train"), seed);
    const gen::TrainResult result = gen::train_generator(tc, gen::Samplers{source, target, std::nullopt});

    Rng eval_rng = Rng(seed).stream("eval");
    const ParticleBatch z = dist::sample(source, eval_n, eval_rng);
    const gen::GeneratorParams& model = tc.eval_ema ? result.ema : result.params;
    const ParticleBatch generated = ParticleBatch::uniform(gen::forward(model, z.positions));

    const metrics::TransportHistogram hist = metrics::transport_distance_histogram(z, generated);
    const auto& curve_src = std::get<dist::ParametricCurve>(source.kind);
    const auto& curve_tgt = std::get<dist::ParametricCurve>(target.kind);
    const double analytic_gap =
        metrics::oval_circle_mean_radial_gap(curve_src.semi_a, curve_src.semi_b, curve_tgt.radius);

    const Vector radii = generated.positions.rowwise().norm();
    const double band_lo = cfg.value("radius_band_lo", 1.8);
    const double band_hi = cfg.value("radius_band_hi", 2.2);
    const double in_band =
        static_cast<double>((radii.array() >= band_lo && radii.array() <= band_hi).count()) /
        static_cast<double>(radii.size());

    io::write_metrics_csv(out / "metrics.csv",
                          {{"mean_transport_distance", hist.mean},
                           {"median_transport_distance", hist.median},
                           {"q25_transport_distance", hist.q25},
                           {"q75_transport_distance", hist.q75},
                           {"max_transport_distance", hist.max},
                           {"analytic_mean_radial_gap", analytic_gap},
                           {"radius_in_band_fraction", in_band}});
    io::write_samples_csv(out / "source_samples.csv", z);
    io::write_samples_csv(out / "generated_samples.csv", generated);

    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index i = 0; i < hist.distances.size(); ++i)
        rows.push_back({std::to_string(i), io::format_double(hist.distances(i))});
    io::write_csv(out / "transport_distances.csv", {"index", "distance"}, rows);

    io::SvgPlot plot("oval to circle transfer");
    plot.add_scatter(z.positions, "#bbbbbb", 1.5, "source");
    plot.add_scatter(generated.positions, "#1f77b4", 1.5, "generated");
    plot.write(out / "samples.svg");
}

// ---------------------------------------------------------------- cfg-compare

void run_cfg_compare(const json& cfg, const fs::path& out) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const auto target = spec_from(cfg.at("target"), "target");
    const auto p_ref = spec_from(cfg.at("p_ref"), "p_ref");
    const auto& gm = std::get<dist::GaussianMixture>(target.kind);
    const int num_classes = static_cast<int>(gm.components.size());
    const Eigen::Index per_class = cfg.at("eval").value("samples_per_class", 600);
    const std::vector<double> w_values = cfg.at("eval").value("w_values", std::vector<double>{0.0, 1.0, 2.0});

    // Unconditional marginal: same mixture without labels.
    dist::GaussianMixture uncond_mix = gm;
    uncond_mix.labeled = false;
    const dist::DistributionSpec uncond{uncond_mix, target.stream_label + "/uncond"};

    std::vector<std::pair<std::string, double>> rows;
    for (const std::string mode : {"velocity", "distribution"}) {
        json train = cfg.at("train");
        train["velocity"]["guidance"]["mode"] = mode;
        const gen::TrainConfig tc = train_config_from(train, seed);
        const gen::TrainResult result =
            gen::train_generator(tc, gen::Samplers{p_ref, target, uncond});
        const gen::GeneratorParams& model = tc.eval_ema ? result.ema : result.params;

        for (const double w : w_values) {
            Rng eval_rng = Rng(seed).stream("eval/" + mode + "/w" + io::format_double(w));
            IntVector labels(per_class * num_classes);
            for (Eigen::Index i = 0; i < labels.size(); ++i)
                labels(i) = static_cast<int>(i / per_class);
            const ParticleBatch z = dist::sample(p_ref, labels.size(), eval_rng);
            const ParticleBatch generated =
                ParticleBatch::uniform(gen::forward(model, z.positions, labels, w), labels);

            // Per-class cluster spread (around the cluster's own center) and
            // the drift of that center away from the catalog mode.
            double spread_sq = 0.0;
            double drift = 0.0;
            for (int c = 0; c < num_classes; ++c) {
                const Matrix block = generated.positions.middleRows(per_class * c, per_class);
                const Eigen::RowVectorXd center = block.colwise().mean();
                spread_sq += (block.rowwise() - center).rowwise().squaredNorm().mean();
                drift += (center.transpose() - gm.components[static_cast<std::size_t>(c)].mean).norm();
            }
            const std::string prefix = mode + "/w=" + io::format_double(w);
            rows.emplace_back(prefix + "/mean_cluster_std", std::sqrt(spread_sq / num_classes));
            rows.emplace_back(prefix + "/mean_center_drift", drift / num_classes);
            io::write_samples_csv(out / ("samples_" + mode + "_w" + io::format_double(w) + ".csv"),
                                  generated);
        }
    }
    io::write_metrics_csv(out / "metrics.csv", rows);

    io::SvgPlot plot("guidance comparison (three-mode mixture)");
    Rng target_rng = Rng(seed).stream("eval/target");
    plot.add_scatter(dist::sample(uncond, 1500, target_rng).positions, "#bbbbbb", 1.5, "target mixture");
    plot.write(out / "samples.svg");
}

// ---------------------------------------------------------------- landscape

void run_landscape(const json& cfg, const fs::path& out) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const auto target = spec_from(cfg.at("target"), "target");
    const auto p_ref = spec_from(cfg.at("p_ref"), "p_ref");
    const int interval = cfg.value("checkpoint_interval", 200);
    const Eigen::Index eval_batch = cfg.value("eval_batch", 256);
    const std::uint64_t transverse_seed = cfg.value("transverse_seed", 7);

    const gen::TrainConfig tc = train_config_from(cfg.at("train"), seed);
    if (!std::holds_alternative<vel::SinkhornField>(tc.velocity.kind))
        throw ConfigError("landscape: train.velocity.kind must be sinkhorn");
    std::vector<gen::GeneratorParams> checkpoints;
    gen::TrainCallbacks callbacks;
    callbacks.checkpoint_interval = interval;
    callbacks.on_checkpoint = [&](int, const gen::GeneratorParams& params, const gen::GeneratorParams&) {
        checkpoints.push_back(params);
    };
    gen::train_generator(tc, gen::Samplers{p_ref, target, std::nullopt}, callbacks);
    if (checkpoints.size() < 2) throw ConfigError("landscape: need checkpoint_interval <= train.steps");

    Rng eval_rng = Rng(seed).stream("eval");
    const ParticleBatch z = dist::sample(p_ref, eval_batch, eval_rng);
    const ParticleBatch target_batch = dist::sample(target, eval_batch, eval_rng);

    metrics::LandscapeEvalSpec eval;
    eval.sinkhorn = std::get<vel::SinkhornField>(tc.velocity.kind).sinkhorn;
    eval.target = target_batch;
    eval.eval_inputs = z.positions;

    const auto& grid_cfg = cfg.at("grid");
    metrics::LandscapeGrid grid;
    const double pad = grid_cfg.value("x_pad", 2.0);
    grid.x_min = -pad;
    grid.x_max = static_cast<double>(checkpoints.size() - 1) + pad;
    grid.y_extent = grid_cfg.value("y_extent", 2.0);
    grid.nx = grid_cfg.value("nx", 64);
    grid.ny = grid_cfg.value("ny", 64);

    const metrics::LandscapeSlice slice =
        metrics::landscape_slice(checkpoints, transverse_seed, grid, eval);
    io::write_landscape_csv(out / "landscape.csv", slice);

    // Energy along the trajectory axis (y = 0) plus checkpoint energies.
    std::vector<std::pair<std::string, double>> rows;
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const Matrix gen_out = gen::forward(checkpoints[k], z.positions);
        const double energy =
            ot::sinkhorn_divergence(ParticleBatch::uniform(gen_out), target_batch, eval.sinkhorn);
        rows.emplace_back("checkpoint" + std::to_string(k) + "/energy", energy);
    }
    io::write_metrics_csv(out / "metrics.csv", rows);

    std::size_t mid_row = slice.ys.size() / 2;
    std::vector<double> axis_energy(slice.xs.size());
    for (std::size_t i = 0; i < slice.xs.size(); ++i)
        axis_energy[i] = slice.energy(static_cast<Eigen::Index>(mid_row), static_cast<Eigen::Index>(i));
    io::SvgPlot plot("Sinkhorn energy along the training trajectory");
    plot.add_line(slice.xs, axis_energy, "#1f77b4", "S_eps along trajectory");
    plot.write(out / "landscape_axis.svg");
}

// ---------------------------------------------------------------- flow-convergence

vel::ScoreFn standard_normal_score() {
    return [](const Vector& x) { return Vector(-x); };
}

flow::FlowConfig kl_flow_config(double eta, int steps, std::uint64_t seed) {
    flow::FlowConfig fc;
    fc.step_size = eta;
    fc.num_steps = steps;
    vel::KlAnalyticField field;
    field.score_p = standard_normal_score();
    field.score_q = standard_normal_score();  // replaced by the per-step refit
    field.refit_score_q = true;
    fc.velocity.kind = field;
    dist::Gaussian g;
    g.mean = Vector::Zero(1);
    g.cov = Matrix::Identity(1, 1);
    fc.target = dist::DistributionSpec{g, "kl-flow-target"};
    fc.target_batch = 1;  // analytic field never consumes targets
    fc.record_energy = false;
    fc.seed = seed;
    return fc;
}

ParticleBatch gaussian_1d_batch(double mean, Eigen::Index n, Rng& rng) {
    Matrix pos = rng.normal_matrix(n, 1);
    pos.array() += mean;
    return ParticleBatch::uniform(std::move(pos));
}

void run_flow_convergence(const json& cfg, const fs::path& out) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const auto& fj = cfg.at("flow");
    const double m0 = fj.value("m0", 4.0);
    const double horizon = positive(fj, "flow.horizon", fj.value("horizon", 1.0));
    const std::vector<double> etas = fj.value("etas", std::vector<double>{0.2, 0.1, 0.05});
    const Eigen::Index eta_n = fj.value("eta_n", 4096);
    const std::vector<int> n_values = fj.value("n_values", std::vector<int>{128, 512, 2048});
    const int ref_n = fj.value("ref_n", 8192);
    const double n_eta = fj.value("n_eta", 0.05);
    const int num_seeds = fj.value("seeds", 3);

    std::vector<std::vector<std::string>> rows;

    // Order-1 sweep: terminal particle-mean error against m0 e^{-T}.
    const double exact_mean = m0 * std::exp(-horizon);
    for (const double eta : etas) {
        const int steps = static_cast<int>(std::lround(horizon / eta));
        double err_sum = 0.0;
        for (int s = 0; s < num_seeds; ++s) {
            Rng init = Rng(seed + static_cast<std::uint64_t>(s)).stream("init/eta");
            const ParticleBatch start = gaussian_1d_batch(m0, eta_n, init);
            const flow::FlowTrajectory traj =
                flow::simulate_flow(start, kl_flow_config(eta, steps, seed + static_cast<std::uint64_t>(s)));
            err_sum += std::abs(traj.steps.back().particles.positions.col(0).mean() - exact_mean);
        }
        rows.push_back({io::format_double(eta), std::to_string(eta_n),
                        io::format_double(err_sum / num_seeds)});
    }

    // N-consistency sweep: terminal W2 against a large-N reference cloud.
    const int ref_steps = static_cast<int>(std::lround(horizon / n_eta));
    for (const int n : n_values) {
        double w2_sum = 0.0;
        for (int s = 0; s < num_seeds; ++s) {
            const std::uint64_t trial_seed = seed + 1000 + static_cast<std::uint64_t>(s);
            Rng ref_init = Rng(trial_seed).stream("init/ref");
            const flow::FlowTrajectory ref_traj = flow::simulate_flow(
                gaussian_1d_batch(m0, ref_n, ref_init), kl_flow_config(n_eta, ref_steps, trial_seed));
            Rng init = Rng(trial_seed).stream("init/n" + std::to_string(n));
            const flow::FlowTrajectory traj = flow::simulate_flow(
                gaussian_1d_batch(m0, n, init), kl_flow_config(n_eta, ref_steps, trial_seed + 1));
            w2_sum += metrics::exact_w2_1d(traj.steps.back().particles, ref_traj.steps.back().particles);
        }
        rows.push_back(
            {io::format_double(n_eta), std::to_string(n), io::format_double(w2_sum / num_seeds)});
    }

    io::write_csv(out / "flow_convergence.csv", {"eta", "N", "terminal_w2"}, rows);

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < etas.size(); ++i) {
        xs.push_back(etas[i]);
        ys.push_back(std::stod(rows[i][2]));
    }
    io::SvgPlot plot("terminal mean error vs step size");
    plot.add_line(xs, ys, "#1f77b4", "terminal mean error");
    plot.write(out / "eta_order.svg");
}

// ---------------------------------------------------------------- ablation-velocity

void run_ablation_velocity(const json& cfg, const fs::path& out) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const auto target = spec_from(cfg.at("target"), "target");
    const auto& fj = cfg.at("flow");
    const Eigen::Index n = fj.value("n", 256);
    const int steps = fj.value("steps", 60);
    const double eta = positive(fj, "flow.step_size", fj.value("step_size", 0.5));
    const double epsilon = fj.value("epsilon", 0.05);
    const int iterations = fj.value("iterations", 10);

    struct Variant {
        const char* name;
        ot::CostKind cost;
        vel::SelfEstimator self;
    };
    const std::vector<Variant> variants = {
        {"cost=euclidean,self=two_batch", ot::CostKind::Euclidean, vel::SelfEstimator::TwoBatch},
        {"cost=half_squared,self=two_batch", ot::CostKind::HalfSquaredEuclidean,
         vel::SelfEstimator::TwoBatch},
        {"cost=half_squared,self=one_batch", ot::CostKind::HalfSquaredEuclidean,
         vel::SelfEstimator::OneBatch},
        {"cost=half_squared,self=one_batch_masked", ot::CostKind::HalfSquaredEuclidean,
         vel::SelfEstimator::OneBatchMasked}};

    std::vector<std::pair<std::string, double>> rows;
    bool first = true;
    for (const auto& variant : variants) {
        flow::FlowConfig fc;
        fc.step_size = eta;
        fc.num_steps = steps;
        vel::SinkhornField field;
        field.sinkhorn.epsilon = epsilon;
        field.sinkhorn.iterations = iterations;
        field.sinkhorn.cost_kind = variant.cost;
        field.sinkhorn.log_domain = true;
        field.self_estimator = variant.self;
        fc.velocity.kind = field;
        fc.target = target;
        fc.seed = seed;

        Rng init = Rng(seed).stream("init");
        const ParticleBatch start =
            ParticleBatch::uniform(init.normal_matrix(n, dist::dimension(target)));
        const flow::FlowTrajectory traj = flow::simulate_flow(start, fc);
        const ParticleBatch& terminal = traj.steps.back().particles;

        Rng eval_rng = Rng(seed).stream("eval");
        const ParticleBatch fresh_target = dist::sample(target, n, eval_rng);
        const double w2 = metrics::exact_w2(terminal, fresh_target);
        const Matrix centered = terminal.positions.rowwise() - terminal.positions.colwise().mean();
        const double trace =
            (centered.transpose() * centered / static_cast<double>(terminal.size())).trace();

        rows.emplace_back(std::string("w2/") + variant.name, w2);
        rows.emplace_back(std::string("trace/") + variant.name, trace);
        rows.emplace_back(std::string("terminal_energy/") + variant.name, traj.steps.back().energy);
        if (first) {
            io::write_trajectory_csv(out / "trajectory.csv", traj);
            first = false;
        }
    }
    io::write_metrics_csv(out / "metrics.csv", rows);
}

}  // namespace

std::vector<std::string> experiment_names() {
    return {"gaussian-tails", "mode-coverage",    "domain-transfer", "cfg-compare",
            "landscape",      "flow-convergence", "ablation-velocity"};
}

json default_config(const std::string& experiment) {
    json cfg;
    cfg["experiment"] = experiment;
    cfg["seed"] = 1;

    if (experiment == "gaussian-tails") {
        cfg["train"] = default_train_block(2000);
        cfg["p_ref"] = json{{"kind", "standard_normal"}, {"dim", 2}};
        cfg["target"] = json{{"kind", "gaussian"},
                             {"mean", {0.0, 0.0}},
                             {"cov", {{"rows", 2}, {"cols", 2}, {"data", {1.0, 0.0, 0.0, 4.0}}}},
                             {"stream_label", "gaussian-tails-target"}};
        cfg["eval_samples"] = 8192;
    } else if (experiment == "mode-coverage") {
        cfg["train"] = default_train_block(5000);
        cfg["p_ref"] = json{{"kind", "standard_normal"}, {"dim", 2}};
        cfg["target"] = "imbalanced-6+2";
        cfg["eval_samples"] = 10000;
        cfg["coverage"] = json{{"radius_sigmas", 3.0},
                               {"min_fraction", 0.01},
                               {"minority_components", {6, 7}}};
    } else if (experiment == "domain-transfer") {
        json train = default_train_block(2000);
        train["residual"] = true;
        train["zero_init_last"] = true;
        cfg["train"] = train;
        cfg["source"] = "oval-source";
        cfg["target"] = "circle-target";
        cfg["eval_samples"] = 2048;
        cfg["radius_band_lo"] = 1.8;
        cfg["radius_band_hi"] = 2.2;
    } else if (experiment == "cfg-compare") {
        json train = default_train_block(2000);
        train["conditional"] = true;
        train["sample_guidance_scale"] = true;
        train["velocity"] = sinkhorn_velocity_json(0.05, 10, true, "two_batch", "velocity", 0.0);
        cfg["train"] = train;
        cfg["p_ref"] = json{{"kind", "standard_normal"}, {"dim", 2}};
        cfg["target"] = "three-mode-conditional";
        cfg["eval"] = json{{"samples_per_class", 600}, {"w_values", {0.0, 1.0, 2.0}}};
    } else if (experiment == "landscape") {
        cfg["train"] = default_train_block(4000);
        cfg["p_ref"] = json{{"kind", "standard_normal"}, {"dim", 2}};
        cfg["target"] = "eight-gaussians-ring";
        cfg["checkpoint_interval"] = 200;
        cfg["eval_batch"] = 256;
        cfg["transverse_seed"] = 7;
        cfg["grid"] = json{{"x_pad", 2.0}, {"y_extent", 2.0}, {"nx", 64}, {"ny", 64}};
    } else if (experiment == "flow-convergence") {
        cfg["flow"] = json{{"m0", 4.0},
                           {"horizon", 1.0},
                           {"etas", {0.2, 0.1, 0.05}},
                           {"eta_n", 4096},
                           {"n_values", {128, 512, 2048}},
                           {"ref_n", 8192},
                           {"n_eta", 0.05},
                           {"seeds", 3}};
    } else if (experiment == "ablation-velocity") {
        cfg["flow"] = json{{"n", 256}, {"steps", 60}, {"step_size", 0.5}, {"epsilon", 0.05},
                           {"iterations", 10}};
        cfg["target"] = json{{"kind", "gaussian"},
                             {"mean", {2.0, 0.0}},
                             {"cov", {{"rows", 2}, {"cols", 2}, {"data", {1.0, 0.0, 0.0, 4.0}}}},
                             {"stream_label", "ablation-target"}};
    } else {
        throw ConfigError("unknown experiment '" + experiment + "'");
    }
    return cfg;
}

json resolve_config(const std::string& name_or_path, std::optional<std::uint64_t> seed_override) {
    json user;
    std::string experiment;
    const auto names = experiment_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
        experiment = name_or_path;
        user = json::object();
    } else {
        std::ifstream in(name_or_path);
        if (!in) throw ConfigError("config not found: '" + name_or_path + "'");
        try {
            in >> user;
        } catch (const json::exception& e) {
            throw ConfigError("config parse error in " + name_or_path + ": " + e.what());
        }
        if (!user.contains("experiment")) throw ConfigError("config: missing field 'experiment'");
        experiment = user.at("experiment").get<std::string>();
    }

    json cfg = merge(default_config(experiment), user);
    if (seed_override) cfg["seed"] = *seed_override;
    if (const char* env = std::getenv("WGF_LAB_SEED")) cfg["seed"] = std::strtoull(env, nullptr, 10);
    return cfg;
}

void run_experiment(const json& config, const fs::path& out_dir) {
    const std::string experiment = config.at("experiment").get<std::string>();
    echo_config(config, out_dir);

    if (experiment == "gaussian-tails")
        run_gaussian_tails(config, out_dir);
    else if (experiment == "mode-coverage")
        run_mode_coverage(config, out_dir);
    else if (experiment == "domain-transfer")
        run_domain_transfer(config, out_dir);
    else if (experiment == "cfg-compare")
        run_cfg_compare(config, out_dir);
    else if (experiment == "landscape")
        run_landscape(config, out_dir);
    else if (experiment == "flow-convergence")
        run_flow_convergence(config, out_dir);
    else if (experiment == "ablation-velocity")
        run_ablation_velocity(config, out_dir);
    else
        throw ConfigError("unknown experiment '" + experiment + "'");
}

}  // namespace wgf::experiments
