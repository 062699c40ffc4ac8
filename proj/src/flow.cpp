#include "wgf/flow.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "wgf/metrics.hpp"
#include "wgf/ot.hpp"

namespace wgf::flow {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Bootstrap resample (with replacement): an i.i.d. draw from the empirical
// measure of the cloud, standing in for an independent second batch when the
// flow has no generator to resample from.
ParticleBatch bootstrap_self_batch(const ParticleBatch& cloud, Rng& rng) {
    const Eigen::Index n = cloud.size();
    Matrix pos(n, cloud.dim());
    for (Eigen::Index i = 0; i < n; ++i)
        pos.row(i) = cloud.positions.row(static_cast<Eigen::Index>(rng.uniform_int(n)));
    return ParticleBatch::uniform(std::move(pos));
}

// Gaussian moment fit of the cloud; covariance floored for stability.
dist::DistributionSpec fitted_gaussian(const ParticleBatch& cloud) {
    const Eigen::Index n = cloud.size(), d = cloud.dim();
    dist::Gaussian g;
    g.mean = cloud.positions.colwise().mean().transpose();
    Matrix centered = cloud.positions.rowwise() - g.mean.transpose();
    g.cov = centered.transpose() * centered / static_cast<double>(n);
    g.cov += 1e-9 * Matrix::Identity(d, d);
    return dist::DistributionSpec{g, "fit"};
}

bool velocity_needs_self_batch(const vel::VelocityFieldSpec& spec) {
    if (std::holds_alternative<vel::SinkhornField>(spec.kind))
        return std::get<vel::SinkhornField>(spec.kind).self_estimator == vel::SelfEstimator::TwoBatch;
    if (std::holds_alternative<vel::KlAnalyticField>(spec.kind)) return false;
    return true;
}

double record_energy_value(const vel::VelocityFieldSpec& spec, const ParticleBatch& current,
                           const ParticleBatch& target) {
    if (std::holds_alternative<vel::SinkhornField>(spec.kind))
        return ot::sinkhorn_divergence(current, target, std::get<vel::SinkhornField>(spec.kind).sinkhorn);
    if (std::holds_alternative<vel::MmdField>(spec.kind))
        return 0.5 * metrics::mmd_squared(current, target, std::get<vel::MmdField>(spec.kind).bandwidth);
    return kNaN;  // KL energies are not traced (KDE estimates are biased)
}

}  // namespace

void FlowConfig::validate() const {
    if (!(step_size > 0.0)) throw ContractViolation("FlowConfig: step_size must be positive");
    if (num_steps < 1) throw ContractViolation("FlowConfig: num_steps must be >= 1");
    if (target_batch < 0) throw ContractViolation("FlowConfig: target_batch must be >= 0");
    if (uncond_batch < 1) throw ContractViolation("FlowConfig: uncond_batch must be >= 1");
    velocity.validate();
    target.validate();
    if (velocity.has_guidance() && velocity.guidance_scale() > 0.0) {
        const bool analytic = std::holds_alternative<vel::KlAnalyticField>(velocity.kind);
        if (!analytic && !target_uncond)
            throw ContractViolation("FlowConfig: guidance needs target_uncond");
    }
}

ParticleBatch euler_step(const ParticleBatch& particles, const vel::VelocityBatch& velocity, double eta,
                         long step_index) {
    if (velocity.vectors.rows() != particles.size() || velocity.vectors.cols() != particles.dim())
        throw ContractViolation("euler_step: velocity shape does not match particles");
    if (eta < 0.0) throw ContractViolation("euler_step: eta must be >= 0");

    Matrix moved = particles.positions + eta * velocity.vectors;
    if (!moved.allFinite())
        throw DivergenceError("euler_step: non-finite position at step " + std::to_string(step_index),
                              step_index);
    return ParticleBatch(std::move(moved), particles.weights, particles.labels);
}

ParticleBatch interpolate(const FlowTrajectory& trajectory, double t) {
    if (trajectory.steps.empty()) throw ContractViolation("interpolate: empty trajectory");
    const double t_end = trajectory.final_time();
    if (t < 0.0 || t > t_end)
        throw InputError("interpolate: t out of range [0, " + std::to_string(t_end) + "]");
    if (t == t_end) return trajectory.steps.back().particles;

    // Largest k with t_k <= t; the stored times are authoritative.
    std::size_t k = 0;
    while (k + 1 < trajectory.steps.size() && trajectory.steps[k + 1].time <= t) ++k;
    const FlowStep& step = trajectory.steps[k];
    const double dt = t - step.time;
    Matrix pos = step.particles.positions + dt * step.velocity.vectors;
    return ParticleBatch(std::move(pos), step.particles.weights, step.particles.labels);
}

FlowTrajectory simulate_flow(const ParticleBatch& init, const FlowConfig& config) {
    config.validate();
    init.validate();

    const Eigen::Index n = init.size();
    const Eigen::Index m = config.target_batch > 0 ? config.target_batch : n;
    const Rng root(config.seed);
    Rng target_stream = root.stream("flow/target");
    Rng uncond_stream = root.stream("flow/uncond");
    Rng self_stream = root.stream("flow/self");

    const bool needs_self = velocity_needs_self_batch(config.velocity);
    const bool guided = config.velocity.has_guidance() && config.velocity.guidance_scale() > 0.0;
    const bool analytic = std::holds_alternative<vel::KlAnalyticField>(config.velocity.kind);

    FlowTrajectory traj;
    traj.step_size = config.step_size;
    traj.config = config;
    traj.steps.reserve(static_cast<std::size_t>(config.num_steps) + 1);

    ParticleBatch current = init;
    ParticleBatch target_batch = dist::sample(config.target, m, target_stream);

    for (int k = 0; k <= config.num_steps; ++k) {
        const bool terminal = k == config.num_steps;
        if (k > 0 && config.resample_target_each_step)
            target_batch = dist::sample(config.target, m, target_stream);

        std::optional<ParticleBatch> uncond;
        if (guided && !analytic && !terminal)
            uncond = dist::sample(*config.target_uncond, config.uncond_batch, uncond_stream);

        std::optional<ParticleBatch> self_batch;
        if (needs_self && !terminal) self_batch = bootstrap_self_batch(current, self_stream);

        vel::VelocityBatch v{Matrix::Zero(n, current.dim())};
        if (!terminal) {
            vel::VelocityFieldSpec spec = config.velocity;
            if (analytic) {
                auto field = std::get<vel::KlAnalyticField>(spec.kind);
                if (field.refit_score_q) {
                    // The repulsive score tracks the evolving cloud. Under
                    // distribution guidance it is the score of the mixture
                    // (q + w p_uncond)/(1 + w).
                    dist::DistributionSpec fit = fitted_gaussian(current);
                    if (std::holds_alternative<vel::DistributionGuidance>(spec.guidance) &&
                        spec.guidance_scale() > 0.0) {
                        if (!config.target_uncond || !std::holds_alternative<dist::Gaussian>(
                                                         config.target_uncond->kind))
                            throw ContractViolation(
                                "simulate_flow: analytic distribution guidance needs a Gaussian "
                                "target_uncond");
                        const double w = spec.guidance_scale();
                        dist::GaussianMixture mix;
                        mix.weights = {1.0 / (w + 1.0), w / (w + 1.0)};
                        mix.components = {std::get<dist::Gaussian>(fit.kind),
                                          std::get<dist::Gaussian>(config.target_uncond->kind)};
                        fit = dist::DistributionSpec{mix, "fit+uncond"};
                        field.score_q = [fit](const Vector& x) { return dist::score(fit, x); };
                        spec.guidance = vel::GuidanceNone{};  // folded into the score
                    } else {
                        field.score_q = [fit](const Vector& x) { return dist::score(fit, x); };
                    }
                    spec.kind = field;
                }
            }
            vel::VelocityContext ctx;
            if (self_batch) ctx.self_batch = &*self_batch;
            if (uncond) ctx.target_uncond = &*uncond;
            try {
                v = vel::evaluate(spec, current, target_batch, ctx);
            } catch (const DegenerateKernelError& e) {
                throw DivergenceError(std::string(e.what()) + " at flow step " + std::to_string(k), k);
            }
        }

        FlowStep step;
        step.time = static_cast<double>(k) * config.step_size;
        step.particles = current;
        step.velocity = v;
        step.energy = config.record_energy ? record_energy_value(config.velocity, current, target_batch)
                                           : kNaN;
        step.support_radius = current.support_radius();
        step.target_radius = target_batch.support_radius();
        traj.steps.push_back(std::move(step));

        if (!terminal) current = euler_step(current, v, config.step_size, k);
    }
    return traj;
}

SupportBoundReport check_support_bound(const FlowTrajectory& trajectory, double r0, double r) {
    if (trajectory.steps.empty()) throw ContractViolation("check_support_bound: empty trajectory");
    if (r0 < trajectory.steps.front().support_radius - 1e-12)
        throw ContractViolation("check_support_bound: R0 below the initial support radius");

    const double eta = trajectory.step_size;
    SupportBoundReport report;
    double growth = 1.0;  // (1+eta)^k
    for (std::size_t k = 0; k < trajectory.steps.size(); ++k) {
        const double bound = growth * r0 + (growth - 1.0) * r;
        const double observed = trajectory.steps[k].support_radius;
        report.bounds.push_back(bound);
        report.observed.push_back(observed);
        report.margins.push_back(bound - observed);
        if (observed > bound + 1e-9) ++report.violations;
        growth *= 1.0 + eta;
    }
    return report;
}

double max_target_radius(const FlowTrajectory& trajectory) {
    double r = 0.0;
    for (const auto& s : trajectory.steps) r = std::max(r, s.target_radius);
    return r;
}

}  // namespace wgf::flow
