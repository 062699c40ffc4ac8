#pragma once

#include <optional>
#include <vector>

#include "wgf/distributions.hpp"
#include "wgf/rng.hpp"
#include "wgf/types.hpp"
#include "wgf/velocity.hpp"

namespace wgf::flow {

/// Explicit-Euler particle flow configuration. Per step the draw order is
/// fixed: target batch (when resampling), unconditional batch (when guidance
/// is active), then the bootstrap self batch for two-batch estimators — so a
/// seed pins the whole trajectory.
struct FlowConfig {
    double step_size = 0.1;  // eta
    int num_steps = 1;       // K
    vel::VelocityFieldSpec velocity;
    dist::DistributionSpec target;
    int target_batch = 0;  // M; 0 means match N
    bool resample_target_each_step = true;
    std::optional<dist::DistributionSpec> target_uncond;
    int uncond_batch = 16;
    std::uint64_t seed = 0;
    bool record_energy = true;

    void validate() const;
};

struct FlowStep {
    double time = 0.0;
    ParticleBatch particles;
    vel::VelocityBatch velocity;   // zero rows at the terminal snapshot
    double energy = 0.0;           // NaN when the energy kind records none
    double support_radius = 0.0;
    double target_radius = 0.0;    // radius of the target batch used this step
};

struct FlowTrajectory {
    std::vector<FlowStep> steps;  // K+1 snapshots, times k*eta
    double step_size = 0.0;
    FlowConfig config;            // provenance snapshot

    int num_steps() const { return static_cast<int>(steps.size()) - 1; }
    double final_time() const { return steps.empty() ? 0.0 : steps.back().time; }
};

/// positions + eta * vectors; weights and labels pass through unchanged.
ParticleBatch euler_step(const ParticleBatch& particles, const vel::VelocityBatch& velocity, double eta,
                         long step_index = 0);

/// Piecewise-linear interpolation: for t in [t_k, t_{k+1}) returns
/// x^(k) + (t - t_k) V(x^(k)); t = K eta returns the final batch.
ParticleBatch interpolate(const FlowTrajectory& trajectory, double t);

FlowTrajectory simulate_flow(const ParticleBatch& init, const FlowConfig& config);

struct SupportBoundReport {
    std::vector<double> bounds;    // (1+eta)^k R0 + ((1+eta)^k - 1) R
    std::vector<double> observed;
    std::vector<double> margins;   // bound - observed
    int violations = 0;
};

/// Discrete support-propagation bound rho_k <= (1+eta)^k R0 + ((1+eta)^k - 1) R.
/// Violations are reported, not thrown.
SupportBoundReport check_support_bound(const FlowTrajectory& trajectory, double r0, double r);

/// Largest target-batch radius drawn anywhere in the trajectory; the natural
/// R for check_support_bound under target resampling.
double max_target_radius(const FlowTrajectory& trajectory);

}  // namespace wgf::flow
