#pragma once

#include <functional>
#include <variant>

#include "wgf/ot.hpp"
#include "wgf/types.hpp"

namespace wgf::vel {

enum class SelfEstimator { TwoBatch, OneBatch, OneBatchMasked };

using ScoreFn = std::function<Vector(const Vector&)>;

struct SinkhornField {
    ot::SinkhornSpec sinkhorn;
    SelfEstimator self_estimator = SelfEstimator::TwoBatch;
};

struct MmdField {
    double bandwidth = 1.0;
};

struct KlKdeField {
    double bandwidth = 1.0;
};

/// Analytic-score KL field. score_q is a fixed handle; flows that track an
/// evolving q_t refit it each step when refit_score_q is set (Gaussian moment
/// fit of the current cloud). score_p_uncond backs velocity guidance.
struct KlAnalyticField {
    ScoreFn score_p;
    ScoreFn score_q;
    ScoreFn score_p_uncond;
    bool refit_score_q = false;
};

struct GuidanceNone {};
struct DistributionGuidance {
    double w = 0.0;
};
struct VelocityGuidance {
    double w = 0.0;
};
using GuidanceMode = std::variant<GuidanceNone, DistributionGuidance, VelocityGuidance>;

struct VelocityFieldSpec {
    std::variant<SinkhornField, MmdField, KlKdeField, KlAnalyticField> kind;
    GuidanceMode guidance = GuidanceNone{};

    void validate() const;
    double guidance_scale() const;
    bool has_guidance() const;
};

/// Per-particle displacement rates, aligned index-for-index with the source batch.
struct VelocityBatch {
    Matrix vectors;  // N x d
};

/// V(x_i) = T_{q,p}(x_i) - T_{q,q'}(x_i), both maps via Sinkhorn barycentric
/// projection. q_second must be drawn independently of q by the caller.
VelocityBatch sinkhorn_velocity(const ParticleBatch& q, const ParticleBatch& q_second,
                                const ParticleBatch& p, const ot::SinkhornSpec& spec);

/// Self term estimated from q itself; masked mode excludes the diagonal
/// (K_ii = 0), failing for N = 1 where no feasible match remains.
VelocityBatch sinkhorn_velocity_one_batch(const ParticleBatch& q, const ParticleBatch& p,
                                          const ot::SinkhornSpec& spec, bool masked);

/// Gaussian-kernel MMD flow estimator:
/// V(x_i) = sum_j b_j (y_j-x_i)/sigma^2 k(x_i,y_j) - sum_l a'_l (x'_l-x_i)/sigma^2 k(x_i,x'_l).
VelocityBatch mmd_velocity(const ParticleBatch& q, const ParticleBatch& q_second,
                           const ParticleBatch& p, double sigma);

/// KDE-score KL estimator: difference of kernel-weighted local means scaled
/// by 1/sigma^2.
VelocityBatch kl_kde_velocity(const ParticleBatch& q, const ParticleBatch& q_second,
                              const ParticleBatch& p, double sigma);

VelocityBatch kl_analytic_velocity(const ParticleBatch& q, const ScoreFn& score_p,
                                   const ScoreFn& score_q);

/// Repulsive batch for distribution guidance: q_cond with mass 1/(w+1)
/// concatenated with p_uncond carrying mass w/(w+1). w = 0 returns q_cond
/// unchanged.
ParticleBatch apply_distribution_guidance(const ParticleBatch& q_cond, const ParticleBatch& p_uncond,
                                          double w);

/// Velocity-level guidance:
/// V = (T_{q,p_c} - T_{q,q'}) + w (T_{q,p_c} - T_{q,p_uncond}).
/// w = 0 short-circuits to sinkhorn_velocity so the outputs agree bit-for-bit.
VelocityBatch velocity_guidance(const ParticleBatch& q, const ParticleBatch& q_second,
                                const ParticleBatch& p_cond, const ParticleBatch& p_uncond,
                                const ot::SinkhornSpec& spec, double w);

/// Optional companions for the dispatcher. self_batch feeds two-batch self
/// estimators (MMD/KDE always use it when present, else fall back to q);
/// target_uncond is required whenever guidance is active.
struct VelocityContext {
    const ParticleBatch* self_batch = nullptr;
    const ParticleBatch* target_uncond = nullptr;
};

/// Evaluates any VelocityFieldSpec, composing the guidance mode with the
/// chosen energy kind.
VelocityBatch evaluate(const VelocityFieldSpec& spec, const ParticleBatch& q, const ParticleBatch& p,
                       const VelocityContext& ctx = {});

}  // namespace wgf::vel
