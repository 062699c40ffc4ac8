#include "wgf/velocity.hpp"

#include <cmath>
#include <string>

namespace wgf::vel {

namespace {

void check_dims(const ParticleBatch& a, const ParticleBatch& b, const char* what) {
    if (a.dim() != b.dim()) throw ContractViolation(std::string(what) + ": batch dimensions disagree");
}

Matrix barycentric_map(const ParticleBatch& q, const ParticleBatch& target, const ot::SinkhornSpec& spec,
                       bool mask_diagonal = false) {
    const ot::CostMatrix cost = ot::build_cost_matrix(q, target, spec.cost_kind);
    const ot::Coupling coupling = ot::sinkhorn_scaling(cost, q.weights, target.weights, spec, mask_diagonal);
    return ot::barycentric_projection(coupling, target.positions, q.weights);
}

// Gaussian kernel matrix exp(-|x_i - y_j|^2 / (2 sigma^2)).
Matrix gaussian_kernel(const Matrix& x, const Matrix& y, double sigma) {
    Matrix k(x.rows(), y.rows());
    const double inv = -0.5 / (sigma * sigma);
    for (Eigen::Index j = 0; j < y.rows(); ++j)
        k.col(j) = ((x.rowwise() - y.row(j)).rowwise().squaredNorm() * inv).array().exp();
    return k;
}

// Attraction side of the MMD field: sum_j w_j (y_j - x_i)/sigma^2 k(x_i,y_j).
Matrix mmd_attraction(const ParticleBatch& q, const ParticleBatch& other, double sigma) {
    const Matrix k = gaussian_kernel(q.positions, other.positions, sigma);
    const Matrix kw = k.array().rowwise() * other.weights.transpose().array();
    const Vector mass = kw.rowwise().sum();
    const Matrix anchored = (q.positions.array().colwise() * mass.array()).matrix();
    return (kw * other.positions - anchored) / (sigma * sigma);
}

// Kernel-weighted local mean of `other` evaluated at each q particle.
Matrix kde_local_mean(const ParticleBatch& q, const ParticleBatch& other, double sigma,
                      const char* side) {
    const Matrix k = gaussian_kernel(q.positions, other.positions, sigma);
    const Matrix kw = k.array().rowwise() * other.weights.transpose().array();
    const Vector mass = kw.rowwise().sum();
    for (Eigen::Index i = 0; i < mass.size(); ++i)
        if (!(mass(i) > 0.0))
            throw DegenerateKdeError(std::string("kl_kde_velocity: all ") + side +
                                         " kernel weights underflow at particle " + std::to_string(i),
                                     i);
    Matrix mean = kw * other.positions;
    mean.array().colwise() /= mass.array();
    return mean;
}

VelocityBatch sinkhorn_base(const SinkhornField& field, const ParticleBatch& q, const ParticleBatch& p,
                            const VelocityContext& ctx) {
    switch (field.self_estimator) {
        case SelfEstimator::TwoBatch: {
            if (ctx.self_batch == nullptr)
                throw ContractViolation("evaluate: two-batch Sinkhorn velocity needs a self batch");
            return sinkhorn_velocity(q, *ctx.self_batch, p, field.sinkhorn);
        }
        case SelfEstimator::OneBatch:
            return sinkhorn_velocity_one_batch(q, p, field.sinkhorn, false);
        case SelfEstimator::OneBatchMasked:
            return sinkhorn_velocity_one_batch(q, p, field.sinkhorn, true);
    }
    throw ContractViolation("evaluate: unknown self estimator");
}

const ParticleBatch& self_or_q(const ParticleBatch& q, const VelocityContext& ctx) {
    return ctx.self_batch != nullptr ? *ctx.self_batch : q;
}

}  // namespace

void VelocityFieldSpec::validate() const {
    if (std::holds_alternative<SinkhornField>(kind)) {
        std::get<SinkhornField>(kind).sinkhorn.validate();
    } else if (std::holds_alternative<MmdField>(kind)) {
        if (!(std::get<MmdField>(kind).bandwidth > 0.0))
            throw ContractViolation("VelocityFieldSpec: MMD bandwidth must be positive");
    } else if (std::holds_alternative<KlKdeField>(kind)) {
        if (!(std::get<KlKdeField>(kind).bandwidth > 0.0))
            throw ContractViolation("VelocityFieldSpec: KDE bandwidth must be positive");
    }
    if (guidance_scale() < 0.0) throw ContractViolation("VelocityFieldSpec: guidance w must be >= 0");
}

double VelocityFieldSpec::guidance_scale() const {
    if (std::holds_alternative<DistributionGuidance>(guidance))
        return std::get<DistributionGuidance>(guidance).w;
    if (std::holds_alternative<VelocityGuidance>(guidance))
        return std::get<VelocityGuidance>(guidance).w;
    return 0.0;
}

bool VelocityFieldSpec::has_guidance() const {
    return !std::holds_alternative<GuidanceNone>(guidance);
}

VelocityBatch sinkhorn_velocity(const ParticleBatch& q, const ParticleBatch& q_second,
                                const ParticleBatch& p, const ot::SinkhornSpec& spec) {
    check_dims(q, p, "sinkhorn_velocity");
    check_dims(q, q_second, "sinkhorn_velocity");
    const Matrix cross = barycentric_map(q, p, spec);
    const Matrix self = barycentric_map(q, q_second, spec);
    return VelocityBatch{cross - self};
}

VelocityBatch sinkhorn_velocity_one_batch(const ParticleBatch& q, const ParticleBatch& p,
                                          const ot::SinkhornSpec& spec, bool masked) {
    check_dims(q, p, "sinkhorn_velocity_one_batch");
    const Matrix cross = barycentric_map(q, p, spec);
    const Matrix self = barycentric_map(q, q, spec, masked);
    return VelocityBatch{cross - self};
}

VelocityBatch mmd_velocity(const ParticleBatch& q, const ParticleBatch& q_second,
                           const ParticleBatch& p, double sigma) {
    check_dims(q, p, "mmd_velocity");
    check_dims(q, q_second, "mmd_velocity");
    if (!(sigma > 0.0)) throw ContractViolation("mmd_velocity: sigma must be positive");
    return VelocityBatch{mmd_attraction(q, p, sigma) - mmd_attraction(q, q_second, sigma)};
}

VelocityBatch kl_kde_velocity(const ParticleBatch& q, const ParticleBatch& q_second,
                              const ParticleBatch& p, double sigma) {
    check_dims(q, p, "kl_kde_velocity");
    check_dims(q, q_second, "kl_kde_velocity");
    if (!(sigma > 0.0)) throw ContractViolation("kl_kde_velocity: sigma must be positive");
    const Matrix target_mean = kde_local_mean(q, p, sigma, "target");
    const Matrix self_mean = kde_local_mean(q, q_second, sigma, "self");
    return VelocityBatch{(target_mean - self_mean) / (sigma * sigma)};
}

VelocityBatch kl_analytic_velocity(const ParticleBatch& q, const ScoreFn& score_p,
                                   const ScoreFn& score_q) {
    if (!score_p || !score_q)
        throw ContractViolation("kl_analytic_velocity: score handles must be set");
    Matrix v(q.size(), q.dim());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const Vector x = q.positions.row(i).transpose();
        const Vector s = score_p(x) - score_q(x);
        if (!s.allFinite())
            throw InputError("kl_analytic_velocity: non-finite score at particle " + std::to_string(i));
        v.row(i) = s.transpose();
    }
    return VelocityBatch{v};
}

ParticleBatch apply_distribution_guidance(const ParticleBatch& q_cond, const ParticleBatch& p_uncond,
                                          double w) {
    check_dims(q_cond, p_uncond, "apply_distribution_guidance");
    if (w < 0.0) throw ContractViolation("apply_distribution_guidance: w must be >= 0");
    if (w == 0.0) return q_cond;

    const Eigen::Index n = q_cond.size(), m = p_uncond.size();
    Matrix pos(n + m, q_cond.dim());
    pos.topRows(n) = q_cond.positions;
    pos.bottomRows(m) = p_uncond.positions;
    Vector weights(n + m);
    weights.head(n) = q_cond.weights / (w + 1.0);
    weights.tail(m) = p_uncond.weights * (w / (w + 1.0));
    weights /= weights.sum();  // renormalize away round-off
    return ParticleBatch(std::move(pos), std::move(weights));
}

VelocityBatch velocity_guidance(const ParticleBatch& q, const ParticleBatch& q_second,
                                const ParticleBatch& p_cond, const ParticleBatch& p_uncond,
                                const ot::SinkhornSpec& spec, double w) {
    if (w < 0.0) throw ContractViolation("velocity_guidance: w must be >= 0");
    if (w == 0.0) return sinkhorn_velocity(q, q_second, p_cond, spec);
    check_dims(q, p_uncond, "velocity_guidance");
    const Matrix cross_cond = barycentric_map(q, p_cond, spec);
    const Matrix self = barycentric_map(q, q_second, spec);
    const Matrix cross_uncond = barycentric_map(q, p_uncond, spec);
    return VelocityBatch{(cross_cond - self) + w * (cross_cond - cross_uncond)};
}

VelocityBatch evaluate(const VelocityFieldSpec& spec, const ParticleBatch& q, const ParticleBatch& p,
                       const VelocityContext& ctx) {
    spec.validate();
    const bool guided = spec.has_guidance();
    if (guided && ctx.target_uncond == nullptr && spec.guidance_scale() != 0.0 &&
        !std::holds_alternative<KlAnalyticField>(spec.kind))
        throw ContractViolation("evaluate: guidance requires an unconditional target batch");

    if (std::holds_alternative<SinkhornField>(spec.kind)) {
        const auto& field = std::get<SinkhornField>(spec.kind);
        if (!guided || spec.guidance_scale() == 0.0) {
            // w = 0 degenerates to the unguided field bit-for-bit.
            return sinkhorn_base(field, q, p, ctx);
        }
        const double w = spec.guidance_scale();
        if (std::holds_alternative<DistributionGuidance>(spec.guidance)) {
            const ParticleBatch guided_self =
                apply_distribution_guidance(self_or_q(q, ctx), *ctx.target_uncond, w);
            const Matrix cross = barycentric_map(q, p, field.sinkhorn);
            const bool mask = field.self_estimator == SelfEstimator::OneBatchMasked;
            const Matrix self = barycentric_map(q, guided_self, field.sinkhorn, mask);
            return VelocityBatch{cross - self};
        }
        // Velocity guidance; the base self term follows the configured estimator.
        const ParticleBatch& self_batch = self_or_q(q, ctx);
        if (field.self_estimator == SelfEstimator::TwoBatch && ctx.self_batch == nullptr)
            throw ContractViolation("evaluate: two-batch Sinkhorn velocity needs a self batch");
        const Matrix cross_cond = barycentric_map(q, p, field.sinkhorn);
        const Matrix self = barycentric_map(q, self_batch, field.sinkhorn,
                                            field.self_estimator == SelfEstimator::OneBatchMasked);
        const Matrix cross_uncond = barycentric_map(q, *ctx.target_uncond, field.sinkhorn);
        return VelocityBatch{(cross_cond - self) + w * (cross_cond - cross_uncond)};
    }

    if (std::holds_alternative<MmdField>(spec.kind)) {
        const double sigma = std::get<MmdField>(spec.kind).bandwidth;
        const ParticleBatch& self_batch = self_or_q(q, ctx);
        if (guided && std::holds_alternative<DistributionGuidance>(spec.guidance) &&
            spec.guidance_scale() > 0.0) {
            const ParticleBatch guided_self =
                apply_distribution_guidance(self_batch, *ctx.target_uncond, spec.guidance_scale());
            return mmd_velocity(q, guided_self, p, sigma);
        }
        VelocityBatch v = mmd_velocity(q, self_batch, p, sigma);
        if (guided && std::holds_alternative<VelocityGuidance>(spec.guidance) &&
            spec.guidance_scale() > 0.0) {
            const double w = spec.guidance_scale();
            v.vectors += w * (mmd_attraction(q, p, sigma) - mmd_attraction(q, *ctx.target_uncond, sigma));
        }
        return v;
    }

    if (std::holds_alternative<KlKdeField>(spec.kind)) {
        const double sigma = std::get<KlKdeField>(spec.kind).bandwidth;
        const ParticleBatch& self_batch = self_or_q(q, ctx);
        if (guided && std::holds_alternative<DistributionGuidance>(spec.guidance) &&
            spec.guidance_scale() > 0.0) {
            const ParticleBatch guided_self =
                apply_distribution_guidance(self_batch, *ctx.target_uncond, spec.guidance_scale());
            return kl_kde_velocity(q, guided_self, p, sigma);
        }
        VelocityBatch v = kl_kde_velocity(q, self_batch, p, sigma);
        if (guided && std::holds_alternative<VelocityGuidance>(spec.guidance) &&
            spec.guidance_scale() > 0.0) {
            const double w = spec.guidance_scale();
            const Matrix mean_cond = kde_local_mean(q, p, sigma, "target");
            const Matrix mean_uncond = kde_local_mean(q, *ctx.target_uncond, sigma, "unconditional");
            v.vectors += (w / (sigma * sigma)) * (mean_cond - mean_uncond);
        }
        return v;
    }

    const auto& field = std::get<KlAnalyticField>(spec.kind);
    if (guided && std::holds_alternative<DistributionGuidance>(spec.guidance) &&
        spec.guidance_scale() > 0.0)
        throw UnsupportedError(
            "evaluate: distribution guidance for the analytic KL field needs a mixture score; "
            "compose score_q upstream");
    VelocityBatch v = kl_analytic_velocity(q, field.score_p, field.score_q);
    if (guided && std::holds_alternative<VelocityGuidance>(spec.guidance) && spec.guidance_scale() > 0.0) {
        if (!field.score_p_uncond)
            throw ContractViolation("evaluate: velocity guidance needs score_p_uncond");
        const double w = spec.guidance_scale();
        for (Eigen::Index i = 0; i < q.size(); ++i) {
            const Vector x = q.positions.row(i).transpose();
            v.vectors.row(i) += (w * (field.score_p(x) - field.score_p_uncond(x))).transpose();
        }
        if (!v.vectors.allFinite())
            throw InputError("evaluate: non-finite guided analytic KL velocity");
    }
    return v;
}

}  // namespace wgf::vel
