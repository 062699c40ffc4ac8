#pragma once

#include "wgf/types.hpp"

namespace wgf::ot {

enum class CostKind { HalfSquaredEuclidean, Euclidean };

struct CostMatrix {
    Matrix values;  // N x M, entries >= 0
    CostKind kind = CostKind::HalfSquaredEuclidean;
};

/// Parameters of one Sinkhorn-Knopp solve. Kernel-domain scaling is the
/// default; log_domain switches to stabilized log-sum-exp updates computing
/// the same fixed point (needed once exp(-C/epsilon) underflows, in practice
/// epsilon <= 1e-2 on unnormalized costs). cost_normalization divides the
/// cost matrix by its mean before scaling (off in all reproduction paths).
/// early_stop enables the optional marginal-tolerance stop; it is off by
/// default so a run performs exactly `iterations` update pairs.
struct SinkhornSpec {
    double epsilon = 0.05;
    int iterations = 100;
    CostKind cost_kind = CostKind::HalfSquaredEuclidean;
    bool log_domain = false;
    bool cost_normalization = false;
    bool early_stop = false;
    double early_stop_tol = 1e-9;

    void validate() const;
};

/// Entropic transport plan with its dual scalings. Scalings are stored in log
/// form (the log-domain path can produce values whose exponentials overflow);
/// scalings_u()/scalings_v() expose the positive factors where representable.
/// plan(i,j) = u_i * exp(-C(i,j)/epsilon) * v_j up to round-off.
struct Coupling {
    Matrix plan;          // N x M, nonnegative
    Vector row_marginal;  // a
    Vector col_marginal;  // b
    Vector log_scaling_u;
    Vector log_scaling_v;
    double epsilon = 0.0;
    int iterations_run = 0;

    Vector scalings_u() const { return log_scaling_u.array().exp().matrix(); }
    Vector scalings_v() const { return log_scaling_v.array().exp().matrix(); }
};

/// Pairwise costs between row-point sets x (N x d) and y (M x d).
Matrix pairwise_cost(const Matrix& x, const Matrix& y, CostKind kind);

CostMatrix build_cost_matrix(const ParticleBatch& source, const ParticleBatch& target, CostKind kind);

/// Sinkhorn-Knopp scaling: exactly L alternating updates u <- a ./ (K v),
/// v <- b ./ (K' u), v initialized to ones, returning diag(u) K diag(v).
/// mask_diagonal zeroes K's diagonal (self-transport with the diagonal
/// excluded); it requires a square cost matrix.
Coupling sinkhorn_scaling(const CostMatrix& cost, const Vector& a, const Vector& b,
                          const SinkhornSpec& spec, bool mask_diagonal = false);

/// Row i of the result is the plan-weighted target average (1/a_i) sum_j plan(i,j) y_j.
Matrix barycentric_projection(const Coupling& coupling, const Matrix& target_positions, const Vector& a);

/// sum_ij C_ij pi_ij + epsilon * sum_ij pi_ij (log pi_ij - 1), with
/// 0 log 0 = 0 and plan entries below 1e-300 treated as zero.
double eot_cost(const CostMatrix& cost, const Coupling& coupling, double epsilon);

/// Debiased divergence S_eps(q,p) = OT_eps(q,p) - OT_eps(q,q)/2 - OT_eps(p,p)/2.
/// The self terms use the full self-coupling (no masking).
double sinkhorn_divergence(const ParticleBatch& q, const ParticleBatch& p, const SinkhornSpec& spec);

}  // namespace wgf::ot
