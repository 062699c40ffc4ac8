#include "wgf/ot.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace wgf::ot {

namespace {

constexpr double kDivisionFloor = 1e-300;
constexpr double kEntropyFloor = 1e-300;
const double kNegInf = -std::numeric_limits<double>::infinity();

void check_marginal(const Vector& w, Eigen::Index expected, const char* name) {
    if (w.size() != expected)
        throw ContractViolation(std::string("sinkhorn_scaling: marginal ") + name + " has wrong length");
    if ((w.array() <= 0.0).any())
        throw ContractViolation(std::string("sinkhorn_scaling: marginal ") + name + " must be positive");
    if (std::abs(w.sum() - 1.0) > 1e-12)
        throw ContractViolation(std::string("sinkhorn_scaling: marginal ") + name + " must sum to 1");
}

double max_marginal_violation(const Matrix& plan, const Vector& a, const Vector& b) {
    const double row = (plan.rowwise().sum() - a).cwiseAbs().maxCoeff();
    const double col = (plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff();
    return std::max(row, col);
}

Coupling sinkhorn_kernel_domain(const Matrix& C, const Vector& a, const Vector& b,
                                const SinkhornSpec& spec, bool mask_diagonal) {
    const Eigen::Index n = C.rows(), m = C.cols();
    Matrix K = (-C / spec.epsilon).array().exp().matrix();
    if (mask_diagonal) K.diagonal().setZero();
    for (Eigen::Index i = 0; i < n; ++i)
        if (K.row(i).maxCoeff() <= 0.0)
            throw DegenerateKernelError(
                "sinkhorn_scaling: Gibbs kernel row " + std::to_string(i) +
                    " is numerically zero (epsilon too small for the cost scale)",
                i, true);
    for (Eigen::Index j = 0; j < m; ++j)
        if (K.col(j).maxCoeff() <= 0.0)
            throw DegenerateKernelError(
                "sinkhorn_scaling: Gibbs kernel column " + std::to_string(j) +
                    " is numerically zero (epsilon too small for the cost scale)",
                j, false);

    Vector u = Vector::Ones(n);
    Vector v = Vector::Ones(m);
    int iterations_run = 0;
    for (int l = 0; l < spec.iterations; ++l) {
        u = a.array() / (K * v).array().max(kDivisionFloor);
        v = b.array() / (K.transpose() * u).array().max(kDivisionFloor);
        ++iterations_run;
        if (spec.early_stop) {
            const Matrix plan = u.asDiagonal() * K * v.asDiagonal();
            if (max_marginal_violation(plan, a, b) <= spec.early_stop_tol) break;
        }
    }

    Coupling out;
    out.plan = u.asDiagonal() * K * v.asDiagonal();
    out.row_marginal = a;
    out.col_marginal = b;
    out.log_scaling_u = u.array().log().matrix();
    out.log_scaling_v = v.array().log().matrix();
    out.epsilon = spec.epsilon;
    out.iterations_run = iterations_run;
    return out;
}

Coupling sinkhorn_log_domain(const Matrix& C, const Vector& a, const Vector& b,
                             const SinkhornSpec& spec, bool mask_diagonal) {
    const Eigen::Index n = C.rows(), m = C.cols();
    Matrix log_k = (-C / spec.epsilon);
    if (mask_diagonal) log_k.diagonal().setConstant(kNegInf);

    const Vector log_a = a.array().log().matrix();
    const Vector log_b = b.array().log().matrix();
    Vector log_u = Vector::Zero(n);
    Vector log_v = Vector::Zero(m);
    Matrix shifted(n, m);

    // exp(-inf - max) would be NaN when a whole line is -inf; those lines are
    // degenerate and reported. Finite -inf entries (masked diagonal) exp to 0.
    auto update_u = [&]() {
        shifted = log_k;
        shifted.array().rowwise() += log_v.transpose().array();
        const Vector row_max = shifted.rowwise().maxCoeff();
        for (Eigen::Index i = 0; i < n; ++i)
            if (row_max(i) == kNegInf)
                throw DegenerateKernelError(
                    "sinkhorn_scaling: Gibbs kernel row " + std::to_string(i) + " is all zero", i, true);
        shifted.colwise() -= row_max;
        const Vector sums = shifted.array().exp().matrix().rowwise().sum();
        log_u = log_a - row_max - sums.array().log().matrix();
    };
    auto update_v = [&]() {
        shifted = log_k;
        shifted.array().colwise() += log_u.array();
        const Eigen::RowVectorXd col_max = shifted.colwise().maxCoeff();
        for (Eigen::Index j = 0; j < m; ++j)
            if (col_max(j) == kNegInf)
                throw DegenerateKernelError(
                    "sinkhorn_scaling: Gibbs kernel column " + std::to_string(j) + " is all zero", j,
                    false);
        shifted.rowwise() -= col_max;
        const Eigen::RowVectorXd sums = shifted.array().exp().matrix().colwise().sum();
        log_v = log_b - col_max.transpose() - sums.transpose().array().log().matrix();
    };

    auto assemble = [&]() {
        Matrix plan = log_k;
        plan.array().colwise() += log_u.array();
        plan.array().rowwise() += log_v.transpose().array();
        plan = plan.array().exp().matrix();  // exp(-inf) = 0 covers masked entries
        return plan;
    };

    int iterations_run = 0;
    for (int l = 0; l < spec.iterations; ++l) {
        update_u();
        update_v();
        ++iterations_run;
        if (spec.early_stop && max_marginal_violation(assemble(), a, b) <= spec.early_stop_tol) break;
    }

    Coupling out;
    out.plan = assemble();
    out.row_marginal = a;
    out.col_marginal = b;
    out.log_scaling_u = log_u;
    out.log_scaling_v = log_v;
    out.epsilon = spec.epsilon;
    out.iterations_run = iterations_run;
    return out;
}

}  // namespace

void SinkhornSpec::validate() const {
    if (!(epsilon > 0.0)) throw ContractViolation("SinkhornSpec: epsilon must be positive");
    if (iterations < 1) throw ContractViolation("SinkhornSpec: iterations must be >= 1");
    if (early_stop && !(early_stop_tol > 0.0))
        throw ContractViolation("SinkhornSpec: early_stop_tol must be positive");
}

Matrix pairwise_cost(const Matrix& x, const Matrix& y, CostKind kind) {
    if (x.cols() != y.cols())
        throw ContractViolation("pairwise_cost: point sets have different dimensions");
    if (x.rows() < 1 || y.rows() < 1)
        throw ContractViolation("pairwise_cost: point sets must be nonempty");
    if (!x.allFinite() || !y.allFinite()) throw InputError("pairwise_cost: non-finite input positions");

    Matrix c(x.rows(), y.rows());
    for (Eigen::Index j = 0; j < y.rows(); ++j)
        c.col(j) = (x.rowwise() - y.row(j)).rowwise().squaredNorm();
    if (kind == CostKind::HalfSquaredEuclidean)
        c *= 0.5;
    else
        c = c.cwiseSqrt();
    return c;
}

CostMatrix build_cost_matrix(const ParticleBatch& source, const ParticleBatch& target, CostKind kind) {
    return CostMatrix{pairwise_cost(source.positions, target.positions, kind), kind};
}

Coupling sinkhorn_scaling(const CostMatrix& cost, const Vector& a, const Vector& b,
                          const SinkhornSpec& spec, bool mask_diagonal) {
    spec.validate();
    check_marginal(a, cost.values.rows(), "a");
    check_marginal(b, cost.values.cols(), "b");
    if ((cost.values.array() < 0.0).any())
        throw ContractViolation("sinkhorn_scaling: cost entries must be nonnegative");
    if (mask_diagonal && cost.values.rows() != cost.values.cols())
        throw ContractViolation("sinkhorn_scaling: diagonal mask requires a square cost matrix");

    Matrix c = cost.values;
    if (spec.cost_normalization) {
        const double mean = c.mean();
        if (mean > 0.0) c /= mean;
    }

    if (spec.log_domain) return sinkhorn_log_domain(c, a, b, spec, mask_diagonal);
    return sinkhorn_kernel_domain(c, a, b, spec, mask_diagonal);
}

Matrix barycentric_projection(const Coupling& coupling, const Matrix& target_positions, const Vector& a) {
    if (coupling.plan.cols() != target_positions.rows())
        throw ContractViolation("barycentric_projection: plan columns do not match target count");
    if (a.size() != coupling.plan.rows())
        throw ContractViolation("barycentric_projection: weight length does not match plan rows");
    if (coupling.row_marginal.size() == a.size() &&
        (coupling.row_marginal - a).cwiseAbs().maxCoeff() > 1e-12)
        throw ContractViolation("barycentric_projection: a does not match the coupling row marginal");
    if ((a.array() <= 0.0).any())
        throw ContractViolation("barycentric_projection: weights must be strictly positive");

    Matrix proj = coupling.plan * target_positions;
    proj.array().colwise() /= a.array();
    return proj;
}

double eot_cost(const CostMatrix& cost, const Coupling& coupling, double epsilon) {
    if (cost.values.rows() != coupling.plan.rows() || cost.values.cols() != coupling.plan.cols())
        throw ContractViolation("eot_cost: cost and coupling dimensions disagree");
    if ((coupling.plan.array() < 0.0).any())
        throw ContractViolation("eot_cost: coupling entries must be nonnegative");

    const double linear = (cost.values.array() * coupling.plan.array()).sum();
    double entropy = 0.0;
    for (Eigen::Index j = 0; j < coupling.plan.cols(); ++j)
        for (Eigen::Index i = 0; i < coupling.plan.rows(); ++i) {
            const double p = coupling.plan(i, j);
            if (p >= kEntropyFloor) entropy += p * (std::log(p) - 1.0);
        }
    return linear + epsilon * entropy;
}

double sinkhorn_divergence(const ParticleBatch& q, const ParticleBatch& p, const SinkhornSpec& spec) {
    spec.validate();
    if (q.dim() != p.dim())
        throw ContractViolation("sinkhorn_divergence: batches have different dimensions");

    const auto term = [&](const ParticleBatch& s, const ParticleBatch& t) {
        const CostMatrix c = build_cost_matrix(s, t, spec.cost_kind);
        const Coupling pi = sinkhorn_scaling(c, s.weights, t.weights, spec);
        // With cost_normalization the scaled problem's objective is evaluated.
        CostMatrix used = c;
        if (spec.cost_normalization) {
            const double mean = c.values.mean();
            if (mean > 0.0) used.values /= mean;
        }
        return eot_cost(used, pi, spec.epsilon);
    };

    return term(q, p) - 0.5 * term(q, q) - 0.5 * term(p, p);
}

}  // namespace wgf::ot
