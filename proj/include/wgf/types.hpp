#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>

namespace wgf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// Precondition/invariant breach in caller-supplied data (dimension mismatch,
// broken simplex, ...).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Bad runtime input (non-finite values, out-of-range query point).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A row or column of the Gibbs kernel is numerically all-zero.
class DegenerateKernelError : public std::runtime_error {
public:
    DegenerateKernelError(const std::string& msg, Eigen::Index index, bool is_row)
        : std::runtime_error(msg), index(index), is_row(is_row) {}
    Eigen::Index index;
    bool is_row;
};

// All kernel weights underflowed at some evaluation point of a KDE.
class DegenerateKdeError : public std::runtime_error {
public:
    DegenerateKdeError(const std::string& msg, Eigen::Index particle)
        : std::runtime_error(msg), particle(particle) {}
    Eigen::Index particle;
};

// Non-finite state encountered while integrating a flow or training.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, long step) : std::runtime_error(msg), step(step) {}
    long step;
};

// All checkpoint displacements vanish; no trajectory direction exists.
class DegenerateTrajectoryError : public std::runtime_error {
public:
    explicit DegenerateTrajectoryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation not defined for the given instance (e.g. score of a curve).
class UnsupportedError : public std::runtime_error {
public:
    explicit UnsupportedError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid experiment configuration; carries the offending field name.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raises the glibc mmap threshold so repeated medium-size matrix allocations
/// reuse the heap arena instead of paying mmap/page-fault round trips. Call
/// once at process start; safe to call repeatedly.
void tune_allocator();

/// Weighted point cloud. Rows of `positions` are particles, `weights` is a
/// strictly positive simplex, `labels` optionally carries a class per particle.
struct ParticleBatch {
    Matrix positions;                 // N x d
    Vector weights;                   // length N, w_i > 0, sum = 1
    std::optional<IntVector> labels;  // length N when present

    ParticleBatch() = default;
    ParticleBatch(Matrix positions, Vector weights, std::optional<IntVector> labels = std::nullopt);

    static ParticleBatch uniform(Matrix positions);
    static ParticleBatch uniform(Matrix positions, IntVector labels);

    Eigen::Index size() const { return positions.rows(); }
    Eigen::Index dim() const { return positions.cols(); }

    /// Largest particle norm; 0 for an empty batch.
    double support_radius() const;

    void validate() const;
};

}  // namespace wgf
