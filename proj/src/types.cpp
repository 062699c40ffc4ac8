#include "wgf/types.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace wgf {

void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

ParticleBatch::ParticleBatch(Matrix positions_in, Vector weights_in, std::optional<IntVector> labels_in)
    : positions(std::move(positions_in)), weights(std::move(weights_in)), labels(std::move(labels_in)) {
    validate();
}

ParticleBatch ParticleBatch::uniform(Matrix positions) {
    const Eigen::Index n = positions.rows();
    if (n < 1) throw ContractViolation("ParticleBatch: need at least one particle");
    return ParticleBatch(std::move(positions), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

ParticleBatch ParticleBatch::uniform(Matrix positions, IntVector labels) {
    const Eigen::Index n = positions.rows();
    if (n < 1) throw ContractViolation("ParticleBatch: need at least one particle");
    return ParticleBatch(std::move(positions), Vector::Constant(n, 1.0 / static_cast<double>(n)),
                         std::move(labels));
}

double ParticleBatch::support_radius() const {
    if (positions.rows() == 0) return 0.0;
    return positions.rowwise().norm().maxCoeff();
}

void ParticleBatch::validate() const {
    const Eigen::Index n = positions.rows();
    if (n == 0) {
        // Empty batches are legal carriers (e.g. sample(count = 0)); weight
        // and label invariants are vacuous.
        if (weights.size() != 0 || (labels && labels->size() != 0))
            throw ContractViolation("ParticleBatch: empty batch with nonempty weights or labels");
        return;
    }
    if (!positions.allFinite()) throw InputError("ParticleBatch: non-finite position entries");
    if (weights.size() != n)
        throw ContractViolation("ParticleBatch: weights length does not match particle count");
    if ((weights.array() <= 0.0).any())
        throw ContractViolation("ParticleBatch: weights must be strictly positive");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
        throw ContractViolation("ParticleBatch: weights must sum to 1 within 1e-12");
    if (labels && labels->size() != n)
        throw ContractViolation("ParticleBatch: labels length does not match particle count");
}

}  // namespace wgf
