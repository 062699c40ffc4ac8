#include "wgf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace wgf::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path Hungarian algorithm with dual potentials.
// Exact optimum of min_sigma sum_i cost(i, sigma(i)) for real costs, O(n^3).
double assignment_cost(const Matrix& cost) {
    const Eigen::Index n = cost.rows();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);

    for (Eigen::Index i = 1; i <= n; ++i) {
        match[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> min_v(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const Eigen::Index i0 = match[j0];
            double delta = kInf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < min_v[j]) {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if (min_v[j] < delta) {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const Eigen::Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    double total = 0.0;
    for (Eigen::Index j = 1; j <= n; ++j) total += cost(match[j] - 1, j - 1);
    return total;
}

void require_uniform(const ParticleBatch& b, const char* name) {
    const double expected = 1.0 / static_cast<double>(b.size());
    if ((b.weights.array() - expected).abs().maxCoeff() > 1e-12)
        throw UnsupportedError(std::string("exact_w2: ") + name + " must carry uniform weights");
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

double exact_w2(const ParticleBatch& q, const ParticleBatch& p) {
    if (q.size() != p.size())
        throw UnsupportedError("exact_w2: batches must have equal size");
    if (q.dim() != p.dim()) throw ContractViolation("exact_w2: dimensions disagree");
    require_uniform(q, "q");
    require_uniform(p, "p");

    const Matrix cost = ot::pairwise_cost(q.positions, p.positions, ot::CostKind::HalfSquaredEuclidean);
    // Assignment on squared distances; the 1/2 scaling cancels in the mean.
    const double total = assignment_cost(2.0 * cost);
    return std::sqrt(std::max(0.0, total / static_cast<double>(q.size())));
}

double exact_w2_1d(const ParticleBatch& q, const ParticleBatch& p) {
    if (q.dim() != 1 || p.dim() != 1) throw UnsupportedError("exact_w2_1d: batches must be 1D");
    require_uniform(q, "q");
    require_uniform(p, "p");

    std::vector<double> a(q.positions.data(), q.positions.data() + q.size());
    std::vector<double> b(p.positions.data(), p.positions.data() + p.size());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    // Integrate |F_q^{-1}(u) - F_p^{-1}(u)|^2 over the merged quantile breakpoints.
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double u = 0.0, total = 0.0;
    while (i < a.size() && j < b.size()) {
        const double next = std::min((i + 1) / na, (j + 1) / nb);
        const double diff = a[i] - b[j];
        total += diff * diff * (next - u);
        u = next;
        if ((i + 1) / na <= next + 1e-15) ++i;
        if ((j + 1) / nb <= next + 1e-15) ++j;
    }
    return std::sqrt(std::max(0.0, total));
}

double mmd_squared(const ParticleBatch& q, const ParticleBatch& p, double sigma) {
    if (!(sigma > 0.0)) throw ContractViolation("mmd_squared: sigma must be positive");
    if (q.dim() != p.dim()) throw ContractViolation("mmd_squared: dimensions disagree");

    const double inv = -0.5 / (sigma * sigma);
    const auto kernel_sum = [&](const ParticleBatch& a, const ParticleBatch& b) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            const Vector sq = (a.positions.rowwise() - b.positions.row(j)).rowwise().squaredNorm();
            s += b.weights(j) * (sq.array() * inv).exp().matrix().dot(a.weights);
        }
        return s;
    };
    return kernel_sum(q, q) - 2.0 * kernel_sum(q, p) + kernel_sum(p, p);
}

CoverageReport mode_coverage(const ParticleBatch& samples, const std::vector<Mode>& modes,
                             double min_fraction, const std::vector<int>& minority_modes) {
    if (modes.empty()) throw ContractViolation("mode_coverage: no modes given");
    for (const auto& m : modes)
        if (!(m.radius > 0.0)) throw ContractViolation("mode_coverage: radii must be positive");

    CoverageReport report;
    report.counts.assign(modes.size(), 0);
    report.radii.reserve(modes.size());
    for (const auto& m : modes) report.radii.push_back(m.radius);
    report.total_samples = samples.size();

    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        double best = kInf;
        std::size_t best_mode = 0;
        for (std::size_t k = 0; k < modes.size(); ++k) {
            const double d = (samples.positions.row(i).transpose() - modes[k].center).norm();
            if (d < best) {
                best = d;
                best_mode = k;
            }
        }
        if (best <= modes[best_mode].radius) ++report.counts[best_mode];
    }

    const double total = std::max<long>(report.total_samples, 1);
    report.covered.reserve(modes.size());
    for (std::size_t k = 0; k < modes.size(); ++k)
        report.covered.push_back(static_cast<double>(report.counts[k]) / total >= min_fraction &&
                                 report.counts[k] > 0);

    double minority = 0.0;
    for (const int k : minority_modes) {
        if (k < 0 || k >= static_cast<int>(modes.size()))
            throw ContractViolation("mode_coverage: minority index out of range");
        minority += static_cast<double>(report.counts[static_cast<std::size_t>(k)]);
    }
    report.minority_mass_fraction = minority / total;
    return report;
}

std::vector<Mode> modes_from_mixture(const dist::DistributionSpec& mixture, double radius_sigmas) {
    if (!std::holds_alternative<dist::GaussianMixture>(mixture.kind))
        throw ContractViolation("modes_from_mixture: spec is not a mixture");
    const auto& gm = std::get<dist::GaussianMixture>(mixture.kind);
    std::vector<Mode> modes;
    modes.reserve(gm.components.size());
    for (const auto& c : gm.components) {
        const double sigma = std::sqrt(c.cov.diagonal().maxCoeff());
        modes.push_back({c.mean, radius_sigmas * sigma});
    }
    return modes;
}

double oval_circle_mean_radial_gap(double semi_a, double semi_b, double radius) {
    constexpr int kPanels = 1 << 16;
    const auto f = [&](double theta) {
        const double c = std::cos(theta), s = std::sin(theta);
        return std::abs(std::sqrt(semi_a * semi_a * c * c + semi_b * semi_b * s * s) - radius);
    };
    const double h = 2.0 * M_PI / kPanels;
    double sum = f(0.0) + f(2.0 * M_PI);
    for (int i = 1; i < kPanels; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f(i * h);
    return sum * h / 3.0 / (2.0 * M_PI);
}

MomentErrors moment_errors(const ParticleBatch& samples, const dist::DistributionSpec& reference) {
    const Vector ref_mean = dist::mean_of(reference);
    const Matrix ref_cov = dist::covariance_of(reference);
    if (samples.dim() != ref_mean.size())
        throw ContractViolation("moment_errors: sample dimension does not match the reference");

    const Eigen::Index n = samples.size();
    const Vector mean = samples.positions.colwise().mean().transpose();
    const Matrix centered = samples.positions.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n);

    MomentErrors err;
    err.mean_error = (mean - ref_mean).norm();
    err.cov_rel_frobenius = (cov - ref_cov).norm() / ref_cov.norm();
    return err;
}

TransportHistogram transport_distance_histogram(const ParticleBatch& source,
                                                const ParticleBatch& generated) {
    if (source.size() != generated.size() || source.dim() != generated.dim())
        throw ContractViolation("transport_distance_histogram: batches must be row-aligned");

    TransportHistogram h;
    h.distances = (generated.positions - source.positions).rowwise().norm();
    std::vector<double> sorted(h.distances.data(), h.distances.data() + h.distances.size());
    std::sort(sorted.begin(), sorted.end());
    h.mean = h.distances.mean();
    h.q25 = quantile_sorted(sorted, 0.25);
    h.median = quantile_sorted(sorted, 0.5);
    h.q75 = quantile_sorted(sorted, 0.75);
    h.max = sorted.empty() ? 0.0 : sorted.back();
    return h;
}

LandscapeSlice landscape_slice(const std::vector<gen::GeneratorParams>& checkpoints,
                               std::uint64_t transverse_seed, const LandscapeGrid& grid,
                               const LandscapeEvalSpec& eval) {
    if (checkpoints.size() < 2)
        throw ContractViolation("landscape_slice: need at least two checkpoints");
    if (grid.nx < 2 || grid.ny < 1) throw ContractViolation("landscape_slice: grid too small");

    const std::size_t k_count = checkpoints.size() - 1;  // displacement count
    std::vector<Vector> thetas;
    thetas.reserve(checkpoints.size());
    for (const auto& c : checkpoints) thetas.push_back(gen::flatten_parameters(c));
    const Eigen::Index dim = thetas.front().size();

    std::vector<Vector> dirs;
    dirs.reserve(k_count);
    double max_norm = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
        dirs.push_back(thetas[k + 1] - thetas[k]);
        max_norm = std::max(max_norm, dirs.back().norm());
    }
    if (max_norm <= 1e-15)
        throw DegenerateTrajectoryError("landscape_slice: all checkpoint displacements vanish");

    // Orthonormal basis of span{d_k}; near-dependent directions are dropped.
    std::vector<Vector> basis;
    for (const auto& d : dirs) {
        Vector r = d;
        for (const auto& b : basis) r -= b.dot(r) * b;
        const double norm = r.norm();
        if (norm > 1e-10 * std::max(1.0, d.norm())) basis.push_back(r / norm);
    }

    Rng rng(transverse_seed);
    Vector v;
    for (int attempt = 0; attempt < 16; ++attempt) {
        v = rng.normal_vector(dim);
        for (const auto& b : basis) v -= b.dot(v) * b;
        const double norm = v.norm();
        if (norm > 1e-10) {
            v /= norm;
            break;
        }
        if (attempt == 15)
            throw DegenerateTrajectoryError("landscape_slice: no transverse direction found");
    }

    const auto theta_at = [&](double x, double y) -> Vector {
        const double k_max = static_cast<double>(k_count);
        if (x <= 0.0) return thetas.front() + x * dirs.front() + y * v;
        if (x >= k_max) return thetas.back() + (x - k_max) * dirs.back() + y * v;
        const std::size_t k = std::min(static_cast<std::size_t>(std::floor(x)), k_count - 1);
        return thetas[k] + (x - static_cast<double>(k)) * dirs[k] + y * v;
    };

    LandscapeSlice slice;
    slice.transverse = v;
    slice.xs.resize(grid.nx);
    for (int i = 0; i < grid.nx; ++i)
        slice.xs[static_cast<std::size_t>(i)] =
            grid.x_min + (grid.x_max - grid.x_min) * static_cast<double>(i) / (grid.nx - 1);
    slice.ys.resize(grid.ny);
    if (grid.ny == 1) {
        slice.ys[0] = 0.0;
    } else {
        for (int j = 0; j < grid.ny; ++j)
            slice.ys[static_cast<std::size_t>(j)] =
                -grid.y_extent + 2.0 * grid.y_extent * static_cast<double>(j) / (grid.ny - 1);
    }
    for (std::size_t k = 0; k < checkpoints.size(); ++k)
        slice.checkpoint_x.push_back(static_cast<double>(k));

    slice.energy.resize(grid.ny, grid.nx);
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const Vector theta = theta_at(slice.xs[static_cast<std::size_t>(i)],
                                          slice.ys[static_cast<std::size_t>(j)]);
            const gen::GeneratorParams params = gen::unflatten_parameters(checkpoints.front(), theta);
            const Matrix out = gen::forward(params, eval.eval_inputs, eval.eval_labels, eval.eval_w);
            const ParticleBatch generated = ParticleBatch::uniform(out);
            slice.energy(j, i) = ot::sinkhorn_divergence(generated, eval.target, eval.sinkhorn);
        }
    }
    return slice;
}

}  // namespace wgf::metrics
