#pragma once

#include <utility>
#include <vector>

#include "wgf/distributions.hpp"
#include "wgf/generator.hpp"
#include "wgf/ot.hpp"
#include "wgf/types.hpp"

namespace wgf::metrics {

/// Exact Wasserstein-2 distance between equal-size uniform batches, solved as
/// an assignment problem (shortest-augmenting-path Hungarian, cubic time).
double exact_w2(const ParticleBatch& q, const ParticleBatch& p);

/// Exact 1D Wasserstein-2 between uniform batches of possibly different
/// sizes, via the quantile-function coupling.
double exact_w2_1d(const ParticleBatch& q, const ParticleBatch& p);

/// V-statistic MMD^2 with batch weights and the Gaussian kernel
/// k(x,y) = exp(-|x-y|^2 / (2 sigma^2)).
double mmd_squared(const ParticleBatch& q, const ParticleBatch& p, double sigma);

struct Mode {
    Vector center;
    double radius;
};

struct CoverageReport {
    std::vector<long> counts;       // samples assigned per mode
    std::vector<double> radii;
    std::vector<bool> covered;      // count/total >= min_fraction
    double minority_mass_fraction;  // assigned minority mass / total samples
    long total_samples;
};

/// Assigns each sample to the nearest mode center if within that mode's
/// radius. minority_modes selects which mode indices count toward the
/// minority-mass fraction.
CoverageReport mode_coverage(const ParticleBatch& samples, const std::vector<Mode>& modes,
                             double min_fraction, const std::vector<int>& minority_modes = {});

/// One Mode per mixture component: center = component mean, radius =
/// radius_sigmas times the largest marginal standard deviation.
std::vector<Mode> modes_from_mixture(const dist::DistributionSpec& mixture, double radius_sigmas);

/// Mean over uniform angle of |r_oval(theta) - radius|, the pointwise radial
/// gap between the noise-free oval and circle; Simpson quadrature.
double oval_circle_mean_radial_gap(double semi_a, double semi_b, double radius);

struct MomentErrors {
    double mean_error;          // l2 distance of means
    double cov_rel_frobenius;   // |Cov_hat - Cov|_F / |Cov|_F
};

MomentErrors moment_errors(const ParticleBatch& samples, const dist::DistributionSpec& reference);

struct TransportHistogram {
    Vector distances;  // |generated_i - source_i| per row
    double mean;
    double q25, median, q75;
    double max;
};

/// Row-aligned batches: generated.row(i) = f(source.row(i)).
TransportHistogram transport_distance_histogram(const ParticleBatch& source,
                                                const ParticleBatch& generated);

struct LandscapeGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    double y_extent = 2.0;  // y spans [-y_extent, y_extent]
    int nx = 64;
    int ny = 64;
};

/// Fixed evaluation inputs pushed through each grid point's parameters; the
/// energy is the Sinkhorn divergence of the generated cloud against `target`.
struct LandscapeEvalSpec {
    ot::SinkhornSpec sinkhorn;
    ParticleBatch target;
    Matrix eval_inputs;  // raw reference samples, one row per particle
    std::optional<IntVector> eval_labels;
    std::optional<double> eval_w;
};

struct LandscapeSlice {
    std::vector<double> xs;         // nx grid coordinates
    std::vector<double> ys;         // ny grid coordinates
    Matrix energy;                  // ny x nx
    std::vector<double> checkpoint_x;  // checkpoint k sits at (k, 0)
    Vector transverse;              // unit y-direction, orthogonal to every d_k
};

/// Two-dimensional affine slice through parameter space: the checkpoint
/// trajectory runs along the x-axis (checkpoint k at coordinate (k,0),
/// piecewise direction d_k = theta_{k+1} - theta_k, extended left with d_0 and
/// right with d_{K-1}); the y-axis is a seeded random direction projected
/// orthogonal to every d_k and normalized.
LandscapeSlice landscape_slice(const std::vector<gen::GeneratorParams>& checkpoints,
                               std::uint64_t transverse_seed, const LandscapeGrid& grid,
                               const LandscapeEvalSpec& eval);

}  // namespace wgf::metrics
