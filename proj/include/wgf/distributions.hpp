#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wgf/rng.hpp"
#include "wgf/types.hpp"

namespace wgf::dist {

struct Gaussian {
    Vector mean;
    Matrix cov;  // SPD
};

/// When labeled is set, samples carry their component index as class label.
struct GaussianMixture {
    std::vector<double> weights;  // simplex
    std::vector<Gaussian> components;
    bool labeled = false;
};

enum class CurveKind { Circle, Oval };

/// Uniform angle on [0, 2pi) mapped through the curve, plus isotropic noise.
struct ParametricCurve {
    CurveKind curve = CurveKind::Circle;
    double radius = 1.0;    // Circle
    double semi_a = 1.0;    // Oval x half-axis
    double semi_b = 1.0;    // Oval y half-axis
    double noise_sigma = 0.0;
};

struct StandardNormal {
    int dim = 1;
};

struct DistributionSpec {
    std::variant<Gaussian, GaussianMixture, ParametricCurve, StandardNormal> kind;
    std::string stream_label;  // seed-stream tag used by samplers

    void validate() const;
};

int dimension(const DistributionSpec& spec);

ParticleBatch sample(const DistributionSpec& spec, Eigen::Index count, Rng& rng);

/// Analytic gradient of the log density. Gaussian and mixture kinds only.
Vector score(const DistributionSpec& spec, const Vector& x);

double log_density(const DistributionSpec& spec, const Vector& x);

Vector mean_of(const DistributionSpec& spec);
Matrix covariance_of(const DistributionSpec& spec);

/// Mixture restricted to one component (class-conditional target p(.|c)).
DistributionSpec conditional(const DistributionSpec& mixture, int component);

/// Named toy catalog: eight-gaussians-ring, imbalanced-6+2,
/// three-mode-conditional, oval-source, circle-target. Constants are fixed
/// here so every figure is reproducible from the same numbers.
std::vector<std::pair<std::string, DistributionSpec>> standard_toy_suite();

DistributionSpec catalog_entry(const std::string& name);

}  // namespace wgf::dist
