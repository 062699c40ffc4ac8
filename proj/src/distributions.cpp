#include "wgf/distributions.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace wgf::dist {

namespace {

void validate_gaussian(const Gaussian& g) {
    if (g.mean.size() < 1) throw ContractViolation("Gaussian: empty mean");
    if (g.cov.rows() != g.mean.size() || g.cov.cols() != g.mean.size())
        throw ContractViolation("Gaussian: covariance shape does not match mean");
    Eigen::LLT<Matrix> llt(g.cov);
    if (llt.info() != Eigen::Success) throw ContractViolation("Gaussian: covariance is not SPD");
}

Matrix cholesky_factor(const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw ContractViolation("Gaussian: covariance is not SPD");
    return llt.matrixL();
}

Matrix sample_gaussian(const Gaussian& g, Eigen::Index count, Rng& rng) {
    const Eigen::Index d = g.mean.size();
    const Matrix l = cholesky_factor(g.cov);
    Matrix z = rng.normal_matrix(count, d);
    Matrix out = z * l.transpose();
    out.rowwise() += g.mean.transpose();
    return out;
}

double gaussian_log_density(const Gaussian& g, const Vector& x) {
    const Eigen::Index d = g.mean.size();
    Eigen::LLT<Matrix> llt(g.cov);
    const Vector diff = x - g.mean;
    const Vector sol = llt.solve(diff);
    double log_det = 0.0;
    const Matrix l = llt.matrixL();
    for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(l(i, i));
    return -0.5 * (diff.dot(sol) + log_det + static_cast<double>(d) * std::log(2.0 * M_PI));
}

Vector gaussian_score(const Gaussian& g, const Vector& x) {
    Eigen::LLT<Matrix> llt(g.cov);
    return llt.solve(g.mean - x);
}

}  // namespace

void DistributionSpec::validate() const {
    if (std::holds_alternative<Gaussian>(kind)) {
        validate_gaussian(std::get<Gaussian>(kind));
    } else if (std::holds_alternative<GaussianMixture>(kind)) {
        const auto& gm = std::get<GaussianMixture>(kind);
        if (gm.weights.size() != gm.components.size() || gm.components.empty())
            throw ContractViolation("GaussianMixture: weights/components mismatch");
        double sum = 0.0;
        for (const double w : gm.weights) {
            if (!(w > 0.0)) throw ContractViolation("GaussianMixture: weights must be positive");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ContractViolation("GaussianMixture: weights must sum to 1");
        const Eigen::Index d = gm.components.front().mean.size();
        for (const auto& c : gm.components) {
            validate_gaussian(c);
            if (c.mean.size() != d)
                throw ContractViolation("GaussianMixture: components have different dimensions");
        }
    } else if (std::holds_alternative<ParametricCurve>(kind)) {
        const auto& pc = std::get<ParametricCurve>(kind);
        if (pc.noise_sigma < 0.0) throw ContractViolation("ParametricCurve: noise_sigma must be >= 0");
        if (pc.curve == CurveKind::Circle && !(pc.radius > 0.0))
            throw ContractViolation("ParametricCurve: radius must be positive");
        if (pc.curve == CurveKind::Oval && (!(pc.semi_a > 0.0) || !(pc.semi_b > 0.0)))
            throw ContractViolation("ParametricCurve: semi-axes must be positive");
    } else {
        if (std::get<StandardNormal>(kind).dim < 1)
            throw ContractViolation("StandardNormal: dim must be >= 1");
    }
}

int dimension(const DistributionSpec& spec) {
    if (std::holds_alternative<Gaussian>(spec.kind))
        return static_cast<int>(std::get<Gaussian>(spec.kind).mean.size());
    if (std::holds_alternative<GaussianMixture>(spec.kind))
        return static_cast<int>(std::get<GaussianMixture>(spec.kind).components.front().mean.size());
    if (std::holds_alternative<ParametricCurve>(spec.kind)) return 2;
    return std::get<StandardNormal>(spec.kind).dim;
}

ParticleBatch sample(const DistributionSpec& spec, Eigen::Index count, Rng& rng) {
    spec.validate();
    if (count < 0) throw ContractViolation("sample: count must be >= 0");
    if (count == 0) {
        ParticleBatch empty;
        empty.positions = Matrix(0, dimension(spec));
        empty.weights = Vector(0);
        return empty;
    }

    if (std::holds_alternative<Gaussian>(spec.kind)) {
        return ParticleBatch::uniform(sample_gaussian(std::get<Gaussian>(spec.kind), count, rng));
    }

    if (std::holds_alternative<GaussianMixture>(spec.kind)) {
        const auto& gm = std::get<GaussianMixture>(spec.kind);
        const Eigen::Index d = gm.components.front().mean.size();
        std::vector<double> cdf(gm.weights.size());
        std::partial_sum(gm.weights.begin(), gm.weights.end(), cdf.begin());
        Matrix pos(count, d);
        IntVector labels(count);
        for (Eigen::Index i = 0; i < count; ++i) {
            const double u = rng.uniform();
            std::size_t k = 0;
            while (k + 1 < cdf.size() && u >= cdf[k]) ++k;
            labels(i) = static_cast<int>(k);
            pos.row(i) = sample_gaussian(gm.components[k], 1, rng).row(0);
        }
        if (gm.labeled) return ParticleBatch::uniform(std::move(pos), std::move(labels));
        return ParticleBatch::uniform(std::move(pos));
    }

    if (std::holds_alternative<ParametricCurve>(spec.kind)) {
        const auto& pc = std::get<ParametricCurve>(spec.kind);
        Matrix pos(count, 2);
        for (Eigen::Index i = 0; i < count; ++i) {
            const double theta = 2.0 * M_PI * rng.uniform();
            double x, y;
            if (pc.curve == CurveKind::Circle) {
                x = pc.radius * std::cos(theta);
                y = pc.radius * std::sin(theta);
            } else {
                x = pc.semi_a * std::cos(theta);
                y = pc.semi_b * std::sin(theta);
            }
            if (pc.noise_sigma > 0.0) {
                x += pc.noise_sigma * rng.normal();
                y += pc.noise_sigma * rng.normal();
            }
            pos(i, 0) = x;
            pos(i, 1) = y;
        }
        return ParticleBatch::uniform(std::move(pos));
    }

    const int d = std::get<StandardNormal>(spec.kind).dim;
    return ParticleBatch::uniform(rng.normal_matrix(count, d));
}

Vector score(const DistributionSpec& spec, const Vector& x) {
    if (std::holds_alternative<Gaussian>(spec.kind)) {
        return gaussian_score(std::get<Gaussian>(spec.kind), x);
    }
    if (std::holds_alternative<StandardNormal>(spec.kind)) {
        return -x;
    }
    if (std::holds_alternative<GaussianMixture>(spec.kind)) {
        const auto& gm = std::get<GaussianMixture>(spec.kind);
        const std::size_t k = gm.components.size();
        // Responsibilities via stabilized softmax of log w_k + log N_k(x).
        std::vector<double> logits(k);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
            logits[i] = std::log(gm.weights[i]) + gaussian_log_density(gm.components[i], x);
            max_logit = std::max(max_logit, logits[i]);
        }
        double z = 0.0;
        for (std::size_t i = 0; i < k; ++i) z += std::exp(logits[i] - max_logit);
        Vector s = Vector::Zero(x.size());
        for (std::size_t i = 0; i < k; ++i) {
            const double r = std::exp(logits[i] - max_logit) / z;
            s += r * gaussian_score(gm.components[i], x);
        }
        return s;
    }
    throw UnsupportedError("score: not defined for parametric curves");
}

double log_density(const DistributionSpec& spec, const Vector& x) {
    if (std::holds_alternative<Gaussian>(spec.kind))
        return gaussian_log_density(std::get<Gaussian>(spec.kind), x);
    if (std::holds_alternative<StandardNormal>(spec.kind)) {
        const int d = std::get<StandardNormal>(spec.kind).dim;
        return -0.5 * (x.squaredNorm() + d * std::log(2.0 * M_PI));
    }
    if (std::holds_alternative<GaussianMixture>(spec.kind)) {
        const auto& gm = std::get<GaussianMixture>(spec.kind);
        double max_logit = -std::numeric_limits<double>::infinity();
        std::vector<double> logits(gm.components.size());
        for (std::size_t i = 0; i < gm.components.size(); ++i) {
            logits[i] = std::log(gm.weights[i]) + gaussian_log_density(gm.components[i], x);
            max_logit = std::max(max_logit, logits[i]);
        }
        double z = 0.0;
        for (const double l : logits) z += std::exp(l - max_logit);
        return max_logit + std::log(z);
    }
    throw UnsupportedError("log_density: not defined for parametric curves");
}

Vector mean_of(const DistributionSpec& spec) {
    if (std::holds_alternative<Gaussian>(spec.kind)) return std::get<Gaussian>(spec.kind).mean;
    if (std::holds_alternative<StandardNormal>(spec.kind))
        return Vector::Zero(std::get<StandardNormal>(spec.kind).dim);
    if (std::holds_alternative<GaussianMixture>(spec.kind)) {
        const auto& gm = std::get<GaussianMixture>(spec.kind);
        Vector m = Vector::Zero(gm.components.front().mean.size());
        for (std::size_t i = 0; i < gm.components.size(); ++i) m += gm.weights[i] * gm.components[i].mean;
        return m;
    }
    throw UnsupportedError("mean_of: no analytic moments for parametric curves");
}

Matrix covariance_of(const DistributionSpec& spec) {
    if (std::holds_alternative<Gaussian>(spec.kind)) return std::get<Gaussian>(spec.kind).cov;
    if (std::holds_alternative<StandardNormal>(spec.kind)) {
        const int d = std::get<StandardNormal>(spec.kind).dim;
        return Matrix::Identity(d, d);
    }
    if (std::holds_alternative<GaussianMixture>(spec.kind)) {
        const auto& gm = std::get<GaussianMixture>(spec.kind);
        const Vector m = mean_of(spec);
        Matrix cov = Matrix::Zero(m.size(), m.size());
        for (std::size_t i = 0; i < gm.components.size(); ++i) {
            const auto& c = gm.components[i];
            cov += gm.weights[i] * (c.cov + c.mean * c.mean.transpose());
        }
        cov -= m * m.transpose();
        return cov;
    }
    throw UnsupportedError("covariance_of: no analytic moments for parametric curves");
}

DistributionSpec conditional(const DistributionSpec& mixture, int component) {
    if (!std::holds_alternative<GaussianMixture>(mixture.kind))
        throw UnsupportedError("conditional: spec is not a mixture");
    const auto& gm = std::get<GaussianMixture>(mixture.kind);
    if (component < 0 || component >= static_cast<int>(gm.components.size()))
        throw ContractViolation("conditional: component index out of range");
    return DistributionSpec{gm.components[static_cast<std::size_t>(component)],
                            mixture.stream_label + "/c" + std::to_string(component)};
}

namespace {

Gaussian iso_gaussian(double x, double y, double sigma) {
    Gaussian g;
    g.mean = Vector(2);
    g.mean << x, y;
    g.cov = sigma * sigma * Matrix::Identity(2, 2);
    return g;
}

}  // namespace

std::vector<std::pair<std::string, DistributionSpec>> standard_toy_suite() {
    std::vector<std::pair<std::string, DistributionSpec>> catalog;

    {
        GaussianMixture ring;
        for (int k = 0; k < 8; ++k) {
            const double angle = 2.0 * M_PI * k / 8.0;
            ring.weights.push_back(1.0 / 8.0);
            ring.components.push_back(iso_gaussian(8.0 * std::cos(angle), 8.0 * std::sin(angle), 0.3));
        }
        catalog.emplace_back("eight-gaussians-ring", DistributionSpec{ring, "eight-gaussians-ring"});
    }
    {
        // Six dominant modes on a radius-4 circle plus two minority modes at
        // distance 10 on the y-axis; minority weight 0.05 each.
        GaussianMixture gm;
        for (int k = 0; k < 6; ++k) {
            const double angle = 2.0 * M_PI * k / 6.0;
            gm.weights.push_back(0.15);
            gm.components.push_back(iso_gaussian(4.0 * std::cos(angle), 4.0 * std::sin(angle), 0.2));
        }
        gm.weights.push_back(0.05);
        gm.components.push_back(iso_gaussian(0.0, 10.0, 0.2));
        gm.weights.push_back(0.05);
        gm.components.push_back(iso_gaussian(0.0, -10.0, 0.2));
        catalog.emplace_back("imbalanced-6+2", DistributionSpec{gm, "imbalanced-6+2"});
    }
    {
        GaussianMixture gm;
        gm.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        gm.components = {iso_gaussian(-4.0, 0.0, 0.5), iso_gaussian(0.0, 4.0, 0.5),
                         iso_gaussian(4.0, 0.0, 0.5)};
        gm.labeled = true;
        catalog.emplace_back("three-mode-conditional", DistributionSpec{gm, "three-mode-conditional"});
    }
    {
        ParametricCurve oval;
        oval.curve = CurveKind::Oval;
        oval.semi_a = 3.0;
        oval.semi_b = 1.5;
        oval.noise_sigma = 0.05;
        catalog.emplace_back("oval-source", DistributionSpec{oval, "oval-source"});
    }
    {
        ParametricCurve circle;
        circle.curve = CurveKind::Circle;
        circle.radius = 2.0;
        circle.noise_sigma = 0.05;
        catalog.emplace_back("circle-target", DistributionSpec{circle, "circle-target"});
    }
    return catalog;
}

DistributionSpec catalog_entry(const std::string& name) {
    for (auto& [entry_name, spec] : standard_toy_suite())
        if (entry_name == name) return spec;
    throw ContractViolation("catalog_entry: unknown entry '" + name + "'");
}

}  // namespace wgf::dist
