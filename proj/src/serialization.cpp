#include "wgf/serialization.hpp"

namespace nlohmann {

void adl_serializer<wgf::Matrix>::to_json(json& j, const wgf::Matrix& m) {
    j = json::object();
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
    j["data"] = std::move(data);
}

void adl_serializer<wgf::Matrix>::from_json(const json& j, wgf::Matrix& m) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw wgf::ConfigError("matrix: data length does not match rows*cols");
    m.resize(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
}

void adl_serializer<wgf::Vector>::to_json(json& j, const wgf::Vector& v) {
    j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
}

void adl_serializer<wgf::Vector>::from_json(const json& j, wgf::Vector& v) {
    v.resize(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
}

}  // namespace nlohmann

namespace wgf::ot {

void to_json(nlohmann::json& j, const SinkhornSpec& s) {
    j = nlohmann::json{{"epsilon", s.epsilon},
                       {"iterations", s.iterations},
                       {"cost_kind", s.cost_kind == CostKind::HalfSquaredEuclidean ? "half_squared_euclidean"
                                                                                   : "euclidean"},
                       {"log_domain", s.log_domain},
                       {"cost_normalization", s.cost_normalization},
                       {"early_stop", s.early_stop},
                       {"early_stop_tol", s.early_stop_tol}};
}

void from_json(const nlohmann::json& j, SinkhornSpec& s) {
    s = SinkhornSpec{};
    if (j.contains("epsilon")) s.epsilon = j.at("epsilon").get<double>();
    if (j.contains("iterations")) s.iterations = j.at("iterations").get<int>();
    if (j.contains("cost_kind")) {
        const auto kind = j.at("cost_kind").get<std::string>();
        if (kind == "half_squared_euclidean")
            s.cost_kind = CostKind::HalfSquaredEuclidean;
        else if (kind == "euclidean")
            s.cost_kind = CostKind::Euclidean;
        else
            throw ConfigError("sinkhorn.cost_kind: unknown value '" + kind + "'");
    }
    if (j.contains("log_domain")) s.log_domain = j.at("log_domain").get<bool>();
    if (j.contains("cost_normalization")) s.cost_normalization = j.at("cost_normalization").get<bool>();
    if (j.contains("early_stop")) s.early_stop = j.at("early_stop").get<bool>();
    if (j.contains("early_stop_tol")) s.early_stop_tol = j.at("early_stop_tol").get<double>();
}

}  // namespace wgf::ot

namespace wgf::vel {

namespace {

std::string estimator_name(SelfEstimator e) {
    switch (e) {
        case SelfEstimator::TwoBatch: return "two_batch";
        case SelfEstimator::OneBatch: return "one_batch";
        case SelfEstimator::OneBatchMasked: return "one_batch_masked";
    }
    return "two_batch";
}

SelfEstimator estimator_from(const std::string& name) {
    if (name == "two_batch") return SelfEstimator::TwoBatch;
    if (name == "one_batch") return SelfEstimator::OneBatch;
    if (name == "one_batch_masked") return SelfEstimator::OneBatchMasked;
    throw ConfigError("velocity.self_estimator: unknown value '" + name + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const VelocityFieldSpec& s) {
    j = nlohmann::json::object();
    if (std::holds_alternative<SinkhornField>(s.kind)) {
        const auto& f = std::get<SinkhornField>(s.kind);
        j["kind"] = "sinkhorn";
        j["sinkhorn"] = f.sinkhorn;
        j["self_estimator"] = estimator_name(f.self_estimator);
    } else if (std::holds_alternative<MmdField>(s.kind)) {
        j["kind"] = "mmd";
        j["bandwidth"] = std::get<MmdField>(s.kind).bandwidth;
    } else if (std::holds_alternative<KlKdeField>(s.kind)) {
        j["kind"] = "kl_kde";
        j["bandwidth"] = std::get<KlKdeField>(s.kind).bandwidth;
    } else {
        j["kind"] = "kl_analytic";  // score handles are code, not serialized
    }
    nlohmann::json g = nlohmann::json::object();
    if (std::holds_alternative<GuidanceNone>(s.guidance)) {
        g["mode"] = "none";
    } else if (std::holds_alternative<DistributionGuidance>(s.guidance)) {
        g["mode"] = "distribution";
        g["w"] = std::get<DistributionGuidance>(s.guidance).w;
    } else {
        g["mode"] = "velocity";
        g["w"] = std::get<VelocityGuidance>(s.guidance).w;
    }
    j["guidance"] = std::move(g);
}

void from_json(const nlohmann::json& j, VelocityFieldSpec& s) {
    s = VelocityFieldSpec{};
    const auto kind = j.value("kind", std::string("sinkhorn"));
    if (kind == "sinkhorn") {
        SinkhornField f;
        if (j.contains("sinkhorn")) f.sinkhorn = j.at("sinkhorn").get<ot::SinkhornSpec>();
        if (j.contains("self_estimator"))
            f.self_estimator = estimator_from(j.at("self_estimator").get<std::string>());
        s.kind = f;
    } else if (kind == "mmd") {
        s.kind = MmdField{j.value("bandwidth", 1.0)};
    } else if (kind == "kl_kde") {
        s.kind = KlKdeField{j.value("bandwidth", 1.0)};
    } else if (kind == "kl_analytic") {
        throw ConfigError("velocity.kind: kl_analytic requires in-code score handles");
    } else {
        throw ConfigError("velocity.kind: unknown value '" + kind + "'");
    }
    if (j.contains("guidance")) {
        const auto& g = j.at("guidance");
        const auto mode = g.value("mode", std::string("none"));
        if (mode == "none")
            s.guidance = GuidanceNone{};
        else if (mode == "distribution")
            s.guidance = DistributionGuidance{g.value("w", 0.0)};
        else if (mode == "velocity")
            s.guidance = VelocityGuidance{g.value("w", 0.0)};
        else
            throw ConfigError("velocity.guidance.mode: unknown value '" + mode + "'");
    }
}

}  // namespace wgf::vel

namespace wgf::dist {

void to_json(nlohmann::json& j, const DistributionSpec& s) {
    j = nlohmann::json::object();
    j["stream_label"] = s.stream_label;
    if (std::holds_alternative<Gaussian>(s.kind)) {
        const auto& g = std::get<Gaussian>(s.kind);
        j["kind"] = "gaussian";
        j["mean"] = g.mean;
        j["cov"] = g.cov;
    } else if (std::holds_alternative<GaussianMixture>(s.kind)) {
        const auto& gm = std::get<GaussianMixture>(s.kind);
        j["kind"] = "gaussian_mixture";
        j["weights"] = gm.weights;
        j["labeled"] = gm.labeled;
        nlohmann::json comps = nlohmann::json::array();
        for (const auto& c : gm.components) comps.push_back(nlohmann::json{{"mean", c.mean}, {"cov", c.cov}});
        j["components"] = std::move(comps);
    } else if (std::holds_alternative<ParametricCurve>(s.kind)) {
        const auto& pc = std::get<ParametricCurve>(s.kind);
        j["kind"] = "parametric_curve";
        j["curve"] = pc.curve == CurveKind::Circle ? "circle" : "oval";
        j["radius"] = pc.radius;
        j["semi_a"] = pc.semi_a;
        j["semi_b"] = pc.semi_b;
        j["noise_sigma"] = pc.noise_sigma;
    } else {
        j["kind"] = "standard_normal";
        j["dim"] = std::get<StandardNormal>(s.kind).dim;
    }
}

void from_json(const nlohmann::json& j, DistributionSpec& s) {
    // A bare string names a catalog entry.
    if (j.is_string()) {
        s = catalog_entry(j.get<std::string>());
        return;
    }
    s = DistributionSpec{};
    s.stream_label = j.value("stream_label", std::string{});
    const auto kind = j.value("kind", std::string{});
    if (kind == "gaussian") {
        Gaussian g;
        g.mean = j.at("mean").get<Vector>();
        g.cov = j.at("cov").get<Matrix>();
        s.kind = g;
    } else if (kind == "gaussian_mixture") {
        GaussianMixture gm;
        gm.weights = j.at("weights").get<std::vector<double>>();
        gm.labeled = j.value("labeled", false);
        for (const auto& c : j.at("components")) {
            Gaussian g;
            g.mean = c.at("mean").get<Vector>();
            g.cov = c.at("cov").get<Matrix>();
            gm.components.push_back(std::move(g));
        }
        s.kind = gm;
    } else if (kind == "parametric_curve") {
        ParametricCurve pc;
        const auto curve = j.value("curve", std::string("circle"));
        if (curve == "circle")
            pc.curve = CurveKind::Circle;
        else if (curve == "oval")
            pc.curve = CurveKind::Oval;
        else
            throw ConfigError("distribution.curve: unknown value '" + curve + "'");
        pc.radius = j.value("radius", 1.0);
        pc.semi_a = j.value("semi_a", 1.0);
        pc.semi_b = j.value("semi_b", 1.0);
        pc.noise_sigma = j.value("noise_sigma", 0.0);
        s.kind = pc;
    } else if (kind == "standard_normal") {
        s.kind = StandardNormal{j.value("dim", 1)};
    } else {
        throw ConfigError("distribution.kind: unknown value '" + kind + "'");
    }
    s.validate();
}

}  // namespace wgf::dist
