#pragma once

#include <nlohmann/json.hpp>

#include "wgf/distributions.hpp"
#include "wgf/ot.hpp"
#include "wgf/velocity.hpp"

// JSON mappings for the config-facing types. Analytic score handles are code,
// not data: a KL-analytic velocity spec serializes as its kind tag only and
// cannot be parsed back from a config file.

namespace nlohmann {
template <>
struct adl_serializer<wgf::Matrix> {
    static void to_json(json& j, const wgf::Matrix& m);
    static void from_json(const json& j, wgf::Matrix& m);
};
template <>
struct adl_serializer<wgf::Vector> {
    static void to_json(json& j, const wgf::Vector& v);
    static void from_json(const json& j, wgf::Vector& v);
};
}  // namespace nlohmann

namespace wgf::ot {
void to_json(nlohmann::json& j, const SinkhornSpec& s);
void from_json(const nlohmann::json& j, SinkhornSpec& s);
}  // namespace wgf::ot

namespace wgf::vel {
void to_json(nlohmann::json& j, const VelocityFieldSpec& s);
void from_json(const nlohmann::json& j, VelocityFieldSpec& s);
}  // namespace wgf::vel

namespace wgf::dist {
void to_json(nlohmann::json& j, const DistributionSpec& s);
void from_json(const nlohmann::json& j, DistributionSpec& s);
}  // namespace wgf::dist
