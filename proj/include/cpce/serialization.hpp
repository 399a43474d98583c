#pragma once

// JSON and text encoding of models and numbers.
//
// Doubles are written as their shortest round-trip decimal form; non-finite
// values become the strings "inf", "-inf" and "nan" so that unbounded
// interval markers survive a JSON round trip.

#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpce/basis.hpp"
#include "cpce/errors.hpp"
#include "cpce/input_model.hpp"
#include "cpce/lars.hpp"
#include "cpce/ols.hpp"
#include "cpce/quantile.hpp"

namespace cpce {

using json = nlohmann::json;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("not a number: '" + s + "'");
    return v;
}

inline json encode_double(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline double decode_double(const json& j) {
    if (j.is_string()) return parse_double(j.get<std::string>());
    if (j.is_number()) return j.get<double>();
    throw ConfigError("expected a number, got " + j.dump());
}

inline json encode_vector(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(encode_double(v[i]));
    return out;
}

inline Eigen::VectorXd decode_vector(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = decode_double(j[i]);
    return v;
}

inline json to_json(const PredictionInterval& iv) {
    return json{{"lower", encode_double(iv.lower)}, {"upper", encode_double(iv.upper)}};
}

inline PredictionInterval interval_from_json(const json& j) {
    return {decode_double(j.at("lower")), decode_double(j.at("upper"))};
}

inline std::string to_string(MarginalKind k) {
    switch (k) {
        case MarginalKind::Uniform: return "uniform";
        case MarginalKind::Gaussian: return "gaussian";
        case MarginalKind::Lognormal: return "lognormal";
    }
    return "?";
}

inline json to_json(const InputModel& model) {
    json out = json::array();
    for (const auto& m : model.marginals()) {
        out.push_back({{"kind", to_string(m.kind())}, {"params", {encode_double(m.first()), encode_double(m.second())}}});
    }
    return out;
}

inline InputModel input_model_from_json(const json& j) {
    std::vector<Marginal> m;
    for (const auto& e : j) {
        const auto kind = e.at("kind").get<std::string>();
        const double a = decode_double(e.at("params").at(0));
        const double b = decode_double(e.at("params").at(1));
        if (kind == "uniform") m.push_back(Marginal::uniform(a, b));
        else if (kind == "gaussian") m.push_back(Marginal::gaussian(a, b));
        else if (kind == "lognormal") m.push_back(Marginal::lognormal(a, b));
        else throw ConfigError("unknown marginal kind '" + kind + "'");
    }
    return InputModel(std::move(m));
}

inline json to_json(const PceBasis& basis) {
    json idx = json::array();
    for (const auto& a : basis.indices()) idx.push_back(a.degrees);
    return {{"input", to_json(basis.model())}, {"degree", basis.degree()}, {"indices", idx}};
}

inline PceBasis basis_from_json(const json& j) {
    std::vector<MultiIndex> idx;
    for (const auto& a : j.at("indices")) idx.push_back(MultiIndex{a.get<std::vector<int>>()});
    return PceBasis(input_model_from_json(j.at("input")), j.at("degree").get<int>(), std::move(idx));
}

inline json to_json(const PceModel& model) {
    return {{"kind", "full"}, {"basis", to_json(model.basis())}, {"coeffs", encode_vector(model.coeffs())}};
}

inline PceModel pce_model_from_json(const json& j) {
    if (j.at("kind") != "full") throw ConfigError("not a full PCE model");
    return PceModel(basis_from_json(j.at("basis")), decode_vector(j.at("coeffs")));
}

inline json to_json(const SparsePceModel& model) {
    std::vector<long long> active(model.fit.active.begin(), model.fit.active.end());
    return {{"kind", "sparse"},
            {"basis", to_json(model.basis)},
            {"coeffs", encode_vector(model.fit.coeffs)},
            {"active", active},
            {"lambda_hat", encode_double(model.fit.lambda_hat)},
            {"selected_step", model.fit.selected_step},
            {"loo_error", encode_double(model.fit.loo_error)}};
}

inline SparsePceModel sparse_model_from_json(const json& j) {
    if (j.at("kind") != "sparse") throw ConfigError("not a sparse PCE model");
    SparsePceModel m{basis_from_json(j.at("basis")), {}};
    m.fit.coeffs = decode_vector(j.at("coeffs"));
    for (auto a : j.at("active").get<std::vector<long long>>()) m.fit.active.push_back(static_cast<Eigen::Index>(a));
    m.fit.lambda_hat = decode_double(j.at("lambda_hat"));
    m.fit.selected_step = j.at("selected_step").get<std::size_t>();
    m.fit.loo_error = decode_double(j.at("loo_error"));
    if (static_cast<std::size_t>(m.fit.coeffs.size()) != m.basis.size()) {
        throw ConfigError("coefficient count does not match basis size");
    }
    return m;
}

}  // namespace cpce
