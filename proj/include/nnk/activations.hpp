#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "error.hpp"
#include "special_functions.hpp"

namespace nnk {

enum class ActKind { GELU, ELU, SELU, ReLU, LReLU, ERF };

struct Activation {
    ActKind kind = ActKind::ReLU;
    double slope = 0.0;   // LReLU only
    double lambda = 1.0;  // ELU/SELU outer scale
    double alpha = 1.0;   // ELU/SELU negative-branch scale

    static Activation gelu() { return {ActKind::GELU}; }
    static Activation elu() { return {ActKind::ELU}; }
    static Activation relu() { return {ActKind::ReLU}; }
    static Activation erf() { return {ActKind::ERF}; }
    static Activation lrelu(double a = 0.2) {
        if (!(a >= 0.0 && a < 1.0)) throw DomainError("lrelu: slope must lie in [0, 1)");
        return {ActKind::LReLU, a};
    }
    // Defaults are the self-normalising constants.
    static Activation selu(double lambda = 1.0507009873554805, double alpha = 1.6732632423543772) {
        if (!(lambda > 0.0 && alpha > 0.0)) throw DomainError("selu: lambda and alpha must be positive");
        return {ActKind::SELU, 0.0, lambda, alpha};
    }

    bool is_elu_family() const { return kind == ActKind::ELU || kind == ActKind::SELU; }
};

inline std::string to_string(ActKind k) {
    switch (k) {
        case ActKind::GELU: return "gelu";
        case ActKind::ELU: return "elu";
        case ActKind::SELU: return "selu";
        case ActKind::ReLU: return "relu";
        case ActKind::LReLU: return "lrelu";
        case ActKind::ERF: return "erf";
    }
    return "unknown";
}

inline std::string to_string(const Activation& a) { return to_string(a.kind); }

inline Activation parse_activation(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "gelu") return Activation::gelu();
    if (s == "elu") return Activation::elu();
    if (s == "selu") return Activation::selu();
    if (s == "relu") return Activation::relu();
    if (s == "lrelu") return Activation::lrelu();
    if (s == "erf") return Activation::erf();
    throw DomainError("unknown activation '" + std::string(name) + "'");
}

inline double eval(const Activation& act, double z) {
    switch (act.kind) {
        case ActKind::GELU: return z * std_normal_cdf(z);
        case ActKind::ELU:
        case ActKind::SELU: return act.lambda * (z > 0.0 ? z : act.alpha * std::expm1(z));
        case ActKind::ReLU: return z > 0.0 ? z : 0.0;
        case ActKind::LReLU: return z > 0.0 ? z : act.slope * z;
        case ActKind::ERF: return std::erf(z);
    }
    return 0.0;
}

// Derivative; at kinks the right limit is returned.
inline double deriv(const Activation& act, double z) {
    switch (act.kind) {
        case ActKind::GELU: return std_normal_cdf(z) + z * std_normal_pdf(z);
        case ActKind::ELU:
        case ActKind::SELU: return act.lambda * (z >= 0.0 ? 1.0 : act.alpha * std::exp(z));
        case ActKind::ReLU: return z >= 0.0 ? 1.0 : 0.0;
        case ActKind::LReLU: return z >= 0.0 ? 1.0 : act.slope;
        case ActKind::ERF: return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-z * z);
    }
    return 0.0;
}

}  // namespace nnk
