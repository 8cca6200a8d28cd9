// Closed-form tipping-point evaluation: the exact law, its net-vector
// approximation, regime classification, and the integer tip prediction.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "tipping/attention.hpp"
#include "tipping/geometry.hpp"

namespace tipping {

// |B.G - G.G| at or below this is treated as no crossover at all.
inline constexpr double kMarginalTolerance = 1e-12;

enum class Regime { TipsToB, BadFromOutset, StableG, Marginal };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::TipsToB: return "TipsToB";
        case Regime::BadFromOutset: return "BadFromOutset";
        case Regime::StableG: return "StableG";
        default: return "Marginal";
    }
}

// How the approximation collapses the non-G prompt tokens into one vector.
enum class NetMode { Sum, Mean };

struct TippingPrediction {
    double n_star_exact = 0.0;   // iterations; +inf sentinel when Marginal
    double n_star_approx = 0.0;  // Sum-mode approximation
    double numerator = 0.0;
    double denominator = 0.0;
    std::size_t g = 0;  // prompt positions holding the Good token
    Regime regime = Regime::Marginal;
    std::optional<std::size_t> predicted_tip_index;
};

/// Integer tip semantics: first iteration whose argmax goes to B. Ceil of
/// n* in the tipping regime (exact integers map to themselves because ties
/// break toward B), 0 when bad from the outset, absent otherwise.
inline std::optional<std::size_t> predicted_tip_index(
    const TippingPrediction& p) {
    switch (p.regime) {
        case Regime::TipsToB: {
            const double c = std::ceil(p.n_star_exact);
            if (c >= static_cast<double>(std::numeric_limits<std::size_t>::max())) {
                return std::numeric_limits<std::size_t>::max();
            }
            return static_cast<std::size_t>(c);
        }
        case Regime::BadFromOutset:
            return 0;
        default:
            return std::nullopt;
    }
}

/// Net-vector approximation. Non-G prompt embeddings are collapsed to
/// P_net (componentwise sum, or mean), then
///   n* ~ exp[(P_net - G).G] * [P_net.(G - B)] / [G.(B - G)] - g.
/// With no non-G prompt token the sum is empty and the value is -g; a zero
/// denominator yields the +infinity sentinel.
inline double n_star_approx(const Scenario& s, NetMode mode = NetMode::Sum) {
    validate(s);
    const Embedding& G = s.good();
    const Embedding& B = s.bad();
    const std::size_t d = G.size();
    const double g = static_cast<double>(good_count(s));

    Embedding p_net(d, 0.0);
    std::size_t non_g = 0;
    for (std::size_t idx : s.prompt) {
        if (idx == s.good_index) continue;
        const Embedding& p = s.vocab[idx].embedding;
        for (std::size_t k = 0; k < d; ++k) p_net[k] += p[k];
        ++non_g;
    }
    if (non_g == 0) return -g;
    if (mode == NetMode::Mean) {
        for (auto& x : p_net) x /= static_cast<double>(non_g);
    }

    Embedding g_minus_b(d), b_minus_g(d), p_minus_g(d);
    for (std::size_t k = 0; k < d; ++k) {
        g_minus_b[k] = G[k] - B[k];
        b_minus_g[k] = B[k] - G[k];
        p_minus_g[k] = p_net[k] - G[k];
    }
    const double den = dot(G, b_minus_g);
    if (std::fabs(den) <= kMarginalTolerance) {
        return std::numeric_limits<double>::infinity();
    }
    return std::exp(dot(p_minus_g, G)) * dot(p_net, g_minus_b) / den - g;
}

/// Exact closed-form evaluation. The numerator sums exp(P_i.G) * P_i over
/// every prompt position whose token differs from the designated Good token
/// (Bad and Neutral alike; the index is token identity, not class), then
/// dots with G - B. The denominator is exp(G.G) * [G.(B - G)].
inline TippingPrediction n_star_exact(const Scenario& s) {
    validate(s);
    const Embedding& G = s.good();
    const Embedding& B = s.bad();
    const std::size_t d = G.size();

    TippingPrediction out;
    out.g = good_count(s);

    Embedding sum(d, 0.0);
    for (std::size_t idx : s.prompt) {
        if (idx == s.good_index) continue;
        const Embedding& p = s.vocab[idx].embedding;
        const double w = std::exp(dot(p, G));
        for (std::size_t k = 0; k < d; ++k) sum[k] += w * p[k];
    }
    Embedding g_minus_b(d), b_minus_g(d);
    for (std::size_t k = 0; k < d; ++k) {
        g_minus_b[k] = G[k] - B[k];
        b_minus_g[k] = B[k] - G[k];
    }
    out.numerator = dot(sum, g_minus_b);
    out.denominator = std::exp(dot(G, G)) * dot(G, b_minus_g);
    out.n_star_approx = n_star_approx(s, NetMode::Sum);

    const double crossover = dot(B, G) - dot(G, G);
    if (std::fabs(crossover) <= kMarginalTolerance) {
        out.regime = Regime::Marginal;
        out.n_star_exact = std::numeric_limits<double>::infinity();
    } else {
        out.n_star_exact =
            out.numerator / out.denominator - static_cast<double>(out.g);
        if (out.denominator > 0.0) {
            out.regime = out.n_star_exact > 0.0 ? Regime::TipsToB
                                                : Regime::BadFromOutset;
        } else {
            out.regime = Regime::StableG;
        }
    }
    out.predicted_tip_index = predicted_tip_index(out);
    return out;
}

inline Regime classify_regime(const Scenario& s) {
    return n_star_exact(s).regime;
}

}  // namespace tipping
