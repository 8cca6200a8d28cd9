// Verification harness, politeness padding, parameter sweeps, randomized
// scenario generation, and empirical dynamics classification.
#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "tipping/attention.hpp"
#include "tipping/errors.hpp"
#include "tipping/geometry.hpp"
#include "tipping/tipping_law.hpp"

namespace tipping {

struct VerificationReport {
    Scenario scenario;
    TippingPrediction prediction;
    std::optional<std::size_t> empirical_tip;
    bool agree = false;
    std::vector<std::string> caveats;
};

inline constexpr const char* kCaveatPromptEnd = "prompt does not end in G";
inline constexpr const char* kCaveatNeutralWon = "a Neutral token won an argmax";
inline constexpr const char* kCaveatBeyondCap = "tip beyond max_iterations";

/// Prediction against brute force. Violated derivation assumptions become
/// caveats, never failures. A predicted tip at or past max_iterations with
/// no empirical tip counts as unverified agreement (caveated), not as a
/// disagreement.
inline VerificationReport verify_prediction(const Scenario& s) {
    VerificationReport rep;
    rep.scenario = s;
    rep.prediction = n_star_exact(s);
    const GenerationTrace trace = generate(s);
    rep.empirical_tip = trace.tip_index;

    if (s.prompt.back() != s.good_index) {
        rep.caveats.push_back(kCaveatPromptEnd);
    }
    for (const auto& step : trace.steps) {
        if (s.vocab[step.chosen].cls == TokenClass::Neutral) {
            rep.caveats.push_back(kCaveatNeutralWon);
            break;
        }
    }

    const auto& pred = rep.prediction.predicted_tip_index;
    const bool unverified = pred.has_value() && *pred >= s.max_iterations &&
                            !rep.empirical_tip.has_value();
    if (unverified) rep.caveats.push_back(kCaveatBeyondCap);

    rep.agree = (pred.has_value() && rep.empirical_tip.has_value() &&
                 *pred == *rep.empirical_tip) ||
                (!pred.has_value() && !rep.empirical_tip.has_value()) ||
                unverified;
    return rep;
}

/// Appends zero components to every vocab embedding. Dot products against
/// anything supported on the new axes are exact zeros, so predictions and
/// traces are unchanged bit for bit.
inline Scenario lift_dimension(const Scenario& s, std::size_t new_dimension) {
    validate(s);
    const std::size_t d = s.vocab.front().embedding.size();
    if (new_dimension < d) {
        throw ValidationError("lift_dimension: new dimension " +
                              std::to_string(new_dimension) +
                              " below current " + std::to_string(d));
    }
    Scenario out = s;
    for (auto& entry : out.vocab) entry.embedding.resize(new_dimension, 0.0);
    return out;
}

/// Inserts `count` Neutral pad tokens, mutually orthogonal and orthogonal to
/// every existing vocabulary embedding, immediately before the final prompt
/// token (so a trailing G stays trailing). Pads join the vocabulary with
/// labels pad1, pad2, ... (existing labels are skipped). count 0 is the
/// identity.
///
/// Orthogonality to G and B alone keeps the law invariant but not the trace:
/// a pad inside the original subspace can overlap a Neutral embedding and
/// hand it the argmax, so pads avoid the whole vocabulary.
inline Scenario politeness_pad(const Scenario& s, std::size_t count,
                               double norm = 1.0) {
    validate(s);
    if (count == 0) return s;
    std::vector<Embedding> anchors;
    anchors.reserve(s.vocab.size());
    for (const auto& entry : s.vocab) anchors.push_back(entry.embedding);
    const std::vector<Embedding> pads = orthogonal_pad(anchors, count, norm);

    Scenario out = s;
    std::unordered_set<std::string> labels;
    for (const auto& entry : out.vocab) labels.insert(entry.label);
    std::vector<std::size_t> pad_indices;
    std::size_t suffix = 1;
    for (const auto& pad : pads) {
        std::string label;
        do {
            label = "pad" + std::to_string(suffix++);
        } while (labels.count(label) != 0);
        pad_indices.push_back(out.vocab.size());
        out.vocab.push_back({label, pad, TokenClass::Neutral});
    }
    out.prompt.insert(out.prompt.end() - 1, pad_indices.begin(),
                      pad_indices.end());
    return out;
}

enum class SweepParameter {
    PScaleAlongG,     // scale P.G of every Neutral token, P.(G-B) held fixed
    BGTarget,         // move B.G to the grid value, numerator held fixed
    GCount,           // number of trailing G prompt tokens
    NeutralPadCount,  // politeness pads inserted before the final token
};

inline const char* to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::PScaleAlongG: return "p_scale_along_g";
        case SweepParameter::BGTarget: return "bg_target";
        case SweepParameter::GCount: return "g_count";
        default: return "neutral_pad_count";
    }
}

struct SweepSpec {
    Scenario base;
    SweepParameter parameter = SweepParameter::PScaleAlongG;
    std::vector<double> grid;  // non-empty, strictly monotone
    bool simulate = true;
    std::optional<std::size_t> max_iterations_override;
};

struct SweepRow {
    double param_value = 0.0;
    double n_star_exact = 0.0;
    double n_star_approx = 0.0;
    Regime regime = Regime::Marginal;
    std::optional<std::size_t> empirical_tip;
    // Row-level failure (unrealizable parameter value); when set the
    // numeric fields above are meaningless and the sweep simply moved on.
    std::optional<std::string> error;
};

namespace detail {

inline std::size_t require_integer_grid_value(double v) {
    const double r = std::round(v);
    if (!(std::fabs(v - r) <= 1e-9) || r < 0.0) {
        throw ValidationError("grid value " + std::to_string(v) +
                              " is not a non-negative integer");
    }
    return static_cast<std::size_t>(r);
}

// P_i' = P_i + t_i u with u orthogonal to (G-B) and t_i chosen so that
// P_i'.G = v * (P_i.G). Every Neutral vocab embedding is rescaled; G, B and
// the prompt layout stay put. v = 1 is the bitwise identity.
inline Scenario realize_p_scale(const Scenario& base, double v) {
    if (v == 1.0) return base;
    const Embedding& G = base.good();
    const Embedding& B = base.bad();
    const std::size_t d = G.size();
    Embedding gmb(d);
    for (std::size_t k = 0; k < d; ++k) gmb[k] = G[k] - B[k];
    const double gmb_sq = dot(gmb, gmb);
    Embedding u = G;
    if (gmb_sq > 0.0) {
        const double c = dot(G, gmb) / gmb_sq;
        for (std::size_t k = 0; k < d; ++k) u[k] -= c * gmb[k];
    }
    const double ug = dot(u, G);
    if (std::fabs(ug) <= 1e-12) {
        throw ValidationError(
            "P.G cannot be varied with P.(G-B) fixed: G lies along G-B");
    }
    Scenario out = base;
    for (auto& entry : out.vocab) {
        if (entry.cls != TokenClass::Neutral) continue;
        const double t = (v - 1.0) * dot(entry.embedding, G) / ug;
        for (std::size_t k = 0; k < d; ++k) entry.embedding[k] += t * u[k];
    }
    return out;
}

// B' = B + delta w with w the component of G orthogonal to the span of the
// non-G prompt embeddings, so every P_i.B (and hence the exact numerator)
// stays fixed while B.G lands on the target.
inline Scenario realize_bg_target(const Scenario& base, double target) {
    const Embedding& G = base.good();
    const Embedding& B = base.bad();
    const std::size_t d = G.size();

    std::vector<Embedding> basis;
    auto project_off = [&](Embedding r) {
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                const double c = dot(r, b);
                for (std::size_t k = 0; k < d; ++k) r[k] -= c * b[k];
            }
        }
        return r;
    };
    for (std::size_t idx : base.prompt) {
        if (idx == base.good_index) continue;
        Embedding r = project_off(base.vocab[idx].embedding);
        const double len = std::sqrt(dot(r, r));
        if (len < 1e-9) continue;
        for (auto& x : r) x /= len;
        basis.push_back(std::move(r));
    }
    const Embedding w = project_off(G);
    const double wg = dot(w, G);
    if (std::fabs(wg) <= 1e-12) {
        throw ValidationError(
            "B.G cannot be varied independently: G lies in the span of the "
            "non-G prompt tokens");
    }
    const double delta = (target - dot(B, G)) / wg;
    Scenario out = base;
    Embedding& b = out.vocab[out.bad_index].embedding;
    for (std::size_t k = 0; k < d; ++k) b[k] = B[k] + delta * w[k];
    return out;
}

// Prompt becomes [non-G tokens of the base prompt, then k G's].
inline Scenario realize_g_count(const Scenario& base, double v) {
    const std::size_t k = require_integer_grid_value(v);
    Scenario out = base;
    out.prompt.clear();
    for (std::size_t idx : base.prompt) {
        if (idx != base.good_index) out.prompt.push_back(idx);
    }
    for (std::size_t i = 0; i < k; ++i) out.prompt.push_back(base.good_index);
    if (out.prompt.empty()) {
        throw ValidationError("g_count 0 would leave an empty prompt");
    }
    return out;
}

inline Scenario realize_pad_count(const Scenario& base, double v) {
    return politeness_pad(base, require_integer_grid_value(v));
}

inline Scenario realize(const Scenario& base, SweepParameter p, double v) {
    switch (p) {
        case SweepParameter::PScaleAlongG: return realize_p_scale(base, v);
        case SweepParameter::BGTarget: return realize_bg_target(base, v);
        case SweepParameter::GCount: return realize_g_count(base, v);
        default: return realize_pad_count(base, v);
    }
}

// Index-claiming worker pool. Bodies must not throw; results are written
// into caller-owned slots so assembly order equals index order.
template <typename Body>
inline void for_each_index(std::size_t count, bool parallel, Body&& body) {
    if (!parallel || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    // At least two workers so single-core hosts still exercise real
    // interleaving.
    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t workers =
        std::min<std::size_t>(hw < 2 ? 2 : hw, count);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count;
                 i = next.fetch_add(1)) {
                body(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Evaluates the tipping law (and optionally the simulator) across the
/// grid. Rows are ordered by grid index no matter how they were executed;
/// unrealizable grid values become row-level error markers and the sweep
/// continues.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                       bool parallel = false) {
    validate(spec.base);
    if (spec.grid.empty()) throw ValidationError("grid", "must be non-empty");
    for (std::size_t i = 2; i < spec.grid.size(); ++i) {
        const double a = spec.grid[i - 1] - spec.grid[i - 2];
        const double b = spec.grid[i] - spec.grid[i - 1];
        if (!(a > 0.0 && b > 0.0) && !(a < 0.0 && b < 0.0)) {
            throw ValidationError("grid", "must be strictly monotone");
        }
    }
    if (spec.grid.size() >= 2 && spec.grid[0] == spec.grid[1]) {
        throw ValidationError("grid", "must be strictly monotone");
    }

    std::vector<SweepRow> rows(spec.grid.size());
    detail::for_each_index(
        spec.grid.size(), parallel, [&](std::size_t i) {
            SweepRow& row = rows[i];
            row.param_value = spec.grid[i];
            try {
                Scenario realized =
                    detail::realize(spec.base, spec.parameter, spec.grid[i]);
                if (spec.max_iterations_override) {
                    realized.max_iterations = *spec.max_iterations_override;
                }
                const TippingPrediction p = n_star_exact(realized);
                row.n_star_exact = p.n_star_exact;
                row.n_star_approx = p.n_star_approx;
                row.regime = p.regime;
                if (spec.simulate) {
                    row.empirical_tip = generate(realized).tip_index;
                }
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        });
    return rows;
}

/// verify_prediction across a batch; parallel execution must not change
/// the result, which the acceptance suite checks byte-for-byte.
inline std::vector<VerificationReport> verify_batch(
    const std::vector<Scenario>& scenarios, bool parallel = false) {
    std::vector<VerificationReport> reports(scenarios.size());
    std::vector<std::exception_ptr> errors(scenarios.size());
    detail::for_each_index(scenarios.size(), parallel, [&](std::size_t i) {
        try {
            reports[i] = verify_prediction(scenarios[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return reports;
}

struct GenerationConstraints {
    std::size_t min_dimension = 2;
    std::size_t max_dimension = 8;
    std::size_t min_neutrals = 1;
    std::size_t max_neutrals = 3;
    std::size_t min_good_count = 1;
    std::size_t max_good_count = 3;
    double component_range = 1.5;  // components drawn from +- this
    double n_star_min = 0.5;
    double n_star_max = 50.0;
    // Robustness margins: how far B.G must clear G.G, and how far n* must
    // sit from the nearest integer, so float noise cannot move the tip.
    double crossover_margin = 1e-2;
    double integer_margin = 1e-3;
    std::size_t max_iterations = 64;
    std::size_t max_attempts = 10000;
};

namespace detail {

// Stable across standard libraries; std::uniform_real_distribution is not.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo,
                                 std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

}  // namespace detail

/// Rejection-samples a clean tipping scenario: B.G clears G.G by the
/// crossover margin, the numerator is positive, the prompt ends in G, n*
/// falls in the requested window away from integers, and the simulated
/// trace never lets a Neutral token win an argmax. Deterministic per seed.
inline Scenario random_scenario(std::uint64_t seed,
                                const GenerationConstraints& c = {}) {
    if (c.min_dimension < 2 || c.max_dimension < c.min_dimension) {
        throw ValidationError("constraints.dimension", "need 2 <= min <= max");
    }
    if (c.min_good_count < 1) {
        throw ValidationError("constraints.good_count",
                              "prompt must end in G, so at least one G");
    }
    std::mt19937_64 rng(seed);

    struct RejectionCounts {
        std::size_t crossover = 0;
        std::size_t numerator = 0;
        std::size_t window = 0;
        std::size_t integer_margin = 0;
        std::size_t tip_cap = 0;
        std::size_t neutral_argmax = 0;
    } rejected;

    for (std::size_t attempt = 0; attempt < c.max_attempts; ++attempt) {
        const std::size_t d =
            detail::uniform_index(rng, c.min_dimension, c.max_dimension);
        const std::size_t n_neutrals =
            detail::uniform_index(rng, c.min_neutrals, c.max_neutrals);
        const std::size_t g =
            detail::uniform_index(rng, c.min_good_count, c.max_good_count);

        auto draw = [&]() {
            Embedding v(d);
            for (auto& x : v) {
                x = detail::uniform(rng, -c.component_range, c.component_range);
            }
            return v;
        };
        Scenario s;
        s.vocab.push_back({"G", draw(), TokenClass::Good});
        s.vocab.push_back({"B", draw(), TokenClass::Bad});
        for (std::size_t i = 0; i < n_neutrals; ++i) {
            s.vocab.push_back({"P" + std::to_string(i + 1), draw(),
                               TokenClass::Neutral});
        }
        s.good_index = 0;
        s.bad_index = 1;
        for (std::size_t i = 0; i < n_neutrals; ++i) s.prompt.push_back(2 + i);
        for (std::size_t i = 0; i < g; ++i) s.prompt.push_back(0);
        s.max_iterations = c.max_iterations;

        if (dot(s.bad(), s.good()) - dot(s.good(), s.good()) <=
            c.crossover_margin) {
            ++rejected.crossover;
            continue;
        }
        const TippingPrediction p = n_star_exact(s);
        if (!(p.numerator > 0.0)) {
            ++rejected.numerator;
            continue;
        }
        if (!(p.n_star_exact >= c.n_star_min &&
              p.n_star_exact <= c.n_star_max)) {
            ++rejected.window;
            continue;
        }
        if (std::fabs(p.n_star_exact - std::round(p.n_star_exact)) <
            c.integer_margin) {
            ++rejected.integer_margin;
            continue;
        }
        if (!p.predicted_tip_index ||
            *p.predicted_tip_index >= c.max_iterations) {
            ++rejected.tip_cap;
            continue;
        }
        const GenerationTrace trace = generate(s);
        bool neutral_won = false;
        for (const auto& step : trace.steps) {
            if (s.vocab[step.chosen].cls == TokenClass::Neutral) {
                neutral_won = true;
                break;
            }
        }
        if (neutral_won) {
            ++rejected.neutral_argmax;
            continue;
        }
        return s;
    }

    // The binding constraint is the deepest gate any attempt reached: every
    // attempt that cleared all earlier gates died there.
    const struct {
        const char* name;
        std::size_t count;
    } stages[] = {
        {"crossover (B.G > G.G + margin)", rejected.crossover},
        {"positive numerator", rejected.numerator},
        {"n_star window", rejected.window},
        {"integer margin", rejected.integer_margin},
        {"predicted tip below max_iterations", rejected.tip_cap},
        {"no neutral argmax win", rejected.neutral_argmax},
    };
    const char* binding = stages[0].name;
    for (const auto& stage : stages) {
        if (stage.count > 0) binding = stage.name;
    }
    throw GenerationFailedError(
        "random_scenario: exhausted " + std::to_string(c.max_attempts) +
            " attempts; binding constraint: " + binding,
        binding);
}

enum class DynamicsLabel { AllGood, TipsToBAbsorbed, BadFromStart, Oscillatory, Other };

inline const char* to_string(DynamicsLabel d) {
    switch (d) {
        case DynamicsLabel::AllGood: return "AllGood";
        case DynamicsLabel::TipsToBAbsorbed: return "TipsToBAbsorbed";
        case DynamicsLabel::BadFromStart: return "BadFromStart";
        case DynamicsLabel::Oscillatory: return "Oscillatory";
        default: return "Other";
    }
}

/// Labels a chosen-class sequence. Oscillation detection is trace-limited:
/// it looks for the smallest period p >= 2 whose periodic suffix covers at
/// least two full periods and is not constant.
inline DynamicsLabel classify_dynamics(const std::vector<TokenClass>& classes) {
    if (classes.empty()) {
        throw ValidationError("classify_dynamics: empty trace");
    }
    const std::size_t n = classes.size();
    bool all_good = true;
    bool all_bad = true;
    for (TokenClass c : classes) {
        all_good = all_good && c == TokenClass::Good;
        all_bad = all_bad && c == TokenClass::Bad;
    }
    if (all_good) return DynamicsLabel::AllGood;
    if (all_bad) return DynamicsLabel::BadFromStart;

    // Good prefix then Bad suffix, both non-empty.
    std::size_t prefix = 0;
    while (prefix < n && classes[prefix] == TokenClass::Good) ++prefix;
    if (prefix > 0) {
        bool rest_bad = true;
        for (std::size_t i = prefix; i < n; ++i) {
            rest_bad = rest_bad && classes[i] == TokenClass::Bad;
        }
        if (rest_bad) return DynamicsLabel::TipsToBAbsorbed;
    }

    for (std::size_t p = 2; p <= n / 2; ++p) {
        // longest p-periodic suffix
        std::size_t start = n - p;
        while (start > 0 && classes[start - 1] == classes[start - 1 + p]) {
            --start;
        }
        const std::size_t tail = n - start;
        if (tail < 2 * p) continue;
        bool constant = true;
        for (std::size_t i = start + 1; i < n; ++i) {
            constant = constant && classes[i] == classes[start];
        }
        if (!constant) return DynamicsLabel::Oscillatory;
    }
    return DynamicsLabel::Other;
}

inline DynamicsLabel classify_dynamics(const GenerationTrace& trace) {
    std::vector<TokenClass> classes;
    classes.reserve(trace.steps.size());
    for (const auto& step : trace.steps) {
        classes.push_back(trace.scenario.vocab[step.chosen].cls);
    }
    return classify_dynamics(classes);
}

}  // namespace tipping
