// Acceptance gate: every release-blocking behavior, one line of output each.
// Runs without a test framework so the pass/fail report stays greppable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scenario_util.hpp"
#include "test_util.hpp"
#include "tipping/experiments.hpp"
#include "tipping/io.hpp"

using tipping::GenerationTrace;
using tipping::Scenario;
using tipping::SweepRow;
using tipping::TippingPrediction;

namespace {

int g_failures = 0;

// Traces accumulated by the scenario-level checks; the attention-weight
// criterion runs over all of them at the end.
std::vector<GenerationTrace> g_traces;

void report(int index, const std::string& name, bool pass,
            const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << index << ". " << name
              << ": " << detail << "\n";
    if (!pass) ++g_failures;
}

// --- 1. prediction matches simulation across the generator's range --------

std::vector<Scenario> g_oracle_scenarios;

void criterion_oracle_agreement() {
    const auto start = std::chrono::steady_clock::now();
    std::size_t agreed = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        Scenario s = tipping::random_scenario(seed);
        g_oracle_scenarios.push_back(s);
        const TippingPrediction p = tipping::n_star_exact(s);
        const GenerationTrace trace = tipping::generate(s);
        g_traces.push_back(trace);
        if (p.predicted_tip_index && trace.tip_index &&
            *p.predicted_tip_index == *trace.tip_index) {
            ++agreed;
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::ostringstream detail;
    detail << agreed << "/200 seeds agree, " << secs << "s";
    report(1, "oracle agreement over 200 generated scenarios",
           agreed == 200 && secs < 10.0, detail.str());
}

// --- 2. integer crossing ---------------------------------------------------

// Eight copies of P = (0.5, y) before the final G; closed form
// n* = 40 e^{-0.5} (y - 0.1) - 1, strictly increasing in y.
Scenario integer_crossing_scenario(double y) {
    std::vector<tipping::Embedding> neutrals = {{0.5, y}};
    std::vector<std::size_t> prompt(8, 2);
    prompt.push_back(0);
    return testutil::make_scenario({1.0, 0.0}, {1.2, -1.0}, neutrals, prompt,
                                   20);
}

void criterion_integer_crossing() {
    double lo = 0.4;  // n* ~ 6.3
    double hi = 0.7;  // n* ~ 13.6
    const auto n_star = [](double y) {
        return tipping::n_star_exact(integer_crossing_scenario(y)).n_star_exact;
    };
    // Bisect until the bracket collapses to adjacent doubles, keeping the
    // lower endpoint on the n* <= 10 side so ceil(n*) stays at 10.
    while (true) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid == lo || mid == hi) break;
        (n_star(mid) <= 10.0 ? lo : hi) = mid;
    }
    const Scenario s = integer_crossing_scenario(lo);
    const TippingPrediction p = tipping::n_star_exact(s);
    const GenerationTrace trace = tipping::generate(s);
    g_traces.push_back(trace);

    const bool at_ten = std::fabs(p.n_star_exact - 10.0) <= 1e-9 &&
                        p.n_star_exact <= 10.0;
    const bool tipped_at_ten = trace.tip_index && *trace.tip_index == 10 &&
                               p.predicted_tip_index &&
                               *p.predicted_tip_index == 10;
    std::ostringstream detail;
    detail << "n* = " << p.n_star_exact << ", tip = "
           << (trace.tip_index ? std::to_string(*trace.tip_index) : "none");
    report(2, "constructed integer crossing n* = 10 tips at 10",
           at_ten && tipped_at_ten, detail.str());
}

// --- 3. approximate law collapses to the exact one for a single neutral ----

void criterion_single_neutral_equivalence() {
    tipping::GenerationConstraints c;
    c.min_neutrals = 1;
    c.max_neutrals = 1;
    double worst = 0.0;
    for (std::uint64_t seed = 3000; seed < 3100; ++seed) {
        const Scenario s = tipping::random_scenario(seed, c);
        const TippingPrediction p = tipping::n_star_exact(s);
        const double rel = std::fabs(p.n_star_approx - p.n_star_exact) /
                           std::fabs(p.n_star_exact);
        worst = std::max(worst, rel);
    }
    std::ostringstream detail;
    detail << "worst relative difference " << worst << " over 100 scenarios";
    report(3, "single-neutral approximate law equals the exact law",
           worst <= 1e-12, detail.str());
}

// --- 4. orthogonal pads leave the law and the trace alone ------------------

void criterion_pad_invariance() {
    std::size_t clean = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        const Scenario s = tipping::random_scenario(4000 + i);
        const std::size_t pads = 1 + i % 10;
        const std::size_t dim = s.vocab[0].embedding.size();
        // Pads must avoid the whole vocabulary, so the lift adds one fresh
        // axis per pad (two suffices only up to two pads). A pad's own score
        // is below norm^2; 0.1 keeps that under every pre-tip winning score
        // here (minimum 0.043), so pads can never take an argmax.
        const Scenario lifted =
            tipping::lift_dimension(s, dim + std::max<std::size_t>(2, pads));
        const Scenario padded = tipping::politeness_pad(lifted, pads, 0.1);

        const double base_n = tipping::n_star_exact(s).n_star_exact;
        const double padded_n = tipping::n_star_exact(padded).n_star_exact;
        worst = std::max(worst, std::fabs(padded_n - base_n));

        const GenerationTrace base_trace = tipping::generate(s);
        const GenerationTrace padded_trace = tipping::generate(padded);
        g_traces.push_back(base_trace);
        g_traces.push_back(padded_trace);
        if (std::fabs(padded_n - base_n) <= 1e-12 && base_trace.tip_index &&
            padded_trace.tip_index &&
            *base_trace.tip_index == *padded_trace.tip_index) {
            ++clean;
        }
    }
    std::ostringstream detail;
    detail << clean << "/50 unchanged, worst |delta n*| = " << worst;
    report(4, "1-10 orthogonal pads leave n* and the tip unchanged",
           clean == 50, detail.str());
}

// --- 5. all-good prompts with the crossover already crossed ----------------

void criterion_bad_from_outset() {
    std::size_t immediate = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        std::mt19937_64 rng(5000 + i);
        Scenario s;
        for (std::size_t attempt = 0; attempt < 1000; ++attempt) {
            const std::size_t d = testutil::uniform_index(rng, 2, 6);
            const auto good = testutil::random_vector(rng, d, -1.5, 1.5);
            const auto bad = testutil::random_vector(rng, d, -1.5, 1.5);
            const auto p1 = testutil::random_vector(rng, d, -1.5, 1.5);
            const auto p2 = testutil::random_vector(rng, d, -1.5, 1.5);
            const double bg = tipping::dot(bad, good);
            const double gg = tipping::dot(good, good);
            if (bg - gg < 1e-2) continue;
            // Neutrals must not outscore B at the first step, where the
            // context is exactly G.
            if (tipping::dot(p1, good) > bg - 1e-2) continue;
            if (tipping::dot(p2, good) > bg - 1e-2) continue;
            const std::size_t g = 1 + i % 4;
            s = testutil::make_scenario(good, bad, {p1, p2},
                                        std::vector<std::size_t>(g, 0), 8);
            break;
        }
        const TippingPrediction p = tipping::n_star_exact(s);
        const GenerationTrace trace = tipping::generate(s);
        g_traces.push_back(trace);
        const double g = static_cast<double>(tipping::good_count(s));
        if (trace.tip_index && *trace.tip_index == 0 &&
            trace.steps[0].chosen == s.bad_index &&
            p.regime == tipping::Regime::BadFromOutset &&
            p.n_star_exact == -g) {
            ++immediate;
        }
    }
    report(5, "crossed-over all-good prompts emit Bad first", immediate == 50,
           std::to_string(immediate) + "/50 first tokens Bad");
}

// --- 6. stable region never emits Bad ---------------------------------------

void criterion_stable_region() {
    std::size_t stable = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        std::mt19937_64 rng(6000 + i);
        std::optional<GenerationTrace> trace;
        for (std::size_t attempt = 0; attempt < 1000 && !trace; ++attempt) {
            const std::size_t d = testutil::uniform_index(rng, 2, 6);
            const auto good = testutil::random_vector(rng, d, -1.5, 1.5);
            const auto bad = testutil::random_vector(rng, d, -1.5, 1.5);
            const auto p1 = testutil::random_vector(rng, d, -1.5, 1.5);
            const auto p2 = testutil::random_vector(rng, d, -1.5, 1.5);
            const double gg = tipping::dot(good, good);
            if (tipping::dot(bad, good) > gg - 1e-2) continue;
            if (tipping::dot(p1, good) > gg - 1e-2) continue;
            if (tipping::dot(p2, good) > gg - 1e-2) continue;
            std::vector<std::size_t> prompt;
            const std::size_t neutral_positions = i % 3;
            for (std::size_t k = 0; k < neutral_positions; ++k) {
                prompt.push_back(2 + testutil::uniform_index(rng, 0, 1));
            }
            const std::size_t g = 1 + i % 3;
            for (std::size_t k = 0; k < g; ++k) prompt.push_back(0);
            Scenario s =
                testutil::make_scenario(good, bad, {p1, p2}, prompt, 200);
            GenerationTrace t = tipping::generate(s);
            // population filter, not an assertion: the claim is conditioned
            // on the first generated token being Good
            if (t.steps[0].chosen != s.good_index) continue;
            trace = std::move(t);
        }
        if (!trace) continue;
        g_traces.push_back(*trace);
        if (!trace->tip_index) ++stable;
    }
    report(6, "stable-region scenarios emit no Bad within 200 iterations",
           stable == 50, std::to_string(stable) + "/50 stayed clean");
}

// --- 7. attention rows are stochastic and prompt weights only dilute -------

void criterion_attention_dilution() {
    std::size_t bad_sums = 0;
    std::size_t increases = 0;
    std::size_t rows = 0;
    for (const GenerationTrace& trace : g_traces) {
        const std::size_t prompt_size = trace.scenario.prompt.size();
        // Weight rows keep the pre-tip shape through the step that emits the
        // first Bad token; later rows answer to a different query.
        const std::size_t last_step =
            trace.tip_index ? *trace.tip_index : trace.steps.size();
        for (const auto& step : trace.steps) {
            double sum = 0.0;
            for (double w : step.attention_weights) sum += w;
            ++rows;
            if (std::fabs(sum - 1.0) > 1e-12) ++bad_sums;
        }
        for (std::size_t k = 0; k + 1 < trace.steps.size() && k + 1 <= last_step;
             ++k) {
            const auto& prev = trace.steps[k].attention_weights;
            const auto& next = trace.steps[k + 1].attention_weights;
            for (std::size_t j = 0; j < prompt_size; ++j) {
                if (next[j] > prev[j] + 1e-12) ++increases;
            }
        }
    }
    std::ostringstream detail;
    detail << g_traces.size() << " traces, " << rows << " rows, " << bad_sums
           << " bad sums, " << increases << " weight increases";
    report(7, "attention rows sum to 1 and prompt weights never grow pre-tip",
           !g_traces.empty() && bad_sums == 0 && increases == 0, detail.str());
}

// --- 8. each extra G in the prompt delays the tip by exactly one -----------

void criterion_g_slope() {
    tipping::SweepSpec spec;
    spec.base = testutil::make_scenario({1.0, 0.0}, {1.2, -1.0}, {{0.5, 3.0}},
                                        {2, 0}, 64);
    spec.parameter = tipping::SweepParameter::GCount;
    spec.grid = {0, 1, 2, 3, 4, 5};
    spec.simulate = false;
    const auto rows = tipping::run_sweep(spec);
    bool ok = rows.size() == 6;
    double worst = 0.0;
    for (std::size_t i = 1; ok && i < rows.size(); ++i) {
        const double step = rows[i].n_star_exact - rows[i - 1].n_star_exact;
        worst = std::max(worst, std::fabs(step + 1.0));
        if (std::fabs(step + 1.0) > 1e-12) ok = false;
    }
    std::ostringstream detail;
    detail << "worst |step + 1| = " << worst;
    report(8, "g sweep 0..5 steps n* by exactly -1", ok, detail.str());
}

// --- 9. concurrency cannot change the emitted bytes ------------------------

std::string oracle_csv(bool parallel) {
    const auto reports = tipping::verify_batch(g_oracle_scenarios, parallel);
    std::vector<SweepRow> rows(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        rows[i].param_value = static_cast<double>(i + 1);  // the seed
        rows[i].n_star_exact = reports[i].prediction.n_star_exact;
        rows[i].n_star_approx = reports[i].prediction.n_star_approx;
        rows[i].regime = reports[i].prediction.regime;
        rows[i].empirical_tip = reports[i].empirical_tip;
    }
    return tipping::io::emit_sweep_csv(rows);
}

void criterion_concurrency_determinism() {
    const std::string serial = oracle_csv(false);
    const std::string parallel = oracle_csv(true);
    std::ostringstream detail;
    detail << serial.size() << " bytes, "
           << (serial == parallel ? "identical" : "DIFFER");
    report(9, "criterion-1 CSV is byte-identical with and without concurrency",
           !serial.empty() && serial == parallel, detail.str());
}

}  // namespace

int main() {
    criterion_oracle_agreement();
    criterion_integer_crossing();
    criterion_single_neutral_equivalence();
    criterion_pad_invariance();
    criterion_bad_from_outset();
    criterion_stable_region();
    criterion_attention_dilution();
    criterion_g_slope();
    criterion_concurrency_determinism();
    if (g_failures != 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
