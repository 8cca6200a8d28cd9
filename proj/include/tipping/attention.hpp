// Single self-attention head with identity Key/Query/Value maps, greedy
// zero-temperature decoding, and full trace recording.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "tipping/errors.hpp"
#include "tipping/geometry.hpp"

namespace tipping {

// Score ties within this absolute band resolve toward the Bad class, then
// the lowest vocab index. At an exact crossover B must win so the empirical
// tip equals ceil(n*) even when n* lands on an integer.
inline constexpr double kArgmaxTieTolerance = 1e-12;

enum class TokenClass { Good, Bad, Neutral };

inline const char* to_string(TokenClass c) {
    switch (c) {
        case TokenClass::Good: return "Good";
        case TokenClass::Bad: return "Bad";
        default: return "Neutral";
    }
}

struct VocabEntry {
    std::string label;
    Embedding embedding;
    TokenClass cls = TokenClass::Neutral;
};

struct Scenario {
    std::vector<VocabEntry> vocab;
    std::vector<std::size_t> prompt;  // indices into vocab
    std::size_t good_index = 0;
    std::size_t bad_index = 0;
    std::size_t max_iterations = 200;

    const Embedding& good() const { return vocab[good_index].embedding; }
    const Embedding& bad() const { return vocab[bad_index].embedding; }
};

inline void validate(const Scenario& s) {
    if (s.vocab.empty()) throw ValidationError("vocab", "must be non-empty");
    const std::size_t d = s.vocab.front().embedding.size();
    if (d < 1) throw ValidationError("vocab[0].embedding", "dimension must be >= 1");
    std::unordered_set<std::string> labels;
    for (std::size_t i = 0; i < s.vocab.size(); ++i) {
        const auto& e = s.vocab[i];
        const std::string base = "vocab[" + std::to_string(i) + "]";
        if (e.label.empty()) throw ValidationError(base + ".label", "must be non-empty");
        if (!labels.insert(e.label).second) {
            throw ValidationError(base + ".label", "duplicate label '" + e.label + "'");
        }
        if (e.embedding.size() != d) {
            throw ValidationError(base + ".embedding",
                                  "dimension " + std::to_string(e.embedding.size()) +
                                      " differs from " + std::to_string(d));
        }
        if (!all_finite(e.embedding)) {
            throw ValidationError(base + ".embedding", "non-finite component");
        }
    }
    if (s.good_index >= s.vocab.size()) {
        throw ValidationError("good_index", "out of range");
    }
    if (s.bad_index >= s.vocab.size()) {
        throw ValidationError("bad_index", "out of range");
    }
    if (s.good_index == s.bad_index) {
        throw ValidationError("bad_index", "must differ from good_index");
    }
    for (std::size_t i = 0; i < s.vocab.size(); ++i) {
        const TokenClass expect = i == s.good_index   ? TokenClass::Good
                                  : i == s.bad_index ? TokenClass::Bad
                                                     : TokenClass::Neutral;
        if (s.vocab[i].cls != expect) {
            throw ValidationError("vocab[" + std::to_string(i) + "].class",
                                  std::string("expected ") + to_string(expect) +
                                      ", got " + to_string(s.vocab[i].cls));
        }
    }
    if (s.prompt.empty()) throw ValidationError("prompt", "must be non-empty");
    for (std::size_t i = 0; i < s.prompt.size(); ++i) {
        if (s.prompt[i] >= s.vocab.size()) {
            throw ValidationError("prompt[" + std::to_string(i) + "]",
                                  "vocab index out of range");
        }
    }
}

/// g of the tipping law: prompt positions holding the designated Good token.
inline std::size_t good_count(const Scenario& s) {
    std::size_t g = 0;
    for (std::size_t idx : s.prompt) {
        if (idx == s.good_index) ++g;
    }
    return g;
}

struct StepRecord {
    std::size_t iteration = 0;
    std::vector<double> attention_weights;  // over current sequence positions
    Embedding context;                      // c_n
    std::vector<double> vocab_scores;       // c_n . e_t per vocab entry
    std::size_t chosen = 0;                 // vocab index
};

struct GenerationTrace {
    Scenario scenario;
    std::vector<StepRecord> steps;
    // Count of generated tokens before the first Bad-class choice; absent if
    // no Bad token was chosen within max_iterations.
    std::optional<std::size_t> tip_index;
};

/// Max-shifted row softmax. Strictly positive, sums to 1 within 1e-12,
/// invariant under adding a constant to every score.
inline std::vector<double> softmax_row(const std::vector<double>& scores) {
    if (scores.empty()) throw ValidationError("softmax_row: empty input");
    double max = scores.front();
    for (double s : scores) {
        if (!std::isfinite(s)) throw ValidationError("softmax_row: non-finite score");
        max = std::max(max, s);
    }
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        out[k] = std::exp(scores[k] - max);
        sum += out[k];
    }
    for (auto& w : out) w /= sum;
    return out;
}

/// Attention read-out with identity Key/Query/Value and no score scaling:
/// c = sum_j softmax(query . seq_j) * seq_j.
inline Embedding context_vector(const std::vector<Embedding>& sequence,
                                const Embedding& query) {
    if (sequence.empty()) {
        throw ValidationError("context_vector: empty sequence");
    }
    std::vector<double> scores(sequence.size());
    for (std::size_t j = 0; j < sequence.size(); ++j) {
        scores[j] = dot(query, sequence[j]);
    }
    const std::vector<double> weights = softmax_row(scores);
    Embedding c(query.size(), 0.0);
    for (std::size_t j = 0; j < sequence.size(); ++j) {
        for (std::size_t k = 0; k < c.size(); ++k) {
            c[k] += weights[j] * sequence[j][k];
        }
    }
    return c;
}

namespace detail {

// Argmax under the tie rule: within kArgmaxTieTolerance of the maximum,
// prefer the Bad class, then the lowest vocab index.
inline std::size_t choose_token(const std::vector<double>& vocab_scores,
                                const std::vector<VocabEntry>& vocab) {
    double best = vocab_scores.front();
    for (double s : vocab_scores) best = std::max(best, s);
    std::size_t first_in_band = vocab_scores.size();
    for (std::size_t k = 0; k < vocab_scores.size(); ++k) {
        if (best - vocab_scores[k] <= kArgmaxTieTolerance) {
            if (vocab[k].cls == TokenClass::Bad) return k;
            if (first_in_band == vocab_scores.size()) first_in_band = k;
        }
    }
    return first_in_band;
}

}  // namespace detail

/// One greedy decoding step: query is the last sequence token's embedding,
/// context is read over the whole sequence, every vocab entry is scored.
inline StepRecord decode_step(const Scenario& scenario,
                              const std::vector<std::size_t>& sequence,
                              std::size_t iteration) {
    if (sequence.empty()) throw ValidationError("decode_step: empty sequence");
    std::vector<Embedding> embeddings;
    embeddings.reserve(sequence.size());
    for (std::size_t idx : sequence) {
        if (idx >= scenario.vocab.size()) {
            throw ValidationError("decode_step: sequence index out of range");
        }
        embeddings.push_back(scenario.vocab[idx].embedding);
    }
    const Embedding& query = embeddings.back();

    StepRecord rec;
    rec.iteration = iteration;
    std::vector<double> scores(embeddings.size());
    for (std::size_t j = 0; j < embeddings.size(); ++j) {
        scores[j] = dot(query, embeddings[j]);
    }
    rec.attention_weights = softmax_row(scores);
    rec.context.assign(query.size(), 0.0);
    for (std::size_t j = 0; j < embeddings.size(); ++j) {
        for (std::size_t k = 0; k < rec.context.size(); ++k) {
            rec.context[k] += rec.attention_weights[j] * embeddings[j][k];
        }
    }
    rec.vocab_scores.resize(scenario.vocab.size());
    for (std::size_t t = 0; t < scenario.vocab.size(); ++t) {
        rec.vocab_scores[t] = dot(rec.context, scenario.vocab[t].embedding);
    }
    rec.chosen = detail::choose_token(rec.vocab_scores, scenario.vocab);
    return rec;
}

/// Full autoregressive loop. Runs all max_iterations steps (generation does
/// not stop at the tip; the post-tip tail is what absorption claims are
/// about). tip_index is the iteration of the first Bad-class choice.
inline GenerationTrace generate(const Scenario& scenario) {
    validate(scenario);
    GenerationTrace trace;
    trace.scenario = scenario;
    std::vector<std::size_t> sequence = scenario.prompt;
    for (std::size_t n = 0; n < scenario.max_iterations; ++n) {
        StepRecord rec = decode_step(scenario, sequence, n);
        sequence.push_back(rec.chosen);
        if (!trace.tip_index &&
            scenario.vocab[rec.chosen].cls == TokenClass::Bad) {
            trace.tip_index = n;
        }
        trace.steps.push_back(std::move(rec));
    }
    return trace;
}

}  // namespace tipping
