// Interchange formats: scenario documents, trace and report JSON, Gram
// matrix input, and plot-ready sweep CSV. All number rendering is
// locale-independent and round-trips 64-bit floats exactly.
#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "tipping/attention.hpp"
#include "tipping/errors.hpp"
#include "tipping/experiments.hpp"
#include "tipping/geometry.hpp"
#include "tipping/tipping_law.hpp"

namespace tipping::io {

using json = nlohmann::json;

inline std::string format_real(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v,
                                   std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_real(const std::string& text, const std::string& path) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ValidationError(path, "not a number: '" + text + "'");
    }
    return v;
}

namespace detail {

// JSON numbers cannot be infinite; the sentinel becomes the string "inf".
inline json real_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline double real_from_json(const json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return parse_real(j.get<std::string>(), path);
    throw ValidationError(path, "expected a number");
}

inline const json& require(const json& j, const char* key,
                           const std::string& parent) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw ValidationError(parent.empty() ? key : parent + "." + key,
                              "missing field");
    }
    return *it;
}

inline json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("malformed JSON at byte " + std::to_string(e.byte) +
                         ": " + e.what());
    }
}

inline void check_version(const json& j) {
    if (j.contains("version") && j["version"] != 1) {
        throw ValidationError("version", "unsupported (expected 1)");
    }
}

inline TokenClass class_from_string(const std::string& s,
                                    const std::string& path) {
    if (s == "good") return TokenClass::Good;
    if (s == "bad") return TokenClass::Bad;
    if (s == "neutral") return TokenClass::Neutral;
    throw ValidationError(path, "unknown class '" + s +
                                    "' (expected good, bad, or neutral)");
}

inline const char* class_to_string(TokenClass c) {
    switch (c) {
        case TokenClass::Good: return "good";
        case TokenClass::Bad: return "bad";
        default: return "neutral";
    }
}

inline Regime regime_from_string(const std::string& s,
                                 const std::string& path) {
    if (s == "TipsToB") return Regime::TipsToB;
    if (s == "BadFromOutset") return Regime::BadFromOutset;
    if (s == "StableG") return Regime::StableG;
    if (s == "Marginal") return Regime::Marginal;
    throw ValidationError(path, "unknown regime '" + s + "'");
}

inline SweepParameter sweep_parameter_from_string(const std::string& s,
                                                  const std::string& path) {
    if (s == "p_scale_along_g") return SweepParameter::PScaleAlongG;
    if (s == "bg_target") return SweepParameter::BGTarget;
    if (s == "g_count") return SweepParameter::GCount;
    if (s == "neutral_pad_count") return SweepParameter::NeutralPadCount;
    throw ValidationError(
        path, "unknown parameter '" + s +
                  "' (expected p_scale_along_g, bg_target, g_count, or "
                  "neutral_pad_count)");
}

}  // namespace detail

inline json scenario_to_json(const Scenario& s) {
    json tokens = json::array();
    for (const auto& entry : s.vocab) {
        tokens.push_back({{"label", entry.label},
                          {"class", detail::class_to_string(entry.cls)},
                          {"vector", entry.embedding}});
    }
    json prompt = json::array();
    for (std::size_t idx : s.prompt) prompt.push_back(s.vocab[idx].label);
    return json{{"version", 1},
                {"dimension", s.vocab.front().embedding.size()},
                {"tokens", tokens},
                {"prompt", prompt},
                {"good", s.vocab[s.good_index].label},
                {"bad", s.vocab[s.bad_index].label},
                {"max_iterations", s.max_iterations}};
}

inline Scenario scenario_from_json(const json& doc) {
    if (!doc.is_object()) {
        throw ValidationError("document", "must be a JSON object");
    }
    detail::check_version(doc);
    const json& jdim = detail::require(doc, "dimension", "");
    if (!jdim.is_number_integer() || jdim.get<long long>() < 1) {
        throw ValidationError("dimension", "must be a positive integer");
    }
    const std::size_t d = jdim.get<std::size_t>();

    const json& jtokens = detail::require(doc, "tokens", "");
    if (!jtokens.is_array() || jtokens.empty()) {
        throw ValidationError("tokens", "must be a non-empty array");
    }
    Scenario s;
    for (std::size_t i = 0; i < jtokens.size(); ++i) {
        const std::string base = "tokens[" + std::to_string(i) + "]";
        const json& jt = jtokens[i];
        if (!jt.is_object()) throw ValidationError(base, "must be an object");
        const json& jlabel = detail::require(jt, "label", base);
        if (!jlabel.is_string()) {
            throw ValidationError(base + ".label", "must be a string");
        }
        const json& jclass = detail::require(jt, "class", base);
        if (!jclass.is_string()) {
            throw ValidationError(base + ".class", "must be a string");
        }
        const json& jvec = detail::require(jt, "vector", base);
        if (!jvec.is_array() || jvec.size() != d) {
            throw ValidationError(base + ".vector",
                                  "must be an array of length " +
                                      std::to_string(d));
        }
        VocabEntry entry;
        entry.label = jlabel.get<std::string>();
        entry.cls = detail::class_from_string(jclass.get<std::string>(),
                                              base + ".class");
        for (std::size_t k = 0; k < d; ++k) {
            if (!jvec[k].is_number()) {
                throw ValidationError(base + ".vector[" + std::to_string(k) +
                                          "]",
                                      "must be a number");
            }
            entry.embedding.push_back(jvec[k].get<double>());
        }
        s.vocab.push_back(std::move(entry));
    }

    auto find_label = [&](const std::string& label,
                          const std::string& path) -> std::size_t {
        for (std::size_t i = 0; i < s.vocab.size(); ++i) {
            if (s.vocab[i].label == label) return i;
        }
        throw ValidationError(path, "unknown label '" + label + "'");
    };

    const json& jgood = detail::require(doc, "good", "");
    if (!jgood.is_string()) throw ValidationError("good", "must be a label");
    s.good_index = find_label(jgood.get<std::string>(), "good");
    const json& jbad = detail::require(doc, "bad", "");
    if (!jbad.is_string()) throw ValidationError("bad", "must be a label");
    s.bad_index = find_label(jbad.get<std::string>(), "bad");

    const json& jprompt = detail::require(doc, "prompt", "");
    if (!jprompt.is_array()) {
        throw ValidationError("prompt", "must be an array of labels");
    }
    for (std::size_t i = 0; i < jprompt.size(); ++i) {
        const std::string path = "prompt[" + std::to_string(i) + "]";
        if (!jprompt[i].is_string()) {
            throw ValidationError(path, "must be a label");
        }
        s.prompt.push_back(find_label(jprompt[i].get<std::string>(), path));
    }

    if (doc.contains("max_iterations")) {
        const json& jmi = doc["max_iterations"];
        if (!jmi.is_number_integer() || jmi.get<long long>() < 0) {
            throw ValidationError("max_iterations",
                                  "must be a non-negative integer");
        }
        s.max_iterations = jmi.get<std::size_t>();
    }

    validate(s);
    return s;
}

inline Scenario parse_scenario(const std::string& text) {
    return scenario_from_json(detail::parse_json(text));
}

inline Scenario parse_scenario(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

inline std::string serialize_scenario(const Scenario& s) {
    validate(s);
    return scenario_to_json(s).dump(2) + "\n";
}

inline std::string emit_trace_json(const GenerationTrace& trace) {
    json steps = json::array();
    for (const auto& rec : trace.steps) {
        steps.push_back({{"iteration", rec.iteration},
                         {"attention_weights", rec.attention_weights},
                         {"context", rec.context},
                         {"vocab_scores", rec.vocab_scores},
                         {"chosen", trace.scenario.vocab[rec.chosen].label}});
    }
    json out{{"version", 1},
             {"scenario", scenario_to_json(trace.scenario)},
             {"steps", steps}};
    out["tip_index"] =
        trace.tip_index ? json(*trace.tip_index) : json(nullptr);
    return out.dump(2) + "\n";
}

inline GenerationTrace parse_trace_json(const std::string& text) {
    const json doc = detail::parse_json(text);
    detail::check_version(doc);
    GenerationTrace trace;
    trace.scenario =
        scenario_from_json(detail::require(doc, "scenario", ""));
    const json& jsteps = detail::require(doc, "steps", "");
    if (!jsteps.is_array()) throw ValidationError("steps", "must be an array");
    for (std::size_t i = 0; i < jsteps.size(); ++i) {
        const std::string base = "steps[" + std::to_string(i) + "]";
        const json& js = jsteps[i];
        StepRecord rec;
        rec.iteration = detail::require(js, "iteration", base).get<std::size_t>();
        rec.attention_weights = detail::require(js, "attention_weights", base)
                                    .get<std::vector<double>>();
        rec.context =
            detail::require(js, "context", base).get<std::vector<double>>();
        rec.vocab_scores = detail::require(js, "vocab_scores", base)
                               .get<std::vector<double>>();
        const std::string label =
            detail::require(js, "chosen", base).get<std::string>();
        bool found = false;
        for (std::size_t t = 0; t < trace.scenario.vocab.size(); ++t) {
            if (trace.scenario.vocab[t].label == label) {
                rec.chosen = t;
                found = true;
                break;
            }
        }
        if (!found) {
            throw ValidationError(base + ".chosen",
                                  "unknown label '" + label + "'");
        }
        trace.steps.push_back(std::move(rec));
    }
    const json& jtip = detail::require(doc, "tip_index", "");
    if (!jtip.is_null()) trace.tip_index = jtip.get<std::size_t>();
    return trace;
}

inline json prediction_to_json(const TippingPrediction& p) {
    json out{{"n_star_exact", detail::real_to_json(p.n_star_exact)},
             {"n_star_approx", detail::real_to_json(p.n_star_approx)},
             {"numerator", p.numerator},
             {"denominator", p.denominator},
             {"g", p.g},
             {"regime", to_string(p.regime)}};
    out["predicted_tip_index"] = p.predicted_tip_index
                                     ? json(*p.predicted_tip_index)
                                     : json(nullptr);
    return out;
}

inline std::string emit_prediction_json(const TippingPrediction& p) {
    json out = prediction_to_json(p);
    out["version"] = 1;
    return out.dump(2) + "\n";
}

inline TippingPrediction prediction_from_json(const json& doc,
                                              const std::string& parent) {
    TippingPrediction p;
    p.n_star_exact = detail::real_from_json(
        detail::require(doc, "n_star_exact", parent), parent + ".n_star_exact");
    p.n_star_approx =
        detail::real_from_json(detail::require(doc, "n_star_approx", parent),
                               parent + ".n_star_approx");
    p.numerator = detail::require(doc, "numerator", parent).get<double>();
    p.denominator = detail::require(doc, "denominator", parent).get<double>();
    p.g = detail::require(doc, "g", parent).get<std::size_t>();
    p.regime = detail::regime_from_string(
        detail::require(doc, "regime", parent).get<std::string>(),
        parent + ".regime");
    const json& jtip = detail::require(doc, "predicted_tip_index", parent);
    if (!jtip.is_null()) p.predicted_tip_index = jtip.get<std::size_t>();
    return p;
}

inline TippingPrediction parse_prediction_json(const std::string& text) {
    const json doc = detail::parse_json(text);
    detail::check_version(doc);
    return prediction_from_json(doc, "");
}

inline std::string emit_verification_json(const VerificationReport& rep) {
    json out{{"version", 1},
             {"scenario", scenario_to_json(rep.scenario)},
             {"prediction", prediction_to_json(rep.prediction)},
             {"agree", rep.agree},
             {"caveats", rep.caveats}};
    out["empirical_tip"] =
        rep.empirical_tip ? json(*rep.empirical_tip) : json(nullptr);
    return out.dump(2) + "\n";
}

inline VerificationReport parse_verification_json(const std::string& text) {
    const json doc = detail::parse_json(text);
    detail::check_version(doc);
    VerificationReport rep;
    rep.scenario = scenario_from_json(detail::require(doc, "scenario", ""));
    rep.prediction =
        prediction_from_json(detail::require(doc, "prediction", ""), "prediction");
    rep.agree = detail::require(doc, "agree", "").get<bool>();
    rep.caveats =
        detail::require(doc, "caveats", "").get<std::vector<std::string>>();
    const json& jtip = detail::require(doc, "empirical_tip", "");
    if (!jtip.is_null()) rep.empirical_tip = jtip.get<std::size_t>();
    return rep;
}

inline constexpr const char* kSweepCsvHeader =
    "param_value,n_star_exact,n_star_approx,regime,empirical_tip";

namespace detail {

inline std::string csv_quote(const std::string& field) {
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace detail

/// One line per row, LF endings, constant five fields. Error rows keep the
/// field count: the regime column carries a quoted `error: ...` marker and
/// the numeric columns are empty.
inline std::string emit_sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = kSweepCsvHeader;
    out += '\n';
    for (const auto& row : rows) {
        out += format_real(row.param_value);
        if (row.error) {
            out += ",,,";
            out += detail::csv_quote("error: " + *row.error);
            out += ",";
        } else {
            out += ',';
            out += format_real(row.n_star_exact);
            out += ',';
            out += format_real(row.n_star_approx);
            out += ',';
            out += to_string(row.regime);
            out += ',';
            if (row.empirical_tip) out += std::to_string(*row.empirical_tip);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    if (!current.empty()) lines.push_back(current);
    if (lines.empty() || lines.front() != kSweepCsvHeader) {
        throw ParseError("sweep CSV: missing or wrong header");
    }

    auto split_fields = [](const std::string& line, std::size_t line_no) {
        std::vector<std::string> fields;
        std::string field;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    field += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(field);
                field.clear();
            } else {
                field += c;
            }
        }
        if (quoted) {
            throw ParseError("sweep CSV line " + std::to_string(line_no) +
                             ": unterminated quote");
        }
        fields.push_back(field);
        return fields;
    };

    std::vector<SweepRow> rows;
    for (std::size_t n = 1; n < lines.size(); ++n) {
        const auto fields = split_fields(lines[n], n + 1);
        if (fields.size() != 5) {
            throw ParseError("sweep CSV line " + std::to_string(n + 1) +
                             ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        }
        SweepRow row;
        const std::string where = "line " + std::to_string(n + 1);
        row.param_value = parse_real(fields[0], where + " param_value");
        if (fields[3].rfind("error: ", 0) == 0) {
            row.error = fields[3].substr(7);
        } else {
            row.n_star_exact = parse_real(fields[1], where + " n_star_exact");
            row.n_star_approx = parse_real(fields[2], where + " n_star_approx");
            row.regime =
                detail::regime_from_string(fields[3], where + " regime");
            if (!fields[4].empty()) {
                row.empirical_tip = static_cast<std::size_t>(
                    parse_real(fields[4], where + " empirical_tip"));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline SweepSpec parse_sweep_spec(const std::string& text) {
    const json doc = detail::parse_json(text);
    if (!doc.is_object()) {
        throw ValidationError("document", "must be a JSON object");
    }
    detail::check_version(doc);
    SweepSpec spec;
    spec.base = scenario_from_json(detail::require(doc, "scenario", ""));
    spec.parameter = detail::sweep_parameter_from_string(
        detail::require(doc, "parameter", "").get<std::string>(), "parameter");
    const json& jgrid = detail::require(doc, "grid", "");
    if (!jgrid.is_array() || jgrid.empty()) {
        throw ValidationError("grid", "must be a non-empty array");
    }
    for (std::size_t i = 0; i < jgrid.size(); ++i) {
        if (!jgrid[i].is_number()) {
            throw ValidationError("grid[" + std::to_string(i) + "]",
                                  "must be a number");
        }
        spec.grid.push_back(jgrid[i].get<double>());
    }
    if (doc.contains("simulate")) {
        if (!doc["simulate"].is_boolean()) {
            throw ValidationError("simulate", "must be a boolean");
        }
        spec.simulate = doc["simulate"].get<bool>();
    }
    if (doc.contains("max_iterations")) {
        const json& jmi = doc["max_iterations"];
        if (!jmi.is_number_integer() || jmi.get<long long>() < 0) {
            throw ValidationError("max_iterations",
                                  "must be a non-negative integer");
        }
        spec.max_iterations_override = jmi.get<std::size_t>();
    }
    return spec;
}

/// Accepts either a bare array-of-arrays or {"matrix": [[...]]}.
inline GramMatrix parse_gram_json(const std::string& text) {
    const json doc = detail::parse_json(text);
    const json* jm = nullptr;
    if (doc.is_array()) {
        jm = &doc;
    } else if (doc.is_object()) {
        detail::check_version(doc);
        jm = &detail::require(doc, "matrix", "");
    } else {
        throw ValidationError("document", "must be an array or object");
    }
    if (!jm->is_array() || jm->empty()) {
        throw ValidationError("matrix", "must be a non-empty array of rows");
    }
    const std::size_t k = jm->size();
    GramMatrix gram(k);
    for (std::size_t i = 0; i < k; ++i) {
        const json& jrow = (*jm)[i];
        const std::string base = "matrix[" + std::to_string(i) + "]";
        if (!jrow.is_array() || jrow.size() != k) {
            throw ValidationError(base, "must be an array of length " +
                                            std::to_string(k));
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (!jrow[j].is_number()) {
                throw ValidationError(base + "[" + std::to_string(j) + "]",
                                      "must be a number");
            }
            gram.at(i, j) = jrow[j].get<double>();
        }
    }
    return gram;
}

inline std::string emit_vectors_json(const std::vector<Embedding>& vectors) {
    json out{{"version", 1},
             {"count", vectors.size()},
             {"dimension", vectors.empty() ? 0 : vectors.front().size()},
             {"vectors", vectors}};
    return out.dump(2) + "\n";
}

inline std::vector<Embedding> parse_vectors_json(const std::string& text) {
    const json doc = detail::parse_json(text);
    detail::check_version(doc);
    const json& jv = detail::require(doc, "vectors", "");
    if (!jv.is_array()) throw ValidationError("vectors", "must be an array");
    return jv.get<std::vector<Embedding>>();
}

}  // namespace tipping::io
