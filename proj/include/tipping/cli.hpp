#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tipping/experiments.hpp"
#include "tipping/io.hpp"

// Command-line front end. run_command takes argv without the program name
// (the same tokens a shell would pass after `tipping-lab`) plus explicit
// output streams so tests can drive it in-process.
//
// Exit codes: 0 success, 1 usage error, 2 input or validation error,
// 3 verification disagreement.

namespace tipping {
namespace cli {

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --out writes a file; otherwise the payload goes to the stream the caller
// handed us, so in-process tests never touch the filesystem.
inline void deliver(const std::string& payload, const std::string& out_path,
                    std::ostream& out) {
    if (out_path.empty()) {
        out << payload;
        return;
    }
    std::ofstream file(out_path, std::ios::binary);
    if (!file) {
        throw ValidationError("cannot open '" + out_path + "' for writing");
    }
    file << payload;
    file.flush();
    if (!file) throw ValidationError("failed while writing '" + out_path + "'");
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
    CLI::App app{"tipping-point analysis for a single attention head",
                 "tipping-lab"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string spec_path;
    std::string out_path;
    std::string format;
    std::string net_mode = "sum";
    std::uint64_t seed = 1;
    std::uint64_t iterations = 0;
    std::uint64_t pad_count = 1;
    double pad_norm = 1.0;

    const auto add_output = [&](CLI::App* sub, const std::string& natural) {
        sub->add_option("--out", out_path,
                        "write output to this file instead of stdout");
        sub->add_option("--format", format,
                        "output format (this subcommand emits " + natural + ")")
            ->check(CLI::IsMember({"csv", "json"}));
    };
    const auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("--scenario", scenario_path, "scenario JSON file")
            ->required();
    };
    const auto add_iterations = [&](CLI::App* sub, const char* what) {
        sub->add_option("--iterations", iterations, what);
    };

    CLI::App* predict =
        app.add_subcommand("predict", "evaluate the tipping law on a scenario");
    add_scenario(predict);
    add_output(predict, "json");
    predict
        ->add_option("--net-mode", net_mode,
                     "aggregate for the approximate law (default sum)")
        ->check(CLI::IsMember({"sum", "mean"}));

    CLI::App* simulate =
        app.add_subcommand("simulate", "run greedy decoding and emit the trace");
    add_scenario(simulate);
    add_output(simulate, "json");
    add_iterations(simulate, "override the scenario's max_iterations");

    CLI::App* verify = app.add_subcommand(
        "verify", "compare predicted and simulated tipping points");
    add_scenario(verify);
    add_output(verify, "json");
    add_iterations(verify, "override the scenario's max_iterations");

    CLI::App* sweep =
        app.add_subcommand("sweep", "run a parameter sweep from a spec file");
    sweep->add_option("--spec", spec_path, "sweep specification JSON file")
        ->required();
    add_output(sweep, "csv");
    add_iterations(sweep, "override the sweep's per-row max_iterations");

    CLI::App* pad = app.add_subcommand(
        "pad", "insert orthogonal neutral pad tokens into the prompt");
    add_scenario(pad);
    add_output(pad, "json");
    pad->add_option("--count", pad_count, "number of pad tokens (default 1)");
    pad->add_option("--norm", pad_norm, "pad vector norm (default 1.0)");

    CLI::App* random = app.add_subcommand(
        "random", "generate a random scenario with a clean tipping point");
    add_output(random, "json");
    random->add_option("--seed", seed, "generator seed (default 1)");
    add_iterations(random, "simulation budget for the generated scenario");

    CLI::App* gram = app.add_subcommand(
        "gram", "realize embedding vectors from a Gram matrix file");
    gram->add_option("--spec", spec_path, "Gram matrix JSON file")->required();
    add_output(gram, "json");

    try {
        // App::parse consumes the vector back to front.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        const auto subs = app.get_subcommands();
        err << "error: " << e.what() << "\n\n"
            << (subs.empty() ? app.help() : subs.front()->help());
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const std::string natural = (name == "sweep") ? "csv" : "json";
    if (!format.empty() && format != natural) {
        err << "error: --format " << format << " is not supported for '"
            << name << "' (it emits " << natural << ")\n";
        return 1;
    }
    const CLI::Option* iter_opt = sub->get_option_no_throw("--iterations");
    const bool iterations_given = iter_opt != nullptr && iter_opt->count() > 0;

    try {
        if (name == "predict") {
            const Scenario s =
                io::parse_scenario(detail::read_file(scenario_path));
            TippingPrediction p = n_star_exact(s);
            if (net_mode == "mean") {
                p.n_star_approx = n_star_approx(s, NetMode::Mean);
            }
            detail::deliver(io::emit_prediction_json(p), out_path, out);
            return 0;
        }
        if (name == "simulate") {
            Scenario s = io::parse_scenario(detail::read_file(scenario_path));
            if (iterations_given) s.max_iterations = iterations;
            detail::deliver(io::emit_trace_json(generate(s)), out_path, out);
            return 0;
        }
        if (name == "verify") {
            Scenario s = io::parse_scenario(detail::read_file(scenario_path));
            if (iterations_given) s.max_iterations = iterations;
            const VerificationReport report = verify_prediction(s);
            detail::deliver(io::emit_verification_json(report), out_path, out);
            return report.agree ? 0 : 3;
        }
        if (name == "sweep") {
            SweepSpec spec = io::parse_sweep_spec(detail::read_file(spec_path));
            if (iterations_given) spec.max_iterations_override = iterations;
            detail::deliver(io::emit_sweep_csv(run_sweep(spec)), out_path, out);
            return 0;
        }
        if (name == "pad") {
            const Scenario s =
                io::parse_scenario(detail::read_file(scenario_path));
            const Scenario padded = politeness_pad(s, pad_count, pad_norm);
            detail::deliver(io::serialize_scenario(padded), out_path, out);
            return 0;
        }
        if (name == "random") {
            GenerationConstraints constraints;
            if (iterations_given) constraints.max_iterations = iterations;
            const Scenario s = random_scenario(seed, constraints);
            detail::deliver(io::serialize_scenario(s), out_path, out);
            return 0;
        }
        // gram
        const GramMatrix gram_matrix =
            io::parse_gram_json(detail::read_file(spec_path));
        const auto vectors = vectors_from_gram(gram_matrix);
        detail::deliver(io::emit_vectors_json(vectors), out_path, out);
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace cli
}  // namespace tipping
