#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcstab/errors.hpp"
#include "mcstab/json_io.hpp"
#include "mcstab/version.hpp"

namespace {

using namespace mcstab;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitVerdictFailed = 1;
constexpr int kExitInputError = 2;
constexpr int kExitSynthesisFailed = 3;

std::string format_complex(const Complex& z) {
    std::ostringstream os;
    os.precision(10);
    os << z.real();
    if (std::abs(z.imag()) > 1e-12) os << (z.imag() >= 0 ? "+" : "-") << std::abs(z.imag()) << "i";
    return os.str();
}

std::string format_subset(const std::vector<int>& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "}";
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    return out;
}

Vector parse_double_list(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        vals.push_back(std::stod(item));
    }
    return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

extend::ExtensionSpec resolve_ni(const std::string& ni_arg, const mcsys::MultiChannelSystem& sys) {
    if (ni_arg == "r") {
        const int r = mcsys::deficiency_bound(sys);
        return extend::ExtensionSpec::uniform(sys.m(), r);
    }
    if (ni_arg.find(',') == std::string::npos)
        return extend::ExtensionSpec::uniform(sys.m(), std::stoi(ni_arg));
    extend::ExtensionSpec spec{parse_int_list(ni_arg)};
    spec.validate(sys.m());
    return spec;
}

std::vector<int> resolve_hold(const std::string& hold_arg, int m) {
    if (hold_arg == "none" || hold_arg.empty()) return {};
    if (hold_arg == "all") {
        std::vector<int> all(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) all[static_cast<std::size_t>(i)] = i + 1;
        return all;
    }
    return parse_int_list(hold_arg);
}

void emit(const io::json& j, bool as_json, const std::string& human) {
    if (as_json) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << human;
    }
}

void maybe_save(const std::optional<std::string>& out_dir, const std::string& name,
                const io::json& j) {
    if (!out_dir) return;
    fs::create_directories(*out_dir);
    const std::string path = (fs::path(*out_dir) / name).string();
    io::save_json(path, j);
    std::cerr << "wrote " << path << "\n";
}

struct CommonArgs {
    std::string system_file;
    std::string graph_file;
    double tol = -1.0;
    std::uint64_t seed = 0;
    bool as_json = false;
    std::optional<std::string> out_dir;

    std::optional<double> tol_opt() const {
        return tol > 0 ? std::optional<double>(tol) : std::nullopt;
    }
};

int cmd_analyze(const CommonArgs& args, bool share_outputs) {
    mcsys::MultiChannelSystem sys = io::parse_system(io::load_json(args.system_file));
    std::optional<graphs::DirectedGraph> g;
    if (!args.graph_file.empty()) g = io::parse_graph(io::load_json(args.graph_file));
    if (share_outputs) {
        if (!g) throw InvalidInputError("--share-outputs needs --graph");
        sys = mcsys::share_outputs(sys, *g);
    }
    mcsys::FixedSpectrumOptions opts;
    opts.tol = args.tol_opt();
    const auto report = mcsys::fixed_spectrum(sys, opts);

    io::json payload;
    payload["jointly_controllable"] = mcsys::jointly_controllable(sys, opts.tol);
    payload["jointly_observable"] = mcsys::jointly_observable(sys, opts.tol);
    payload.update(io::fixed_spectrum_json(report));
    const io::json j = io::envelope(payload, report.tolerance_used, args.seed);

    std::ostringstream human;
    human << "n = " << sys.n() << ", m = " << sys.m() << "\n";
    human << "jointly controllable: " << (payload["jointly_controllable"].get<bool>() ? "yes" : "no")
          << ", jointly observable: " << (payload["jointly_observable"].get<bool>() ? "yes" : "no")
          << "\n";
    if (report.empty()) {
        human << "fixed spectrum: empty (r = 0)\n";
    } else {
        human << "fixed spectrum (r = " << report.deficiency_r << "):\n";
        for (const auto& entry : report.fixed) {
            human << "  lambda = " << format_complex(entry.eigenvalue) << "\n";
            for (const auto& w : entry.witnesses) {
                human << "    subset " << format_subset(w.subset) << "  pencil rank " << w.rank;
                const auto& sv = w.singular_values;
                if (w.rank > 0 && static_cast<std::size_t>(w.rank) <= sv.size())
                    human << "  kept sigma " << sv[static_cast<std::size_t>(w.rank - 1)];
                if (static_cast<std::size_t>(w.rank) < sv.size())
                    human << "  dropped sigma " << sv[static_cast<std::size_t>(w.rank)];
                human << "\n";
            }
        }
    }
    emit(j, args.as_json, human.str());
    maybe_save(args.out_dir, "analysis.json", j);
    return kExitOk;
}

int cmd_extend(const CommonArgs& args, const std::string& ni_arg) {
    const auto sys = io::parse_system(io::load_json(args.system_file));
    const auto g = io::parse_graph(io::load_json(args.graph_file));
    const auto spec = resolve_ni(ni_arg, sys);
    const auto lift = extend::build_extension(sys, g, spec);

    extend::ConditionReport report;
    if (graphs::is_strongly_connected(g)) {
        report = extend::check_no_fixed_spectrum_strong(sys, g, spec);
    } else {
        report = extend::check_weak_graph_condition(sys, g);
        const auto ext_fixed = mcsys::fixed_spectrum(lift.system);
        if (!ext_fixed.empty()) {
            report.verdict = false;
            for (const auto& entry : ext_fixed.fixed)
                for (const auto& w : entry.witnesses)
                    report.failing_subsets.push_back(
                        extend::FailingSubset{w.subset, entry.eigenvalue, w.rank});
        }
        report.lift_dimension = lift.dimension();
        report.controller_dimension = lift.controller_dimension();
    }

    io::json payload;
    payload["ni"] = spec.ni;
    payload["report"] = io::condition_json(report);
    const io::json j = io::envelope(payload, args.tol > 0 ? args.tol : 0.0, args.seed);

    std::ostringstream human;
    human << "extension dimension " << lift.dimension() << " (ni:";
    for (int v : spec.ni) human << " " << v;
    human << ")\nverdict: " << (report.verdict ? "no fixed spectrum" : "FIXED SPECTRUM REMAINS")
          << "\n";
    for (const auto& f : report.failing_subsets)
        human << "  failing subset " << format_subset(f.subset) << " at lambda "
              << format_complex(f.lambda) << " rank " << f.rank << "\n";
    emit(j, args.as_json, human.str());
    maybe_save(args.out_dir, "extension.json", io::lifted_system_json(lift));
    maybe_save(args.out_dir, "report.json", j);
    return report.verdict ? kExitOk : kExitVerdictFailed;
}

int cmd_lift(const CommonArgs& args, const std::string& ni_arg, const std::string& hold_arg) {
    const auto sys = io::parse_system(io::load_json(args.system_file));
    const auto dg = io::parse_delayed_graph(io::load_json(args.graph_file));
    const auto spec = resolve_ni(ni_arg, sys);
    const auto hold = resolve_hold(hold_arg, sys.m());

    extend::LiftedSystem lift = extend::build_selective_holding_lift(sys, dg, spec, hold);
    extend::ConditionReport report;
    if (hold.empty()) {
        report = extend::check_delay_nonzero_fixed(sys, dg, spec);
    } else if (static_cast<int>(hold.size()) == sys.m()) {
        report = extend::check_state_holding_no_fixed(sys, dg, spec);
    } else {
        report = extend::check_selective_holding(sys, dg, spec, hold);
    }

    io::json payload;
    payload["ni"] = spec.ni;
    payload["holding"] = hold;
    payload["report"] = io::condition_json(report);
    const io::json j = io::envelope(payload, args.tol > 0 ? args.tol : 0.0, args.seed);

    std::ostringstream human;
    human << "lift dimension " << lift.dimension() << ", controller dimension "
          << lift.controller_dimension() << "\n";
    human << "verdict: " << (report.verdict ? "pass" : "FAIL") << "\n";
    for (const auto& f : report.failing_subsets)
        human << "  failing subset " << format_subset(f.subset) << " at lambda "
              << format_complex(f.lambda) << " rank " << f.rank << "\n";
    emit(j, args.as_json, human.str());
    maybe_save(args.out_dir, "lifted_system.json", io::lifted_system_json(lift));
    maybe_save(args.out_dir, "report.json", j);
    return report.verdict ? kExitOk : kExitVerdictFailed;
}

int cmd_synth(const CommonArgs& args, const std::string& method, double alpha, double rho, int q,
              const std::string& ni_arg, const std::string& hold_arg, const std::string& mode_arg) {
    const auto sys = io::parse_system(io::load_json(args.system_file));
    const auto dg = io::parse_delayed_graph(io::load_json(args.graph_file));
    const bool continuous = sys.domain == mcsys::TimeDomain::continuous;
    const double rate = continuous ? alpha : rho;
    const auto mode =
        mode_arg == "minimal" ? synth::CompensatorMode::minimal : synth::CompensatorMode::full;
    const bool delayed = std::any_of(dg.delay.begin(), dg.delay.end(),
                                     [](const auto& kv) { return kv.second > 0; });

    synth::SynthesisResult result;
    if (method == "observer") {
        if (delayed)
            throw InvalidInputError(
                "observer-based synthesis does not model transmission delays; use --method free "
                "with --hold");
        result = synth::assemble_observer_controller(sys, dg.graph, q, rate, args.seed, mode);
    } else if (method == "free") {
        const auto spec = resolve_ni(ni_arg, sys);
        if (delayed) {
            const auto hold = resolve_hold(hold_arg, sys.m());
            result = synth::observer_free_synthesis(sys, dg, spec, hold, q, rate, args.seed, mode);
        } else {
            result = synth::observer_free_synthesis(sys, dg.graph, spec, q, rate, args.seed, mode);
        }
    } else {
        throw InvalidInputError("--method must be 'observer' or 'free'");
    }

    io::json payload = io::synthesis_summary_json(result);
    const io::json j = io::envelope(payload, 0.0, args.seed);

    std::ostringstream human;
    human << "synthesized " << method << " controller at q = " << result.controller.q << "\n";
    human << (continuous ? "spectral abscissa " : "spectral radius ") << result.spectral_abscissa
          << " (target " << (continuous ? -rate : rate) << ")\n";
    human << "closed-loop dimension " << result.closed_loop.rows() << "\n";
    emit(j, args.as_json, human.str());
    maybe_save(args.out_dir, "controller.json", io::controller_json(result.controller));
    maybe_save(args.out_dir, "eigenreport.json", j);
    return kExitOk;
}

int cmd_setpoint(const CommonArgs& args, const std::string& r_arg, const std::string& method_arg,
                 double alpha, double T, double dt) {
    const auto sys = io::parse_system(io::load_json(args.system_file));
    const auto g = io::parse_graph(io::load_json(args.graph_file));
    setpoint::SetpointProblem problem{sys, parse_double_list(r_arg)};
    const auto method = method_arg == "observer_free" ? setpoint::Method::observer_free
                                                      : setpoint::Method::observer_based;
    const auto sol = setpoint::solve_setpoint(problem, g, method, alpha, args.seed);

    const double horizon = T > 0 ? T : 20.0 / alpha;
    const double step = sys.domain == mcsys::TimeDomain::continuous ? dt : 1.0;
    const Vector x0 = Vector::Zero(sol.closed_loop.dimension());
    const auto traj = sim::simulate(sol.closed_loop, x0, horizon, step, problem.r);
    const Vector y_final = sol.outputs_at(traj.states.row(traj.times.size() - 1).transpose());
    const Vector x_eq = sol.equilibrium(problem.r);
    const Vector y_eq = sol.outputs_at(x_eq);

    io::json payload;
    payload["r"] = std::vector<double>(problem.r.data(), problem.r.data() + problem.r.size());
    payload["final_outputs"] = std::vector<double>(y_final.data(), y_final.data() + y_final.size());
    payload["equilibrium_outputs"] = std::vector<double>(y_eq.data(), y_eq.data() + y_eq.size());
    payload["horizon"] = horizon;
    payload.update(io::synthesis_summary_json(sol.synthesis));
    const io::json j = io::envelope(payload, 0.0, args.seed);

    std::ostringstream human;
    human << "set-point tracking over T = " << horizon << ":\n";
    for (int i = 0; i < sys.m(); ++i)
        human << "  agent " << (i + 1) << ": r = " << problem.r(i) << "  y(T) = " << y_final(i)
              << "  |err| = " << std::abs(y_final(i) - problem.r(i)) << "\n";
    emit(j, args.as_json, human.str());
    maybe_save(args.out_dir, "controller.json", io::controller_json(sol.synthesis.controller));
    maybe_save(args.out_dir, "setpoint.json", j);
    if (args.out_dir) {
        fs::create_directories(*args.out_dir);
        const std::string csv = (fs::path(*args.out_dir) / "trajectory.csv").string();
        io::write_trajectory_csv(csv, traj, sol.closed_loop);
        std::cerr << "wrote " << csv << "\n";
    }
    return kExitOk;
}

int cmd_simulate(const CommonArgs& args, const std::string& controller_file,
                 const std::string& x0_arg, double T, double dt) {
    const auto sys = io::parse_system(io::load_json(args.system_file));
    const auto ctl = io::parse_controller(io::load_json(controller_file));
    const auto cl = sim::assemble_closed_loop(sys, ctl);
    Vector x0;
    if (x0_arg.empty()) {
        x0 = Vector::Ones(cl.dimension());
    } else {
        x0 = parse_double_list(x0_arg);
        if (x0.size() != cl.dimension())
            throw InvalidInputError("--x0 needs " + std::to_string(cl.dimension()) + " entries");
    }
    const double step = cl.domain == mcsys::TimeDomain::continuous ? dt : 1.0;
    const auto traj = sim::simulate(cl, x0, T, step);
    const auto decay = sim::estimate_decay_rate(traj);
    const ComplexVector ev = linmath::spectrum(cl.M).eigenvalues;
    double sharp = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < ev.size(); ++i)
        sharp = std::max(sharp, cl.domain == mcsys::TimeDomain::continuous ? ev(i).real()
                                                                           : std::abs(ev(i)));

    io::json payload;
    payload["decay_rate_estimate"] = decay.rate;
    payload["decay_fit_clamped"] = decay.clamped;
    payload[cl.domain == mcsys::TimeDomain::continuous ? "spectral_abscissa" : "spectral_radius"] =
        sharp;
    payload["samples"] = traj.times.size();
    const io::json j = io::envelope(payload, 0.0, args.seed);

    std::ostringstream human;
    human << "simulated " << traj.times.size() << " samples over T = " << T << "\n";
    human << "decay rate estimate " << decay.rate << ", "
          << (cl.domain == mcsys::TimeDomain::continuous ? "abscissa " : "radius ") << sharp
          << "\n";
    emit(j, args.as_json, human.str());
    maybe_save(args.out_dir, "summary.json", j);
    if (args.out_dir) {
        fs::create_directories(*args.out_dir);
        const std::string csv = (fs::path(*args.out_dir) / "trajectory.csv").string();
        io::write_trajectory_csv(csv, traj, cl);
        std::cerr << "wrote " << csv << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-channel LTI analysis and distributed controller synthesis"};
    app.set_version_flag("--version", mcstab::kVersion);
    app.require_subcommand(1);

    CommonArgs args;
    std::string ni_arg = "r";
    std::string hold_arg = "none";
    std::string method = "observer";
    std::string mode_arg = "full";
    std::string r_arg, x0_arg, controller_file;
    bool share = false;
    double alpha = 1.0, rho = 0.5, T = -1.0, dt = 0.01;
    int q = 1;

    auto add_common = [&](CLI::App* cmd, bool needs_graph) {
        cmd->add_option("--system", args.system_file, "system JSON file")->required();
        auto* gopt = cmd->add_option("--graph", args.graph_file, "neighbor graph JSON file");
        if (needs_graph) gopt->required();
        cmd->add_option("--tol", args.tol, "rank tolerance override");
        cmd->add_option("--seed", args.seed, "random seed (default 0)");
        cmd->add_flag("--json", args.as_json, "machine-readable stdout");
        cmd->add_option_function<std::string>(
            "--out", [&](const std::string& v) { args.out_dir = v; }, "output directory");
    };

    auto* analyze = app.add_subcommand("analyze", "fixed-spectrum report");
    add_common(analyze, false);
    analyze->add_flag("--share-outputs", share, "augment outputs with neighbors' measurements");

    auto* extend_cmd = app.add_subcommand("extend", "integrator extension + fixed-spectrum check");
    add_common(extend_cmd, true);
    extend_cmd->add_option("--ni", ni_arg, "per-agent controller dims: 'r', K, or list");

    auto* lift_cmd = app.add_subcommand("lift", "delay lifting of a discrete network");
    add_common(lift_cmd, true);
    lift_cmd->add_option("--ni", ni_arg, "per-agent controller dims: 'r', K, or list");
    lift_cmd->add_option("--hold", hold_arg, "state holding: all|none|comma list");

    auto* synth_cmd = app.add_subcommand("synth", "distributed controller synthesis");
    add_common(synth_cmd, true);
    synth_cmd->add_option("--method", method, "observer|free");
    synth_cmd->add_option("--alpha", alpha, "decay rate (continuous)");
    synth_cmd->add_option("--rho", rho, "spectral radius target (discrete)");
    synth_cmd->add_option("--q", q, "channel controller location");
    synth_cmd->add_option("--ni", ni_arg, "per-agent controller dims (observer-free)");
    synth_cmd->add_option("--hold", hold_arg, "state holding (observer-free, delays)");
    synth_cmd->add_option("--mode", mode_arg, "compensator order: full|minimal");

    auto* setpoint_cmd = app.add_subcommand("setpoint", "distributed set-point control");
    add_common(setpoint_cmd, true);
    setpoint_cmd->add_option("--r", r_arg, "reference values, comma separated")->required();
    setpoint_cmd->add_option("--method", method, "observer|observer_free");
    setpoint_cmd->add_option("--alpha", alpha, "decay rate");
    setpoint_cmd->add_option("--T", T, "horizon (default 20/alpha)");
    setpoint_cmd->add_option("--dt", dt, "step (continuous)");

    auto* simulate_cmd = app.add_subcommand("simulate", "closed-loop trajectory");
    add_common(simulate_cmd, false);
    simulate_cmd->add_option("--controller", controller_file, "controller JSON")->required();
    simulate_cmd->add_option("--x0", x0_arg, "initial state, comma separated");
    simulate_cmd->add_option("--T", T, "horizon")->required();
    simulate_cmd->add_option("--dt", dt, "step (continuous)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInputError;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(args, share);
        if (extend_cmd->parsed()) return cmd_extend(args, ni_arg);
        if (lift_cmd->parsed()) return cmd_lift(args, ni_arg, hold_arg);
        if (synth_cmd->parsed()) return cmd_synth(args, method, alpha, rho, q, ni_arg, hold_arg, mode_arg);
        if (setpoint_cmd->parsed()) return cmd_setpoint(args, r_arg, method, alpha, T, dt);
        if (simulate_cmd->parsed()) return cmd_simulate(args, controller_file, x0_arg, T, dt);
    } catch (const InvalidInputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const ResourceError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const DomainError& e) {
        std::cerr << "condition failed: " << e.what() << "\n";
        return kExitVerdictFailed;
    } catch (const SynthesisError& e) {
        std::cerr << "synthesis failed: " << e.what() << "\n";
        return kExitSynthesisFailed;
    }
    return kExitOk;
}
