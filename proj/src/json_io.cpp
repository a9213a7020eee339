#include "mcstab/json_io.hpp"

#include <fstream>
#include <sstream>

#include "mcstab/errors.hpp"
#include "mcstab/version.hpp"

namespace mcstab::io {

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix parse_matrix(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw InvalidInputError(what + ": expected a nested array of rows");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j[0].size());
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j[i].size()) != cols)
            throw InvalidInputError(what + ": ragged rows");
        for (Index c = 0; c < cols; ++c) {
            if (!j[i][c].is_number()) throw InvalidInputError(what + ": non-numeric entry");
            M(i, c) = j[i][c].get<double>();
        }
    }
    if (!M.allFinite()) throw InvalidInputError(what + ": non-finite entry");
    return M;
}

json complex_json(const Complex& z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

json spectrum_json(const ComplexVector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(complex_json(v(i)));
    return out;
}

ComplexVector parse_spectrum(const json& j, const std::string& what) {
    if (!j.is_array()) throw InvalidInputError(what + ": expected an array");
    ComplexVector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i)
        v(i) = Complex(j[i].at("re").get<double>(), j[i].at("im").get<double>());
    return v;
}

json system_json(const mcsys::MultiChannelSystem& sys) {
    json j;
    j["domain"] = sys.domain == mcsys::TimeDomain::continuous ? "continuous" : "discrete";
    j["A"] = matrix_json(sys.A);
    json channels = json::array();
    for (const auto& ch : sys.channels)
        channels.push_back(json{{"B", matrix_json(ch.B)}, {"C", matrix_json(ch.C)}});
    j["channels"] = std::move(channels);
    return j;
}

mcsys::MultiChannelSystem parse_system(const json& j) {
    mcsys::MultiChannelSystem sys;
    const std::string domain = j.at("domain").get<std::string>();
    if (domain == "continuous") {
        sys.domain = mcsys::TimeDomain::continuous;
    } else if (domain == "discrete") {
        sys.domain = mcsys::TimeDomain::discrete;
    } else {
        throw InvalidInputError("system: domain must be 'continuous' or 'discrete'");
    }
    sys.A = parse_matrix(j.at("A"), "system A");
    for (const auto& ch : j.at("channels"))
        sys.channels.push_back(mcsys::Channel{parse_matrix(ch.at("B"), "channel B"),
                                              parse_matrix(ch.at("C"), "channel C")});
    sys.validate();
    return sys;
}

json graph_json(const graphs::DirectedGraph& g) {
    json j;
    j["m"] = g.m;
    json arcs = json::array();
    for (const auto& [from, to] : g.arcs)
        if (from != to) arcs.push_back(json::array({from, to}));
    j["arcs"] = std::move(arcs);
    return j;
}

json delayed_graph_json(const graphs::DelayedGraph& dg) {
    json j = graph_json(dg.graph);
    json delays = json::object();
    for (const auto& [arc, d] : dg.delay)
        if (arc.first != arc.second && d > 0)
            delays[std::to_string(arc.first) + "->" + std::to_string(arc.second)] = d;
    j["delays"] = std::move(delays);
    return j;
}

graphs::DirectedGraph parse_graph(const json& j) {
    graphs::DirectedGraph g;
    g.m = j.at("m").get<int>();
    for (const auto& arc : j.at("arcs")) {
        if (!arc.is_array() || arc.size() != 2)
            throw InvalidInputError("graph: arcs must be [from,to] pairs");
        g.add_arc(arc[0].get<int>(), arc[1].get<int>());
    }
    g.validate();
    return g;
}

namespace {

std::pair<int, int> parse_arc_key(const std::string& key) {
    const auto pos = key.find("->");
    if (pos == std::string::npos)
        throw InvalidInputError("graph: delay key '" + key + "' is not of the form 'j->i'");
    try {
        return {std::stoi(key.substr(0, pos)), std::stoi(key.substr(pos + 2))};
    } catch (const std::exception&) {
        throw InvalidInputError("graph: malformed delay key '" + key + "'");
    }
}

}  // namespace

graphs::DelayedGraph parse_delayed_graph(const json& j) {
    graphs::DelayedGraph dg;
    dg.graph = parse_graph(j);
    if (j.contains("delays")) {
        for (const auto& [key, value] : j.at("delays").items())
            dg.delay[parse_arc_key(key)] = value.get<int>();
    }
    // Arcs without an explicit delay default to 0.
    for (const auto& arc : dg.graph.arcs)
        if (arc.first != arc.second && !dg.delay.count(arc)) dg.delay[arc] = 0;
    dg.validate();
    return dg;
}

namespace {

json subset_json(const std::vector<int>& s) {
    json out = json::array();
    for (int i : s) out.push_back(i);
    return out;
}

}  // namespace

json fixed_spectrum_json(const mcsys::FixedSpectrumReport& report) {
    json j;
    json fixed = json::array();
    for (const auto& entry : report.fixed) {
        json witnesses = json::array();
        for (const auto& w : entry.witnesses)
            witnesses.push_back(json{{"subset", subset_json(w.subset)},
                                     {"rank", w.rank},
                                     {"singular_values", w.singular_values}});
        fixed.push_back(
            json{{"eigenvalue", complex_json(entry.eigenvalue)}, {"witnesses", witnesses}});
    }
    j["fixed_spectrum"] = std::move(fixed);
    j["min_pencil_rank"] = report.min_pencil_rank;
    j["deficiency_r"] = report.deficiency_r;
    return j;
}

namespace {

const char* condition_name(extend::CheckedCondition c) {
    switch (c) {
        case extend::CheckedCondition::thm2: return "thm2";
        case extend::CheckedCondition::thm3: return "thm3";
        case extend::CheckedCondition::thm4: return "thm4";
        case extend::CheckedCondition::thm5: return "thm5";
        case extend::CheckedCondition::prop4: return "prop4";
        case extend::CheckedCondition::dc_rank: return "dc_rank";
    }
    return "unknown";
}

}  // namespace

json condition_json(const extend::ConditionReport& report) {
    json j;
    j["condition"] = condition_name(report.condition);
    j["verdict"] = report.verdict;
    json failing = json::array();
    for (const auto& f : report.failing_subsets)
        failing.push_back(json{{"subset", subset_json(f.subset)},
                               {"lambda", complex_json(f.lambda)},
                               {"rank", f.rank}});
    j["failing_subsets"] = std::move(failing);
    if (report.lift_dimension >= 0) j["lift_dimension"] = report.lift_dimension;
    if (report.controller_dimension >= 0) j["controller_dimension"] = report.controller_dimension;
    j["rank_identity_ok"] = report.rank_identity_ok;
    if (!report.detail.empty()) j["detail"] = report.detail;
    return j;
}

json feasibility_json(const setpoint::FeasibilityReport& report) {
    return json{{"feasible", report.feasible},
                {"rank", report.rank},
                {"required", report.required},
                {"singular_values", report.singular_values},
                {"tolerance_used", report.tolerance_used}};
}

json lifted_system_json(const extend::LiftedSystem& lift) {
    json j;
    j["system"] = system_json(lift.system);
    switch (lift.kind) {
        case extend::LiftKind::extension: j["kind"] = "extension"; break;
        case extend::LiftKind::delay_lift: j["kind"] = "delay_lift"; break;
        case extend::LiftKind::state_holding_lift: j["kind"] = "state_holding_lift"; break;
    }
    json layout = json::array();
    for (const auto& blk : lift.layout)
        layout.push_back(json{{"name", blk.name},
                              {"agent", blk.agent},
                              {"lag", blk.lag},
                              {"offset", blk.offset},
                              {"size", blk.size},
                              {"holding", blk.holding}});
    j["layout"] = std::move(layout);
    j["ni"] = lift.spec.ni;
    j["max_delay"] = lift.max_delay;
    j["holding_agents"] = lift.holding_agents;
    j["dimension"] = lift.dimension();
    j["controller_dimension"] = lift.controller_dimension();
    return j;
}

json controller_json(const synth::DistributedController& ctl) {
    json j;
    j["kind"] = ctl.kind == synth::DistributedController::Kind::observer_based ? "observer_based"
                                                                               : "observer_free";
    j["q"] = ctl.q;
    j["seed"] = ctl.seed;
    j["mode"] = ctl.mode == synth::CompensatorMode::full ? "full" : "minimal";
    j["lambda"] = spectrum_json(ctl.lambda);
    j["process_targets"] = spectrum_json(ctl.process_targets);
    json F = json::array();
    for (const auto& Fi : ctl.F) F.push_back(matrix_json(Fi));
    j["F"] = std::move(F);
    json K = json::array();
    for (const auto& Ki : ctl.K) K.push_back(matrix_json(Ki));
    j["K"] = std::move(K);
    json H = json::object();
    for (const auto& [arc, Hij] : ctl.H)
        H[std::to_string(arc.first) + "->" + std::to_string(arc.second)] = matrix_json(Hij);
    j["H"] = std::move(H);
    j["compensator"] = json{{"A", matrix_json(ctl.compensator.A)},
                            {"B", matrix_json(ctl.compensator.B)},
                            {"C", matrix_json(ctl.compensator.C)},
                            {"D", matrix_json(ctl.compensator.D)}};
    j["graph"] = delayed_graph_json(ctl.graph);
    j["ni"] = ctl.ni.ni;
    j["holding"] = ctl.holding;
    j["certificate"] = json{{"seed", ctl.certificate.seed},
                            {"attempts", ctl.certificate.attempts},
                            {"g_used", ctl.certificate.g_used},
                            {"verified", ctl.certificate.verified}};
    return j;
}

namespace {

Matrix parse_maybe_empty_matrix(const json& j, const std::string& what) {
    if (j.is_array() && j.empty()) return Matrix(0, 0);
    return parse_matrix(j, what);
}

}  // namespace

synth::DistributedController parse_controller(const json& j) {
    synth::DistributedController ctl;
    const std::string kind = j.at("kind").get<std::string>();
    ctl.kind = kind == "observer_based" ? synth::DistributedController::Kind::observer_based
                                        : synth::DistributedController::Kind::observer_free;
    ctl.q = j.at("q").get<int>();
    ctl.seed = j.at("seed").get<std::uint64_t>();
    ctl.mode = j.at("mode").get<std::string>() == "full" ? synth::CompensatorMode::full
                                                         : synth::CompensatorMode::minimal;
    ctl.lambda = parse_spectrum(j.at("lambda"), "controller lambda");
    ctl.process_targets = parse_spectrum(j.at("process_targets"), "controller process targets");
    for (const auto& Fi : j.at("F")) ctl.F.push_back(parse_matrix(Fi, "controller F"));
    for (const auto& Ki : j.at("K")) ctl.K.push_back(parse_matrix(Ki, "controller K"));
    for (const auto& [key, Hij] : j.at("H").items())
        ctl.H[parse_arc_key(key)] = parse_matrix(Hij, "controller H");
    const auto& cc = j.at("compensator");
    ctl.compensator.A = parse_maybe_empty_matrix(cc.at("A"), "compensator A");
    ctl.compensator.B = parse_maybe_empty_matrix(cc.at("B"), "compensator B");
    ctl.compensator.C = parse_maybe_empty_matrix(cc.at("C"), "compensator C");
    ctl.compensator.D = parse_maybe_empty_matrix(cc.at("D"), "compensator D");
    ctl.graph = parse_delayed_graph(j.at("graph"));
    ctl.ni.ni = j.at("ni").get<std::vector<int>>();
    ctl.holding = j.at("holding").get<std::vector<int>>();
    const auto& cert = j.at("certificate");
    ctl.certificate = synth::GainSample{cert.at("seed").get<std::uint64_t>(),
                                        cert.at("attempts").get<int>(),
                                        cert.at("g_used").get<double>(),
                                        cert.at("verified").get<bool>()};
    return ctl;
}

json synthesis_summary_json(const synth::SynthesisResult& result) {
    json j;
    j["achieved_spectrum"] = spectrum_json(result.achieved_spectrum);
    j["spectral_abscissa"] = result.spectral_abscissa;
    j["closed_loop_dimension"] = result.closed_loop.rows();
    j["lambda"] = spectrum_json(result.controller.lambda);
    j["process_targets"] = spectrum_json(result.controller.process_targets);
    return j;
}

json envelope(json payload, double tolerance, std::uint64_t seed) {
    json j;
    j["tool"] = "mcstab";
    j["version"] = kVersion;
    j["tolerance"] = tolerance;
    j["seed"] = seed;
    for (auto& [key, value] : payload.items()) j[key] = std::move(value);
    return j;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInputError("failed to parse '" + path + "': " + e.what());
    }
}

void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

void write_trajectory_csv(const std::string& path, const sim::Trajectory& traj,
                          const sim::ClosedLoop& cl) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write '" + path + "'");
    out << "t";
    for (Index i = 0; i < traj.states.cols(); ++i) out << ",x" << (i + 1);
    for (Index i = 0; i < cl.output_map.rows(); ++i) out << ",y" << (i + 1);
    for (Index i = 0; i < cl.control_map.rows(); ++i) out << ",u" << (i + 1);
    out << "\n";
    out.precision(17);
    for (Index k = 0; k < traj.times.size(); ++k) {
        out << traj.times(k);
        const Vector x = traj.states.row(k).transpose();
        for (Index i = 0; i < x.size(); ++i) out << "," << x(i);
        const Vector y = cl.output_map * x;
        for (Index i = 0; i < y.size(); ++i) out << "," << y(i);
        const Vector u = cl.control_map * x;
        for (Index i = 0; i < u.size(); ++i) out << "," << u(i);
        out << "\n";
    }
}

}  // namespace mcstab::io
