#pragma once

#include <string>

#include <json.hpp>

#include "mcstab/extend.hpp"
#include "mcstab/graphs.hpp"
#include "mcstab/linmath.hpp"
#include "mcstab/mcsys.hpp"
#include "mcstab/setpoint.hpp"
#include "mcstab/sim.hpp"
#include "mcstab/synth.hpp"

namespace mcstab::io {

using json = nlohmann::ordered_json;

json matrix_json(const Matrix& M);
Matrix parse_matrix(const json& j, const std::string& what);

json complex_json(const Complex& z);
json spectrum_json(const ComplexVector& v);
ComplexVector parse_spectrum(const json& j, const std::string& what);

json system_json(const mcsys::MultiChannelSystem& sys);
mcsys::MultiChannelSystem parse_system(const json& j);

/// Adjacency form {"m":3,"arcs":[[1,2],...],"delays":{"1->2":1,...}}; self
/// loops are omitted on write. Delay entries for absent arcs are rejected.
json graph_json(const graphs::DirectedGraph& g);
json delayed_graph_json(const graphs::DelayedGraph& dg);
graphs::DirectedGraph parse_graph(const json& j);
graphs::DelayedGraph parse_delayed_graph(const json& j);

json fixed_spectrum_json(const mcsys::FixedSpectrumReport& report);
json condition_json(const extend::ConditionReport& report);
json feasibility_json(const setpoint::FeasibilityReport& report);
json lifted_system_json(const extend::LiftedSystem& lift);

json controller_json(const synth::DistributedController& ctl);
synth::DistributedController parse_controller(const json& j);

json synthesis_summary_json(const synth::SynthesisResult& result);

/// Adds the tool version plus the tolerances/seed the run used.
json envelope(json payload, double tolerance, std::uint64_t seed);

json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);

void write_trajectory_csv(const std::string& path, const sim::Trajectory& traj,
                          const sim::ClosedLoop& cl);

}  // namespace mcstab::io
