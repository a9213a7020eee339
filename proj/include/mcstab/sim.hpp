#pragma once

#include <vector>

#include "mcstab/extend.hpp"
#include "mcstab/linmath.hpp"
#include "mcstab/mcsys.hpp"
#include "mcstab/synth.hpp"

namespace mcstab::sim {

/// Autonomous (optionally affine) closed loop x' = M x + input_map * w with a
/// labeled state layout plus maps recovering plant outputs and control inputs.
struct ClosedLoop {
    Matrix M;
    Matrix input_map;  // dim x k, k = 0 when no exogenous input
    std::vector<extend::StateBlock> layout;
    mcsys::TimeDomain domain{mcsys::TimeDomain::continuous};
    Matrix output_map;   // stacked y_i rows over the closed-loop state
    Matrix control_map;  // stacked u_i rows over the closed-loop state

    Index dimension() const { return M.rows(); }
};

struct Trajectory {
    Vector times;
    Matrix states;  // one row per sample
};

/// Exact LTI stepping: matrix exponential for continuous systems (affine
/// inputs handled through an augmented exponential), plain iteration for
/// discrete ones (dt must be 1).
Trajectory simulate(const ClosedLoop& cl, const Vector& x0, double T, double dt,
                    const Vector& exogenous = Vector());

struct DecayEstimate {
    double rate{0.0};
    bool clamped{false};  // some norms underflowed and were clamped at 1e-300
};

/// Least-squares slope of log ||state(t)|| over the final 60% of the horizon.
DecayEstimate estimate_decay_rate(const Trajectory& traj);

/// Closed loop of a plant with a synthesized distributed controller, in
/// implementable coordinates: (x, x_1..x_m, z) for observer-based designs,
/// (extended state, z) for observer-free ones.
ClosedLoop assemble_closed_loop(const mcsys::MultiChannelSystem& sys,
                                const synth::DistributedController& controller);

}  // namespace mcstab::sim
