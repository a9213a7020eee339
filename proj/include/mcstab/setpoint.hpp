#pragma once

#include <cstdint>
#include <vector>

#include "mcstab/linmath.hpp"
#include "mcstab/mcsys.hpp"
#include "mcstab/sim.hpp"
#include "mcstab/synth.hpp"

namespace mcstab::setpoint {

/// Each agent senses one scalar output y_i = c_i x and drives it to r_i.
struct SetpointProblem {
    mcsys::MultiChannelSystem sys;
    Vector r;

    void validate() const;
};

/// Integrator-augmented (n+m)-dimensional system with measured outputs w_i.
/// Continuous: w_i' = y_i - r_i; discrete: w_i(t+1) = w_i(t) + y_i(t) - r_i.
struct AugmentedSystem {
    mcsys::MultiChannelSystem system;
    Index plant_dim{0};
};

AugmentedSystem augment_setpoint(const SetpointProblem& problem);

struct FeasibilityReport {
    bool feasible{false};
    Index rank{0};
    Index required{0};
    std::vector<double> singular_values;
    double tolerance_used{0.0};
};

/// DC rank condition: rank [A, B; C, 0] = n + m (continuous; A - I in the
/// discrete case). Joint observability of the augmentation is automatic.
FeasibilityReport check_setpoint_feasible(const SetpointProblem& problem);

enum class Method { observer_based, observer_free };

struct SetpointSolution {
    SetpointProblem problem;
    AugmentedSystem augmented;
    synth::SynthesisResult synthesis;
    sim::ClosedLoop closed_loop;  // input_map carries the reference vector r

    /// Exact closed-loop equilibrium for a constant reference.
    Vector equilibrium(const Vector& r) const;
    /// Plant outputs y_i at a closed-loop state.
    Vector outputs_at(const Vector& state) const;
};

SetpointSolution solve_setpoint(const SetpointProblem& problem, const graphs::DirectedGraph& g,
                                Method method, double rate, std::uint64_t seed);

}  // namespace mcstab::setpoint
