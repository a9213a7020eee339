#include "mcstab/setpoint.hpp"

#include <algorithm>
#include <string>

#include "mcstab/errors.hpp"
#include "mcstab/extend.hpp"

namespace mcstab::setpoint {

using mcsys::MultiChannelSystem;
using mcsys::TimeDomain;

void SetpointProblem::validate() const {
    sys.validate();
    for (int i = 0; i < sys.m(); ++i)
        if (sys.channels[i].C.rows() != 1)
            throw DomainError("setpoint: channel " + std::to_string(i + 1) +
                              " output is not scalar");
    if (r.size() != sys.m()) throw InvalidInputError("setpoint: r needs one entry per agent");
}

AugmentedSystem augment_setpoint(const SetpointProblem& problem) {
    problem.validate();
    const Index n = problem.sys.n();
    const int m = problem.sys.m();
    const Matrix C = problem.sys.output_matrix();

    AugmentedSystem aug;
    aug.plant_dim = n;
    aug.system.domain = problem.sys.domain;
    aug.system.A = Matrix::Zero(n + m, n + m);
    aug.system.A.topLeftCorner(n, n) = problem.sys.A;
    aug.system.A.block(n, 0, m, n) = C;
    if (problem.sys.domain == TimeDomain::discrete)
        aug.system.A.bottomRightCorner(m, m).setIdentity();
    for (int i = 0; i < m; ++i) {
        Matrix B = Matrix::Zero(n + m, problem.sys.channels[i].B.cols());
        B.topRows(n) = problem.sys.channels[i].B;
        Matrix Ct = Matrix::Zero(1, n + m);
        Ct(0, n + i) = 1.0;
        aug.system.channels.push_back(mcsys::Channel{B, Ct});
    }
    return aug;
}

FeasibilityReport check_setpoint_feasible(const SetpointProblem& problem) {
    problem.validate();
    const Index n = problem.sys.n();
    const int m = problem.sys.m();
    const Matrix B = problem.sys.input_matrix();
    const Matrix C = problem.sys.output_matrix();
    Matrix P = Matrix::Zero(n + m, n + B.cols());
    P.topLeftCorner(n, n) = problem.sys.A;
    if (problem.sys.domain == TimeDomain::discrete)
        P.topLeftCorner(n, n) -= Matrix::Identity(n, n);
    P.topRightCorner(n, B.cols()) = B;
    P.bottomLeftCorner(m, n) = C;
    const auto rr = linmath::numerical_rank(P);
    FeasibilityReport report;
    report.rank = rr.rank;
    report.required = n + m;
    report.feasible = rr.rank == n + m;
    report.singular_values = rr.singular_values;
    report.tolerance_used = rr.tolerance_used;
    return report;
}

Vector SetpointSolution::equilibrium(const Vector& rvec) const {
    if (rvec.size() != closed_loop.input_map.cols())
        throw InvalidInputError("equilibrium: reference dimension mismatch");
    const Index d = closed_loop.dimension();
    Matrix lhs = closed_loop.M;
    if (closed_loop.domain == TimeDomain::discrete) lhs -= Matrix::Identity(d, d);
    return lhs.fullPivLu().solve(-closed_loop.input_map * rvec);
}

Vector SetpointSolution::outputs_at(const Vector& state) const {
    const Index n = augmented.plant_dim;
    return problem.sys.output_matrix() * state.head(n);
}

SetpointSolution solve_setpoint(const SetpointProblem& problem, const graphs::DirectedGraph& g,
                                Method method, double rate, std::uint64_t seed) {
    problem.validate();
    const auto feas = check_setpoint_feasible(problem);
    if (!feas.feasible)
        throw DomainError("setpoint: DC rank condition failed (rank " +
                          std::to_string(feas.rank) + " < " + std::to_string(feas.required) +
                          "); a transmission zero blocks integral action");

    SetpointSolution sol;
    sol.problem = problem;
    sol.augmented = augment_setpoint(problem);

    if (method == Method::observer_based) {
        sol.synthesis = synth::assemble_observer_controller(sol.augmented.system, g, /*q=*/1,
                                                            rate, seed);
    } else {
        const int r = mcsys::deficiency_bound(sol.augmented.system);
        const auto spec = extend::ExtensionSpec::uniform(problem.sys.m(), std::max(r, 1));
        sol.synthesis = synth::observer_free_synthesis(sol.augmented.system, g, spec, /*q=*/1,
                                                       rate, seed);
    }

    sol.closed_loop = sim::assemble_closed_loop(sol.augmented.system, sol.synthesis.controller);
    // Constant reference enters the augmented plant integrators as -r.
    const Index n = sol.augmented.plant_dim;
    const int m = problem.sys.m();
    sol.closed_loop.input_map = Matrix::Zero(sol.closed_loop.dimension(), m);
    sol.closed_loop.input_map.block(n, 0, m, m) = -Matrix::Identity(m, m);
    return sol;
}

}  // namespace mcstab::setpoint
