#pragma once

#include <string>
#include <vector>

#include "mcstab/graphs.hpp"
#include "mcstab/linmath.hpp"
#include "mcstab/mcsys.hpp"

namespace mcstab::extend {

/// Per-agent open-loop controller dimensions n_i >= 0.
struct ExtensionSpec {
    std::vector<int> ni;

    static ExtensionSpec uniform(int m, int value) {
        return ExtensionSpec{std::vector<int>(static_cast<std::size_t>(m), value)};
    }
    int total() const;
    void validate(int m) const;
};

enum class LiftKind { extension, delay_lift, state_holding_lift };

struct StateBlock {
    std::string name;
    int agent{0};  // 0 for the plant block
    int lag{0};
    Index offset{0};
    Index size{0};
    bool holding{false};
};

/// An extended or lifted multi-channel system together with the map from
/// lifted state blocks back to plant state and controller registers.
struct LiftedSystem {
    mcsys::MultiChannelSystem system;
    std::vector<StateBlock> layout;
    LiftKind kind{LiftKind::extension};
    ExtensionSpec spec;
    std::vector<int> max_delay;       // d_i (empty for plain extensions)
    std::vector<int> holding_agents;  // ascending labels

    Index dimension() const { return system.n(); }
    /// Rows selecting register z_agent(t - lag) out of the lifted state.
    Matrix register_selector(int agent, int lag) const;
    /// Total controller state an implementation runs: sum n_i plus holding registers.
    Index controller_dimension() const;
};

/// Delay-free extension: Abar = diag(A, 0), Bbar_i stacks B_i and the
/// injection selector E_i, Cbar_i stacks C_i and the neighbor selector
/// E'_{N_i} (neighbor labels ascending).
LiftedSystem build_extension(const mcsys::MultiChannelSystem& sys, const graphs::DirectedGraph& g,
                             const ExtensionSpec& spec);

/// Shift-register lifting of a delayed discrete-time network. Agent i's
/// measurement selects z_j(t - d_{ji}) for each neighbor j.
LiftedSystem build_delay_lift(const mcsys::MultiChannelSystem& sys, const graphs::DelayedGraph& dg,
                              const ExtensionSpec& spec);

/// Same lifting with every agent holding its state: all followers of j
/// (including j itself) measure the maximally delayed z_j(t - d_j).
LiftedSystem build_state_holding_lift(const mcsys::MultiChannelSystem& sys,
                                      const graphs::DelayedGraph& dg, const ExtensionSpec& spec);

/// Mixed lift: agents in `holding` release z_i(t - d_i) to all followers,
/// the rest contribute raw per-arc delayed states.
LiftedSystem build_selective_holding_lift(const mcsys::MultiChannelSystem& sys,
                                          const graphs::DelayedGraph& dg,
                                          const ExtensionSpec& spec,
                                          const std::vector<int>& holding);

enum class CheckedCondition { thm2, thm3, thm4, thm5, prop4, dc_rank };

struct FailingSubset {
    std::vector<int> subset;
    Complex lambda;
    Index rank{0};
};

struct ConditionReport {
    bool verdict{false};
    std::vector<FailingSubset> failing_subsets;
    CheckedCondition condition{CheckedCondition::thm2};
    std::string detail;
    Index lift_dimension{-1};
    Index controller_dimension{-1};
    bool rank_identity_ok{true};
};

/// Strongly connected graph + n_i >= r: the extension must have no fixed
/// spectrum; a nonempty enumeration result is reported as an anomaly.
ConditionReport check_no_fixed_spectrum_strong(const mcsys::MultiChannelSystem& sys,
                                               const graphs::DirectedGraph& g,
                                               const ExtensionSpec& spec);

/// For every witness subset s of the original system, N_{m-s} must intersect s.
ConditionReport check_weak_graph_condition(const mcsys::MultiChannelSystem& sys,
                                           const graphs::DirectedGraph& g);

/// Union of the transfer graph and the neighbor graph is strongly connected.
bool extended_transfer_strongly_connected(const mcsys::MultiChannelSystem& sys,
                                          const graphs::DirectedGraph& g);

/// Delay lift may keep fixed eigenvalues only at 0.
ConditionReport check_delay_nonzero_fixed(const mcsys::MultiChannelSystem& sys,
                                          const graphs::DelayedGraph& dg,
                                          const ExtensionSpec& spec);

/// State-holding lift must have no fixed spectrum; also cross-checks the
/// pencil-rank decomposition on every witness subset of the original system.
ConditionReport check_state_holding_no_fixed(const mcsys::MultiChannelSystem& sys,
                                             const graphs::DelayedGraph& dg,
                                             const ExtensionSpec& spec);

/// Fixed-spectrum verdict for a user-supplied holding selection.
ConditionReport check_selective_holding(const mcsys::MultiChannelSystem& sys,
                                        const graphs::DelayedGraph& dg, const ExtensionSpec& spec,
                                        const std::vector<int>& holding);

}  // namespace mcstab::extend
