#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mcstab/extend.hpp"
#include "mcstab/graphs.hpp"
#include "mcstab/linmath.hpp"
#include "mcstab/mcsys.hpp"

namespace mcstab::synth {

/// Multi-input eigenvalue assignment: returns F with spectrum(A + B F) equal
/// to `targets` (conjugate-symmetric), verified to 1e-6 matched relative
/// error. Random right-hand seeds with bounded retries.
Matrix place_poles(const Matrix& A, const Matrix& B, const ComplexVector& targets,
                   std::uint64_t seed);

/// L with spectrum(A - L C) = targets.
Matrix place_observer_gain(const Matrix& A, const Matrix& C, const ComplexVector& targets,
                           std::uint64_t seed);

/// m x m matrix with zero row sums and graph sparsity such that (G, b_q) is a
/// controllable pair: g_ii = v_i and g_{i,parent(i)} = -v_i along a spanning
/// tree rooted at q. Default v_i = i for i != q, v_q = 0.
Matrix construct_G(const graphs::DirectedGraph& g, int q,
                   std::optional<Vector> v = std::nullopt);

/// Stacked estimation-error system: Atilde = I_m (x) (A + sum B_j F_j) - Q,
/// channel selectors Btilde_i = b_i (x) I_n, measured blocks Chat_i = C_i Btilde_i',
/// and neighbor-difference selectors Ctilde_i (rows (b_i - b_j)' (x) I_n,
/// j in N_i \ {i} ascending).
struct CompactErrorSystem {
    Matrix Atilde;
    std::vector<Matrix> Btilde;
    std::vector<Matrix> Chat;
    std::vector<Matrix> Ctilde;
    Matrix Q;
    graphs::DirectedGraph graph;
    Index n{0};
    int m{0};

    /// Atilde + sum_i Btilde_i (K_i Chat_i + H_i Ctilde_i).
    Matrix apply_gains(const std::vector<Matrix>& K,
                       const std::map<std::pair<int, int>, Matrix>& H) const;
    /// Stacked [Chat_q; Ctilde_q].
    Matrix measurement_stack(int q) const;
};

CompactErrorSystem build_compact_error_system(const mcsys::MultiChannelSystem& sys,
                                              const graphs::DirectedGraph& g,
                                              const std::vector<Matrix>& F);

struct GainSample {
    std::uint64_t seed{0};
    int attempts{0};
    double g_used{1.0};
    bool verified{false};
};

struct SampledGains {
    std::vector<Matrix> K;                    // K_i: n x q_i
    std::map<std::pair<int, int>, Matrix> H;  // (i,j) -> H_ij, j in N_i \ {i}
    GainSample certificate;
};

/// Gains making the error system controllable from every channel q with
/// controllability index exactly m and observable through every channel's
/// measurement stack. Seeded: tree-structured H scaled by a swept gain g,
/// random K, random sparsity-respecting perturbations on retry.
SampledGains sample_generic_gains(const CompactErrorSystem& ces, const graphs::DirectedGraph& g,
                                  std::uint64_t seed);

/// Static output-feedback gains F_i (p_i x q_i) making
/// (A + sum B_i F_i C_i, B_q, C_q) controllable and observable for every q.
/// Requires empty fixed spectrum and a strongly connected transfer graph.
std::vector<Matrix> decentralized_completion(const mcsys::MultiChannelSystem& sys,
                                             std::uint64_t seed);

struct ChannelCompensator {
    Matrix A, B, C, D;
    // Assigned closed-loop spectrum, measured where it is best conditioned:
    // the two placement blocks for the full-order mode, the assembled
    // augmented loop for the minimal mode.
    ComplexVector achieved;
    Index order() const { return A.rows(); }
};

enum class CompensatorMode { full, minimal };

/// Dynamic output compensator for a controllable + observable plant
/// (Ap, Bp, Cp) placing the (np + order) closed-loop eigenvalues at
/// `targets`. Full mode: order = np, observer-based split. Minimal mode:
/// order = |targets| - np (>= min(ctrb, obs index) - 1), solved as a static
/// output-feedback assignment on the integrator-augmented plant.
ChannelCompensator design_channel_compensator(const Matrix& Ap, const Matrix& Bp, const Matrix& Cp,
                                              const ComplexVector& targets, CompensatorMode mode,
                                              std::uint64_t seed);

struct DistributedController {
    enum class Kind { observer_based, observer_free };
    Kind kind{Kind::observer_based};
    int q{1};
    std::uint64_t seed{0};
    CompensatorMode mode{CompensatorMode::full};
    ComplexVector lambda;           // channel/error spectrum targets
    ComplexVector process_targets;  // observer-based: targets of A + sum B_i F_i
    std::vector<Matrix> F;          // observer-based: F_i (p_i x n); free: static gains on ybar_i
    std::vector<Matrix> K;          // observer-based output injections
    std::map<std::pair<int, int>, Matrix> H;  // observer-based neighbor couplings
    ChannelCompensator compensator;           // D folded into K_q/H_qj for observer-based
    graphs::DelayedGraph graph;               // delay map empty when delay-free
    extend::ExtensionSpec ni;                 // observer-free only
    std::vector<int> holding;                 // observer-free, discrete with delays
    GainSample certificate;
};

struct SynthesisResult {
    DistributedController controller;
    Matrix closed_loop;
    std::vector<extend::StateBlock> layout;
    ComplexVector achieved_spectrum;
    double spectral_abscissa{0.0};  // max real part (continuous) / max modulus (discrete)
    // Matched relative error between the assigned spectrum and its target:
    // the closed error system vs lambda for observer-based designs, the whole
    // loop vs lambda for observer-free ones.
    double lambda_match_error{0.0};
};

/// Observer-based pipeline: state-feedback F, generic estimator gains,
/// channel compensator at q, gain splitting, closed-loop verification.
/// `rate` is the prescribed decay rate: spectral abscissa <= -rate
/// (continuous) or spectral radius <= rate (discrete).
SynthesisResult assemble_observer_controller(
    const mcsys::MultiChannelSystem& sys, const graphs::DirectedGraph& g, int q, double rate,
    std::uint64_t seed, CompensatorMode mode = CompensatorMode::full,
    std::optional<ComplexVector> lambda = std::nullopt,
    std::optional<ComplexVector> process_targets = std::nullopt);

/// Observer-free pipeline on the integrator extension (continuous or
/// delay-free discrete).
SynthesisResult observer_free_synthesis(const mcsys::MultiChannelSystem& sys,
                                        const graphs::DirectedGraph& g,
                                        const extend::ExtensionSpec& spec, int q, double rate,
                                        std::uint64_t seed,
                                        CompensatorMode mode = CompensatorMode::full);

/// Observer-free pipeline on a delayed discrete network; `holding` lists the
/// agents performing state holding (empty: none, 1..m: all).
SynthesisResult observer_free_synthesis(const mcsys::MultiChannelSystem& sys,
                                        const graphs::DelayedGraph& dg,
                                        const extend::ExtensionSpec& spec,
                                        const std::vector<int>& holding, int q, double rate,
                                        std::uint64_t seed,
                                        CompensatorMode mode = CompensatorMode::full);

}  // namespace mcstab::synth
