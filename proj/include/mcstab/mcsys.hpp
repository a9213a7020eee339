#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mcstab/graphs.hpp"
#include "mcstab/linmath.hpp"

namespace mcstab::mcsys {

enum class TimeDomain { continuous, discrete };

struct Channel {
    Matrix B;  // n x p_i
    Matrix C;  // q_i x n
};

/// x' = A x + sum_i B_i u_i,  y_i = C_i x  (continuous or discrete).
struct MultiChannelSystem {
    TimeDomain domain{TimeDomain::continuous};
    Matrix A;
    std::vector<Channel> channels;

    Index n() const { return A.rows(); }
    int m() const { return static_cast<int>(channels.size()); }
    Matrix input_matrix() const;   // [B_1 ... B_m]
    Matrix output_matrix() const;  // stacked C_i
    void validate() const;
};

/// Ordered channel subset s = {i_1 < i_2 < ... < i_s} of 1..m.
struct SubsetSelector {
    std::vector<int> s;

    explicit SubsetSelector(std::vector<int> labels = {});
    std::vector<int> complement(int m) const;
    Matrix input_block(const MultiChannelSystem& sys) const;              // B_s
    Matrix complement_output_block(const MultiChannelSystem& sys) const;  // C_{m-s}
    static std::vector<SubsetSelector> all_subsets(int m);
};

bool jointly_controllable(const MultiChannelSystem& sys,
                          std::optional<double> tol = std::nullopt);
bool jointly_observable(const MultiChannelSystem& sys,
                        std::optional<double> tol = std::nullopt);

/// Arc j -> i whenever some Markov parameter C_i A^k B_j, k = 0..2n-1, is
/// nonzero beyond a relative threshold.
graphs::DirectedGraph transfer_graph(const MultiChannelSystem& sys, double rel_tol = 1e-9);

/// Complex pencil [lambda I - A, B_s; C_{m-s}, 0].
ComplexMatrix fixed_mode_pencil(const MultiChannelSystem& sys, Complex lambda,
                                const SubsetSelector& subset);

struct Witness {
    std::vector<int> subset;
    Index rank{0};
    std::vector<double> singular_values;
};

struct FixedSpectrumReport {
    struct Entry {
        Complex eigenvalue;
        std::vector<Witness> witnesses;
    };
    std::vector<Entry> fixed;      // ascending by (re, im)
    Index min_pencil_rank{0};      // over all (lambda, s)
    int deficiency_r{0};           // max(0, n - min_pencil_rank)
    double tolerance_used{0.0};

    bool empty() const { return fixed.empty(); }
    ComplexVector eigenvalues() const;
};

struct FixedSpectrumOptions {
    std::optional<double> tol;
    int max_channels{16};  // subset enumeration cap
};

/// Rank test of every pencil [lambda I - A, B_s; C_{m-s}, 0] over all
/// eigenvalues of A (clustered) and all channel subsets including the empty
/// and full ones.
FixedSpectrumReport fixed_spectrum(const MultiChannelSystem& sys,
                                   const FixedSpectrumOptions& opts = {});

/// The rank deficiency r = max(0, n - min pencil rank).
int deficiency_bound(const MultiChannelSystem& sys, const FixedSpectrumOptions& opts = {});

/// Intersection of spectra of A + sum_i B_i F_i C_i over `trials` seeded
/// random static gain draws (entries uniform in [-1,1]); independent
/// cross-check of the pencil test.
ComplexVector fixed_spectrum_sampling_oracle(const MultiChannelSystem& sys, int trials,
                                             std::uint64_t seed,
                                             double match_tol = 1e-6);

/// Replace each C_i by the stack of C_j over j in N_i (ascending), modeling
/// agents sharing raw measurements across the neighbor graph.
MultiChannelSystem share_outputs(const MultiChannelSystem& sys, const graphs::DirectedGraph& g);

}  // namespace mcstab::mcsys
