#pragma once

#include <random>

#include "mcstab/extend.hpp"
#include "mcstab/graphs.hpp"
#include "mcstab/mcsys.hpp"

namespace fixtures {

using namespace mcstab;

// Three-channel system with a decentralized fixed mode at 1: two channels
// share the same input direction and two share the same scalar measurement.
inline mcsys::MultiChannelSystem three_channel_fixed_mode(
    mcsys::TimeDomain domain = mcsys::TimeDomain::continuous) {
    mcsys::MultiChannelSystem sys;
    sys.domain = domain;
    sys.A = Matrix{{1, 0, 0}, {0, 1, 0}, {0, 1, 1}};
    sys.channels = {
        mcsys::Channel{Matrix{{1}, {0}, {0}}, Matrix{{1, 0, 0}, {0, 0, 1}}},
        mcsys::Channel{Matrix{{0}, {1}, {0}}, Matrix{{0, 1, 0}}},
        mcsys::Channel{Matrix{{1}, {0}, {0}}, Matrix{{0, 1, 0}}},
    };
    return sys;
}

// Cycle whose agents listen as 1<-2, 2<-3, 3<-1 (N_1={1,2}, N_2={2,3}, N_3={1,3}).
inline graphs::DirectedGraph listening_cycle3() {
    return graphs::DirectedGraph(3, {{2, 1}, {3, 2}, {1, 3}});
}

// Plain ascending cycle 1->2->3->1 (N_2={1,2}).
inline graphs::DirectedGraph cycle123() {
    return graphs::DirectedGraph(3, {{1, 2}, {2, 3}, {3, 1}});
}

// Two 2-cycles sharing vertex 2: arcs 1->2, 2->1, 2->3, 3->2.
inline graphs::DirectedGraph two_cycles3() {
    return graphs::DirectedGraph(3, {{1, 2}, {2, 1}, {2, 3}, {3, 2}});
}

// Delay pattern whose lifted chains have lengths d = (1, 2, 2).
inline graphs::DelayedGraph delayed_two_cycles() {
    graphs::DelayedGraph dg;
    dg.graph = two_cycles3();
    dg.delay = {{{1, 2}, 1}, {{2, 1}, 0}, {{2, 3}, 2}, {{3, 2}, 2}};
    return dg;
}

// Longer delays on the same shape: d = (2, 2, 3).
inline graphs::DelayedGraph delayed_two_cycles_long() {
    graphs::DelayedGraph dg;
    dg.graph = two_cycles3();
    dg.delay = {{{1, 2}, 2}, {{2, 1}, 2}, {{2, 3}, 2}, {{3, 2}, 3}};
    return dg;
}

// Discrete system whose only fixed mode sits at 0, witnessed by subset {2}:
// channel 2 cannot reach the zero mode and channels 1, 3 cannot see it.
inline mcsys::MultiChannelSystem zero_mode_system() {
    mcsys::MultiChannelSystem sys;
    sys.domain = mcsys::TimeDomain::discrete;
    sys.A = Matrix{{0, 0}, {0, 0.5}};
    sys.channels = {
        mcsys::Channel{Matrix{{1}, {0}}, Matrix{{0, 0}}},
        mcsys::Channel{Matrix{{0}, {1}}, Matrix{{1, 0}, {0, 1}}},
        mcsys::Channel{Matrix{{1}, {0}}, Matrix{{0, 0}}},
    };
    return sys;
}

// Two agents, no communication 2->1: channel 1 can only act, channel 2 can
// only sense, so the mode at 1 is fixed with witness subset {2}.
inline mcsys::MultiChannelSystem split_mode_pair(
    mcsys::TimeDomain domain = mcsys::TimeDomain::continuous) {
    mcsys::MultiChannelSystem sys;
    sys.domain = domain;
    sys.A = Matrix{{1}};
    sys.channels = {
        mcsys::Channel{Matrix{{1}}, Matrix{{0}}},
        mcsys::Channel{Matrix{{0}}, Matrix{{1}}},
    };
    return sys;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) M(i, j) = unit(rng);
    return M;
}

// Random jointly controllable and observable multi-channel system; when
// `force_fixed_mode` is set, state 1 is made an eigenmode that channels in a
// random proper subset cannot reach and the complementary channels cannot see.
inline mcsys::MultiChannelSystem random_system(std::mt19937_64& rng, int max_n, int max_m,
                                               bool force_fixed_mode,
                                               mcsys::TimeDomain domain =
                                                   mcsys::TimeDomain::continuous) {
    std::uniform_int_distribution<int> ndist(2, max_n), mdist(2, max_m), pdist(1, 2);
    for (;;) {
        const int n = ndist(rng);
        const int m = mdist(rng);
        mcsys::MultiChannelSystem sys;
        sys.domain = domain;
        sys.A = random_matrix(n, n, rng);
        for (int i = 0; i < m; ++i)
            sys.channels.push_back(
                mcsys::Channel{random_matrix(n, pdist(rng), rng), random_matrix(pdist(rng), n, rng)});
        if (force_fixed_mode) {
            sys.A.row(0).setZero();
            sys.A.col(0).setZero();
            sys.A(0, 0) = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
            std::uniform_int_distribution<int> subset_bits(1, (1 << m) - 2);
            const int mask = subset_bits(rng);
            for (int i = 0; i < m; ++i) {
                if (mask & (1 << i)) {
                    sys.channels[i].B.row(0).setZero();  // i in s: cannot reach the mode
                } else {
                    sys.channels[i].C.col(0).setZero();  // i in complement: cannot see it
                }
            }
        }
        if (mcsys::jointly_controllable(sys) && mcsys::jointly_observable(sys)) return sys;
    }
}

// Random strongly connected graph: a random Hamiltonian cycle plus extras.
inline graphs::DirectedGraph random_strongly_connected(std::mt19937_64& rng, int m) {
    graphs::DirectedGraph g;
    g.m = m;
    std::vector<int> perm(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < m; ++i) g.add_arc(perm[static_cast<std::size_t>(i)],
                                          perm[static_cast<std::size_t>((i + 1) % m)]);
    std::uniform_int_distribution<int> vdist(1, m);
    std::uniform_int_distribution<int> extra(0, m);
    const int extras = extra(rng);
    for (int k = 0; k < extras; ++k) {
        const int a = vdist(rng), b = vdist(rng);
        if (a != b) g.add_arc(a, b);
    }
    return g;
}

}  // namespace fixtures
