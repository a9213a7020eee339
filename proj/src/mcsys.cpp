#include "mcstab/mcsys.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mcstab/errors.hpp"

namespace mcstab::mcsys {

using linmath::numerical_rank;

Matrix MultiChannelSystem::input_matrix() const {
    Index p = 0;
    for (const auto& ch : channels) p += ch.B.cols();
    Matrix B(n(), p);
    Index c = 0;
    for (const auto& ch : channels) {
        B.middleCols(c, ch.B.cols()) = ch.B;
        c += ch.B.cols();
    }
    return B;
}

Matrix MultiChannelSystem::output_matrix() const {
    Index q = 0;
    for (const auto& ch : channels) q += ch.C.rows();
    Matrix C(q, n());
    Index r = 0;
    for (const auto& ch : channels) {
        C.middleRows(r, ch.C.rows()) = ch.C;
        r += ch.C.rows();
    }
    return C;
}

void MultiChannelSystem::validate() const {
    if (A.rows() != A.cols()) throw InvalidInputError("system: A is not square");
    if (A.rows() < 1) throw InvalidInputError("system: state dimension must be >= 1");
    if (channels.empty()) throw InvalidInputError("system: needs at least one channel");
    if (!A.allFinite()) throw InvalidInputError("system: A has non-finite entries");
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const auto& ch = channels[i];
        const std::string tag = "channel " + std::to_string(i + 1);
        if (ch.B.rows() != A.rows()) throw InvalidInputError("system: " + tag + " B rows != n");
        if (ch.C.cols() != A.rows()) throw InvalidInputError("system: " + tag + " C cols != n");
        if (ch.B.cols() < 1 || ch.C.rows() < 1)
            throw InvalidInputError("system: " + tag + " has an empty B or C");
        if (!ch.B.allFinite() || !ch.C.allFinite())
            throw InvalidInputError("system: " + tag + " has non-finite entries");
    }
}

SubsetSelector::SubsetSelector(std::vector<int> labels) : s(std::move(labels)) {
    for (std::size_t k = 1; k < s.size(); ++k)
        if (s[k - 1] >= s[k])
            throw InvalidInputError("subset: labels must be strictly increasing");
}

std::vector<int> SubsetSelector::complement(int m) const {
    std::vector<int> out;
    std::size_t k = 0;
    for (int i = 1; i <= m; ++i) {
        if (k < s.size() && s[k] == i) {
            ++k;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

Matrix SubsetSelector::input_block(const MultiChannelSystem& sys) const {
    Index p = 0;
    for (int i : s) p += sys.channels[i - 1].B.cols();
    Matrix B(sys.n(), p);
    Index c = 0;
    for (int i : s) {
        const auto& Bi = sys.channels[i - 1].B;
        B.middleCols(c, Bi.cols()) = Bi;
        c += Bi.cols();
    }
    return B;
}

Matrix SubsetSelector::complement_output_block(const MultiChannelSystem& sys) const {
    const std::vector<int> comp = complement(sys.m());
    Index q = 0;
    for (int i : comp) q += sys.channels[i - 1].C.rows();
    Matrix C(q, sys.n());
    Index r = 0;
    for (int i : comp) {
        const auto& Ci = sys.channels[i - 1].C;
        C.middleRows(r, Ci.rows()) = Ci;
        r += Ci.rows();
    }
    return C;
}

std::vector<SubsetSelector> SubsetSelector::all_subsets(int m) {
    std::vector<SubsetSelector> out;
    out.reserve(std::size_t{1} << m);
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << m); ++mask) {
        std::vector<int> labels;
        for (int i = 0; i < m; ++i)
            if (mask & (std::uint32_t{1} << i)) labels.push_back(i + 1);
        out.emplace_back(std::move(labels));
    }
    return out;
}

bool jointly_controllable(const MultiChannelSystem& sys, std::optional<double> tol) {
    sys.validate();
    return linmath::pbh_controllable(sys.A, sys.input_matrix(), tol);
}

bool jointly_observable(const MultiChannelSystem& sys, std::optional<double> tol) {
    sys.validate();
    return linmath::pbh_observable(sys.output_matrix(), sys.A, tol);
}

graphs::DirectedGraph transfer_graph(const MultiChannelSystem& sys, double rel_tol) {
    sys.validate();
    const int m = sys.m();
    const Index n = sys.n();
    graphs::DirectedGraph g;
    g.m = m;
    std::vector<char> found(static_cast<std::size_t>(m) * m, false);
    Matrix P = Matrix::Identity(n, n);  // A^k
    for (Index k = 0; k < 2 * n; ++k) {
        const double pnorm = P.norm();
        for (int j = 0; j < m; ++j) {
            const Matrix PB = P * sys.channels[j].B;
            for (int i = 0; i < m; ++i) {
                if (found[static_cast<std::size_t>(j) * m + i]) continue;
                const Matrix M = sys.channels[i].C * PB;
                const double scale = std::max(1.0, sys.channels[i].C.norm() * pnorm *
                                                       sys.channels[j].B.norm());
                if (M.norm() > rel_tol * scale) {
                    found[static_cast<std::size_t>(j) * m + i] = true;
                    g.add_arc(j + 1, i + 1);
                }
            }
        }
        P = sys.A * P;
    }
    return g;
}

ComplexMatrix fixed_mode_pencil(const MultiChannelSystem& sys, Complex lambda,
                                const SubsetSelector& subset) {
    const Index n = sys.n();
    const Matrix Bs = subset.input_block(sys);
    const Matrix Cc = subset.complement_output_block(sys);
    ComplexMatrix P(n + Cc.rows(), n + Bs.cols());
    P.setZero();
    P.topLeftCorner(n, n) = lambda * ComplexMatrix::Identity(n, n) - sys.A.cast<Complex>();
    P.topRightCorner(n, Bs.cols()) = Bs.cast<Complex>();
    P.bottomLeftCorner(Cc.rows(), n) = Cc.cast<Complex>();
    return P;
}

ComplexVector FixedSpectrumReport::eigenvalues() const {
    ComplexVector out(static_cast<Index>(fixed.size()));
    for (std::size_t k = 0; k < fixed.size(); ++k) out(static_cast<Index>(k)) = fixed[k].eigenvalue;
    return out;
}

FixedSpectrumReport fixed_spectrum(const MultiChannelSystem& sys,
                                   const FixedSpectrumOptions& opts) {
    sys.validate();
    const int m = sys.m();
    if (m > opts.max_channels)
        throw ResourceError("fixed_spectrum: 2^m subset enumeration with m = " +
                            std::to_string(m) + " exceeds the cap of " +
                            std::to_string(opts.max_channels) +
                            " channels; raise the cap explicitly to proceed");
    const Index n = sys.n();
    const ComplexVector lams = linmath::distinct_eigenvalues(sys.A);
    const auto subsets = SubsetSelector::all_subsets(m);

    FixedSpectrumReport report;
    report.min_pencil_rank = n;
    for (Index k = 0; k < lams.size(); ++k) {
        FixedSpectrumReport::Entry entry;
        entry.eigenvalue = lams(k);
        for (const auto& subset : subsets) {
            const ComplexMatrix P = fixed_mode_pencil(sys, lams(k), subset);
            const auto rr = numerical_rank(P, opts.tol);
            report.tolerance_used = std::max(report.tolerance_used, rr.tolerance_used);
            report.min_pencil_rank = std::min(report.min_pencil_rank, rr.rank);
            if (rr.rank < n) entry.witnesses.push_back(Witness{subset.s, rr.rank, rr.singular_values});
        }
        if (!entry.witnesses.empty()) report.fixed.push_back(std::move(entry));
    }
    report.deficiency_r = static_cast<int>(std::max<Index>(0, n - report.min_pencil_rank));
    return report;
}

int deficiency_bound(const MultiChannelSystem& sys, const FixedSpectrumOptions& opts) {
    return fixed_spectrum(sys, opts).deficiency_r;
}

ComplexVector fixed_spectrum_sampling_oracle(const MultiChannelSystem& sys, int trials,
                                             std::uint64_t seed, double match_tol) {
    sys.validate();
    if (trials < 2) throw InvalidInputError("sampling oracle: needs at least 2 trials");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Complex> candidates;
    for (int t = 0; t < trials; ++t) {
        Matrix Acl = sys.A;
        for (const auto& ch : sys.channels) {
            Matrix F(ch.B.cols(), ch.C.rows());
            for (Index i = 0; i < F.rows(); ++i)
                for (Index j = 0; j < F.cols(); ++j) F(i, j) = unit(rng);
            Acl += ch.B * F * ch.C;
        }
        const ComplexVector ev = linmath::spectrum(Acl).eigenvalues;
        if (t == 0) {
            candidates.assign(ev.data(), ev.data() + ev.size());
            continue;
        }
        std::vector<Complex> avail(ev.data(), ev.data() + ev.size());
        std::vector<Complex> kept;
        for (const Complex& c : candidates) {
            double best = match_tol;
            std::size_t best_idx = avail.size();
            for (std::size_t j = 0; j < avail.size(); ++j) {
                const double d = std::abs(c - avail[j]);
                if (d <= best) {
                    best = d;
                    best_idx = j;
                }
            }
            if (best_idx < avail.size()) {
                kept.push_back(c);
                avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(best_idx));
            }
        }
        candidates = std::move(kept);
        if (candidates.empty()) break;
    }
    std::sort(candidates.begin(), candidates.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return Eigen::Map<ComplexVector>(candidates.data(), static_cast<Index>(candidates.size()));
}

MultiChannelSystem share_outputs(const MultiChannelSystem& sys, const graphs::DirectedGraph& g) {
    sys.validate();
    if (g.m != sys.m()) throw InvalidInputError("share_outputs: graph size != channel count");
    const auto nbrs = graphs::neighbor_sets(g);
    MultiChannelSystem out = sys;
    for (int i = 0; i < sys.m(); ++i) {
        Index rows = 0;
        for (int j : nbrs[i]) rows += sys.channels[j - 1].C.rows();
        Matrix C(rows, sys.n());
        Index r = 0;
        for (int j : nbrs[i]) {
            const auto& Cj = sys.channels[j - 1].C;
            C.middleRows(r, Cj.rows()) = Cj;
            r += Cj.rows();
        }
        out.channels[i].C = C;
    }
    return out;
}

}  // namespace mcstab::mcsys
