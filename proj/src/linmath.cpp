#include "mcstab/linmath.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcstab/errors.hpp"

namespace mcstab::linmath {

namespace {

template <typename Mat>
RankResult rank_impl(const Mat& M, std::optional<double> tol) {
    if (M.size() == 0) throw InvalidInputError("numerical_rank: matrix is empty");
    if (!M.allFinite()) throw InvalidInputError("numerical_rank: non-finite entries");
    Eigen::JacobiSVD<Mat> svd(M);
    const auto& sv = svd.singularValues();
    RankResult out;
    out.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    out.tolerance_used =
        tol.value_or(static_cast<double>(std::max(M.rows(), M.cols())) *
                     std::numeric_limits<double>::epsilon() * smax);
    out.rank = std::count_if(out.singular_values.begin(), out.singular_values.end(),
                             [&](double s) { return s > out.tolerance_used; });
    return out;
}

// Parlett-Reinsch style diagonal balancing (no permutations).
Matrix balanced(const Matrix& A) {
    Matrix B = A;
    const Index n = B.rows();
    const double radix = 2.0;
    bool converged = false;
    int sweeps = 0;
    while (!converged && sweeps++ < 100) {
        converged = true;
        for (Index i = 0; i < n; ++i) {
            double c = 0.0, r = 0.0;
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(B(j, i));
                r += std::abs(B(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double f = 1.0;
            const double s = c + r;
            while (c < r / radix) {
                c *= radix;
                r /= radix;
                f *= radix;
            }
            while (c >= r * radix) {
                c /= radix;
                r *= radix;
                f /= radix;
            }
            if ((c + r) < 0.95 * s && f != 1.0) {
                converged = false;
                B.col(i) *= f;
                B.row(i) /= f;
            }
        }
    }
    return B;
}

}  // namespace

RankResult numerical_rank(const Matrix& M, std::optional<double> tol) { return rank_impl(M, tol); }
RankResult numerical_rank(const ComplexMatrix& M, std::optional<double> tol) { return rank_impl(M, tol); }

Spectrum spectrum(const Matrix& M) {
    if (M.rows() != M.cols()) throw InvalidInputError("spectrum: matrix is not square");
    if (M.size() == 0) throw InvalidInputError("spectrum: matrix is empty");
    if (!M.allFinite()) throw InvalidInputError("spectrum: non-finite entries");
    Eigen::EigenSolver<Matrix> es(balanced(M), /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw DomainError("spectrum: eigensolver failed to converge");
    return Spectrum{es.eigenvalues()};
}

ComplexVector distinct_eigenvalues(const Matrix& M, double cluster_tol) {
    const ComplexVector ev = spectrum(M).eigenvalues;
    std::vector<Complex> out;
    for (Index i = 0; i < ev.size(); ++i) {
        bool seen = false;
        for (const Complex& c : out) {
            if (std::abs(ev(i) - c) <= cluster_tol) {
                seen = true;
                break;
            }
        }
        if (!seen) out.push_back(ev(i));
    }
    std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return Eigen::Map<ComplexVector>(out.data(), static_cast<Index>(out.size()));
}

bool pbh_controllable(const Matrix& A, const Matrix& B, std::optional<double> tol) {
    if (A.rows() != A.cols()) throw InvalidInputError("pbh_controllable: A is not square");
    if (B.rows() != A.rows()) throw InvalidInputError("pbh_controllable: B row count mismatch");
    const Index n = A.rows();
    const ComplexVector lams = distinct_eigenvalues(A);
    ComplexMatrix P(n, n + B.cols());
    for (Index k = 0; k < lams.size(); ++k) {
        P.leftCols(n) = lams(k) * ComplexMatrix::Identity(n, n) - A.cast<Complex>();
        P.rightCols(B.cols()) = B.cast<Complex>();
        if (numerical_rank(P, tol).rank < n) return false;
    }
    return true;
}

bool pbh_observable(const Matrix& C, const Matrix& A, std::optional<double> tol) {
    return pbh_controllable(A.transpose(), C.transpose(), tol);
}

int controllability_index(const Matrix& A, const Matrix& B, std::optional<double> tol) {
    if (A.rows() != A.cols()) throw InvalidInputError("controllability_index: A is not square");
    if (B.rows() != A.rows()) throw InvalidInputError("controllability_index: B row count mismatch");
    const Index n = A.rows();
    const Index r = B.cols();
    Matrix K(n, n * r);
    Matrix blk = B;
    for (Index k = 0; k < n; ++k) {
        K.middleCols(k * r, r) = blk;
        if (numerical_rank(Matrix(K.leftCols((k + 1) * r)), tol).rank == n)
            return static_cast<int>(k + 1);
        blk = A * blk;
    }
    throw DomainError("controllability_index: pair (A,B) is not controllable");
}

Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

Matrix matrix_exponential_step(const Matrix& A, double dt) {
    if (A.rows() != A.cols()) throw InvalidInputError("matrix_exponential_step: A is not square");
    if (!A.allFinite() || !std::isfinite(dt))
        throw InvalidInputError("matrix_exponential_step: non-finite input");
    return (A * dt).exp();
}

namespace {

// Hungarian algorithm (shortest augmenting paths with potentials), square cost.
std::vector<int> hungarian(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> match(n);  // row i -> column match[i]
    for (int j = 1; j <= n; ++j)
        if (p[j] != 0) match[p[j] - 1] = j - 1;
    return match;
}

double match_impl(const ComplexVector& a, const ComplexVector& b, bool relative) {
    if (a.size() != b.size()) throw InvalidInputError("match_spectra: size mismatch");
    if (a.size() == 0) return 0.0;
    const int n = static_cast<int>(a.size());
    Matrix cost(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double d = std::abs(a(i) - b(j));
            if (relative) d /= std::max(1.0, std::abs(b(j)));
            cost(i, j) = d;
        }
    const std::vector<int> match = hungarian(cost);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, cost(i, match[i]));
    return worst;
}

}  // namespace

double match_spectra(const ComplexVector& a, const ComplexVector& b) {
    return match_impl(a, b, false);
}

double match_spectra_relative(const ComplexVector& a, const ComplexVector& b) {
    return match_impl(a, b, true);
}

}  // namespace mcstab::linmath
