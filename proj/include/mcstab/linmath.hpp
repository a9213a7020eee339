#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

namespace mcstab {

using Matrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

namespace linmath {

/// Eigenvalue clustering / matching tolerance used for "is lambda an
/// eigenvalue of A" style questions throughout the library.
inline constexpr double kEigenvalueTol = 1e-8;

struct RankResult {
    Index rank{0};
    std::vector<double> singular_values;  // nonincreasing
    double tolerance_used{0.0};
};

/// SVD-based numerical rank. Default tolerance: max(rows,cols) * eps * sigma_max.
RankResult numerical_rank(const Matrix& M, std::optional<double> tol = std::nullopt);
RankResult numerical_rank(const ComplexMatrix& M, std::optional<double> tol = std::nullopt);

/// Expression-friendly dispatch onto the dense overloads.
template <typename Derived>
RankResult numerical_rank(const Eigen::MatrixBase<Derived>& M,
                          std::optional<double> tol = std::nullopt) {
    if constexpr (std::is_same_v<typename Derived::Scalar, double>) {
        return numerical_rank(Matrix(M), tol);
    } else {
        return numerical_rank(ComplexMatrix(M), tol);
    }
}

struct Spectrum {
    ComplexVector eigenvalues;  // with algebraic multiplicity, conjugate-paired for real input
};

/// Eigenvalues of a square real matrix, computed after diagonal balancing.
Spectrum spectrum(const Matrix& M);

/// Eigenvalues of M deduplicated within `cluster_tol` (absolute), ascending by (re, im).
ComplexVector distinct_eigenvalues(const Matrix& M, double cluster_tol = kEigenvalueTol);

/// Hautus test: rank [lambda I - A, B] = n for every eigenvalue of A.
bool pbh_controllable(const Matrix& A, const Matrix& B, std::optional<double> tol = std::nullopt);
/// Dual Hautus test on (C, A).
bool pbh_observable(const Matrix& C, const Matrix& A, std::optional<double> tol = std::nullopt);

/// Smallest k with rank [B, AB, ..., A^{k-1}B] = n. Throws DomainError when (A,B)
/// is not controllable.
int controllability_index(const Matrix& A, const Matrix& B, std::optional<double> tol = std::nullopt);

/// Kronecker product.
Matrix kron(const Matrix& A, const Matrix& B);

/// exp(A * dt).
Matrix matrix_exponential_step(const Matrix& A, double dt);

/// Max |a_i - b_sigma(i)| over a minimum-cost perfect matching of two equally
/// sized eigenvalue multisets (Hungarian algorithm).
double match_spectra(const ComplexVector& a, const ComplexVector& b);
/// Same, with each distance divided by max(1, |b_sigma(i)|).
double match_spectra_relative(const ComplexVector& a, const ComplexVector& b);

}  // namespace linmath
}  // namespace mcstab
