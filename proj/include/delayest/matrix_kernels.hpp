#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace delayest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline void require_finite(const Matrix& a, const char* name) {
    if (!a.allFinite())
        throw std::invalid_argument(std::string(name) + ": non-finite entries");
}

/// Relative rank tolerance in the usual LAPACK style: max(rows, cols) * eps.
inline double default_rank_tol(Index rows, Index cols) {
    return static_cast<double>(std::max(rows, cols)) *
           std::numeric_limits<double>::epsilon();
}

/// Stacks a sliding window of vector samples into a block-Hankel matrix.
/// Row block r, column c holds samples[start + r + c]; the result has
/// block_rows * dim(sample) rows and cols columns.
inline Matrix block_hankel(std::span<const Vector> samples, Index start,
                           Index block_rows, Index cols) {
    if (block_rows < 1 || cols < 1)
        throw std::out_of_range("block_hankel: block_rows and cols must be positive");
    const Index last = start + block_rows + cols - 2;
    if (start < 0 || last >= static_cast<Index>(samples.size()))
        throw std::out_of_range("block_hankel: window [start, start+block_rows+cols-2] "
                                "exceeds the sample range");
    const Index dim = samples[start].size();
    Matrix out(block_rows * dim, cols);
    for (Index r = 0; r < block_rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            const Vector& s = samples[start + r + c];
            if (s.size() != dim)
                throw std::invalid_argument("block_hankel: samples have mixed dimensions");
            out.block(r * dim, c, dim, 1) = s;
        }
    }
    return out;
}

struct LqFactors {
    Matrix l;  // square lower triangular, non-negative diagonal
    Matrix q;  // rows orthonormal: q * q^T == I
};

/// LQ factorization a == l * q of a wide matrix, computed as the transposed
/// QR of a^T. The diagonal of l is normalized non-negative.
///
/// row_partition describes how the rows of `a` group into stacked blocks;
/// unless rank_tol == 0, a row whose pivot falls below tolerance raises
/// SingularInputError naming the block that row belongs to. rank_tol < 0
/// selects the default tolerance.
inline LqFactors lq_factorize(const Matrix& a, std::span<const Index> row_partition,
                              double rank_tol = -1.0) {
    require_finite(a, "lq_factorize");
    const Index rows = a.rows(), cols = a.cols();
    if (rows < 1 || cols < rows)
        throw std::invalid_argument("lq_factorize: matrix must be wide (cols >= rows >= 1)");
    const Index part_sum = std::accumulate(row_partition.begin(), row_partition.end(), Index{0});
    if (part_sum != rows)
        throw std::invalid_argument("lq_factorize: row partition does not sum to the row count");

    Eigen::HouseholderQR<Matrix> qr(a.transpose());
    Matrix r = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
    Matrix qt = qr.householderQ() * Matrix::Identity(cols, rows);

    LqFactors f{r.transpose(), qt.transpose()};
    for (Index k = 0; k < rows; ++k) {
        if (f.l(k, k) < 0) {
            f.l.col(k) = -f.l.col(k);
            f.q.row(k) = -f.q.row(k);
        }
    }

    if (rank_tol != 0.0) {
        const double rel = rank_tol < 0 ? default_rank_tol(rows, cols) : rank_tol;
        const double cut = rel * f.l.diagonal().cwiseAbs().maxCoeff();
        for (Index k = 0; k < rows; ++k) {
            if (f.l(k, k) <= cut) {
                // locate the partition block containing row k
                Index block = 0, upper = row_partition.empty() ? rows : row_partition[0];
                while (k >= upper && block + 1 < static_cast<Index>(row_partition.size()))
                    upper += row_partition[++block];
                throw SingularInputError(
                    "lq_factorize: rows are linearly dependent within tolerance "
                    "(first deficient pivot in block " + std::to_string(block) + ")",
                    block);
            }
        }
    }
    return f;
}

/// Moore-Penrose pseudoinverse via SVD. Singular values at or below
/// tol * sigma_max are treated as zero; tol < 0 selects the default.
inline Matrix pinv(const Matrix& a, double tol = -1.0) {
    require_finite(a, "pinv");
    if (a.rows() == 0 || a.cols() == 0)
        return Matrix::Zero(a.cols(), a.rows());
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double rel = tol < 0 ? default_rank_tol(a.rows(), a.cols()) : tol;
    const Vector& s = svd.singularValues();
    const double cut = rel * s(0);
    Vector sinv = Vector::Zero(s.size());
    for (Index k = 0; k < s.size(); ++k)
        if (s(k) > cut) sinv(k) = 1.0 / s(k);
    return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

/// Rank-one update of an inverse: given p == g^-1 with g symmetric positive
/// definite, returns (gamma * g + v * v^T)^-1 without forming g. Throws
/// BreakdownError when the update denominator is not strictly positive,
/// which can only happen once p has lost positive definiteness.
inline Matrix sherman_morrison_update(const Matrix& p, const Vector& v, double gamma) {
    require_finite(p, "sherman_morrison_update");
    require_finite(v, "sherman_morrison_update");
    if (p.rows() != p.cols() || p.rows() != v.size())
        throw std::invalid_argument("sherman_morrison_update: dimension mismatch");
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("sherman_morrison_update: gamma must lie in (0, 1]");
    const Vector pv = p * v;
    const double denom = gamma + v.dot(pv);
    if (!(denom > 0.0) || !std::isfinite(denom))
        throw BreakdownError("sherman_morrison_update: non-positive update denominator; "
                             "the tracked inverse is no longer positive definite");
    // symmetric by construction: p - (pv)(pv)^T / denom
    return (p - pv * pv.transpose() / denom) / gamma;
}

}  // namespace delayest
