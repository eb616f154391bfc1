#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace distvar::conic::detail {

/// Sparse LDL' for symmetric quasi-definite matrices, in extended precision. The expected sign of
/// every pivot is known up front, so pivots that come out with the wrong sign
/// or too close to zero are replaced by +-dynamic_reg instead of failing.
class QuasiDefiniteLdl {
public:
    using Scalar = long double;
    using Matrix = Eigen::SparseMatrix<Scalar>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    /// `lower` holds the lower triangle (diagonal included). `signs[i]` is +1 or -1.
    void analyze(const Matrix& lower, const std::vector<int>& signs);
    /// Same pattern as passed to analyze().
    void factorize(const Matrix& lower);
    Vector solve(const Vector& rhs) const;

    int bumped_pivots() const { return bumped_; }
    double pivot_threshold = 1e-13;
    double dynamic_reg = 1e-7;

private:
    using Perm = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

    int n_ = 0;
    Perm perm_;
    Perm perm_inv_;
    std::vector<int> signs_; // permuted order
    std::vector<int> etree_;
    std::vector<int> lp_;
    std::vector<int> li_;
    std::vector<Scalar> lx_;
    std::vector<Scalar> d_inv_;
    Matrix upper_;
    int bumped_ = 0;
};

} // namespace distvar::conic::detail
