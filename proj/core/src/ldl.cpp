#include "ldl.hpp"

#include "distvar/error.hpp"

#include <Eigen/OrderingMethods>

#include <cmath>

namespace distvar::conic::detail {

using SpMat = QuasiDefiniteLdl::Matrix;

void QuasiDefiniteLdl::analyze(const SpMat& lower, const std::vector<int>& signs)
{
    n_ = static_cast<int>(lower.rows());
    if (lower.cols() != n_ || static_cast<int>(signs.size()) != n_) {
        throw Error("ldl: dimension mismatch");
    }
    SpMat full = lower.selfadjointView<Eigen::Lower>();
    Eigen::AMDOrdering<int> amd;
    amd(full, perm_inv_);
    perm_ = perm_inv_.inverse();

    signs_.assign(static_cast<std::size_t>(n_), 1);
    for (int i = 0; i < n_; ++i) {
        signs_[static_cast<std::size_t>(perm_.indices()[i])] = signs[static_cast<std::size_t>(i)];
    }

    upper_.resize(n_, n_);
    upper_.selfadjointView<Eigen::Upper>() = lower.selfadjointView<Eigen::Lower>().twistedBy(perm_);
    upper_.makeCompressed();

    // Elimination tree and column counts of L.
    const int* ap = upper_.outerIndexPtr();
    const int* ai = upper_.innerIndexPtr();
    std::vector<int> work(static_cast<std::size_t>(n_), -1);
    std::vector<int> lnz(static_cast<std::size_t>(n_), 0);
    etree_.assign(static_cast<std::size_t>(n_), -1);
    for (int j = 0; j < n_; ++j) {
        work[j] = j;
        for (int p = ap[j]; p < ap[j + 1]; ++p) {
            int i = ai[p];
            while (i < j && work[i] != j) {
                if (etree_[i] == -1) {
                    etree_[i] = j;
                }
                ++lnz[i];
                work[i] = j;
                i = etree_[i];
            }
        }
    }
    lp_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (int i = 0; i < n_; ++i) {
        lp_[i + 1] = lp_[i] + lnz[i];
    }
    li_.assign(static_cast<std::size_t>(lp_[n_]), 0);
    lx_.assign(static_cast<std::size_t>(lp_[n_]), Scalar(0));
    d_inv_.assign(static_cast<std::size_t>(n_), Scalar(0));
}

void QuasiDefiniteLdl::factorize(const SpMat& lower)
{
    upper_.selfadjointView<Eigen::Upper>() = lower.selfadjointView<Eigen::Lower>().twistedBy(perm_);
    upper_.makeCompressed();
    const int* ap = upper_.outerIndexPtr();
    const int* ai = upper_.innerIndexPtr();
    const Scalar* ax = upper_.valuePtr();
    if (upper_.nonZeros() > 0 && ap[n_] != upper_.nonZeros()) {
        throw Error("ldl: pattern changed since analyze");
    }

    std::vector<Scalar> y(static_cast<std::size_t>(n_), Scalar(0));
    std::vector<char> marked(static_cast<std::size_t>(n_), 0);
    std::vector<int> next(lp_.begin(), lp_.end() - 1);
    std::vector<int> stack(static_cast<std::size_t>(n_));
    std::vector<int> reach(static_cast<std::size_t>(n_));
    bumped_ = 0;

    // Up-looking: row k of L from a sparse triangular solve along the etree.
    for (int k = 0; k < n_; ++k) {
        int nreach = 0;
        Scalar dk = Scalar(0);
        for (int p = ap[k]; p < ap[k + 1]; ++p) {
            const int i = ai[p];
            if (i == k) {
                dk += ax[p];
                continue;
            }
            y[i] = ax[p];
            int depth = 0;
            for (int t = i; t != -1 && t < k && !marked[t]; t = etree_[t]) {
                marked[t] = 1;
                stack[depth++] = t;
            }
            while (depth > 0) {
                reach[nreach++] = stack[--depth];
            }
        }
        for (int r = nreach - 1; r >= 0; --r) {
            const int c = reach[r];
            const Scalar yc = y[c];
            for (int q = lp_[c]; q < next[c]; ++q) {
                y[li_[q]] -= lx_[q] * yc;
            }
            const Scalar l = yc * d_inv_[c];
            li_[next[c]] = k;
            lx_[next[c]] = l;
            ++next[c];
            dk -= yc * l;
            y[c] = 0.0;
            marked[c] = 0;
        }
        const int s = signs_[k];
        if (!(s * dk > pivot_threshold)) {
            dk = s * dynamic_reg;
            ++bumped_;
        }
        d_inv_[k] = Scalar(1) / dk;
    }
}

QuasiDefiniteLdl::Vector QuasiDefiniteLdl::solve(const Vector& rhs) const
{
    Vector x = perm_ * rhs;
    for (int i = 0; i < n_; ++i) {
        for (int q = lp_[i]; q < lp_[i + 1]; ++q) {
            x[li_[q]] -= lx_[q] * x[i];
        }
    }
    for (int i = 0; i < n_; ++i) {
        x[i] *= d_inv_[i];
    }
    for (int i = n_ - 1; i >= 0; --i) {
        for (int q = lp_[i]; q < lp_[i + 1]; ++q) {
            x[i] -= lx_[q] * x[li_[q]];
        }
    }
    return perm_inv_ * x;
}

} // namespace distvar::conic::detail
