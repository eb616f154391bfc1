#include "distvar/conic.hpp"

#include "distvar/error.hpp"

#include "ldl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace distvar::conic {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

int ConicProgram::num_variables() const
{
    int n = 0;
    for (const auto& blk : cones) {
        n += blk.dim;
    }
    return n;
}

void ConicProgram::validate() const
{
    for (const auto& blk : cones) {
        const int min_dim = blk.kind == ConeKind::soc ? 2 : blk.kind == ConeKind::rsoc ? 3 : 1;
        if (blk.dim < min_dim) {
            throw Error(fmt::format("cone block of dimension {} is too small", blk.dim));
        }
    }
    const int n = num_variables();
    if (c.size() != n || A.cols() != n) {
        throw Error(fmt::format("cone layout has {} variables but c has {} and A has {} columns",
                                n, c.size(), A.cols()));
    }
    if (A.rows() != b.size()) {
        throw Error("A and b row counts differ");
    }
    if (!c.allFinite() || !b.allFinite()) {
        throw Error("program data must be finite");
    }
}

std::string_view to_string(Status status)
{
    switch (status) {
    case Status::optimal:
        return "optimal";
    case Status::infeasible:
        return "infeasible";
    case Status::unbounded:
        return "unbounded";
    case Status::max_iter:
        return "max_iter";
    }
    return "unknown";
}

KktResiduals kkt_residuals(const ConicProgram& prog, const VectorXd& x, const VectorXd& y,
                           const VectorXd& z)
{
    KktResiduals r;
    const double pobj = prog.c.dot(x);
    const double dobj = prog.b.dot(y);
    r.primal_feas = (prog.A * x - prog.b).norm() / (1.0 + prog.b.norm());
    r.dual_feas = (prog.A.transpose() * y + z - prog.c).norm() / (1.0 + prog.c.norm());
    r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    return r;
}

double cone_violation(const ConicProgram& prog, const VectorXd& x)
{
    double worst = 0.0;
    int off = 0;
    for (const auto& blk : prog.cones) {
        const auto v = x.segment(off, blk.dim);
        switch (blk.kind) {
        case ConeKind::free:
            break;
        case ConeKind::nonneg:
            worst = std::max(worst, -v.minCoeff());
            break;
        case ConeKind::soc:
            worst = std::max(worst, v.tail(blk.dim - 1).norm() - v[0]);
            break;
        case ConeKind::rsoc:
            worst = std::max({worst, -v[0], -v[1],
                              v.tail(blk.dim - 2).squaredNorm() - 2.0 * v[0] * v[1]});
            break;
        }
        off += blk.dim;
    }
    return worst;
}

void write_triplets(std::ostream& out, const ConicProgram& prog)
{
    fmt::print(out, "conic {} {}\n", prog.A.rows(), prog.A.cols());
    for (const auto& blk : prog.cones) {
        static constexpr const char* names[] = {"free", "nonneg", "soc", "rsoc"};
        fmt::print(out, "cone {} {}\n", names[static_cast<int>(blk.kind)], blk.dim);
    }
    for (int j = 0; j < prog.c.size(); ++j) {
        if (prog.c[j] != 0.0) {
            fmt::print(out, "c {} {:.17g}\n", j, prog.c[j]);
        }
    }
    for (int j = 0; j < prog.A.outerSize(); ++j) {
        for (SpMat::InnerIterator it(prog.A, j); it; ++it) {
            fmt::print(out, "A {} {} {:.17g}\n", it.row(), it.col(), it.value());
        }
    }
    for (int i = 0; i < prog.b.size(); ++i) {
        if (prog.b[i] != 0.0) {
            fmt::print(out, "b {} {:.17g}\n", i, prog.b[i]);
        }
    }
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Near the cone boundary the blocks of W^-2 have eigenvalues below the
// rounding error of their entries in double, so H and the KKT system are
// carried in extended precision.
using Real = long double;
using MatrixXl = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXl = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using SpMatL = Eigen::SparseMatrix<Real>;

struct Block {
    ConeKind kind;
    int offset;
    int dim;
};

// Nesterov-Todd scaling of one block, in canonical (second-order cone)
// coordinates. For nonneg blocks only the diagonal `w` is used.
struct Scaling {
    VectorXd w;    // nonneg: sqrt(x / z)
    MatrixXd W;    // soc: eta * Wbar
    MatrixXd Winv; // soc: J Wbar J / eta
    MatrixXl H;    // W^-2 in original coordinates (soc and rsoc)
};

// Rows removed by presolve are reported back with a zero multiplier.
struct Presolved {
    SpMat A;
    VectorXd b;
    std::vector<int> kept_rows;
    bool inconsistent = false;
};

Presolved presolve(const ConicProgram& prog)
{
    Presolved out;
    const int m = static_cast<int>(prog.A.rows());
    Eigen::SparseMatrix<double, Eigen::RowMajor> rows = prog.A;
    rows.makeCompressed();
    const double bnorm = 1.0 + prog.b.norm();

    // Rows keyed by column pattern; within a pattern, compare normalised values.
    std::map<std::vector<int>, std::vector<int>> by_pattern;
    std::vector<std::vector<double>> normalised(m);
    std::vector<double> scale(m, 0.0);
    for (int i = 0; i < m; ++i) {
        std::vector<int> pattern;
        for (decltype(rows)::InnerIterator it(rows, i); it; ++it) {
            if (it.value() != 0.0) {
                pattern.push_back(static_cast<int>(it.col()));
                normalised[i].push_back(it.value());
            }
        }
        if (pattern.empty()) {
            if (std::abs(prog.b[i]) > 1e-12 * bnorm) {
                out.inconsistent = true;
            }
            continue;
        }
        scale[i] = normalised[i].front();
        for (double& v : normalised[i]) {
            v /= scale[i];
        }
        auto& bucket = by_pattern[pattern];
        bool duplicate = false;
        for (int other : bucket) {
            bool same = true;
            for (std::size_t k = 0; k < normalised[i].size() && same; ++k) {
                same = std::abs(normalised[i][k] - normalised[other][k]) <=
                       1e-12 * (1.0 + std::abs(normalised[other][k]));
            }
            if (same) {
                duplicate = true;
                const double bi = prog.b[i] / scale[i];
                const double bo = prog.b[other] / scale[other];
                if (std::abs(bi - bo) > 1e-10 * (1.0 + std::abs(bo))) {
                    out.inconsistent = true;
                }
                break;
            }
        }
        if (!duplicate) {
            bucket.push_back(i);
            out.kept_rows.push_back(i);
        }
    }
    std::sort(out.kept_rows.begin(), out.kept_rows.end());

    if (static_cast<int>(out.kept_rows.size()) == m) {
        out.A = prog.A;
        out.b = prog.b;
        return out;
    }
    std::vector<int> new_index(m, -1);
    for (std::size_t r = 0; r < out.kept_rows.size(); ++r) {
        new_index[out.kept_rows[r]] = static_cast<int>(r);
    }
    std::vector<Eigen::Triplet<double>> trips;
    for (int j = 0; j < prog.A.outerSize(); ++j) {
        for (SpMat::InnerIterator it(prog.A, j); it; ++it) {
            const int r = new_index[it.row()];
            if (r >= 0) {
                trips.emplace_back(r, it.col(), it.value());
            }
        }
    }
    out.A.resize(static_cast<int>(out.kept_rows.size()), prog.A.cols());
    out.A.setFromTriplets(trips.begin(), trips.end());
    out.b.resize(static_cast<int>(out.kept_rows.size()));
    for (std::size_t r = 0; r < out.kept_rows.size(); ++r) {
        out.b[static_cast<int>(r)] = prog.b[out.kept_rows[r]];
    }
    return out;
}

class InteriorPoint {
public:
    InteriorPoint(const ConicProgram& prog, const Settings& settings)
        : prog_(prog), settings_(settings)
    {
        int off = 0;
        for (const auto& c : prog.cones) {
            blocks_.push_back({c.kind, off, c.dim});
            off += c.dim;
            if (c.kind == ConeKind::nonneg) {
                degree_ += c.dim;
            } else if (c.kind != ConeKind::free) {
                degree_ += 1;
            }
        }
        n_ = off;
        scalings_.resize(blocks_.size());
    }

    ConicSolution run();

private:
    // The 45-degree rotation mapping rsoc blocks onto soc; it is its own inverse.
    void rotate(VectorXd& v) const
    {
        for (const auto& blk : blocks_) {
            if (blk.kind == ConeKind::rsoc) {
                const double a = v[blk.offset];
                const double b = v[blk.offset + 1];
                v[blk.offset] = (a + b) * kInvSqrt2;
                v[blk.offset + 1] = (a - b) * kInvSqrt2;
            }
        }
    }

    static bool is_soc_like(ConeKind k) { return k == ConeKind::soc || k == ConeKind::rsoc; }

    void unit_point(VectorXd& v) const;
    void compute_scaling(const VectorXd& xc, const VectorXd& zc);
    VectorXd apply_w(const VectorXd& vc, bool inverse) const;
    VectorXd circ(const VectorXd& u, const VectorXd& v) const;
    VectorXd inv_circ(const VectorXd& lam, const VectorXd& v) const;
    double max_step(const VectorXd& lam, const VectorXd& d) const;
    void build_kkt();
    void factor_kkt();
    void shift_into_cone(VectorXd& v) const;
    bool initial_point(VectorXd& x, VectorXd& y, VectorXd& z);
    VectorXl apply_h(const VectorXl& dx) const;
    bool solve_newton(const VectorXd& rd, const VectorXd& rp, const VectorXd& rtilde,
                      VectorXd& dx, VectorXd& dy, VectorXd& dz);

    const ConicProgram& prog_;
    const Settings& settings_;
    std::vector<Block> blocks_;
    int n_ = 0;
    int degree_ = 0;
    Presolved pre_;
    std::vector<Scaling> scalings_;
    VectorXd lambda_;
    SpMatL kkt_;
    detail::QuasiDefiniteLdl ldlt_;
    bool analyzed_ = false;
};

void InteriorPoint::unit_point(VectorXd& v) const
{
    v.setZero(n_);
    for (const auto& blk : blocks_) {
        if (blk.kind == ConeKind::nonneg) {
            v.segment(blk.offset, blk.dim).setOnes();
        } else if (is_soc_like(blk.kind)) {
            v[blk.offset] = 1.0;
        }
    }
    rotate(v); // canonical -> original
}

void InteriorPoint::compute_scaling(const VectorXd& xc, const VectorXd& zc)
{
    lambda_.setZero(n_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const Block& blk = blocks_[k];
        Scaling& sc = scalings_[k];
        const int o = blk.offset;
        const int d = blk.dim;
        if (blk.kind == ConeKind::nonneg) {
            sc.w = (xc.segment(o, d).array() / zc.segment(o, d).array()).sqrt();
            lambda_.segment(o, d) = (xc.segment(o, d).array() * zc.segment(o, d).array()).sqrt();
        } else if (is_soc_like(blk.kind)) {
            const VectorXd s = xc.segment(o, d);
            const VectorXd z = zc.segment(o, d);
            const double s_res =
                std::max((s[0] - s.tail(d - 1).norm()) * (s[0] + s.tail(d - 1).norm()), 1e-300);
            const double z_res =
                std::max((z[0] - z.tail(d - 1).norm()) * (z[0] + z.tail(d - 1).norm()), 1e-300);
            const VectorXd sbar = s / std::sqrt(s_res);
            const VectorXd zbar = z / std::sqrt(z_res);
            const double gamma = std::sqrt(std::max(0.5 * (1.0 + sbar.dot(zbar)), 1e-300));
            VectorXd wbar(d);
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            wbar.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
            const double eta = std::pow(s_res / z_res, 0.25);

            MatrixXd wb(d, d);
            wb(0, 0) = wbar[0];
            wb.block(0, 1, 1, d - 1) = wbar.tail(d - 1).transpose();
            wb.block(1, 0, d - 1, 1) = wbar.tail(d - 1);
            wb.block(1, 1, d - 1, d - 1) =
                MatrixXd::Identity(d - 1, d - 1) +
                wbar.tail(d - 1) * wbar.tail(d - 1).transpose() / (1.0 + wbar[0]);
            sc.W = eta * wb;
            sc.Winv = wb;
            sc.Winv.block(0, 1, 1, d - 1) *= -1.0;
            sc.Winv.block(1, 0, d - 1, 1) *= -1.0;
            sc.Winv /= eta;
            // Wbar^-2 = 2 v v' - J with v = J wbar; w0 is recomputed from the
            // tail so that wbar' J wbar = 1 holds to extended precision.
            VectorXl v = wbar.cast<Real>();
            v.tail(d - 1) *= Real(-1);
            v[0] = std::sqrt(Real(1) + v.tail(d - 1).squaredNorm());
            sc.H = Real(2) * v * v.transpose();
            sc.H(0, 0) -= Real(1);
            sc.H.diagonal().tail(d - 1).array() += Real(1);
            sc.H /= static_cast<Real>(eta) * static_cast<Real>(eta);
            if (blk.kind == ConeKind::rsoc) {
                // H_orig = T H T with T acting on the first two coordinates.
                const Real r = std::sqrt(Real(0.5));
                MatrixXl T = MatrixXl::Identity(d, d);
                T(0, 0) = r;
                T(0, 1) = r;
                T(1, 0) = r;
                T(1, 1) = -r;
                sc.H = T * sc.H * T;
            }
            lambda_.segment(o, d) = sc.W * z;
        }
    }
}

VectorXd InteriorPoint::apply_w(const VectorXd& vc, bool inverse) const
{
    VectorXd out = VectorXd::Zero(n_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const Block& blk = blocks_[k];
        const Scaling& sc = scalings_[k];
        const int o = blk.offset;
        const int d = blk.dim;
        if (blk.kind == ConeKind::nonneg) {
            if (inverse) {
                out.segment(o, d) = vc.segment(o, d).cwiseQuotient(sc.w);
            } else {
                out.segment(o, d) = vc.segment(o, d).cwiseProduct(sc.w);
            }
        } else if (is_soc_like(blk.kind)) {
            out.segment(o, d) = (inverse ? sc.Winv : sc.W) * vc.segment(o, d);
        }
    }
    return out;
}

VectorXd InteriorPoint::circ(const VectorXd& u, const VectorXd& v) const
{
    VectorXd out = VectorXd::Zero(n_);
    for (const auto& blk : blocks_) {
        const int o = blk.offset;
        const int d = blk.dim;
        if (blk.kind == ConeKind::nonneg) {
            out.segment(o, d) = u.segment(o, d).cwiseProduct(v.segment(o, d));
        } else if (is_soc_like(blk.kind)) {
            out[o] = u.segment(o, d).dot(v.segment(o, d));
            out.segment(o + 1, d - 1) = u[o] * v.segment(o + 1, d - 1) + v[o] * u.segment(o + 1, d - 1);
        }
    }
    return out;
}

// Solves lam o u = v for u.
VectorXd InteriorPoint::inv_circ(const VectorXd& lam, const VectorXd& v) const
{
    VectorXd out = VectorXd::Zero(n_);
    for (const auto& blk : blocks_) {
        const int o = blk.offset;
        const int d = blk.dim;
        if (blk.kind == ConeKind::nonneg) {
            out.segment(o, d) = v.segment(o, d).cwiseQuotient(lam.segment(o, d));
        } else if (is_soc_like(blk.kind)) {
            const double l0 = lam[o];
            const auto l1 = lam.segment(o + 1, d - 1);
            const double det = (l0 - l1.norm()) * (l0 + l1.norm());
            const double u0 = (l0 * v[o] - l1.dot(v.segment(o + 1, d - 1))) / det;
            out[o] = u0;
            out.segment(o + 1, d - 1) = (v.segment(o + 1, d - 1) - u0 * l1) / l0;
        }
    }
    return out;
}

// Largest alpha with lam + alpha d inside the cone product (lam interior).
double InteriorPoint::max_step(const VectorXd& lam, const VectorXd& d) const
{
    double alpha = std::numeric_limits<double>::infinity();
    for (const auto& blk : blocks_) {
        const int o = blk.offset;
        const int dim = blk.dim;
        if (blk.kind == ConeKind::nonneg) {
            for (int i = o; i < o + dim; ++i) {
                if (d[i] < 0.0) {
                    alpha = std::min(alpha, -lam[i] / d[i]);
                }
            }
        } else if (is_soc_like(blk.kind)) {
            const auto v1 = lam.segment(o + 1, dim - 1);
            const auto d1 = d.segment(o + 1, dim - 1);
            const double c0 = (lam[o] - v1.norm()) * (lam[o] + v1.norm());
            const double b0 = lam[o] * d[o] - v1.dot(d1);
            const double a0 = d[o] * d[o] - d1.squaredNorm();
            const double disc = b0 * b0 - a0 * c0;
            double root = std::numeric_limits<double>::infinity();
            if (std::abs(a0) <= 1e-14 * (std::abs(b0) + c0)) {
                if (b0 < 0.0) {
                    root = -c0 / (2.0 * b0);
                }
            } else if (disc >= 0.0) {
                const double q = -(b0 + std::copysign(std::sqrt(disc), b0));
                for (double r : {q / a0, q != 0.0 ? c0 / q : -1.0}) {
                    if (r > 0.0) {
                        root = std::min(root, r);
                    }
                }
            }
            // Also keep the leading coordinate positive (guards the -K branch).
            if (d[o] < 0.0) {
                root = std::min(root, -lam[o] / d[o]);
            }
            alpha = std::min(alpha, root);
        }
    }
    return alpha;
}

void InteriorPoint::build_kkt()
{
    const int m = static_cast<int>(pre_.A.rows());
    const Real delta = settings_.regularization;
    std::vector<Eigen::Triplet<Real>> trips;
    trips.reserve(static_cast<std::size_t>(pre_.A.nonZeros() + n_ * 4 + m));
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const Block& blk = blocks_[k];
        const Scaling& sc = scalings_[k];
        const int o = blk.offset;
        if (blk.kind == ConeKind::free) {
            for (int i = 0; i < blk.dim; ++i) {
                trips.emplace_back(o + i, o + i, -delta);
            }
        } else if (blk.kind == ConeKind::nonneg) {
            for (int i = 0; i < blk.dim; ++i) {
                trips.emplace_back(o + i, o + i, -Real(1) / (Real(sc.w[i]) * sc.w[i]) - delta);
            }
        } else {
            for (int j = 0; j < blk.dim; ++j) {
                for (int i = j; i < blk.dim; ++i) {
                    trips.emplace_back(o + i, o + j, -sc.H(i, j) - (i == j ? delta : Real(0)));
                }
            }
        }
    }
    for (int j = 0; j < pre_.A.outerSize(); ++j) {
        for (SpMat::InnerIterator it(pre_.A, j); it; ++it) {
            trips.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                               Real(it.value()));
        }
    }
    for (int i = 0; i < m; ++i) {
        trips.emplace_back(n_ + i, n_ + i, delta);
    }
    kkt_.resize(n_ + m, n_ + m);
    kkt_.setFromTriplets(trips.begin(), trips.end());
}

// H dx in original coordinates.
VectorXl InteriorPoint::apply_h(const VectorXl& dx) const
{
    VectorXl out = VectorXl::Zero(n_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const Block& blk = blocks_[k];
        const Scaling& sc = scalings_[k];
        const int o = blk.offset;
        const int d = blk.dim;
        if (blk.kind == ConeKind::nonneg) {
            out.segment(o, d) = dx.segment(o, d).cwiseQuotient(sc.w.cast<Real>().cwiseAbs2());
        } else if (is_soc_like(blk.kind)) {
            out.segment(o, d) = sc.H * dx.segment(o, d);
        }
    }
    return out;
}

// Solves   -H dx + A' dy = rd - W^-1 rtilde,   A dx = rp,
// then dz = W^-1 rtilde - H dx. rtilde is in canonical coordinates.
bool InteriorPoint::solve_newton(const VectorXd& rd, const VectorXd& rp, const VectorXd& rtilde,
                                 VectorXd& dx, VectorXd& dy, VectorXd& dz)
{
    const int m = static_cast<int>(pre_.A.rows());
    VectorXd winv_r = apply_w(rtilde, true);
    rotate(winv_r); // canonical -> original

    VectorXl rhs(n_ + m);
    rhs.head(n_) = (rd - winv_r).cast<Real>();
    rhs.tail(m) = rp.cast<Real>();

    // Refinement is against the unregularised matrix K0 = K - delta diag(-I, I).
    const Real delta = settings_.regularization;
    const Real rhs_norm = rhs.lpNorm<Eigen::Infinity>();
    VectorXl sol = ldlt_.solve(rhs);
    if (!sol.allFinite()) {
        return false;
    }
    Real prev = std::numeric_limits<Real>::infinity();
    for (int it = 0; it < settings_.refinement_steps; ++it) {
        VectorXl res = rhs - kkt_.selfadjointView<Eigen::Lower>() * sol;
        res.head(n_) -= delta * sol.head(n_);
        res.tail(m) += delta * sol.tail(m);
        const Real rn = res.lpNorm<Eigen::Infinity>();
        if (rn <= Real(1e-15) * (1 + rhs_norm) || rn >= prev) {
            break;
        }
        prev = rn;
        VectorXl corr = ldlt_.solve(res);
        if (!corr.allFinite()) {
            break;
        }
        sol += corr;
    }
    const VectorXl dxl = sol.head(n_);
    dx = dxl.cast<double>();
    dy = sol.tail(m).cast<double>();
    dz = winv_r - apply_h(dxl).cast<double>();
    for (const auto& blk : blocks_) {
        if (blk.kind == ConeKind::free) {
            dz.segment(blk.offset, blk.dim).setZero();
        }
    }
    return true;
}

void InteriorPoint::factor_kkt()
{
    build_kkt();
    if (!analyzed_) {
        std::vector<int> signs(static_cast<std::size_t>(kkt_.rows()), 1);
        std::fill_n(signs.begin(), n_, -1);
        ldlt_.analyze(kkt_, signs);
        analyzed_ = true;
    }
    ldlt_.factorize(kkt_);
}

// v + (1 + a) e with a the largest cone violation, when v is not already interior.
void InteriorPoint::shift_into_cone(VectorXd& v) const
{
    VectorXd vc = v;
    rotate(vc);
    double violation = -std::numeric_limits<double>::infinity();
    for (const auto& blk : blocks_) {
        if (blk.kind == ConeKind::nonneg) {
            violation = std::max(violation, -vc.segment(blk.offset, blk.dim).minCoeff());
        } else if (is_soc_like(blk.kind)) {
            violation =
                std::max(violation, vc.segment(blk.offset + 1, blk.dim - 1).norm() - vc[blk.offset]);
        }
    }
    if (violation >= 0.0) {
        VectorXd e;
        unit_point(e);
        v += (1.0 + violation) * e;
    }
}

// Least-norm primal and dual points (H = I on the cone blocks), shifted into
// the interior of the cone.
bool InteriorPoint::initial_point(VectorXd& x, VectorXd& y, VectorXd& z)
{
    const int m = static_cast<int>(pre_.A.rows());
    VectorXd e;
    unit_point(e);
    rotate(e);
    compute_scaling(e, e);
    factor_kkt();

    VectorXd dx, dy, dz;
    const VectorXd zero_n = VectorXd::Zero(n_);
    if (!solve_newton(zero_n, pre_.b, zero_n, dx, dy, dz)) {
        return false;
    }
    VectorXd x0 = dx;
    if (!solve_newton(prog_.c, VectorXd::Zero(m), zero_n, dx, dy, dz)) {
        return false;
    }
    VectorXd z0 = dz;
    shift_into_cone(x0);
    shift_into_cone(z0);
    x = x0;
    y = dy;
    z = z0;
    return true;
}

ConicSolution InteriorPoint::run()
{
    ConicSolution out;
    pre_ = presolve(prog_);
    const int m = static_cast<int>(pre_.A.rows());

    VectorXd x, z;
    unit_point(x);
    unit_point(z);
    VectorXd y = VectorXd::Zero(m);
    if (!pre_.inconsistent && !initial_point(x, y, z)) {
        unit_point(x);
        unit_point(z);
        y.setZero();
    }

    auto finish = [&](Status status, int iterations) {
        out.x = x;
        out.z = z;
        out.y = VectorXd::Zero(prog_.A.rows());
        for (std::size_t r = 0; r < pre_.kept_rows.size(); ++r) {
            out.y[pre_.kept_rows[r]] = y[static_cast<int>(r)];
        }
        out.status = status;
        out.iterations = iterations;
        out.residuals = kkt_residuals(prog_, out.x, out.y, out.z);
        return out;
    };

    if (pre_.inconsistent) {
        return finish(Status::infeasible, 0);
    }

    const double bnorm = 1.0 + pre_.b.norm();
    const double cnorm = 1.0 + prog_.c.norm();
    const double tol = settings_.tol;
    std::vector<double> pres_hist, dres_hist;
    double last_step = 0.0;

    // Weak duality gives b'y <= |x_f| |A'y + z| for any feasible x_f, so a
    // large ratio bounds every feasible point away from the iterate's scale.
    // The dual side is symmetric with -c'x <= |y_f| |Ax|.
    auto certificate = [&](double factor) -> std::optional<Status> {
        const double by = pre_.b.dot(y);
        const double cx = prog_.c.dot(x);
        const double floor = std::sqrt(settings_.tol);
        if (by > floor * (1.0 + std::abs(cx))) {
            const double w = (pre_.A.transpose() * y + z).norm();
            if (by >= factor * (1.0 + x.norm()) * w) {
                return Status::infeasible;
            }
        }
        if (-cx > floor * (1.0 + std::abs(by))) {
            const double ax = (pre_.A * x).norm();
            if (-cx >= factor * (1.0 + y.norm()) * ax) {
                return Status::unbounded;
            }
        }
        return std::nullopt;
    };
    // When the iteration cannot continue, a run that has converged in every
    // measure but one feasibility residual is classified by that residual.
    auto give_up = [&](int iter) {
        if (const auto cert = certificate(1e3)) {
            return finish(*cert, iter);
        }
        const double pres = (pre_.b - pre_.A * x).norm() / bnorm;
        const double dres = (prog_.c - pre_.A.transpose() * y - z).norm() / cnorm;
        const double pobj = prog_.c.dot(x);
        const double dobj = pre_.b.dot(y);
        const bool centred = x.dot(z) / std::max(degree_, 1) <= tol * (1.0 + std::abs(pobj));
        if (centred && pres > 10.0 * tol && dres <= std::sqrt(tol) && dobj > pobj) {
            return finish(Status::infeasible, iter);
        }
        if (centred && dres > 10.0 * tol && pres <= std::sqrt(tol) && pobj < dobj) {
            return finish(Status::unbounded, iter);
        }
        return finish(Status::max_iter, iter);
    };

    for (int iter = 0;; ++iter) {
        const VectorXd rp = pre_.b - pre_.A * x;
        const VectorXd rd = prog_.c - pre_.A.transpose() * y - z;
        const double pobj = prog_.c.dot(x);
        const double dobj = pre_.b.dot(y);
        const double pres = rp.norm() / bnorm;
        const double dres = rd.norm() / cnorm;
        const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        const double compl_ = x.dot(z);
        const double mu = degree_ > 0 ? compl_ / degree_ : 0.0;

        if (settings_.on_iterate) {
            settings_.on_iterate(
                IterateInfo{iter, pobj, dobj, rp.norm(), rd.norm(), mu, last_step});
        }
        if (pres <= tol && dres <= tol && gap <= tol &&
            std::abs(compl_) / (1.0 + std::abs(pobj)) <= tol) {
            return finish(Status::optimal, iter);
        }

        if (const auto cert = certificate(1e6)) {
            return finish(*cert, iter);
        }

        pres_hist.push_back(pres);
        dres_hist.push_back(dres);
        const int w = settings_.stall_window;
        if (iter >= w) {
            const double feas_floor = 10.0 * tol;
            const bool p_stuck = pres > feas_floor && pres > 0.9 * pres_hist[iter - w];
            const bool d_stuck = dres > feas_floor && dres > 0.9 * dres_hist[iter - w];
            const bool gap_small = mu < 1e-3 * (1.0 + std::abs(pobj));
            if (p_stuck && (gap_small || y.lpNorm<Eigen::Infinity>() > 1e8 * cnorm)) {
                return finish(Status::infeasible, iter);
            }
            if (d_stuck && (gap_small || x.lpNorm<Eigen::Infinity>() > 1e8 * bnorm)) {
                return finish(Status::unbounded, iter);
            }
        }
        if (iter >= settings_.max_iter) {
            return give_up(iter);
        }

        VectorXd xc = x, zc = z;
        rotate(xc);
        rotate(zc);
        compute_scaling(xc, zc);
        factor_kkt();

        // Predictor.
        VectorXd dx, dy, dz;
        const VectorXd& lam = lambda_;
        if (!solve_newton(rd, rp, -lam, dx, dy, dz)) {
            return give_up(iter);
        }
        VectorXd dxc = dx, dzc = dz;
        rotate(dxc);
        rotate(dzc);
        VectorXd dxs = apply_w(dxc, true);
        VectorXd dzs = apply_w(dzc, false);
        const double alpha_aff = std::min({1.0, max_step(lam, dxs), max_step(lam, dzs)});
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

        // Corrector.
        VectorXd target = circ(lam, lam) + circ(dxs, dzs);
        target *= -1.0;
        for (const auto& blk : blocks_) {
            if (blk.kind == ConeKind::nonneg) {
                target.segment(blk.offset, blk.dim).array() += sigma * mu;
            } else if (is_soc_like(blk.kind)) {
                target[blk.offset] += sigma * mu;
            }
        }
        const VectorXd rtilde = inv_circ(lam, target);
        if (!solve_newton(rd, rp, rtilde, dx, dy, dz)) {
            return give_up(iter);
        }
        dxc = dx;
        dzc = dz;
        rotate(dxc);
        rotate(dzc);
        dxs = apply_w(dxc, true);
        dzs = apply_w(dzc, false);
        const double alpha =
            std::min(1.0, settings_.step_fraction * std::min(max_step(lam, dxs), max_step(lam, dzs)));
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        last_step = alpha;
    }
}

} // namespace

ConicSolution solve_conic(const ConicProgram& prog, const Settings& settings)
{
    prog.validate();
    if (!(settings.tol > 0.0) || settings.max_iter < 0) {
        throw Error("solver tolerance must be positive and max_iter nonnegative");
    }
    InteriorPoint ip(prog, settings);
    return ip.run();
}

} // namespace distvar::conic
