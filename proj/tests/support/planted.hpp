#pragma once

// Random cone programs with a known optimum, built from a complementary
// primal-dual pair: b = A x*, c = A' y* + z*, x* o z* = 0. Then c'x* = b'y*
// and (x*, y*, z*) satisfies the KKT conditions exactly.

#include "distvar/conic.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <vector>

namespace distvar::testing {

struct PlantedProgram {
    conic::ConicProgram prog;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    double objective = 0.0;
};

namespace detail {

inline Eigen::VectorXd unit_direction(std::mt19937_64& rng, int dim)
{
    std::normal_distribution<double> normal;
    Eigen::VectorXd u(dim);
    do {
        for (int i = 0; i < dim; ++i) {
            u[i] = normal(rng);
        }
    } while (u.norm() < 1e-3);
    return u / u.norm();
}

// Strictly complementary pair on the second-order cone of dimension `dim`.
inline void soc_pair(std::mt19937_64& rng, int dim, Eigen::Ref<Eigen::VectorXd> x,
                     Eigen::Ref<Eigen::VectorXd> z)
{
    std::uniform_real_distribution<double> mag(0.5, 2.0);
    std::uniform_int_distribution<int> pick(0, 2);
    const int kind = pick(rng);
    x.setZero();
    z.setZero();
    if (kind == 0) { // x interior, z = 0
        x[0] = mag(rng) + 1.0;
        x.tail(dim - 1) = unit_direction(rng, dim - 1) * (x[0] * 0.5);
    } else if (kind == 1) { // x = 0, z interior
        z[0] = mag(rng) + 1.0;
        z.tail(dim - 1) = unit_direction(rng, dim - 1) * (z[0] * 0.5);
    } else { // both on the boundary, opposite rays
        const Eigen::VectorXd u = unit_direction(rng, dim - 1);
        const double a = mag(rng);
        const double b = mag(rng);
        x[0] = a;
        x.tail(dim - 1) = a * u;
        z[0] = b;
        z.tail(dim - 1) = -b * u;
    }
}

} // namespace detail

/// Builds a planted program with roughly `n_target` variables drawn from a
/// mix of free, nonneg, soc and rsoc blocks.
inline PlantedProgram make_planted(std::mt19937_64& rng, int n_target, double density = 0.15,
                                   bool with_free = true)
{
    using conic::ConeKind;
    std::uniform_int_distribution<int> kind_pick(with_free ? 0 : 1, 3);
    std::uniform_int_distribution<int> dim_pick(1, 8);
    std::uniform_real_distribution<double> mag(0.5, 2.0);
    std::normal_distribution<double> normal;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

    PlantedProgram out;
    std::vector<conic::ConeBlock> blocks;
    int n = 0;
    while (n < n_target) {
        auto kind = static_cast<ConeKind>(kind_pick(rng));
        int dim = dim_pick(rng);
        if (kind == ConeKind::free) {
            dim = std::min(dim, 2);
        } else if (kind == ConeKind::soc) {
            dim = std::max(dim, 2);
        } else if (kind == ConeKind::rsoc) {
            dim = std::max(dim, 3);
        }
        dim = std::min(dim, std::max(1, n_target - n));
        if ((kind == ConeKind::soc && dim < 2) || (kind == ConeKind::rsoc && dim < 3)) {
            kind = ConeKind::nonneg;
        }
        blocks.push_back({kind, dim});
        n += dim;
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    int off = 0;
    int free_count = 0;
    for (const auto& blk : blocks) {
        auto xs = x.segment(off, blk.dim);
        auto zs = z.segment(off, blk.dim);
        switch (blk.kind) {
        case ConeKind::free:
            for (int i = 0; i < blk.dim; ++i) {
                xs[i] = normal(rng);
            }
            free_count += blk.dim;
            break;
        case ConeKind::nonneg:
            for (int i = 0; i < blk.dim; ++i) {
                if (rng() % 2 == 0) {
                    xs[i] = mag(rng);
                } else {
                    zs[i] = mag(rng);
                }
            }
            break;
        case ConeKind::soc:
            detail::soc_pair(rng, blk.dim, xs, zs);
            break;
        case ConeKind::rsoc: {
            detail::soc_pair(rng, blk.dim, xs, zs);
            // Map the soc pair into rotated coordinates (the map is an involution).
            for (auto* v : {&xs, &zs}) {
                const double a = (*v)[0];
                const double b = (*v)[1];
                (*v)[0] = (a + b) * inv_sqrt2;
                (*v)[1] = (a - b) * inv_sqrt2;
            }
            break;
        }
        }
        off += blk.dim;
    }

    // Enough rows to pin the free variables, fewer than the variable count.
    const int m = std::max(free_count + 1, n / 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m; ++i) {
        // A guaranteed entry per row keeps A full row rank with high probability.
        trips.emplace_back(i, (i * 7919) % n, 1.0 + unit(rng));
        for (int j = 0; j < n; ++j) {
            if (unit(rng) < density) {
                trips.emplace_back(i, j, normal(rng));
            }
        }
    }
    // Free columns need to appear in A or the program is unbounded below.
    off = 0;
    int row = 0;
    for (const auto& blk : blocks) {
        if (blk.kind == ConeKind::free) {
            for (int i = 0; i < blk.dim; ++i) {
                trips.emplace_back(row++ % m, off + i, 2.0 + unit(rng));
            }
        }
        off += blk.dim;
    }
    Eigen::SparseMatrix<double> A(m, n);
    A.setFromTriplets(trips.begin(), trips.end());

    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        y[i] = normal(rng);
    }

    out.prog.A = A;
    out.prog.b = A * x;
    out.prog.c = A.transpose() * y + z;
    out.prog.cones = std::move(blocks);
    out.x = x;
    out.y = y;
    out.z = z;
    out.objective = out.prog.c.dot(x);
    return out;
}

} // namespace distvar::testing
