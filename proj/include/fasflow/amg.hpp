// SPDX-License-Identifier: MIT

/// @file
/// Aggregation-based algebraic multigrid used as the pressure-block
/// preconditioner: scaled-magnitude strength of connection, greedy
/// aggregation, piecewise-constant tentative prolongation, Galerkin coarse
/// operators, and a V(1,1) cycle with weighted Jacobi smoothing.  One cycle
/// per application, so the preconditioner is a fixed linear operator.
/// Falls back to damped Jacobi when coarsening stalls.

#pragma once

#include "fasflow/types.hpp"

#include <Eigen/LU>

#include <vector>

namespace fasflow
{

struct AmgOptions
{
    double strength_threshold = 0.08;
    int max_levels = 25;
    int coarsest_size = 40;
    double jacobi_omega = 2.0 / 3.0;
    double min_coarsen_ratio = 1.1;
};

class Amg
{
public:
    bool fallback_jacobi = false;
    int num_levels() const { return static_cast<int>(matrices_.size()); }

    Vector apply(const Vector& r) const
    {
        if (fallback_jacobi) { return options_.jacobi_omega * inv_diag_[0].cwiseProduct(r); }
        return cycle(0, r);
    }

    static Amg build(const SpMat& A, const AmgOptions& options = {});

private:
    AmgOptions options_;
    std::vector<SpMat> matrices_;
    std::vector<SpMat> prolongations_; // P[l]: level l+1 -> level l
    std::vector<Vector> inv_diag_;
    Eigen::PartialPivLU<Matrix> coarse_lu_;

    Vector smooth(int level, const Vector& b, const Vector& x0) const
    {
        const Vector r = b - matrices_[level] * x0;
        return x0 + options_.jacobi_omega * inv_diag_[level].cwiseProduct(r);
    }

    Vector cycle(int level, const Vector& b) const
    {
        if (level == num_levels() - 1)
        {
            return coarse_lu_.solve(b);
        }
        Vector x = smooth(level, b, Vector::Zero(b.size()));
        const Vector r = b - matrices_[level] * x;
        const Vector coarse = cycle(level + 1, prolongations_[level].transpose() * r);
        x += prolongations_[level] * coarse;
        return smooth(level, b, x);
    }
};

namespace detail
{

/// Greedy aggregation over strong connections; returns -1-free aggregate map
/// and the number of aggregates.
inline int aggregate_strong(const SpMat& A, double theta, std::vector<int>& agg)
{
    const int n = static_cast<int>(A.rows());
    Vector diag = A.diagonal().cwiseAbs();
    auto strong = [&](int i, int j, double v) {
        return std::abs(v) >= theta * std::sqrt(std::max(diag[i] * diag[j], 1e-300));
    };

    agg.assign(n, -1);
    int next = 0;
    // pass 1: roots with no aggregated strong neighbor seed new aggregates
    for (int i = 0; i < n; ++i)
    {
        if (agg[i] >= 0) { continue; }
        bool has_aggregated_neighbor = false;
        for (SpMat::InnerIterator it(A, i); it; ++it)
        {
            if (it.row() != i && strong(i, it.row(), it.value()) && agg[it.row()] >= 0)
            {
                has_aggregated_neighbor = true;
                break;
            }
        }
        if (has_aggregated_neighbor) { continue; }
        agg[i] = next;
        for (SpMat::InnerIterator it(A, i); it; ++it)
        {
            if (it.row() != i && strong(i, it.row(), it.value()) && agg[it.row()] < 0)
            {
                agg[it.row()] = next;
            }
        }
        ++next;
    }
    // pass 2: attach leftovers to the most strongly connected aggregate
    for (int i = 0; i < n; ++i)
    {
        if (agg[i] >= 0) { continue; }
        int best = -1;
        double best_weight = 0.0;
        for (SpMat::InnerIterator it(A, i); it; ++it)
        {
            if (it.row() == i || agg[it.row()] < 0) { continue; }
            const double w = std::abs(it.value());
            if (w > best_weight)
            {
                best_weight = w;
                best = agg[it.row()];
            }
        }
        if (best >= 0) { agg[i] = best; }
        else { agg[i] = next++; }
    }
    return next;
}

} // namespace detail

inline Amg Amg::build(const SpMat& A, const AmgOptions& options)
{
    require(A.rows() == A.cols(), "Amg: matrix must be square");
    Amg amg;
    amg.options_ = options;
    amg.matrices_.push_back(A);
    amg.inv_diag_.push_back(Vector());

    while (true)
    {
        const SpMat& top = amg.matrices_.back();
        Vector diag = top.diagonal();
        require(diag.cwiseAbs().minCoeff() > 0.0, "Amg: zero diagonal entry");
        amg.inv_diag_.back() = diag.cwiseInverse();

        const int n = static_cast<int>(top.rows());
        if (n <= options.coarsest_size || amg.num_levels() >= options.max_levels) { break; }

        std::vector<int> agg;
        const int ncoarse = detail::aggregate_strong(top, options.strength_threshold, agg);
        if (static_cast<double>(n) / ncoarse < options.min_coarsen_ratio)
        {
            if (amg.num_levels() == 1)
            {
                amg.fallback_jacobi = true;
                return amg;
            }
            break;
        }
        std::vector<Triplet> trip;
        trip.reserve(n);
        for (int i = 0; i < n; ++i) { trip.emplace_back(i, agg[i], 1.0); }
        SpMat P(n, ncoarse);
        P.setFromTriplets(trip.begin(), trip.end());
        SpMat coarse = SpMat(P.transpose() * top * P).pruned();
        amg.prolongations_.push_back(std::move(P));
        amg.matrices_.push_back(std::move(coarse));
        amg.inv_diag_.push_back(Vector());
    }

    amg.coarse_lu_.compute(Matrix(amg.matrices_.back()));
    return amg;
}

inline Amg build_amg(const SpMat& A, const AmgOptions& options = {})
{
    return Amg::build(A, options);
}

} // namespace fasflow
