// SPDX-License-Identifier: MIT

/// @file
/// Incomplete LU with level-of-fill control.  The symbolic phase grows the
/// pattern by the standard fill-level rule lev(i,j) = min over k of
/// lev(i,k) + lev(k,j) + 1, keeping entries with level <= fill.  Zero pivots
/// are replaced by a sign-preserving epsilon times the row norm and counted.

#pragma once

#include "fasflow/types.hpp"

#include <map>
#include <vector>

namespace fasflow
{

class Ilu
{
public:
    int zero_pivots = 0;

    /// Solve L U x = r (unit-diagonal L).
    Vector apply(const Vector& r) const
    {
        const int n = static_cast<int>(rows_.size());
        Vector y = r;
        for (int i = 0; i < n; ++i)
        {
            double sum = y[i];
            for (const auto& [j, v] : rows_[i])
            {
                if (j >= i) { break; }
                sum -= v * y[j];
            }
            y[i] = sum;
        }
        Vector x = y;
        for (int i = n - 1; i >= 0; --i)
        {
            double sum = x[i];
            double dii = 1.0;
            for (auto it = rows_[i].rbegin(); it != rows_[i].rend(); ++it)
            {
                if (it->first < i) { break; }
                if (it->first == i) { dii = it->second; }
                else { sum -= it->second * x[it->first]; }
            }
            x[i] = sum / dii;
        }
        return x;
    }

    static Ilu build(const SpMat& A, int fill_level);

private:
    // row-wise sorted (column, value); entries below the diagonal hold L
    // (unit diagonal implied), the diagonal and above hold U
    std::vector<std::vector<std::pair<int, double>>> rows_;
};

inline Ilu Ilu::build(const SpMat& A, int fill_level)
{
    require(A.rows() == A.cols(), "Ilu: matrix must be square");
    const int n = static_cast<int>(A.rows());
    const SpMat At = A.transpose(); // row-wise access

    // working rows as ordered column -> (value, level) maps
    std::vector<std::map<int, std::pair<double, int>>> work(n);
    for (int i = 0; i < n; ++i)
    {
        for (SpMat::InnerIterator it(At, i); it; ++it)
        {
            work[i][static_cast<int>(it.row())] = {it.value(), 0};
        }
        work[i].try_emplace(i, std::pair<double, int>{0.0, 0}); // keep a diagonal slot
    }

    Ilu ilu;
    ilu.rows_.resize(n);
    std::vector<double> diag(n, 0.0);
    for (int i = 0; i < n; ++i)
    {
        auto& row = work[i];
        double row_norm = 0.0;
        for (const auto& [j, vl] : row) { row_norm = std::max(row_norm, std::abs(vl.first)); }

        for (auto it = row.begin(); it != row.end() && it->first < i; ++it)
        {
            const int k = it->first;
            const int lev_ik = it->second.second;
            it->second.first /= diag[k];
            const double lik = it->second.first;
            // eliminate with row k's upper part (already factored)
            for (const auto& [j, vl] : work[k])
            {
                if (j <= k) { continue; }
                const int lev = lev_ik + vl.second + 1;
                auto found = row.find(j);
                if (found != row.end())
                {
                    found->second.first -= lik * vl.first;
                    found->second.second = std::min(found->second.second, lev);
                }
                else if (lev <= fill_level)
                {
                    row[j] = {-lik * vl.first, lev};
                }
            }
        }
        double dii = row[i].first;
        if (std::abs(dii) < 1e-14 * std::max(row_norm, 1e-300))
        {
            const double sign = (dii >= 0.0) ? 1.0 : -1.0;
            dii = sign * std::max(1e-12 * row_norm, 1e-300);
            row[i].first = dii;
            ++ilu.zero_pivots;
        }
        diag[i] = dii;
        ilu.rows_[i].reserve(row.size());
        for (const auto& [j, vl] : row) { ilu.rows_[i].emplace_back(j, vl.first); }
    }
    return ilu;
}

/// Row-wise factor storage keeps the fill levels only during construction.
inline Ilu build_ilu(const SpMat& A, int fill_level = 1)
{
    return Ilu::build(A, fill_level);
}

} // namespace fasflow
