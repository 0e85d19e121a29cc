// SPDX-License-Identifier: MIT

/// @file
/// Right-preconditioned restarted GMRES.

#pragma once

#include "fasflow/types.hpp"

#include <functional>

namespace fasflow
{

using LinOp = std::function<Vector(const Vector&)>;

struct GmresResult
{
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    bool stagnated = false;
};

/// Solve A x = b with a fixed right preconditioner M (pass the identity for
/// none).  Convergence is ||b - A x|| <= tol * ||b||.  A lucky Arnoldi
/// breakdown returns the exact solution; a restart without progress sets the
/// stagnation flag.
inline GmresResult gmres(const LinOp& A, const Vector& b, const LinOp& M, Vector& x, double tol,
                         int max_iter, int restart)
{
    require(restart >= 1 && max_iter >= 1, "gmres: restart and max_iter must be positive");
    GmresResult result;
    const double bnorm = b.norm();
    if (bnorm == 0.0)
    {
        x = Vector::Zero(b.size());
        result.converged = true;
        return result;
    }
    if (x.size() != b.size()) { x = Vector::Zero(b.size()); }

    double last_cycle_residual = -1.0;
    while (result.iterations < max_iter)
    {
        Vector r = b - A(x);
        double beta = r.norm();
        result.relative_residual = beta / bnorm;
        if (result.relative_residual <= tol)
        {
            result.converged = true;
            return result;
        }
        if (last_cycle_residual >= 0.0 && beta > (1.0 - 1e-12) * last_cycle_residual)
        {
            result.stagnated = true;
            return result;
        }
        last_cycle_residual = beta;

        const int m = restart;
        std::vector<Vector> V;
        V.reserve(m + 1);
        V.push_back(r / beta);
        Matrix H = Matrix::Zero(m + 1, m);
        Vector cs = Vector::Zero(m), sn = Vector::Zero(m);
        Vector gamma = Vector::Zero(m + 1);
        gamma[0] = beta;

        int k = 0;
        bool breakdown = false;
        for (; k < m && result.iterations < max_iter; ++k)
        {
            ++result.iterations;
            Vector w = A(M(V[k]));
            for (int i = 0; i <= k; ++i) // modified Gram-Schmidt
            {
                H(i, k) = w.dot(V[i]);
                w -= H(i, k) * V[i];
            }
            H(k + 1, k) = w.norm();
            if (H(k + 1, k) > 1e-14 * beta) { V.push_back(w / H(k + 1, k)); }
            else { breakdown = true; }

            for (int i = 0; i < k; ++i) // apply stored Givens rotations
            {
                const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
                H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
                H(i, k) = t;
            }
            const double denom = std::hypot(H(k, k), H(k + 1, k));
            if (denom == 0.0)
            {
                cs[k] = 1.0;
                sn[k] = 0.0;
            }
            else
            {
                cs[k] = H(k, k) / denom;
                sn[k] = H(k + 1, k) / denom;
            }
            H(k, k) = cs[k] * H(k, k) + sn[k] * H(k + 1, k);
            H(k + 1, k) = 0.0;
            gamma[k + 1] = -sn[k] * gamma[k];
            gamma[k] = cs[k] * gamma[k];

            result.relative_residual = std::abs(gamma[k + 1]) / bnorm;
            if (result.relative_residual <= tol || breakdown)
            {
                ++k;
                break;
            }
        }

        // solve the small triangular system and update
        Vector y = Vector::Zero(k);
        for (int i = k - 1; i >= 0; --i)
        {
            double sum = gamma[i];
            for (int j = i + 1; j < k; ++j) { sum -= H(i, j) * y[j]; }
            y[i] = sum / H(i, i);
        }
        Vector z = Vector::Zero(b.size());
        for (int i = 0; i < k; ++i) { z += y[i] * V[i]; }
        x += M(z);

        const double true_resid = (b - A(x)).norm() / bnorm;
        result.relative_residual = true_resid;
        if (true_resid <= tol)
        {
            result.converged = true;
            return result;
        }
        if (breakdown)
        {
            // lucky breakdown should have produced the exact solution; if it
            // did not, the operator is singular for this right-hand side
            result.stagnated = true;
            return result;
        }
    }
    return result;
}

} // namespace fasflow
