// SPDX-License-Identifier: MIT

/// @file
/// Linear solvers for the Jacobian system.  The fine level eliminates the
/// diagonal flux block into a pressure/saturation system; coarse levels
/// duplicate each face flux into per-cell one-sided copies whose weak
/// continuity is enforced by face-pressure multipliers, then eliminate the
/// block-diagonal cell problems into a (face pressure, saturation) system.
/// Either reduced system is solved by CPR-preconditioned GMRES (AMG on the
/// pressure-like block, l1-Jacobi on the saturation block, ILU(1) second
/// stage) or by a direct sparse factorization.

#pragma once

#include "fasflow/amg.hpp"
#include "fasflow/gmres.hpp"
#include "fasflow/ilu.hpp"
#include "fasflow/jacobian.hpp"

#include <Eigen/SparseLU>

#include <functional>
#include <limits>
#include <memory>

namespace fasflow
{

struct NewtonUpdate
{
    Vector dsigma;
    Vector dp;
    Vector ds;
};

/// Reduced two-by-two block system with a closure recovering the eliminated
/// unknowns from the reduced solution.
struct ReducedSystem
{
    SpMat A11, A12, A21, A22;
    Vector xi1, xi2;
    std::function<NewtonUpdate(const Vector&, const Vector&)> recover;

    int n1() const { return static_cast<int>(A11.rows()); }
    int n2() const { return static_cast<int>(A22.rows()); }

    SpMat monolithic() const
    {
        std::vector<Triplet> trip;
        trip.reserve(A11.nonZeros() + A12.nonZeros() + A21.nonZeros() + A22.nonZeros());
        auto add = [&](const SpMat& B, int roff, int coff) {
            for (int k = 0; k < B.outerSize(); ++k)
            {
                for (SpMat::InnerIterator it(B, k); it; ++it)
                {
                    trip.emplace_back(roff + it.row(), coff + it.col(), it.value());
                }
            }
        };
        add(A11, 0, 0);
        add(A12, 0, n1());
        add(A21, n1(), 0);
        add(A22, n1(), n1());
        SpMat A(n1() + n2(), n1() + n2());
        A.setFromTriplets(trip.begin(), trip.end());
        return A;
    }
};

/// Fine-level Schur complement: eliminate the diagonal flux block.
inline ReducedSystem reduce_fine(const LevelData& lvl, const JacobianBlocks& jac,
                                 const ResidualVector& rhs)
{
    require(lvl.level == 0, "reduce_fine: fine level only");
    const Vector mdiag = jac.dr_sigma_dsigma.diagonal();
    require(mdiag.cwiseAbs().minCoeff() > 0.0, "reduce_fine: zero flux-mass diagonal");
    const Vector minv = mdiag.cwiseInverse();

    const SpMat D = lvl.D;
    const SpMat Dt = D.transpose();
    const SpMat Minv = SpMat(minv.asDiagonal());
    const SpMat E = jac.dr_s_dsigma;
    const SpMat S = jac.dr_sigma_ds;

    ReducedSystem red;
    red.A11 = (D * Minv * Dt).pruned();
    red.A12 = SpMat(-(D * Minv * S).pruned());
    red.A21 = (E * Minv * Dt).pruned();
    red.A22 = SpMat((jac.dr_s_ds - E * Minv * S).pruned());
    red.xi1 = rhs.r_p - D * minv.cwiseProduct(rhs.r_sigma);
    red.xi2 = rhs.r_s - E * minv.cwiseProduct(rhs.r_sigma);

    const Vector r_sigma = rhs.r_sigma;
    red.recover = [minv, Dt, S, r_sigma](const Vector& dp, const Vector& ds) {
        NewtonUpdate u;
        u.dp = dp;
        u.ds = ds;
        u.dsigma = minv.cwiseProduct(r_sigma + Dt * dp - S * ds);
        return u;
    };
    return red;
}

namespace detail
{

/// One cell of the hybridized coarse system: its one-sided flux copies, the
/// factored local saddle block, and the eliminated coupling columns.
struct HybridCell
{
    std::vector<int> fluxes;  ///< incident coarse faces, then producer fluxes
    std::vector<double> sign; ///< D entry of this cell for each local flux
    int num_local_faces = 0;  ///< local slots that are coarse faces
    Eigen::PartialPivLU<Matrix> lu;
    Vector base_solution; ///< B^{-1} [rho_sigma; r_p]
    Matrix columns;       ///< B^{-1} [C^T S]
    Vector transport_row; ///< this cell's dr_s/dsigma over its local fluxes
};

} // namespace detail

/// Coarse-level hybridization (also valid on the fine level, where it must
/// agree with reduce_fine).  Producer fluxes are single-sided and eliminated
/// with their cell; face fluxes are recovered as the average of their two
/// one-sided copies, which agree up to the reduced-solve tolerance.
inline ReducedSystem hybridize_coarse(const LevelData& lvl, const JacobianBlocks& jac,
                                      const ResidualVector& rhs)
{
    const int nc = lvl.num_cells;
    const int nf = lvl.num_faces;

    auto cells = std::make_shared<std::vector<detail::HybridCell>>(nc);
    for (int c = 0; c < nc; ++c)
    {
        detail::HybridCell& hc = (*cells)[c];
        hc.fluxes = lvl.local_mass[c].faces;
        hc.num_local_faces = static_cast<int>(hc.fluxes.size());
        for (int i : hc.fluxes) { hc.sign.push_back(lvl.face_cells[i][0] == c ? 1.0 : -1.0); }
        for (const ProducerRef& p : lvl.producers)
        {
            if (p.cell != c) { continue; }
            hc.fluxes.push_back(p.flux_index);
            hc.sign.push_back(-1.0);
        }
    }

    std::vector<Triplet> t11, t12, t21, t22;
    Vector xi1 = Vector::Zero(nf);
    Vector xi2 = rhs.r_s;

    for (int c = 0; c < nc; ++c)
    {
        detail::HybridCell& hc = (*cells)[c];
        const int nloc = static_cast<int>(hc.fluxes.size());
        if (nloc == 0) { fail("hybridize_coarse: isolated cell with no fluxes"); }
        const int dim = nloc + 1;
        const LocalMass& lm = lvl.local_mass[c];

        Matrix B = Matrix::Zero(dim, dim);
        B.topLeftCorner(hc.num_local_faces, hc.num_local_faces) = jac.lambda_inv[c] * lm.matrix;
        for (int k = hc.num_local_faces; k < nloc; ++k)
        {
            for (const ProducerRef& p : lvl.producers)
            {
                if (p.flux_index == hc.fluxes[k])
                {
                    B(k, k) = jac.lambda_inv[c] / p.well_index;
                }
            }
        }
        for (int k = 0; k < nloc; ++k)
        {
            B(k, nloc) = -hc.sign[k];
            B(nloc, k) = hc.sign[k];
        }
        hc.lu.compute(B);

        // local residual: each face residual attributed to its K-side copy
        Vector rho = Vector::Zero(dim);
        for (int k = 0; k < nloc; ++k)
        {
            const int i = hc.fluxes[k];
            if (i >= nf || lvl.face_cells[i][0] == c) { rho[k] = rhs.r_sigma[i]; }
        }
        rho[nloc] = rhs.r_p[c];
        hc.base_solution = hc.lu.solve(rho);

        // coupling columns: one lambda column per local face, then s_c
        Matrix Z = Matrix::Zero(dim, nloc + 1);
        for (int k = 0; k < hc.num_local_faces; ++k) { Z(k, k) = hc.sign[k]; }
        {
            Vector sigma_loc(hc.num_local_faces);
            for (int k = 0; k < hc.num_local_faces; ++k) { sigma_loc[k] = jac.sigma_frozen[lm.faces[k]]; }
            const Vector action = lm.matrix * sigma_loc;
            for (int k = 0; k < hc.num_local_faces; ++k) { Z(k, nloc) = jac.dlambda_inv[c] * action[k]; }
            for (int k = hc.num_local_faces; k < nloc; ++k)
            {
                for (const ProducerRef& p : lvl.producers)
                {
                    if (p.flux_index == hc.fluxes[k])
                    {
                        Z(k, nloc) =
                            jac.dlambda_inv[c] * jac.sigma_frozen[p.flux_index] / p.well_index;
                    }
                }
            }
        }
        hc.columns = hc.lu.solve(Z);

        // this cell's transport row over its own one-sided fluxes
        hc.transport_row.resize(nloc);
        for (int k = 0; k < nloc; ++k)
        {
            hc.transport_row[k] = hc.sign[k] * jac.upwind_fw[hc.fluxes[k]];
        }

        // Schur contributions.  The continuity rows are negated so the
        // resulting face-pressure block is symmetric positive semidefinite.
        for (int k = 0; k < hc.num_local_faces; ++k)
        {
            const int i = hc.fluxes[k];
            const double crow = hc.sign[k];
            for (int col = 0; col < hc.num_local_faces; ++col)
            {
                const double v = crow * hc.columns(k, col);
                if (v != 0.0) { t11.emplace_back(i, hc.fluxes[col], v); }
            }
            const double v12 = crow * hc.columns(k, nloc);
            if (v12 != 0.0) { t12.emplace_back(i, c, v12); }
            xi1[i] += crow * hc.base_solution[k];
        }
        double s_rhs = 0.0;
        Vector s_cols = Vector::Zero(nloc + 1);
        for (int k = 0; k < nloc; ++k)
        {
            s_rhs += hc.transport_row[k] * hc.base_solution[k];
            s_cols += hc.transport_row[k] * hc.columns.row(k).transpose();
        }
        xi2[c] -= s_rhs;
        for (int col = 0; col < hc.num_local_faces; ++col)
        {
            if (s_cols[col] != 0.0) { t21.emplace_back(c, hc.fluxes[col], -s_cols[col]); }
        }
        if (s_cols[nloc] != 0.0) { t22.emplace_back(c, c, -s_cols[nloc]); }
    }

    ReducedSystem red;
    red.A11 = SpMat(nf, nf);
    red.A11.setFromTriplets(t11.begin(), t11.end());
    red.A12 = SpMat(nf, nc);
    red.A12.setFromTriplets(t12.begin(), t12.end());
    red.A21 = SpMat(nc, nf);
    red.A21.setFromTriplets(t21.begin(), t21.end());
    SpMat schur22(nc, nc);
    schur22.setFromTriplets(t22.begin(), t22.end());
    red.A22 = SpMat((jac.dr_s_ds + schur22).pruned());
    red.xi1 = xi1;
    red.xi2 = xi2;

    const int num_producers = lvl.num_producers();
    std::vector<std::array<int, 2>> face_cells = lvl.face_cells;
    std::vector<int> producer_cells(num_producers);
    std::vector<int> producer_flux(num_producers);
    for (int p = 0; p < num_producers; ++p)
    {
        producer_cells[p] = lvl.producers[p].cell;
        producer_flux[p] = lvl.producers[p].flux_index;
    }
    red.recover = [cells, face_cells, producer_cells, producer_flux, nf,
                   nc](const Vector& dlambda, const Vector& ds) {
        NewtonUpdate u;
        u.dsigma = Vector::Zero(nf + static_cast<int>(producer_flux.size()));
        u.dp = Vector::Zero(nc);
        Vector weight = Vector::Zero(nf);
        for (int c = 0; c < nc; ++c)
        {
            const detail::HybridCell& hc = (*cells)[c];
            const int nloc = static_cast<int>(hc.fluxes.size());
            Vector coupled = Vector::Zero(nloc + 1);
            for (int k = 0; k < hc.num_local_faces; ++k) { coupled[k] = dlambda[hc.fluxes[k]]; }
            coupled[nloc] = ds[c];
            const Vector local = hc.base_solution - hc.columns * coupled;
            for (int k = 0; k < nloc; ++k)
            {
                const int i = hc.fluxes[k];
                u.dsigma[i] += local[k];
                if (i < nf) { weight[i] += 1.0; }
            }
            u.dp[c] = local[nloc];
        }
        for (int i = 0; i < nf; ++i)
        {
            if (weight[i] > 0.0) { u.dsigma[i] /= weight[i]; }
        }
        u.ds = ds;
        return u;
    };
    return red;
}

// ---------------------------------------------------------------------------
// CPR preconditioner
// ---------------------------------------------------------------------------

struct CprOptions
{
    AmgOptions amg;
    int ilu_fill = 1;
};

/// l1-Jacobi diagonal: reciprocal row absolute sums.  Zero rows get a unit
/// entry and are counted.
inline Vector build_l1_jacobi(const SpMat& A, int* zero_rows = nullptr)
{
    Vector rowsum = Vector::Zero(A.rows());
    for (int k = 0; k < A.outerSize(); ++k)
    {
        for (SpMat::InnerIterator it(A, k); it; ++it)
        {
            rowsum[it.row()] += std::abs(it.value());
        }
    }
    int zeros = 0;
    for (Eigen::Index i = 0; i < rowsum.size(); ++i)
    {
        if (rowsum[i] == 0.0)
        {
            rowsum[i] = 1.0;
            ++zeros;
        }
    }
    if (zero_rows) { *zero_rows = zeros; }
    return rowsum.cwiseInverse();
}

/// Two-stage constrained-pressure-residual preconditioner
///   B = B1 + B2 (I - A B1)
/// with B1 the block lower-triangular stage built from a pressure-block
/// solver and a saturation-block diagonal, and B2 a monolithic correction.
struct CprPreconditioner
{
    int n1 = 0, n2 = 0;
    SpMat A;
    SpMat A21;
    LinOp B11;
    Vector B22;
    LinOp B2;
    bool amg_fallback = false;
    int ilu_zero_pivots = 0;

    Vector apply(const Vector& r) const
    {
        const Vector z1 = B11(r.head(n1));
        const Vector z2 = B22.cwiseProduct(r.tail(n2) - A21 * z1);
        Vector y1(n1 + n2);
        y1 << z1, z2;
        return y1 + B2(r - A * y1);
    }
};

/// Wire the default stages: AMG on the pressure-like block, l1-Jacobi on the
/// saturation block, ILU(1) of the monolithic system.
inline CprPreconditioner build_cpr(const ReducedSystem& red, const CprOptions& options = {})
{
    CprPreconditioner cpr;
    cpr.n1 = red.n1();
    cpr.n2 = red.n2();
    cpr.A = red.monolithic();
    cpr.A21 = red.A21;
    auto amg = std::make_shared<Amg>(build_amg(red.A11, options.amg));
    cpr.amg_fallback = amg->fallback_jacobi;
    cpr.B11 = [amg](const Vector& v) { return amg->apply(v); };
    cpr.B22 = build_l1_jacobi(red.A22);
    auto ilu = std::make_shared<Ilu>(build_ilu(cpr.A, options.ilu_fill));
    cpr.ilu_zero_pivots = ilu->zero_pivots;
    cpr.B2 = [ilu](const Vector& v) { return ilu->apply(v); };
    return cpr;
}

// ---------------------------------------------------------------------------
// reduced-system solve
// ---------------------------------------------------------------------------

struct LinearConfig
{
    enum class Backend
    {
        CprGmres,
        Direct
    };
    Backend backend = Backend::CprGmres;
    double tol = 1e-8;
    int max_iter = 400;
    int restart = 50;
    CprOptions cpr;
};

struct LinearSolveStats
{
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
    bool used_direct = false;
    bool amg_fallback = false;
    int ilu_zero_pivots = 0;
};

/// Solve the reduced system for (d1, d2).  The iterative backend retries
/// once with the direct factorization if GMRES stalls.
inline LinearSolveStats solve_reduced(const ReducedSystem& red, const LinearConfig& config,
                                      Vector& d1, Vector& d2)
{
    LinearSolveStats stats;
    Vector b(red.n1() + red.n2());
    b << red.xi1, red.xi2;

    auto direct_solve = [&]() {
        Eigen::SparseLU<SpMat> lu;
        const SpMat A = red.monolithic();
        lu.compute(A);
        if (lu.info() != Eigen::Success) { fail("solve_reduced: singular reduced system"); }
        const Vector x = lu.solve(b);
        d1 = x.head(red.n1());
        d2 = x.tail(red.n2());
        stats.used_direct = true;
        stats.converged = true;
        stats.relative_residual =
            (b - A * x).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
        stats.iterations += 1;
    };

    if (config.backend == LinearConfig::Backend::Direct)
    {
        direct_solve();
        return stats;
    }

    const SpMat A = red.monolithic();
    const CprPreconditioner cpr = build_cpr(red, config.cpr);
    stats.amg_fallback = cpr.amg_fallback;
    stats.ilu_zero_pivots = cpr.ilu_zero_pivots;
    Vector x = Vector::Zero(b.size());
    const GmresResult result = gmres([&A](const Vector& v) { return Vector(A * v); }, b,
                                     [&cpr](const Vector& v) { return cpr.apply(v); }, x, config.tol,
                                     config.max_iter, config.restart);
    stats.iterations = result.iterations;
    stats.relative_residual = result.relative_residual;
    stats.converged = result.converged;
    if (!result.converged)
    {
        direct_solve();
        return stats;
    }
    d1 = x.head(red.n1());
    d2 = x.tail(red.n2());
    return stats;
}

} // namespace fasflow
