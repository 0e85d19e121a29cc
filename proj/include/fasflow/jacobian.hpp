// SPDX-License-Identifier: MIT

/// @file
/// Jacobian blocks of the level residual with the upwind directions frozen at
/// the current iterate.  The flux-mass block is diagonal on the fine level
/// and the assembled local-matrix sum on coarse levels; the transport blocks
/// share one form across levels:
///   dr_s/ds     = W/dt + D diag(sigma) U(sigma) diag(f_w'(s))
///   dr_s/dsigma = D diag(U(sigma) f_w(s))
///   dr_sigma/ds = per-cell d(1/lambda)/ds times the local mass action.

#pragma once

#include "fasflow/hierarchy.hpp"

namespace fasflow
{

struct JacobianBlocks
{
    SpMat dr_sigma_dsigma; ///< flux mass at the frozen saturation
    SpMat dr_sigma_ds;
    SpMat dr_s_dsigma;
    SpMat dr_s_ds;
    // iterate data needed by the coarse hybridization
    Vector sigma_frozen;
    Vector s_frozen;
    Vector lambda_inv;  ///< 1/lambda(s_c) per cell
    Vector dlambda_inv; ///< d(1/lambda)/ds per cell
    Vector upwind_fw;   ///< U(sigma) f_w(s) per flux at the iterate
};

inline JacobianBlocks assemble_jacobian(const LevelData& lvl, const State& x, double dt,
                                        const FluidProps& fluids)
{
    require(x.sigma.size() == lvl.num_fluxes() && x.s.size() == lvl.num_cells,
            "assemble_jacobian: state length mismatch");
    JacobianBlocks jac;
    jac.sigma_frozen = x.sigma;
    jac.s_frozen = x.s;
    jac.lambda_inv.resize(lvl.num_cells);
    jac.dlambda_inv.resize(lvl.num_cells);
    Vector fw(lvl.num_cells), dfw(lvl.num_cells);
    for (int c = 0; c < lvl.num_cells; ++c)
    {
        const double lambda = total_mobility(x.s[c], fluids);
        jac.lambda_inv[c] = 1.0 / lambda;
        jac.dlambda_inv[c] = -total_mobility_derivative(x.s[c], fluids) / (lambda * lambda);
        fw[c] = fractional_flow(x.s[c], fluids);
        dfw[c] = fractional_flow_derivative(x.s[c], fluids);
    }

    jac.dr_sigma_dsigma = assemble_flux_mass(lvl, x.s, fluids);

    // dr_sigma/ds: column c collects d(1/lambda_c)/ds times the local mass
    // action on the frozen flux
    std::vector<Triplet> trip;
    for (int c = 0; c < lvl.num_cells; ++c)
    {
        const LocalMass& lm = lvl.local_mass[c];
        if (lm.faces.empty() || jac.dlambda_inv[c] == 0.0) { continue; }
        Vector sigma_loc(lm.faces.size());
        for (std::size_t k = 0; k < lm.faces.size(); ++k) { sigma_loc[k] = x.sigma[lm.faces[k]]; }
        const Vector action = lm.matrix * sigma_loc;
        for (std::size_t k = 0; k < lm.faces.size(); ++k)
        {
            const double v = jac.dlambda_inv[c] * action[k];
            if (v != 0.0) { trip.emplace_back(lm.faces[k], c, v); }
        }
    }
    for (const ProducerRef& p : lvl.producers)
    {
        const double v = jac.dlambda_inv[p.cell] * x.sigma[p.flux_index] / p.well_index;
        if (v != 0.0) { trip.emplace_back(p.flux_index, p.cell, v); }
    }
    jac.dr_sigma_ds = SpMat(lvl.num_fluxes(), lvl.num_cells);
    jac.dr_sigma_ds.setFromTriplets(trip.begin(), trip.end());

    const SpMat U = coarse_upwind_operator(x.sigma, lvl);
    jac.upwind_fw = U * fw;
    jac.dr_s_dsigma = lvl.D * SpMat(jac.upwind_fw.asDiagonal());
    jac.dr_s_ds = SpMat((1.0 / dt) * lvl.W.asDiagonal()) +
                  lvl.D * SpMat(x.sigma.asDiagonal()) * U * SpMat(dfw.asDiagonal());
    return jac;
}

} // namespace fasflow
