// SPDX-License-Identifier: MIT

/// @file
/// Fine-level residual of the coupled flux/pressure/saturation system and its
/// constituent operators: the diagonal flux mass matrix, the signed
/// divergence, single-point upstream weighting, and the transport operator.
///
/// Unknown layout: sigma stacks interior-face fluxes (mesh order) followed by
/// one flux per BHP producer (well-list order).  Sign conventions:
///   - interior face column of D: +1 in row K, -1 in row L;
///   - producer column of D: -1 in its cell row, so the producer flux unknown
///     is oriented into the reservoir and is negative while producing;
///   - g carries the producer bottomhole pressures, f the injection rates,
///     h the wetting-phase injection rates.

#pragma once

#include "fasflow/physics.hpp"

#include <array>
#include <vector>

namespace fasflow
{

/// Unknowns of one level: fluxes, cell pressures, cell saturations.
struct State
{
    Vector sigma;
    Vector p;
    Vector s;

    State operator+(const State& o) const { return {sigma + o.sigma, p + o.p, s + o.s}; }
    State operator-(const State& o) const { return {sigma - o.sigma, p - o.p, s - o.s}; }
    State scaled(double a) const { return {a * sigma, a * p, a * s}; }
};

struct ResidualVector
{
    Vector r_sigma;
    Vector r_p;
    Vector r_s;

    Vector stacked() const
    {
        Vector out(r_sigma.size() + r_p.size() + r_s.size());
        out << r_sigma, r_p, r_s;
        return out;
    }
    double norm2() const { return stacked().norm(); }

    ResidualVector operator-(const ResidualVector& o) const
    {
        return {r_sigma - o.r_sigma, r_p - o.r_p, r_s - o.r_s};
    }
};

/// Time-independent fine-level operators and right-hand sides.
struct FineOperators
{
    SpMat D;       ///< cells x (faces + producers)
    Vector W;      ///< pore volumes (diagonal saturation mass matrix)
    Vector g;      ///< flux-equation RHS: bhp in producer rows
    Vector f;      ///< total-volume RHS: injection rates
    Vector h_base; ///< wetting-phase source: injection rates
    std::vector<std::array<int, 2>> face_cells;
    std::vector<int> producer_cells; ///< one entry per producer, well-list order
    int num_faces = 0;

    int num_producers() const { return static_cast<int>(producer_cells.size()); }
    int num_fluxes() const { return num_faces + num_producers(); }
};

inline SpMat assemble_divergence(const Mesh& mesh, const std::vector<Well>& wells)
{
    std::vector<Triplet> trip;
    trip.reserve(2 * mesh.num_faces() + wells.size());
    for (int j = 0; j < mesh.num_faces(); ++j)
    {
        trip.emplace_back(mesh.interior_faces[j].cell_K, j, 1.0);
        trip.emplace_back(mesh.interior_faces[j].cell_L, j, -1.0);
    }
    int producer = 0;
    for (const Well& w : wells)
    {
        if (w.kind != WellKind::BhpProducer) { continue; }
        trip.emplace_back(w.cell, mesh.num_faces() + producer, -1.0);
        ++producer;
    }
    SpMat D(mesh.num_cells(), mesh.num_faces() + producer);
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
}

inline FineOperators build_fine_operators(const Mesh& mesh, const std::vector<Well>& wells)
{
    for (const Well& w : wells) { w.validate(mesh.num_cells()); }
    FineOperators ops;
    ops.num_faces = mesh.num_faces();
    ops.face_cells.resize(mesh.num_faces());
    for (int j = 0; j < mesh.num_faces(); ++j)
    {
        ops.face_cells[j] = {mesh.interior_faces[j].cell_K, mesh.interior_faces[j].cell_L};
    }
    for (const Well& w : wells)
    {
        if (w.kind == WellKind::BhpProducer) { ops.producer_cells.push_back(w.cell); }
    }
    ops.D = assemble_divergence(mesh, wells);
    ops.W.resize(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) { ops.W[c] = mesh.pore_volume(c); }
    ops.g = Vector::Zero(ops.num_fluxes());
    ops.f = Vector::Zero(mesh.num_cells());
    ops.h_base = Vector::Zero(mesh.num_cells());
    int producer = 0;
    for (const Well& w : wells)
    {
        if (w.kind == WellKind::BhpProducer)
        {
            ops.g[ops.num_faces + producer] = w.bhp;
            ++producer;
        }
        else
        {
            ops.f[w.cell] += w.rate_w;
            ops.h_base[w.cell] += w.rate_w; // injectors inject pure wetting phase
        }
    }
    return ops;
}

/// Diagonal of the fine-level flux mass matrix: for a face,
/// 1/(lambda(s_K) Y_K) + 1/(lambda(s_L) Y_L); for a producer, 1/(lambda(s_K) WI).
inline Vector assemble_flux_mass(const Mesh& mesh, const std::vector<Well>& wells, const Vector& s,
                                 const FluidProps& fluids)
{
    require(s.size() == mesh.num_cells(), "assemble_flux_mass: saturation length mismatch");
    int num_producers = 0;
    for (const Well& w : wells) { num_producers += (w.kind == WellKind::BhpProducer) ? 1 : 0; }
    Vector m(mesh.num_faces() + num_producers);
    for (int j = 0; j < mesh.num_faces(); ++j)
    {
        const Face& f = mesh.interior_faces[j];
        m[j] = 1.0 / (total_mobility(s[f.cell_K], fluids) * f.half_trans_K) +
               1.0 / (total_mobility(s[f.cell_L], fluids) * f.half_trans_L);
    }
    int producer = 0;
    for (const Well& w : wells)
    {
        if (w.kind != WellKind::BhpProducer) { continue; }
        m[mesh.num_faces() + producer] = producer_flux_coefficient(s[w.cell], w, fluids);
        ++producer;
    }
    return m;
}

/// Single-point upstream weighting: face row selects cell K when the flux is
/// strictly positive, cell L otherwise; a producer row always selects its own
/// reservoir cell.
inline SpMat upwind_operator(const Vector& sigma, const FineOperators& ops)
{
    require(sigma.size() == ops.num_fluxes(), "upwind_operator: flux length mismatch");
    std::vector<Triplet> trip;
    trip.reserve(ops.num_fluxes());
    int num_cells = 0;
    for (const auto& fc : ops.face_cells) { num_cells = std::max(num_cells, std::max(fc[0], fc[1]) + 1); }
    for (int c : ops.producer_cells) { num_cells = std::max(num_cells, c + 1); }
    num_cells = std::max<int>(num_cells, ops.D.rows());
    for (int j = 0; j < ops.num_faces; ++j)
    {
        const int cell = sigma[j] > 0.0 ? ops.face_cells[j][0] : ops.face_cells[j][1];
        trip.emplace_back(j, cell, 1.0);
    }
    for (int p = 0; p < ops.num_producers(); ++p)
    {
        trip.emplace_back(ops.num_faces + p, ops.producer_cells[p], 1.0);
    }
    SpMat U(ops.num_fluxes(), num_cells);
    U.setFromTriplets(trip.begin(), trip.end());
    return U;
}

/// T(sigma, s) = W s / dt + D diag(sigma) U(sigma) f_w(s)
inline Vector transport_operator(const Vector& sigma, const Vector& s, double dt,
                                 const FineOperators& ops, const FluidProps& fluids)
{
    require(dt > 0.0, "transport_operator: dt must be positive");
    Vector fw(s.size());
    for (Eigen::Index c = 0; c < s.size(); ++c) { fw[c] = fractional_flow(s[c], fluids); }
    const SpMat U = upwind_operator(sigma, ops);
    const Vector upwinded = sigma.cwiseProduct(U * fw);
    return (1.0 / dt) * ops.W.cwiseProduct(s) + ops.D * upwinded;
}

/// Full three-block residual; the accumulation term of the previous time step
/// is folded into the wetting-phase right-hand side.
inline ResidualVector residual(const State& state, const Vector& prev_s, double dt,
                               const FineOperators& ops, const Mesh& mesh,
                               const std::vector<Well>& wells, const FluidProps& fluids)
{
    require(state.sigma.size() == ops.num_fluxes(), "residual: flux length mismatch");
    require(state.p.size() == mesh.num_cells() && state.s.size() == mesh.num_cells(),
            "residual: cell field length mismatch");
    require(prev_s.size() == mesh.num_cells(), "residual: previous saturation length mismatch");

    const Vector m = assemble_flux_mass(mesh, wells, state.s, fluids);
    ResidualVector r;
    r.r_sigma = m.cwiseProduct(state.sigma) - ops.D.transpose() * state.p - ops.g;
    r.r_p = ops.D * state.sigma - ops.f;
    const Vector h = (1.0 / dt) * ops.W.cwiseProduct(prev_s) + ops.h_base;
    r.r_s = transport_operator(state.sigma, state.s, dt, ops, fluids) - h;
    return r;
}

} // namespace fasflow
