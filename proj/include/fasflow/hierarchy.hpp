// SPDX-License-Identifier: MIT

/// @file
/// Multilevel structure for the nonlinear solver: intergrid transfer
/// operators, local flux basis functions, and coarse-level operators that
/// evaluate the residual on a level without visiting finer levels.
///
/// Level 0 is the fine grid.  Between consecutive levels:
///   - pressure and saturation interpolate as piecewise constants over
///     aggregates, with arithmetic (optionally pore-volume weighted)
///     averaging as the projection;
///   - each coarse face carries one flux basis vector, the normalized
///     solution of a two-aggregate local mixed problem with unit source,
///     and the flux projection extracts total normal flux per coarse face;
///   - producer well fluxes pass through unchanged as identity columns.
///
/// A coarse level stores everything needed to evaluate its residual: the
/// coarse divergence, pore volumes, per-cell mobility-independent local flux
/// mass matrices, the negative-part sums of the composite flux basis per
/// coarse face (which define the generalized upwind operator), and the
/// restricted right-hand sides.

#pragma once

#include "fasflow/fvdiscr.hpp"
#include "fasflow/partition.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

namespace fasflow
{

/// Mobility-independent local flux mass matrix of one cell, over the flux
/// unknowns of the faces incident to that cell (ascending face index).
struct LocalMass
{
    std::vector<int> faces;
    Matrix matrix;
};

struct ProducerRef
{
    int flux_index = -1;
    int cell = -1;
    double well_index = 0.0;
};

struct LevelData
{
    int level = 0;
    int num_cells = 0;
    int num_faces = 0;
    std::vector<std::array<int, 2>> face_cells; ///< K < L per face
    std::vector<ProducerRef> producers;
    SpMat D;            ///< cells x fluxes, signed incidence
    Vector W;           ///< pore volume per cell
    Vector cell_volume; ///< geometric volume per cell
    std::vector<LocalMass> local_mass;
    Vector p_neg; ///< per face: sum of negative composite basis fluxes (zero on level 0)
    Vector g, f, h;

    int num_producers() const { return static_cast<int>(producers.size()); }
    int num_fluxes() const { return num_faces + num_producers(); }
};

struct IntergridOps
{
    SpMat P_sigma, R_sigma, Q_sigma;
    SpMat P_s, R_s, Q_s;
};

inline CellGraph level_graph(const LevelData& lvl)
{
    CellGraph graph;
    graph.vertex_to_cell.resize(lvl.num_cells);
    graph.cell_to_vertex.resize(lvl.num_cells);
    for (int c = 0; c < lvl.num_cells; ++c)
    {
        graph.vertex_to_cell[c] = c;
        graph.cell_to_vertex[c] = c;
    }
    graph.neighbors.resize(lvl.num_cells);
    for (const auto& fc : lvl.face_cells)
    {
        graph.neighbors[fc[0]].push_back(fc[1]);
        graph.neighbors[fc[1]].push_back(fc[0]);
        ++graph.num_edges;
    }
    return graph;
}

inline LevelData make_fine_level(const Mesh& mesh, const std::vector<Well>& wells)
{
    const FineOperators ops = build_fine_operators(mesh, wells);
    LevelData lvl;
    lvl.level = 0;
    lvl.num_cells = mesh.num_cells();
    lvl.num_faces = mesh.num_faces();
    lvl.face_cells = ops.face_cells;
    int producer = 0;
    for (const Well& w : wells)
    {
        if (w.kind != WellKind::BhpProducer) { continue; }
        lvl.producers.push_back({lvl.num_faces + producer, w.cell, w.well_index});
        ++producer;
    }
    lvl.D = ops.D;
    lvl.W = ops.W;
    lvl.cell_volume.resize(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) { lvl.cell_volume[c] = mesh.cells[c].volume; }

    std::vector<std::vector<int>> incident(mesh.num_cells());
    for (int j = 0; j < mesh.num_faces(); ++j)
    {
        incident[mesh.interior_faces[j].cell_K].push_back(j);
        incident[mesh.interior_faces[j].cell_L].push_back(j);
    }
    lvl.local_mass.resize(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c)
    {
        LocalMass& lm = lvl.local_mass[c];
        lm.faces = incident[c];
        lm.matrix = Matrix::Zero(lm.faces.size(), lm.faces.size());
        for (std::size_t k = 0; k < lm.faces.size(); ++k)
        {
            const Face& face = mesh.interior_faces[lm.faces[k]];
            const double y = (face.cell_K == c) ? face.half_trans_K : face.half_trans_L;
            lm.matrix(k, k) = 1.0 / y;
        }
    }
    lvl.p_neg = Vector::Zero(lvl.num_faces);
    lvl.g = ops.g;
    lvl.f = ops.f;
    lvl.h = ops.h_base;
    return lvl;
}

/// Group the finer faces by adjacent aggregate pair; one coarse face per
/// pair, oriented from the smaller to the larger aggregate index.
inline void build_coarse_faces(Aggregation& agg, const LevelData& finer)
{
    agg.coarse_faces.clear();
    std::map<std::pair<int, int>, int> index;
    for (int j = 0; j < finer.num_faces; ++j)
    {
        const int a = agg.cell_to_aggregate[finer.face_cells[j][0]];
        const int b = agg.cell_to_aggregate[finer.face_cells[j][1]];
        if (a == b) { continue; }
        const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
        auto [it, inserted] = index.try_emplace(key, static_cast<int>(agg.coarse_faces.size()));
        if (inserted)
        {
            CoarseFace cf;
            cf.agg_K = key.first;
            cf.agg_L = key.second;
            agg.coarse_faces.push_back(cf);
        }
        CoarseFace& cf = agg.coarse_faces[it->second];
        cf.fine_faces.push_back(j);
        cf.orient.push_back(a == cf.agg_K ? 1.0 : -1.0);
    }
    // store in (K, L)-sorted order for determinism
    std::vector<int> perm(agg.coarse_faces.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int x, int y) {
        return std::make_pair(agg.coarse_faces[x].agg_K, agg.coarse_faces[x].agg_L) <
               std::make_pair(agg.coarse_faces[y].agg_K, agg.coarse_faces[y].agg_L);
    });
    std::vector<CoarseFace> sorted;
    sorted.reserve(perm.size());
    for (int idx : perm) { sorted.push_back(std::move(agg.coarse_faces[idx])); }
    agg.coarse_faces = std::move(sorted);
}

/// Piecewise-constant interpolation for cell fields and its left inverse.
/// The projection averages over each aggregate, arithmetically by default or
/// pore-volume weighted when requested.
inline void build_saturation_ops(const Aggregation& agg, int num_finer_cells, IntergridOps& ops,
                                 const Vector* weights = nullptr)
{
    const int na = agg.num_aggregates;
    std::vector<Triplet> trip;
    trip.reserve(num_finer_cells);
    Vector denom = Vector::Zero(na);
    for (int c = 0; c < num_finer_cells; ++c)
    {
        const int a = agg.cell_to_aggregate[c];
        trip.emplace_back(c, a, 1.0);
        denom[a] += weights ? (*weights)[c] : 1.0;
    }
    for (int a = 0; a < na; ++a)
    {
        require(denom[a] > 0.0, "build_saturation_ops: empty aggregate");
    }
    ops.P_s = SpMat(num_finer_cells, na);
    ops.P_s.setFromTriplets(trip.begin(), trip.end());
    ops.R_s = ops.P_s.transpose();
    std::vector<Triplet> qtrip;
    qtrip.reserve(num_finer_cells);
    for (int c = 0; c < num_finer_cells; ++c)
    {
        const int a = agg.cell_to_aggregate[c];
        qtrip.emplace_back(a, c, (weights ? (*weights)[c] : 1.0) / denom[a]);
    }
    ops.Q_s = SpMat(na, num_finer_cells);
    ops.Q_s.setFromTriplets(qtrip.begin(), qtrip.end());
}

/// Solve the two-aggregate local mixed problem for one coarse face: flux mass
/// with unit mobility, local divergence, no-flow exterior boundary, and the
/// +-1/|aggregate volume| source.  The result is scattered to a full
/// finer-level flux vector and normalized to unit total flux across the
/// coarse face.
inline Vector solve_local_flux_basis(const LevelData& finer, const Aggregation& agg,
                                     const CoarseFace& cface)
{
    std::vector<int> cells;
    for (int c = 0; c < finer.num_cells; ++c)
    {
        const int a = agg.cell_to_aggregate[c];
        if (a == cface.agg_K || a == cface.agg_L) { cells.push_back(c); }
    }
    std::vector<int> cell_loc(finer.num_cells, -1);
    for (std::size_t i = 0; i < cells.size(); ++i) { cell_loc[cells[i]] = static_cast<int>(i); }

    // interior faces of the union
    std::vector<int> faces;
    std::vector<int> face_loc(finer.num_faces, -1);
    for (int j = 0; j < finer.num_faces; ++j)
    {
        if (cell_loc[finer.face_cells[j][0]] >= 0 && cell_loc[finer.face_cells[j][1]] >= 0)
        {
            face_loc[j] = static_cast<int>(faces.size());
            faces.push_back(j);
        }
    }
    const int nf = static_cast<int>(faces.size());
    const int nc = static_cast<int>(cells.size());
    require(nf > 0, "solve_local_flux_basis: coarse face with no connecting finer faces");

    Matrix M = Matrix::Zero(nf, nf);
    for (int c : cells)
    {
        const LocalMass& lm = finer.local_mass[c];
        for (std::size_t a = 0; a < lm.faces.size(); ++a)
        {
            const int ra = face_loc[lm.faces[a]];
            if (ra < 0) { continue; }
            for (std::size_t b = 0; b < lm.faces.size(); ++b)
            {
                const int rb = face_loc[lm.faces[b]];
                if (rb >= 0) { M(ra, rb) += lm.matrix(a, b); }
            }
        }
    }
    Matrix Dloc = Matrix::Zero(nc, nf);
    for (int k = 0; k < nf; ++k)
    {
        Dloc(cell_loc[finer.face_cells[faces[k]][0]], k) = 1.0;
        Dloc(cell_loc[finer.face_cells[faces[k]][1]], k) = -1.0;
    }
    double vol_K = 0.0, vol_L = 0.0;
    for (int c : cells)
    {
        (agg.cell_to_aggregate[c] == cface.agg_K ? vol_K : vol_L) += finer.cell_volume[c];
    }
    Vector q(nc);
    for (int c : cells)
    {
        q[cell_loc[c]] = (agg.cell_to_aggregate[c] == cface.agg_K)
                             ? finer.cell_volume[c] / vol_K
                             : -finer.cell_volume[c] / vol_L;
    }

    // Saddle system with the last cell's pressure grounded (drop its column
    // and its conservation row; the dropped row is implied by compatibility).
    // Pressures are scaled by the largest mass entry to keep the blocks
    // comparable in magnitude.
    const double m0 = std::max(M.diagonal().maxCoeff(), 1e-300);
    const int dim = nf + nc - 1;
    Matrix S = Matrix::Zero(dim, dim);
    S.topLeftCorner(nf, nf) = M / m0;
    S.topRightCorner(nf, nc - 1) = -Dloc.topRows(nc - 1).transpose();
    S.bottomLeftCorner(nc - 1, nf) = Dloc.topRows(nc - 1);
    Vector rhs = Vector::Zero(dim);
    rhs.tail(nc - 1) = q.head(nc - 1);

    Eigen::FullPivLU<Matrix> lu(S);
    if (!lu.isInvertible())
    {
        fail("solve_local_flux_basis: singular local problem (disconnected aggregate pair)");
    }
    const Vector sol = lu.solve(rhs);

    Vector basis = Vector::Zero(finer.num_fluxes());
    for (int k = 0; k < nf; ++k) { basis[faces[k]] = sol[k]; }

    double total = 0.0;
    for (std::size_t k = 0; k < cface.fine_faces.size(); ++k)
    {
        total += cface.orient[k] * basis[cface.fine_faces[k]];
    }
    if (std::abs(total) < 1e-300) { fail("solve_local_flux_basis: zero total flux across coarse face"); }
    basis /= total;
    return basis;
}

/// Collect the basis vectors as columns of the flux interpolation; producer
/// fluxes are carried by identity columns.  The flux projection reads the
/// total normal flux per coarse face.
inline void build_flux_ops(const std::vector<Vector>& bases, const Aggregation& agg,
                           const LevelData& finer, IntergridOps& ops)
{
    const int ncf = static_cast<int>(agg.coarse_faces.size());
    const int np = finer.num_producers();
    require(static_cast<int>(bases.size()) == ncf, "build_flux_ops: one basis per coarse face required");

    std::vector<Triplet> ptrip, qtrip;
    for (int i = 0; i < ncf; ++i)
    {
        for (Eigen::Index j = 0; j < bases[i].size(); ++j)
        {
            if (bases[i][j] != 0.0) { ptrip.emplace_back(j, i, bases[i][j]); }
        }
        const CoarseFace& cf = agg.coarse_faces[i];
        for (std::size_t k = 0; k < cf.fine_faces.size(); ++k)
        {
            qtrip.emplace_back(i, cf.fine_faces[k], cf.orient[k]);
        }
    }
    for (int p = 0; p < np; ++p)
    {
        ptrip.emplace_back(finer.producers[p].flux_index, ncf + p, 1.0);
        qtrip.emplace_back(ncf + p, finer.producers[p].flux_index, 1.0);
    }
    ops.P_sigma = SpMat(finer.num_fluxes(), ncf + np);
    ops.P_sigma.setFromTriplets(ptrip.begin(), ptrip.end());
    ops.R_sigma = ops.P_sigma.transpose();
    ops.Q_sigma = SpMat(ncf + np, finer.num_fluxes());
    ops.Q_sigma.setFromTriplets(qtrip.begin(), qtrip.end());
}

/// Assemble the coarse level: variational divergence and right-hand sides,
/// locally coarsened flux mass matrices, and the per-face negative flux sums
/// of the composite interpolation that define the generalized upwind.
///
/// composite_P_sigma maps the new level's flux coefficients to level-0
/// fluxes; cell0_to_agg maps level-0 cells to the new level's aggregates.
inline LevelData coarsen_level(const LevelData& finer, const IntergridOps& ops, const Aggregation& agg,
                               const SpMat& composite_P_sigma, const LevelData& level0,
                               const std::vector<int>& cell0_to_agg)
{
    LevelData c;
    c.level = finer.level + 1;
    c.num_cells = agg.num_aggregates;
    c.num_faces = static_cast<int>(agg.coarse_faces.size());
    c.face_cells.resize(c.num_faces);
    for (int i = 0; i < c.num_faces; ++i)
    {
        c.face_cells[i] = {agg.coarse_faces[i].agg_K, agg.coarse_faces[i].agg_L};
    }
    for (int p = 0; p < finer.num_producers(); ++p)
    {
        c.producers.push_back({c.num_faces + p, agg.cell_to_aggregate[finer.producers[p].cell],
                               finer.producers[p].well_index});
    }

    c.D = (ops.R_s * finer.D * ops.P_sigma).pruned();
    c.W = ops.R_s * Vector(finer.W);
    c.cell_volume = ops.R_s * Vector(finer.cell_volume);
    c.g = ops.R_sigma * finer.g;
    c.f = ops.R_s * finer.f;
    c.h = ops.R_s * finer.h;

    // locally coarsened flux mass matrices
    std::vector<std::vector<int>> agg_cells(c.num_cells);
    for (int cf = 0; cf < finer.num_cells; ++cf) { agg_cells[agg.cell_to_aggregate[cf]].push_back(cf); }
    std::vector<std::vector<int>> incident(c.num_cells);
    for (int i = 0; i < c.num_faces; ++i)
    {
        incident[c.face_cells[i][0]].push_back(i);
        incident[c.face_cells[i][1]].push_back(i);
    }
    c.local_mass.resize(c.num_cells);
    for (int a = 0; a < c.num_cells; ++a)
    {
        // finer faces touching the aggregate
        std::vector<int> touched;
        for (int cf : agg_cells[a])
        {
            touched.insert(touched.end(), finer.local_mass[cf].faces.begin(),
                           finer.local_mass[cf].faces.end());
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        std::vector<int> touched_loc(finer.num_faces, -1);
        for (std::size_t k = 0; k < touched.size(); ++k) { touched_loc[touched[k]] = static_cast<int>(k); }

        Matrix G = Matrix::Zero(touched.size(), touched.size());
        for (int cf : agg_cells[a])
        {
            const LocalMass& lm = finer.local_mass[cf];
            for (std::size_t x = 0; x < lm.faces.size(); ++x)
            {
                for (std::size_t y = 0; y < lm.faces.size(); ++y)
                {
                    G(touched_loc[lm.faces[x]], touched_loc[lm.faces[y]]) += lm.matrix(x, y);
                }
            }
        }
        Matrix Ploc = Matrix::Zero(touched.size(), incident[a].size());
        for (std::size_t col = 0; col < incident[a].size(); ++col)
        {
            for (SpMat::InnerIterator it(ops.P_sigma, incident[a][col]); it; ++it)
            {
                const int r = touched_loc[it.row()];
                if (r >= 0) { Ploc(r, col) = it.value(); }
            }
        }
        c.local_mass[a].faces = incident[a];
        c.local_mass[a].matrix = Ploc.transpose() * G * Ploc;
    }

    // negative-part sums of the composite basis per coarse face
    std::map<std::pair<int, int>, int> pair_to_face;
    for (int i = 0; i < c.num_faces; ++i)
    {
        pair_to_face[{c.face_cells[i][0], c.face_cells[i][1]}] = i;
    }
    c.p_neg = Vector::Zero(c.num_faces);
    for (int i = 0; i < c.num_faces; ++i)
    {
        double pn = 0.0;
        for (SpMat::InnerIterator it(composite_P_sigma, i); it; ++it)
        {
            const int j = static_cast<int>(it.row());
            if (j >= level0.num_faces) { continue; }
            const int A = cell0_to_agg[level0.face_cells[j][0]];
            const int B = cell0_to_agg[level0.face_cells[j][1]];
            if (std::min(A, B) != c.face_cells[i][0] || std::max(A, B) != c.face_cells[i][1])
            {
                continue;
            }
            const double oriented = (A == c.face_cells[i][0]) ? it.value() : -it.value();
            pn += std::min(oriented, 0.0);
        }
        c.p_neg[i] = pn;
    }
    return c;
}

/// Generalized upwind selection: each face row puts weight (1 - p_neg) on
/// the upstream aggregate and p_neg on the downstream one; rows sum to one.
/// With p_neg = 0 (in particular on the fine level) this is single-point
/// upstream weighting.  Producer rows always select their own cell.
inline SpMat coarse_upwind_operator(const Vector& sigma, const LevelData& lvl)
{
    require(sigma.size() == lvl.num_fluxes(), "coarse_upwind_operator: flux length mismatch");
    std::vector<Triplet> trip;
    trip.reserve(2 * lvl.num_faces + lvl.num_producers());
    for (int i = 0; i < lvl.num_faces; ++i)
    {
        const double pn = lvl.p_neg[i];
        const double wK = (sigma[i] > 0.0) ? 1.0 - pn : pn;
        const double wL = (sigma[i] > 0.0) ? pn : 1.0 - pn;
        if (wK != 0.0) { trip.emplace_back(i, lvl.face_cells[i][0], wK); }
        if (wL != 0.0) { trip.emplace_back(i, lvl.face_cells[i][1], wL); }
    }
    for (const ProducerRef& p : lvl.producers) { trip.emplace_back(p.flux_index, p.cell, 1.0); }
    SpMat U(lvl.num_fluxes(), lvl.num_cells);
    U.setFromTriplets(trip.begin(), trip.end());
    return U;
}

/// Flux mass matrix of a level: per-cell local matrices scaled by the
/// reciprocal total mobility of the cell's saturation, plus producer
/// diagonal entries.  Diagonal on the fine level by construction.
inline SpMat assemble_flux_mass(const LevelData& lvl, const Vector& s, const FluidProps& fluids)
{
    require(s.size() == lvl.num_cells, "assemble_flux_mass: saturation length mismatch");
    std::vector<Triplet> trip;
    for (int c = 0; c < lvl.num_cells; ++c)
    {
        const LocalMass& lm = lvl.local_mass[c];
        const double scale = 1.0 / total_mobility(s[c], fluids);
        for (std::size_t a = 0; a < lm.faces.size(); ++a)
        {
            for (std::size_t b = 0; b < lm.faces.size(); ++b)
            {
                const double v = lm.matrix(a, b);
                if (v != 0.0) { trip.emplace_back(lm.faces[a], lm.faces[b], scale * v); }
            }
        }
    }
    for (const ProducerRef& p : lvl.producers)
    {
        trip.emplace_back(p.flux_index, p.flux_index,
                          1.0 / (total_mobility(s[p.cell], fluids) * p.well_index));
    }
    SpMat M(lvl.num_fluxes(), lvl.num_fluxes());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

/// Residual of one level evaluated from that level's stored data only.
inline ResidualVector coarse_residual(const LevelData& lvl, const State& x, double dt,
                                      const FluidProps& fluids)
{
    require(x.sigma.size() == lvl.num_fluxes() && x.p.size() == lvl.num_cells &&
                x.s.size() == lvl.num_cells,
            "coarse_residual: state length mismatch");
    const SpMat M = assemble_flux_mass(lvl, x.s, fluids);
    ResidualVector r;
    r.r_sigma = M * x.sigma - lvl.D.transpose() * x.p - lvl.g;
    r.r_p = lvl.D * x.sigma - lvl.f;
    Vector fw(lvl.num_cells);
    for (int c = 0; c < lvl.num_cells; ++c) { fw[c] = fractional_flow(x.s[c], fluids); }
    const SpMat U = coarse_upwind_operator(x.sigma, lvl);
    r.r_s = (1.0 / dt) * lvl.W.cwiseProduct(x.s) + lvl.D * x.sigma.cwiseProduct(U * fw) - lvl.h;
    return r;
}

// ---------------------------------------------------------------------------
// Hierarchy
// ---------------------------------------------------------------------------

struct HierarchyConfig
{
    int num_levels = 1;
    int coarsening_factor = 8;
    std::uint64_t seed = 0;
    bool weighted_projection = false;
    /// Optional per-transition cell-to-aggregate files (index 0 builds level 1).
    std::vector<std::string> partition_files;
};

struct Hierarchy
{
    std::vector<LevelData> levels;
    std::vector<IntergridOps> ops;           ///< ops[l] transfers between levels l and l+1
    std::vector<Aggregation> aggregations;   ///< aggregations[l] builds level l+1
    std::vector<SpMat> composite_P_sigma;    ///< composite flux interpolation to level 0
    std::vector<std::vector<int>> cell0_to_agg; ///< level-0 cell to aggregate of level l+1
    Vector fine_h_base;                      ///< wetting source without the accumulation term

    int num_levels() const { return static_cast<int>(levels.size()); }

    State project(int level, const State& x) const
    {
        return {ops[level].Q_sigma * x.sigma, ops[level].Q_s * x.p, ops[level].Q_s * x.s};
    }
    State interpolate(int level, const State& xc) const
    {
        return {ops[level].P_sigma * xc.sigma, ops[level].P_s * xc.p, ops[level].P_s * xc.s};
    }
    ResidualVector restrict_residual(int level, const ResidualVector& r) const
    {
        return {ops[level].R_sigma * r.r_sigma, ops[level].R_s * r.r_p, ops[level].R_s * r.r_s};
    }
    State zero_state(int level) const
    {
        return {Vector::Zero(levels[level].num_fluxes()), Vector::Zero(levels[level].num_cells),
                Vector::Zero(levels[level].num_cells)};
    }

    /// Fold the previous step's accumulation into the fine wetting-phase RHS
    /// and restrict it down the hierarchy.
    void set_time_step(const Vector& prev_s_fine, double dt)
    {
        levels[0].h = (1.0 / dt) * levels[0].W.cwiseProduct(prev_s_fine) + fine_h_base;
        for (int l = 0; l + 1 < num_levels(); ++l)
        {
            levels[l + 1].h = ops[l].R_s * levels[l].h;
        }
    }
};

inline Hierarchy build_hierarchy(const Mesh& mesh, const std::vector<Well>& wells,
                                 const HierarchyConfig& config)
{
    require(config.num_levels >= 1, "build_hierarchy: need at least one level");
    Hierarchy hier;
    hier.levels.push_back(make_fine_level(mesh, wells));
    hier.fine_h_base = hier.levels[0].h;

    std::vector<int> well_cells;
    for (const Well& w : wells) { well_cells.push_back(w.cell); }
    std::sort(well_cells.begin(), well_cells.end());
    well_cells.erase(std::unique(well_cells.begin(), well_cells.end()), well_cells.end());

    for (int l = 0; l + 1 < config.num_levels; ++l)
    {
        const LevelData& finer = hier.levels[l];
        const CellGraph graph = level_graph(finer);
        Aggregation agg;
        if (l < static_cast<int>(config.partition_files.size()) && !config.partition_files[l].empty())
        {
            std::ifstream in(config.partition_files[l]);
            require(in.good(), "build_hierarchy: cannot open partition file");
            agg = aggregation_from_map(graph.neighbors, read_partition_file(in, finer.num_cells));
        }
        else
        {
            agg = partition_cells(graph, config.coarsening_factor, well_cells, config.seed + l);
        }
        agg.level = l + 1;
        build_coarse_faces(agg, finer);

        IntergridOps ops;
        build_saturation_ops(agg, finer.num_cells, ops,
                             config.weighted_projection ? &finer.W : nullptr);
        std::vector<Vector> bases(agg.coarse_faces.size());
        for (std::size_t i = 0; i < agg.coarse_faces.size(); ++i)
        {
            bases[i] = solve_local_flux_basis(finer, agg, agg.coarse_faces[i]);
        }
        build_flux_ops(bases, agg, finer, ops);

        const SpMat composite =
            hier.composite_P_sigma.empty() ? ops.P_sigma
                                           : SpMat(hier.composite_P_sigma.back() * ops.P_sigma);
        std::vector<int> c0_agg(hier.levels[0].num_cells);
        for (int c0 = 0; c0 < hier.levels[0].num_cells; ++c0)
        {
            const int finer_cell = hier.cell0_to_agg.empty() ? c0 : hier.cell0_to_agg.back()[c0];
            c0_agg[c0] = agg.cell_to_aggregate[finer_cell];
        }

        hier.levels.push_back(coarsen_level(finer, ops, agg, composite, hier.levels[0], c0_agg));
        hier.ops.push_back(std::move(ops));
        hier.aggregations.push_back(std::move(agg));
        hier.composite_P_sigma.push_back(composite);
        hier.cell0_to_agg.push_back(std::move(c0_agg));

        // next transition keeps wells as singleton aggregates
        std::vector<int> next_well_cells;
        for (int c : well_cells)
        {
            next_well_cells.push_back(hier.aggregations.back().cell_to_aggregate[c]);
        }
        std::sort(next_well_cells.begin(), next_well_cells.end());
        next_well_cells.erase(std::unique(next_well_cells.begin(), next_well_cells.end()),
                              next_well_cells.end());
        well_cells = std::move(next_well_cells);
    }
    return hier;
}

} // namespace fasflow
