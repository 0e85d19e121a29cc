// SPDX-License-Identifier: MIT

#include "fasflow/hierarchy.hpp"
#include "support/hierarchy_oracles.hpp"
#include "support/testutil.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace fasflow;
using namespace fasflow::testing;

namespace
{
FluidProps egg_fluids()
{
    FluidProps f;
    f.mu_w = 1e-3;
    f.mu_nw = 5e-3;
    f.gamma = 2.0;
    return f;
}

std::vector<Well> six_cell_wells()
{
    return {make_injector(0, 0.8), make_producer(5, 1e6, 1.5)};
}

/// Every cell its own aggregate; the flux basis degenerates to the identity.
Aggregation identity_aggregation(const LevelData& lvl)
{
    Aggregation agg;
    agg.num_aggregates = lvl.num_cells;
    agg.cell_to_aggregate.resize(lvl.num_cells);
    std::iota(agg.cell_to_aggregate.begin(), agg.cell_to_aggregate.end(), 0);
    build_coarse_faces(agg, lvl);
    return agg;
}

/// Build a hierarchy on a random heterogeneous mesh with corner wells.
struct HierCase
{
    Mesh mesh;
    std::vector<Well> wells;
    Hierarchy hier;
};

HierCase random_setup(int nx, int ny, unsigned seed, int num_levels, int beta)
{
    HierCase s{random_heterogeneous(nx, ny, seed),
            {},
            {}};
    s.wells = {make_injector(0, 0.5), make_producer(nx * ny - 1, 1e6, 2.0)};
    HierarchyConfig cfg;
    cfg.num_levels = num_levels;
    cfg.coarsening_factor = beta;
    cfg.seed = seed;
    s.hier = build_hierarchy(s.mesh, s.wells, cfg);
    return s;
}

State random_state(const LevelData& lvl, unsigned seed, double sigma_scale = 1.0)
{
    State x;
    x.sigma = sigma_scale * random_vector(lvl.num_fluxes(), seed);
    x.p = random_vector(lvl.num_cells, seed + 1, 0.0, 2e6);
    x.s = random_vector(lvl.num_cells, seed + 2, 0.0, 1.0);
    return x;
}
} // namespace

// ---------------------------------------------------------------------------
// partitioning
// ---------------------------------------------------------------------------

TEST(Partition, PathGraphBalancedBisection)
{
    const Mesh mesh = unit_cartesian(6, 1);
    const Aggregation agg = partition_cells(cell_connectivity_graph(mesh), 3, {});
    EXPECT_EQ(agg.num_aggregates, 2);
    std::vector<int> sizes(2, 0);
    for (int a : agg.cell_to_aggregate) { ++sizes[a]; }
    EXPECT_EQ(sizes[0], 3);
    EXPECT_EQ(sizes[1], 3);
}

TEST(Partition, WellCellsBecomeSingletons)
{
    const Mesh mesh = six_cell_mesh();
    const Aggregation agg = partition_cells(cell_connectivity_graph(mesh), 2, {0, 5});
    EXPECT_EQ(agg.num_aggregates, 4); // two singletons plus two aggregates of two
    const int a0 = agg.cell_to_aggregate[0];
    const int a5 = agg.cell_to_aggregate[5];
    for (int c = 1; c < 5; ++c)
    {
        EXPECT_NE(agg.cell_to_aggregate[c], a0);
        EXPECT_NE(agg.cell_to_aggregate[c], a5);
    }
}

TEST(Partition, AggregatesAreConnected)
{
    for (unsigned seed : {1u, 2u, 3u})
    {
        for (int beta : {4, 9})
        {
            const Mesh mesh = random_heterogeneous(8, 7, seed);
            const CellGraph graph = cell_connectivity_graph(mesh);
            const Aggregation agg = partition_cells(graph, beta, {0, 55}, seed);
            EXPECT_TRUE(aggregates_connected(graph, agg));
        }
    }
}

TEST(Partition, FactorLargerThanFreeCellsThrows)
{
    const Mesh mesh = unit_cartesian(2, 2);
    EXPECT_THROW(partition_cells(cell_connectivity_graph(mesh), 3, {0, 1, 3}), std::invalid_argument);
}

TEST(Partition, FileIngestionSplitsDisconnectedAggregates)
{
    // 4x1 path; the file maps cells {0, 3} to one aggregate, which is not
    // contiguous and must be split.
    const Mesh mesh = unit_cartesian(4, 1);
    std::stringstream file("0 0\n1 1\n2 1\n3 0\n");
    const std::vector<int> map = read_partition_file(file, 4);
    const Aggregation agg =
        aggregation_from_map(cell_connectivity_graph(mesh).neighbors, map);
    EXPECT_EQ(agg.num_aggregates, 3);
    EXPECT_NE(agg.cell_to_aggregate[0], agg.cell_to_aggregate[3]);
    EXPECT_EQ(agg.cell_to_aggregate[1], agg.cell_to_aggregate[2]);
}

TEST(CoarseFaces, SharedFineFacesGroupIntoOneFace)
{
    // two 3-cell column aggregates on a 2x3 mesh share three fine faces
    const Mesh mesh = unit_cartesian(2, 3);
    const LevelData fine = make_fine_level(mesh, {});
    Aggregation agg;
    agg.num_aggregates = 2;
    agg.cell_to_aggregate = {0, 1, 0, 1, 0, 1};
    build_coarse_faces(agg, fine);
    ASSERT_EQ(agg.coarse_faces.size(), 1u);
    EXPECT_EQ(agg.coarse_faces[0].fine_faces.size(), 3u);
    for (const CoarseFace& cf : agg.coarse_faces) { EXPECT_FALSE(cf.fine_faces.empty()); }
}

TEST(CoarseFaces, SixCellPartitionEnumeration)
{
    // wells {0, 5} as singletons, aggregates {1,2} and {3,4}: five coarse
    // faces in total, exactly one joining the two non-well aggregates.
    const Mesh mesh = six_cell_mesh();
    const LevelData fine = make_fine_level(mesh, six_cell_wells());
    Aggregation agg;
    agg.num_aggregates = 4;
    agg.cell_to_aggregate = {0, 1, 1, 2, 2, 3};
    build_coarse_faces(agg, fine);
    EXPECT_EQ(agg.coarse_faces.size(), 5u);
    int between_free = 0;
    for (const CoarseFace& cf : agg.coarse_faces)
    {
        if (cf.agg_K == 1 && cf.agg_L == 2)
        {
            ++between_free;
            EXPECT_EQ(cf.fine_faces.size(), 1u);
        }
    }
    EXPECT_EQ(between_free, 1);
}

// ---------------------------------------------------------------------------
// intergrid operators
// ---------------------------------------------------------------------------

TEST(SaturationOps, ArithmeticMean)
{
    const Mesh mesh = unit_cartesian(3, 1);
    const LevelData fine = make_fine_level(mesh, {});
    Aggregation agg;
    agg.num_aggregates = 1;
    agg.cell_to_aggregate = {0, 0, 0};
    IntergridOps ops;
    build_saturation_ops(agg, 3, ops);
    Vector s(3);
    s << 0.2, 0.4, 0.6;
    const Vector sc = ops.Q_s * s;
    EXPECT_NEAR(sc[0], 0.4, 1e-15);
}

TEST(SaturationOps, SingletonRowIsUnitVector)
{
    Aggregation agg;
    agg.num_aggregates = 2;
    agg.cell_to_aggregate = {0, 1, 1};
    IntergridOps ops;
    build_saturation_ops(agg, 3, ops);
    EXPECT_DOUBLE_EQ(ops.Q_s.coeff(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(Vector(ops.Q_s.row(0)).lpNorm<1>(), 1.0);
}

TEST(SaturationOps, ProjectionTimesInterpolationIsIdentity)
{
    for (unsigned seed : {5u, 6u})
    {
        const HierCase s = random_setup(6, 6, seed, 2, 4);
        const IntergridOps& ops = s.hier.ops[0];
        const Matrix QP = Matrix(ops.Q_s) * Matrix(ops.P_s);
        EXPECT_LT((QP - Matrix::Identity(QP.rows(), QP.cols())).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(SaturationOps, WeightedProjectionIsAlsoLeftInverse)
{
    const Mesh mesh = random_heterogeneous(5, 5, 9);
    const std::vector<Well> wells = {make_injector(0, 0.5), make_producer(24, 1e6, 2.0)};
    HierarchyConfig cfg;
    cfg.num_levels = 2;
    cfg.coarsening_factor = 4;
    cfg.weighted_projection = true;
    const Hierarchy hier = build_hierarchy(mesh, wells, cfg);
    const Matrix QP = Matrix(hier.ops[0].Q_s) * Matrix(hier.ops[0].P_s);
    EXPECT_LT((QP - Matrix::Identity(QP.rows(), QP.cols())).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(FluxBasis, TwoSingletonAggregatesGiveUnitBasis)
{
    const Mesh mesh = unit_cartesian(2, 1);
    const LevelData fine = make_fine_level(mesh, {});
    const Aggregation agg = identity_aggregation(fine);
    const Vector basis = solve_local_flux_basis(fine, agg, agg.coarse_faces[0]);
    EXPECT_NEAR(basis[0], 1.0, 1e-14);
    EXPECT_NEAR(basis.lpNorm<1>(), 1.0, 1e-14);
}

TEST(FluxBasis, MatchesIndependentDenseOracle)
{
    const Mesh mesh = random_heterogeneous(4, 4, 13);
    const LevelData fine = make_fine_level(mesh, {});
    const CellGraph graph = level_graph(fine);
    Aggregation agg = partition_cells(graph, 4, {}, 13);
    build_coarse_faces(agg, fine);
    for (const CoarseFace& cf : agg.coarse_faces)
    {
        const Vector got = solve_local_flux_basis(fine, agg, cf);
        const Vector expected = basis_oracle(fine, agg, cf);
        EXPECT_LT(rel_err(got, expected), 1e-10);
    }
}

TEST(FluxBasis, UnitTotalFluxAcrossOwnCoarseFace)
{
    for (unsigned seed : {21u, 22u, 23u})
    {
        const Mesh mesh = random_heterogeneous(6, 5, seed);
        const LevelData fine = make_fine_level(mesh, {});
        Aggregation agg = partition_cells(level_graph(fine), 5, {}, seed);
        build_coarse_faces(agg, fine);
        for (const CoarseFace& cf : agg.coarse_faces)
        {
            const Vector basis = solve_local_flux_basis(fine, agg, cf);
            double total = 0.0;
            for (std::size_t k = 0; k < cf.fine_faces.size(); ++k)
            {
                total += cf.orient[k] * basis[cf.fine_faces[k]];
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(FluxBasis, ConservativityReproducesUnitSource)
{
    // D applied to a basis column is the +-|cell|/|aggregate| source vector.
    const Mesh mesh = random_heterogeneous(5, 4, 31);
    const LevelData fine = make_fine_level(mesh, {});
    Aggregation agg = partition_cells(level_graph(fine), 4, {}, 31);
    build_coarse_faces(agg, fine);
    const CoarseFace& cf = agg.coarse_faces[0];
    const Vector basis = solve_local_flux_basis(fine, agg, cf);
    const Vector div = fine.D * basis;
    double vol_K = 0.0, vol_L = 0.0;
    for (int c = 0; c < fine.num_cells; ++c)
    {
        if (agg.cell_to_aggregate[c] == cf.agg_K) { vol_K += fine.cell_volume[c]; }
        if (agg.cell_to_aggregate[c] == cf.agg_L) { vol_L += fine.cell_volume[c]; }
    }
    for (int c = 0; c < fine.num_cells; ++c)
    {
        const int a = agg.cell_to_aggregate[c];
        double expected = 0.0;
        if (a == cf.agg_K) { expected = fine.cell_volume[c] / vol_K; }
        if (a == cf.agg_L) { expected = -fine.cell_volume[c] / vol_L; }
        EXPECT_NEAR(div[c], expected, 1e-11);
    }
}

TEST(FluxOps, ProjectionTimesInterpolationIsIdentity)
{
    for (unsigned seed : {7u, 8u})
    {
        const HierCase s = random_setup(6, 6, seed, 2, 4);
        const IntergridOps& ops = s.hier.ops[0];
        const Matrix QP = Matrix(ops.Q_sigma) * Matrix(ops.P_sigma);
        EXPECT_LT((QP - Matrix::Identity(QP.rows(), QP.cols())).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(FluxOps, ProducerColumnIsUnitVector)
{
    const HierCase s = random_setup(5, 5, 17, 2, 4);
    const IntergridOps& ops = s.hier.ops[0];
    const int coarse_prod = s.hier.levels[1].producers[0].flux_index;
    const Vector col = Vector(ops.P_sigma.col(coarse_prod));
    EXPECT_DOUBLE_EQ(col.lpNorm<1>(), 1.0);
    EXPECT_DOUBLE_EQ(col[s.hier.levels[0].producers[0].flux_index], 1.0);
}

// ---------------------------------------------------------------------------
// coarsening
// ---------------------------------------------------------------------------

TEST(Coarsen, IdentityAggregationReproducesFineLevel)
{
    const Mesh mesh = six_cell_mesh();
    const std::vector<Well> wells = six_cell_wells();
    const LevelData fine = make_fine_level(mesh, wells);
    const Aggregation agg = identity_aggregation(fine);

    IntergridOps ops;
    build_saturation_ops(agg, fine.num_cells, ops);
    std::vector<Vector> bases(agg.coarse_faces.size());
    for (std::size_t i = 0; i < agg.coarse_faces.size(); ++i)
    {
        bases[i] = solve_local_flux_basis(fine, agg, agg.coarse_faces[i]);
    }
    build_flux_ops(bases, agg, fine, ops);
    std::vector<int> c0_agg = agg.cell_to_aggregate;
    const LevelData coarse = coarsen_level(fine, ops, agg, ops.P_sigma, fine, c0_agg);

    EXPECT_EQ(coarse.num_cells, fine.num_cells);
    EXPECT_EQ(coarse.num_faces, fine.num_faces);
    EXPECT_LT((Matrix(coarse.D) - Matrix(fine.D)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((coarse.W - fine.W).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(coarse.p_neg.cwiseAbs().maxCoeff(), 0.0, 1e-14);
    const Vector s = random_vector(fine.num_cells, 3, 0.0, 1.0);
    const Matrix Mc = Matrix(assemble_flux_mass(coarse, s, egg_fluids()));
    const Matrix Mf = Matrix(assemble_flux_mass(fine, s, egg_fluids()));
    EXPECT_LT((Mc - Mf).cwiseAbs().maxCoeff() / Mf.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Coarsen, GalerkinFluxMassProperty)
{
    for (unsigned seed : {41u, 42u, 43u})
    {
        const HierCase s = random_setup(7, 6, seed, 2, 5);
        const LevelData& fine = s.hier.levels[0];
        const LevelData& coarse = s.hier.levels[1];
        const IntergridOps& ops = s.hier.ops[0];
        const Vector sc = random_vector(coarse.num_cells, seed + 50, 0.0, 1.0);
        const Matrix assembled = Matrix(assemble_flux_mass(coarse, sc, egg_fluids()));
        const Matrix variational =
            Matrix(ops.R_sigma) *
            Matrix(assemble_flux_mass(fine, Vector(ops.P_s * sc), egg_fluids())) * Matrix(ops.P_sigma);
        EXPECT_LT((assembled - variational).cwiseAbs().maxCoeff() / variational.cwiseAbs().maxCoeff(),
                  1e-12);
    }
}

TEST(Coarsen, CoarseDivergenceIsSignedIncidence)
{
    const HierCase s = random_setup(6, 6, 47, 2, 4);
    const LevelData& coarse = s.hier.levels[1];
    const Matrix D = Matrix(coarse.D);
    for (int i = 0; i < coarse.num_faces; ++i)
    {
        EXPECT_NEAR(D(coarse.face_cells[i][0], i), 1.0, 1e-9);
        EXPECT_NEAR(D(coarse.face_cells[i][1], i), -1.0, 1e-9);
        EXPECT_NEAR(D.col(i).lpNorm<1>(), 2.0, 1e-9);
    }
    for (const ProducerRef& p : coarse.producers)
    {
        EXPECT_NEAR(D(p.cell, p.flux_index), -1.0, 1e-12);
    }
}

TEST(Coarsen, PnegIsNonPositiveAndMatchesDirectSum)
{
    const HierCase s = random_setup(8, 8, 53, 3, 4);
    for (int l = 1; l < s.hier.num_levels(); ++l)
    {
        const LevelData& lvl = s.hier.levels[l];
        const SpMat& composite = s.hier.composite_P_sigma[l - 1];
        const std::vector<int>& c0agg = s.hier.cell0_to_agg[l - 1];
        const LevelData& fine = s.hier.levels[0];
        for (int i = 0; i < lvl.num_faces; ++i)
        {
            EXPECT_LE(lvl.p_neg[i], 1e-15);
            double pn = 0.0, total = 0.0;
            for (SpMat::InnerIterator it(composite, i); it; ++it)
            {
                if (it.row() >= fine.num_faces) { continue; }
                const int A = c0agg[fine.face_cells[it.row()][0]];
                const int B = c0agg[fine.face_cells[it.row()][1]];
                if (std::min(A, B) != lvl.face_cells[i][0] || std::max(A, B) != lvl.face_cells[i][1])
                {
                    continue;
                }
                const double oriented = (A == lvl.face_cells[i][0]) ? it.value() : -it.value();
                pn += std::min(oriented, 0.0);
                total += oriented;
            }
            EXPECT_NEAR(lvl.p_neg[i], pn, 1e-14);
            EXPECT_NEAR(total, 1.0, 1e-11); // composite keeps unit flux across its face
        }
    }
}

// ---------------------------------------------------------------------------
// generalized upwind and coarse residual
// ---------------------------------------------------------------------------

TEST(CoarseUpwind, ZeroPnegReducesToFineUpwind)
{
    const Mesh mesh = six_cell_mesh();
    const LevelData fine = make_fine_level(mesh, six_cell_wells());
    const Vector sigma = random_vector(fine.num_fluxes(), 3);
    const SpMat U = coarse_upwind_operator(sigma, fine);
    const FineOperators fops = build_fine_operators(mesh, six_cell_wells());
    const SpMat Ufine = upwind_operator(sigma, fops);
    EXPECT_LT((Matrix(U) - Matrix(Ufine)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CoarseUpwind, NegativePartWeights)
{
    LevelData lvl;
    lvl.level = 1;
    lvl.num_cells = 2;
    lvl.num_faces = 1;
    lvl.face_cells = {{0, 1}};
    lvl.p_neg = Vector::Constant(1, -0.25);
    Vector sigma(1);
    sigma << 4.0;
    const SpMat U = coarse_upwind_operator(sigma, lvl);
    EXPECT_DOUBLE_EQ(U.coeff(0, 0), 1.25);
    EXPECT_DOUBLE_EQ(U.coeff(0, 1), -0.25);
    sigma << -4.0;
    const SpMat Udown = coarse_upwind_operator(sigma, lvl);
    EXPECT_DOUBLE_EQ(Udown.coeff(0, 0), -0.25);
    EXPECT_DOUBLE_EQ(Udown.coeff(0, 1), 1.25);
}

TEST(CoarseUpwind, RowsSumToOneOnAllLevels)
{
    const HierCase s = random_setup(8, 8, 59, 3, 4);
    for (int l = 0; l < s.hier.num_levels(); ++l)
    {
        const LevelData& lvl = s.hier.levels[l];
        const Vector sigma = random_vector(lvl.num_fluxes(), 60 + l);
        const SpMat U = coarse_upwind_operator(sigma, lvl);
        const Vector rowsum = U * Vector::Ones(lvl.num_cells);
        EXPECT_LT((rowsum - Vector::Ones(lvl.num_fluxes())).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Commutation, FractionalFlowCommutesWithInterpolation)
{
    const HierCase s = random_setup(6, 6, 61, 2, 4);
    const Vector sc = random_vector(s.hier.levels[1].num_cells, 62, 0.0, 1.0);
    const Vector fine_s = s.hier.ops[0].P_s * sc;
    Vector lhs(fine_s.size()), fw_c(sc.size());
    for (Eigen::Index c = 0; c < fine_s.size(); ++c) { lhs[c] = fractional_flow(fine_s[c], egg_fluids()); }
    for (Eigen::Index a = 0; a < sc.size(); ++a) { fw_c[a] = fractional_flow(sc[a], egg_fluids()); }
    EXPECT_LT(rel_err(lhs, Vector(s.hier.ops[0].P_s * fw_c)), 1e-15);
}

TEST(Lemma1, RestrictedUpwindTransportMatchesAccumulation)
{
    for (unsigned seed : {71u, 72u, 73u})
    {
        const HierCase s = random_setup(7, 7, seed, 2, 5);
        const LevelData& fine = s.hier.levels[0];
        const Aggregation& agg = s.hier.aggregations[0];
        const Vector sigma = random_vector(fine.num_fluxes(), seed + 10);
        const Vector sc = random_vector(agg.num_aggregates, seed + 20, 0.0, 1.0);

        const FineOperators fops = build_fine_operators(s.mesh, s.wells);
        Vector fw(fine.num_cells);
        const Vector fine_s = s.hier.ops[0].P_s * sc;
        for (int c = 0; c < fine.num_cells; ++c) { fw[c] = fractional_flow(fine_s[c], egg_fluids()); }
        const SpMat U = upwind_operator(sigma, fops);
        const Vector lhs = s.hier.ops[0].R_s * Vector(fine.D * sigma.cwiseProduct(U * fw));
        const Vector rhs = lemma1_accumulation(sigma, sc, agg, fine, egg_fluids());
        EXPECT_LT(rel_err(lhs, rhs), 1e-12);
    }
}

TEST(Prop1, CoarseTransportEqualsVariationalTransport)
{
    for (unsigned seed : {81u, 82u, 83u})
    {
        const HierCase s = random_setup(7, 6, seed, 2, 4);
        const LevelData& fine = s.hier.levels[0];
        const LevelData& coarse = s.hier.levels[1];
        const IntergridOps& ops = s.hier.ops[0];
        const Vector sigma_c = random_vector(coarse.num_fluxes(), seed + 30);
        const Vector sc = random_vector(coarse.num_cells, seed + 40, 0.0, 1.0);

        // coarse-side evaluation
        Vector fw_c(coarse.num_cells);
        for (int a = 0; a < coarse.num_cells; ++a) { fw_c[a] = fractional_flow(sc[a], egg_fluids()); }
        const SpMat Uc = coarse_upwind_operator(sigma_c, coarse);
        const Vector lhs = coarse.D * sigma_c.cwiseProduct(Uc * fw_c);

        // fine-side evaluation of the same quantity
        const Vector sigma_f = ops.P_sigma * sigma_c;
        const Vector s_f = ops.P_s * sc;
        const FineOperators fops = build_fine_operators(s.mesh, s.wells);
        Vector fw_f(fine.num_cells);
        for (int c = 0; c < fine.num_cells; ++c) { fw_f[c] = fractional_flow(s_f[c], egg_fluids()); }
        const SpMat Uf = upwind_operator(sigma_f, fops);
        const Vector rhs = ops.R_s * Vector(fine.D * sigma_f.cwiseProduct(Uf * fw_f));
        EXPECT_LT(rel_err(lhs, rhs), 1e-11);
    }
}

TEST(CoarseResidual, MatchesVariationalOracleTwoLevels)
{
    for (unsigned seed : {91u, 92u, 93u})
    {
        HierCase s = random_setup(8, 8, seed, 2, 5);
        const double dt = 0.4;
        const Vector prev_s = random_vector(s.hier.levels[0].num_cells, seed + 5, 0.0, 1.0);
        s.hier.set_time_step(prev_s, dt);
        const State xc = random_state(s.hier.levels[1], seed + 6);
        const ResidualVector got = coarse_residual(s.hier.levels[1], xc, dt, egg_fluids());
        const ResidualVector expected =
            variational_residual(s.hier, 1, xc, prev_s, dt, s.mesh, s.wells, egg_fluids());
        EXPECT_LT(rel_err(got.stacked(), expected.stacked()), 1e-11);
    }
}

TEST(CoarseResidual, MatchesVariationalOracleThreeLevels)
{
    for (unsigned seed : {101u, 102u})
    {
        HierCase s = random_setup(10, 9, seed, 3, 4);
        const double dt = 0.25;
        const Vector prev_s = random_vector(s.hier.levels[0].num_cells, seed + 5, 0.0, 1.0);
        s.hier.set_time_step(prev_s, dt);
        for (int level : {1, 2})
        {
            const State xc = random_state(s.hier.levels[level], seed + 6 + level);
            const ResidualVector got = coarse_residual(s.hier.levels[level], xc, dt, egg_fluids());
            const ResidualVector expected =
                variational_residual(s.hier, level, xc, prev_s, dt, s.mesh, s.wells, egg_fluids());
            EXPECT_LT(rel_err(got.stacked(), expected.stacked()), 1e-11);
        }
    }
}

TEST(CoarseResidual, ZeroFluxTransportBlock)
{
    HierCase s = random_setup(6, 6, 111, 2, 4);
    const double dt = 0.5;
    const Vector prev_s = random_vector(s.hier.levels[0].num_cells, 112, 0.0, 1.0);
    s.hier.set_time_step(prev_s, dt);
    const LevelData& coarse = s.hier.levels[1];
    State xc = random_state(coarse, 113);
    xc.sigma.setZero();
    const ResidualVector r = coarse_residual(coarse, xc, dt, egg_fluids());
    const Vector expected = (1.0 / dt) * coarse.W.cwiseProduct(xc.s) - coarse.h;
    EXPECT_LT(rel_err(r.r_s, expected), 1e-13);
}

TEST(CoarseResidual, LevelZeroAgreesWithFineResidual)
{
    HierCase s = random_setup(5, 5, 121, 2, 4);
    const double dt = 0.7;
    const Vector prev_s = random_vector(s.hier.levels[0].num_cells, 122, 0.0, 1.0);
    s.hier.set_time_step(prev_s, dt);
    const State x = random_state(s.hier.levels[0], 123);
    const ResidualVector a = coarse_residual(s.hier.levels[0], x, dt, egg_fluids());
    const FineOperators fops = build_fine_operators(s.mesh, s.wells);
    const ResidualVector b = residual(x, prev_s, dt, fops, s.mesh, s.wells, egg_fluids());
    EXPECT_LT(rel_err(a.stacked(), b.stacked()), 1e-13);
}
