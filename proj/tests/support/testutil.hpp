// SPDX-License-Identifier: MIT

/// @file
/// Shared fixtures: small meshes, seeded random fields, and well setups.

#pragma once

#include "fasflow/fvdiscr.hpp"
#include "fasflow/mesh.hpp"
#include "fasflow/physics.hpp"

#include <random>
#include <vector>

namespace fasflow::testing
{

inline Mesh unit_cartesian(int nx, int ny, int nz = 1, double k = 1.0, double poro = 0.2)
{
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    return build_cartesian_mesh(nx, ny, nz, Eigen::Vector3d(1, 1, 1),
                                std::vector<Eigen::Matrix3d>(n, isotropic_tensor(k)),
                                std::vector<double>(n, poro));
}

/// Six-cell 3x2 mesh with seven interior faces; the sketch mesh used for the
/// operator sparsity examples.
inline Mesh six_cell_mesh()
{
    return unit_cartesian(3, 2, 1);
}

/// Mesh with per-cell diagonal permeability spanning several orders of
/// magnitude, deterministic in the seed.
inline Mesh random_heterogeneous(int nx, int ny, unsigned seed, double log10_span = 4.0)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> expo(-log10_span / 2.0, log10_span / 2.0);
    std::uniform_real_distribution<double> poro(0.1, 0.35);
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    std::vector<Eigen::Matrix3d> perm(n);
    std::vector<double> phi(n);
    for (std::size_t c = 0; c < n; ++c)
    {
        const double kx = std::pow(10.0, expo(rng));
        const double ky = std::pow(10.0, expo(rng));
        perm[c] = diagonal_tensor(kx, ky, 0.5 * (kx + ky));
        phi[c] = poro(rng);
    }
    return build_cartesian_mesh(nx, ny, 1, Eigen::Vector3d(1, 1, 1), perm, phi);
}

/// Log-normal isotropic permeability field, k = k_mean * exp(N(0, sigma_log)),
/// SI units.
inline Mesh lognormal_mesh(int nx, int ny, unsigned seed, double sigma_log = 2.0,
                           double k_mean = 1e-13, Eigen::Vector3d spacing = {10.0, 10.0, 2.0})
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma_log);
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    std::vector<Eigen::Matrix3d> perm(n);
    std::vector<double> phi(n, 0.2);
    for (std::size_t c = 0; c < n; ++c)
    {
        perm[c] = isotropic_tensor(k_mean * std::exp(normal(rng)));
    }
    return build_cartesian_mesh(nx, ny, 1, spacing, perm, phi);
}

inline Well make_injector(int cell, double rate)
{
    Well w;
    w.kind = WellKind::RateInjector;
    w.cell = cell;
    w.rate_w = rate;
    return w;
}

inline Well make_producer(int cell, double bhp, double wi)
{
    Well w;
    w.kind = WellKind::BhpProducer;
    w.cell = cell;
    w.bhp = bhp;
    w.well_index = wi;
    return w;
}

/// Corner-to-corner well pair on an nx*ny mesh.
inline std::vector<Well> corner_wells(const Mesh& mesh, double rate, double bhp, double wi)
{
    return {make_injector(0, rate), make_producer(mesh.num_cells() - 1, bhp, wi)};
}

inline Vector random_vector(Eigen::Index n, unsigned seed, double lo = -1.0, double hi = 1.0)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) { v[i] = dist(rng); }
    return v;
}

/// Quarter-five-spot: corner injector (rate controlled), opposite-corner
/// producer (BHP controlled, Peaceman index), log-normal permeability, SI
/// units.  The injection rate is sized so that the first-step CFL is O(1)
/// for dt of the order of `dt_unit()`.
struct FiveSpot
{
    Mesh mesh;
    std::vector<Well> wells;
    FluidProps fluids;

    /// time scale for which the injector-cell CFL is about one
    double dt_unit() const
    {
        return mesh.pore_volume(0) / wells[0].rate_w;
    }
};

inline FiveSpot quarter_five_spot(int n, unsigned seed, double sigma_log = 2.0,
                                  double rate = 1e-3, double gamma = 2.0)
{
    FiveSpot fs{lognormal_mesh(n, n, seed, sigma_log), {}, {}};
    fs.fluids.mu_w = 1e-3;
    fs.fluids.mu_nw = 5e-3;
    fs.fluids.gamma = gamma;
    const int prod_cell = n * n - 1;
    const double k_prod = fs.mesh.cells[prod_cell].permeability(0, 0);
    const double wi = peaceman_well_index(k_prod, 2.0, 10.0, 0.1);
    fs.wells = {make_injector(0, rate), make_producer(prod_cell, 1e6, wi)};
    return fs;
}

inline double rel_err(double got, double expected)
{
    return std::abs(got - expected) / std::max(1e-300, std::abs(expected));
}

inline double rel_err(const Vector& got, const Vector& expected)
{
    return (got - expected).norm() / std::max(1e-300, expected.norm());
}

} // namespace fasflow::testing
