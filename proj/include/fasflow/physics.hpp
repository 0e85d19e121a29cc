// SPDX-License-Identifier: MIT

/// @file
/// Fluid constitutive laws (power-law mobilities, fractional flow), the
/// Peaceman well model, and the CFL estimate used for step reporting.
///
/// Mobilities are extended with constant values outside [0,1], so evaluation
/// is defined for any real saturation and the derivative vanishes outside the
/// physical range.

#pragma once

#include "fasflow/mesh.hpp"
#include "fasflow/types.hpp"

#include <cmath>
#include <vector>

namespace fasflow
{

struct FluidProps
{
    double mu_w = 1e-3;  ///< wetting-phase viscosity [Pa.s]
    double mu_nw = 5e-3; ///< non-wetting-phase viscosity [Pa.s]
    double gamma = 2.0;  ///< relative-permeability exponent

    void validate() const
    {
        require(mu_w > 0.0 && mu_nw > 0.0, "FluidProps: viscosities must be positive");
        require(gamma >= 1.0, "FluidProps: relative-permeability exponent must be >= 1");
    }
};

enum class Phase
{
    Wetting,
    NonWetting
};

enum class WellKind
{
    RateInjector,
    BhpProducer
};

/// Single-perforation well.  Injectors are rate controlled and inject pure
/// wetting phase; producers are BHP controlled through the Peaceman index.
struct Well
{
    WellKind kind = WellKind::RateInjector;
    int cell = -1;
    double rate_w = 0.0;     ///< injectors [m^3/s]
    double bhp = 0.0;        ///< producers [Pa]
    double well_index = 0.0; ///< producers [m^3]

    void validate(int num_cells) const
    {
        require(cell >= 0 && cell < num_cells, "Well: perforated cell out of range");
        if (kind == WellKind::RateInjector)
        {
            require(rate_w >= 0.0, "Well: injector rate must be non-negative");
        }
        else
        {
            require(well_index > 0.0, "Well: producer well index must be positive");
        }
    }
};

inline double phase_mobility(double s, Phase phase, const FluidProps& fluids)
{
    const double sc = clamp01(s);
    if (phase == Phase::Wetting) { return std::pow(sc, fluids.gamma) / fluids.mu_w; }
    return std::pow(1.0 - sc, fluids.gamma) / fluids.mu_nw;
}

/// Derivative of the constant-extension composite: zero outside [0,1],
/// analytic inside (one-sided values at the endpoints).
inline double phase_mobility_derivative(double s, Phase phase, const FluidProps& fluids)
{
    if (s < 0.0 || s > 1.0) { return 0.0; }
    if (phase == Phase::Wetting) { return fluids.gamma * std::pow(s, fluids.gamma - 1.0) / fluids.mu_w; }
    return -fluids.gamma * std::pow(1.0 - s, fluids.gamma - 1.0) / fluids.mu_nw;
}

inline double total_mobility(double s, const FluidProps& fluids)
{
    return phase_mobility(s, Phase::Wetting, fluids) + phase_mobility(s, Phase::NonWetting, fluids);
}

inline double total_mobility_derivative(double s, const FluidProps& fluids)
{
    return phase_mobility_derivative(s, Phase::Wetting, fluids) +
           phase_mobility_derivative(s, Phase::NonWetting, fluids);
}

inline double fractional_flow(double s, const FluidProps& fluids)
{
    const double lw = phase_mobility(s, Phase::Wetting, fluids);
    const double lt = lw + phase_mobility(s, Phase::NonWetting, fluids);
    if (!(lt > 0.0)) { fail("fractional_flow: total mobility vanished (constitutive-model error)"); }
    return lw / lt;
}

inline double fractional_flow_derivative(double s, const FluidProps& fluids)
{
    const double lw = phase_mobility(s, Phase::Wetting, fluids);
    const double lt = lw + phase_mobility(s, Phase::NonWetting, fluids);
    if (!(lt > 0.0)) { fail("fractional_flow_derivative: total mobility vanished"); }
    const double dlw = phase_mobility_derivative(s, Phase::Wetting, fluids);
    const double dlt = total_mobility_derivative(s, fluids);
    return (dlw * lt - lw * dlt) / (lt * lt);
}

/// Diagonal flux-mass entry of a producer: 1 / (lambda(s) * WI).
inline double producer_flux_coefficient(double s, const Well& well, const FluidProps& fluids)
{
    require(well.kind == WellKind::BhpProducer, "producer_flux_coefficient: not a producer");
    require(well.well_index > 0.0, "producer_flux_coefficient: well index must be positive");
    return 1.0 / (total_mobility(s, fluids) * well.well_index);
}

/// Sampled maximum of f_w' over [0,1].
inline double max_fractional_flow_derivative(const FluidProps& fluids, int samples = 4096)
{
    double m = 0.0;
    for (int i = 0; i <= samples; ++i)
    {
        m = std::max(m, fractional_flow_derivative(static_cast<double>(i) / samples, fluids));
    }
    return m;
}

/// CFL estimate: max over cells of (dt / pore_volume) * (total inflow) *
/// max_{s in [0,1]} f_w'(s).  Inflow counts face fluxes entering the cell,
/// injection rates, and any backflowing producer flux.  The flux vector is
/// laid out as interior faces followed by producer fluxes in well-list order.
inline double cfl_number(const Vector& sigma, const Mesh& mesh, const std::vector<Well>& wells,
                         double dt, const FluidProps& fluids)
{
    Vector inflow = Vector::Zero(mesh.num_cells());
    for (int j = 0; j < mesh.num_faces(); ++j)
    {
        const Face& f = mesh.interior_faces[j];
        if (sigma[j] > 0.0) { inflow[f.cell_L] += sigma[j]; }
        else { inflow[f.cell_K] -= sigma[j]; }
    }
    int producer = 0;
    for (const Well& w : wells)
    {
        if (w.kind == WellKind::RateInjector) { inflow[w.cell] += w.rate_w; }
        else
        {
            const double sp = sigma[mesh.num_faces() + producer];
            if (sp > 0.0) { inflow[w.cell] += sp; }
            ++producer;
        }
    }
    const double dfw = max_fractional_flow_derivative(fluids);
    double cfl = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c)
    {
        cfl = std::max(cfl, dt / mesh.pore_volume(c) * inflow[c] * dfw);
    }
    return cfl;
}

/// Isotropic Peaceman well index for a Cartesian cell:
/// WI = 2 pi k h / ln(r_e / r_w) with r_e = 0.2 dx.
inline double peaceman_well_index(double k, double h, double dx, double rw)
{
    require(k > 0.0 && h > 0.0 && dx > 0.0 && rw > 0.0, "peaceman_well_index: arguments must be positive");
    const double re = 0.2 * dx;
    require(re > rw, "peaceman_well_index: equivalent radius must exceed the wellbore radius");
    return 2.0 * M_PI * k * h / std::log(re / rw);
}

} // namespace fasflow
