// SPDX-License-Identifier: MIT

/// @file
/// Cell-face mesh with geometric one-sided transmissibilities, the Cartesian
/// convenience builder, cell-connectivity graphs, and mesh/field text I/O.

#pragma once

#include "fasflow/types.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

namespace fasflow
{

struct Cell
{
    double volume = 0.0;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    Eigen::Matrix3d permeability = Eigen::Matrix3d::Identity();
    double porosity = 0.0;
};

/// Interior face between cells K and L with K < L.  The unit normal points
/// from K to L.  Half transmissibilities are the mobility-free geometric
/// coefficients of the two-point flux approximation.
struct Face
{
    double area = 0.0;
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    Eigen::Vector3d unit_normal = Eigen::Vector3d::Zero();
    int cell_K = -1;
    int cell_L = -1;
    double half_trans_K = 0.0;
    double half_trans_L = 0.0;
};

struct Mesh
{
    int dim = 3;
    std::vector<Cell> cells;
    std::vector<Face> interior_faces;
    /// Set by the Cartesian builder; lets the VTK writer reconstruct hexahedra.
    bool has_cartesian_spacing = false;
    Eigen::Vector3d cartesian_spacing = Eigen::Vector3d::Zero();

    int num_cells() const { return static_cast<int>(cells.size()); }
    int num_faces() const { return static_cast<int>(interior_faces.size()); }
    double pore_volume(int c) const { return cells[c].porosity * cells[c].volume; }
    double total_pore_volume() const
    {
        double pv = 0.0;
        for (int c = 0; c < num_cells(); ++c) { pv += pore_volume(c); }
        return pv;
    }

    void validate() const;
};

inline Eigen::Matrix3d isotropic_tensor(double k)
{
    return k * Eigen::Matrix3d::Identity();
}

inline Eigen::Matrix3d diagonal_tensor(double kx, double ky, double kz)
{
    Eigen::Matrix3d t = Eigen::Matrix3d::Zero();
    t(0, 0) = kx;
    t(1, 1) = ky;
    t(2, 2) = kz;
    return t;
}

inline bool is_spd(const Eigen::Matrix3d& t, int dim)
{
    const auto block = t.topLeftCorner(dim, dim);
    if (!block.isApprox(block.transpose(), 1e-10)) { return false; }
    Eigen::SelfAdjointEigenSolver<Matrix> es(block);
    return es.eigenvalues().minCoeff() > 0.0;
}

/// Geometric one-sided transmissibility of a cell/face pairing:
/// |face| * (n . K . (x_face - x_cell)) / ||x_face - x_cell||^2,
/// with n the outward unit normal of the cell on that face.  A non-positive
/// value signals an inadmissible pairing and is rejected.
inline double half_transmissibility(const Cell& cell, const Eigen::Vector3d& face_centroid,
                                    double face_area, const Eigen::Vector3d& outward_normal)
{
    const Eigen::Vector3d d = face_centroid - cell.centroid;
    const double dist2 = d.squaredNorm();
    require(dist2 > 0.0, "half_transmissibility: face centroid coincides with cell centroid");
    const double value = face_area * outward_normal.dot(cell.permeability * d) / dist2;
    if (!(value > 0.0))
    {
        fail("half_transmissibility: non-positive coefficient (inadmissible cell/face pairing)");
    }
    return value;
}

inline void Mesh::validate() const
{
    require(dim == 2 || dim == 3, "Mesh: dimension must be 2 or 3");
    for (int c = 0; c < num_cells(); ++c)
    {
        const Cell& cell = cells[c];
        require(cell.volume > 0.0, "Mesh: non-positive cell volume");
        require(cell.porosity > 0.0 && cell.porosity <= 1.0, "Mesh: porosity outside (0,1]");
        require(is_spd(cell.permeability, dim), "Mesh: permeability tensor not symmetric positive definite");
    }
    for (const Face& f : interior_faces)
    {
        require(f.cell_K >= 0 && f.cell_L < num_cells() && f.cell_K < f.cell_L,
                "Mesh: face must reference two distinct cells with K < L");
        require(f.area > 0.0, "Mesh: non-positive face area");
        require(std::abs(f.unit_normal.norm() - 1.0) < 1e-10, "Mesh: face normal not unit length");
        require(f.half_trans_K > 0.0 && f.half_trans_L > 0.0, "Mesh: non-positive half transmissibility");
    }
}

/// Axis-aligned hexahedral mesh over an nx x ny x nz lattice.  Cells whose
/// pore volume falls below the threshold are dropped, and only faces between
/// two retained cells are kept.
inline Mesh build_cartesian_mesh(int nx, int ny, int nz, const Eigen::Vector3d& spacing,
                                 const std::vector<Eigen::Matrix3d>& perm_field,
                                 const std::vector<double>& poro_field,
                                 double pore_volume_threshold = 0.0)
{
    require(nx >= 1 && ny >= 1 && nz >= 1, "build_cartesian_mesh: counts must be >= 1");
    require(spacing.minCoeff() > 0.0, "build_cartesian_mesh: spacing must be positive");
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    require(perm_field.size() == n && poro_field.size() == n,
            "build_cartesian_mesh: field length does not match cell count");

    Mesh mesh;
    mesh.dim = 3; // axis-aligned hexahedral cells even when nz == 1
    const double cell_volume = spacing.x() * spacing.y() * spacing.z();

    auto lin = [&](int i, int j, int k) { return i + nx * (j + ny * k); };

    std::vector<int> active(n, -1);
    for (int k = 0; k < nz; ++k)
    {
        for (int j = 0; j < ny; ++j)
        {
            for (int i = 0; i < nx; ++i)
            {
                const int id = lin(i, j, k);
                require(is_spd(perm_field[id], mesh.dim),
                        "build_cartesian_mesh: permeability entry not symmetric positive definite");
                if (poro_field[id] * cell_volume < pore_volume_threshold) { continue; }
                Cell cell;
                cell.volume = cell_volume;
                cell.centroid = Eigen::Vector3d((i + 0.5) * spacing.x(), (j + 0.5) * spacing.y(),
                                                (k + 0.5) * spacing.z());
                cell.permeability = perm_field[id];
                cell.porosity = poro_field[id];
                active[id] = mesh.num_cells();
                mesh.cells.push_back(cell);
            }
        }
    }

    const std::array<Eigen::Vector3d, 3> axis = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                                 Eigen::Vector3d::UnitZ()};
    const std::array<double, 3> face_area = {spacing.y() * spacing.z(), spacing.x() * spacing.z(),
                                             spacing.x() * spacing.y()};
    for (int k = 0; k < nz; ++k)
    {
        for (int j = 0; j < ny; ++j)
        {
            for (int i = 0; i < nx; ++i)
            {
                const int id = lin(i, j, k);
                if (active[id] < 0) { continue; }
                const std::array<int, 3> next = {i + 1 < nx ? lin(i + 1, j, k) : -1,
                                                 j + 1 < ny ? lin(i, j + 1, k) : -1,
                                                 k + 1 < nz ? lin(i, j, k + 1) : -1};
                for (int d = 0; d < 3; ++d)
                {
                    if (next[d] < 0 || active[next[d]] < 0) { continue; }
                    Face f;
                    f.cell_K = active[id];
                    f.cell_L = active[next[d]];
                    f.area = face_area[d];
                    f.unit_normal = axis[d];
                    f.centroid = mesh.cells[f.cell_K].centroid + 0.5 * spacing[d] * axis[d];
                    f.half_trans_K = half_transmissibility(mesh.cells[f.cell_K], f.centroid, f.area,
                                                           f.unit_normal);
                    f.half_trans_L = half_transmissibility(mesh.cells[f.cell_L], f.centroid, f.area,
                                                           -f.unit_normal);
                    mesh.interior_faces.push_back(f);
                }
            }
        }
    }

    mesh.has_cartesian_spacing = true;
    mesh.cartesian_spacing = spacing;
    mesh.validate();
    return mesh;
}

/// Graph over the non-excluded cells; one edge per interior face whose two
/// cells are both retained.
struct CellGraph
{
    std::vector<int> vertex_to_cell;
    std::vector<int> cell_to_vertex; ///< -1 for excluded cells
    std::vector<std::vector<int>> neighbors;
    int num_edges = 0;

    int num_vertices() const { return static_cast<int>(vertex_to_cell.size()); }
};

inline CellGraph cell_connectivity_graph(const Mesh& mesh, const std::set<int>& excluded_cells = {})
{
    for (int c : excluded_cells)
    {
        require(c >= 0 && c < mesh.num_cells(), "cell_connectivity_graph: excluded cell out of range");
    }
    CellGraph graph;
    graph.cell_to_vertex.assign(mesh.num_cells(), -1);
    for (int c = 0; c < mesh.num_cells(); ++c)
    {
        if (excluded_cells.count(c)) { continue; }
        graph.cell_to_vertex[c] = graph.num_vertices();
        graph.vertex_to_cell.push_back(c);
    }
    graph.neighbors.resize(graph.num_vertices());
    for (const Face& f : mesh.interior_faces)
    {
        const int a = graph.cell_to_vertex[f.cell_K];
        const int b = graph.cell_to_vertex[f.cell_L];
        if (a < 0 || b < 0) { continue; }
        graph.neighbors[a].push_back(b);
        graph.neighbors[b].push_back(a);
        ++graph.num_edges;
    }
    return graph;
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

/// Mesh text format:
///   cells N faces M dim d
///   N cell lines:  volume centroid[d] perm_upper_triangle[d(d+1)/2] porosity
///   M face lines:  K L area centroid[d] normal[d]
/// Half transmissibilities are recomputed from the geometry on load.
inline void write_mesh_text(const Mesh& mesh, std::ostream& os)
{
    const int d = mesh.dim;
    os.precision(17);
    os << "cells " << mesh.num_cells() << " faces " << mesh.num_faces() << " dim " << d << "\n";
    for (const Cell& c : mesh.cells)
    {
        os << c.volume;
        for (int i = 0; i < d; ++i) { os << ' ' << c.centroid[i]; }
        for (int i = 0; i < d; ++i)
        {
            for (int j = i; j < d; ++j) { os << ' ' << c.permeability(i, j); }
        }
        os << ' ' << c.porosity << "\n";
    }
    for (const Face& f : mesh.interior_faces)
    {
        os << f.cell_K << ' ' << f.cell_L << ' ' << f.area;
        for (int i = 0; i < d; ++i) { os << ' ' << f.centroid[i]; }
        for (int i = 0; i < d; ++i) { os << ' ' << f.unit_normal[i]; }
        os << "\n";
    }
}

inline Mesh read_mesh_text(std::istream& is)
{
    std::string kw_cells, kw_faces, kw_dim;
    int ncells = 0, nfaces = 0, dim = 0;
    is >> kw_cells >> ncells >> kw_faces >> nfaces >> kw_dim >> dim;
    require(is.good() && kw_cells == "cells" && kw_faces == "faces" && kw_dim == "dim",
            "read_mesh_text: malformed header, expected 'cells N faces M dim d'");
    require(dim == 2 || dim == 3, "read_mesh_text: dim must be 2 or 3");

    Mesh mesh;
    mesh.dim = dim;
    mesh.cells.resize(ncells);
    for (Cell& c : mesh.cells)
    {
        is >> c.volume;
        c.centroid.setZero();
        for (int i = 0; i < dim; ++i) { is >> c.centroid[i]; }
        c.permeability.setIdentity();
        for (int i = 0; i < dim; ++i)
        {
            for (int j = i; j < dim; ++j)
            {
                double v = 0.0;
                is >> v;
                c.permeability(i, j) = v;
                c.permeability(j, i) = v;
            }
        }
        is >> c.porosity;
        require(is.good() || is.eof(), "read_mesh_text: truncated cell record");
    }
    mesh.interior_faces.resize(nfaces);
    for (Face& f : mesh.interior_faces)
    {
        is >> f.cell_K >> f.cell_L >> f.area;
        f.centroid.setZero();
        f.unit_normal.setZero();
        for (int i = 0; i < dim; ++i) { is >> f.centroid[i]; }
        for (int i = 0; i < dim; ++i) { is >> f.unit_normal[i]; }
        require(!is.fail(), "read_mesh_text: truncated face record");
        require(f.cell_K >= 0 && f.cell_L < ncells && f.cell_K < f.cell_L,
                "read_mesh_text: face cells must satisfy 0 <= K < L < N");
        f.half_trans_K = half_transmissibility(mesh.cells[f.cell_K], f.centroid, f.area, f.unit_normal);
        f.half_trans_L = half_transmissibility(mesh.cells[f.cell_L], f.centroid, f.area,
                                               Eigen::Vector3d(-f.unit_normal));
    }
    mesh.validate();
    return mesh;
}

struct CellFields
{
    std::vector<Eigen::Matrix3d> perm;
    std::vector<double> poro;
};

/// Per-cell CSV, one row per cell: kx,ky,kz,porosity
inline CellFields read_fields_csv(std::istream& is, int num_cells)
{
    CellFields fields;
    std::string line;
    while (std::getline(is, line))
    {
        if (line.empty() || line[0] == '#') { continue; }
        for (char& ch : line)
        {
            if (ch == ',') { ch = ' '; }
        }
        std::istringstream row(line);
        double kx = 0, ky = 0, kz = 0, poro = 0;
        row >> kx >> ky >> kz >> poro;
        require(!row.fail(), "read_fields_csv: expected 'kx,ky,kz,porosity' per row");
        fields.perm.push_back(diagonal_tensor(kx, ky, kz));
        fields.poro.push_back(poro);
    }
    require(static_cast<int>(fields.perm.size()) == num_cells,
            "read_fields_csv: row count does not match cell count");
    return fields;
}

/// SPE10-style flat ASCII: kx values, then ky, then kz, then porosity.
inline CellFields read_fields_spe10(std::istream& is, int num_cells)
{
    std::vector<double> values;
    double v = 0.0;
    while (is >> v) { values.push_back(v); }
    require(static_cast<int>(values.size()) == 4 * num_cells,
            "read_fields_spe10: expected 4*N values (kx, ky, kz, porosity lists)");
    CellFields fields;
    fields.perm.resize(num_cells);
    fields.poro.resize(num_cells);
    for (int c = 0; c < num_cells; ++c)
    {
        fields.perm[c] = diagonal_tensor(values[c], values[num_cells + c], values[2 * num_cells + c]);
        fields.poro[c] = values[3 * num_cells + c];
    }
    return fields;
}

} // namespace fasflow
