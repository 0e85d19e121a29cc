// SPDX-License-Identifier: MIT

/// @file
/// Contiguous cell aggregation: a greedy seeded-growth partitioner with a
/// small-aggregate merge pass and a connectivity post-pass, plus ingestion of
/// externally computed cell-to-aggregate maps.  Well-perforated cells are
/// kept as singleton aggregates.

#pragma once

#include "fasflow/mesh.hpp"
#include "fasflow/types.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <vector>

namespace fasflow
{

/// A coarse face: the set of finer-level faces shared by one pair of adjacent
/// aggregates, oriented from aggregate K to aggregate L with K < L.  The
/// orientation entry is +1 when the finer face's own K side lies in aggregate
/// K, -1 otherwise.
struct CoarseFace
{
    int agg_K = -1;
    int agg_L = -1;
    std::vector<int> fine_faces;
    std::vector<double> orient;
};

struct Aggregation
{
    int level = 1;
    int num_aggregates = 0;
    std::vector<int> cell_to_aggregate;
    std::vector<CoarseFace> coarse_faces;
};

namespace detail
{

/// Split disconnected aggregates into their connected components and renumber
/// all aggregates by ascending smallest member.
inline void split_and_renumber(const std::vector<std::vector<int>>& neighbors,
                               std::vector<int>& cell_to_agg, int& num_agg)
{
    const int n = static_cast<int>(cell_to_agg.size());
    std::vector<int> component(n, -1);
    int next = 0;
    for (int start = 0; start < n; ++start)
    {
        if (component[start] >= 0) { continue; }
        component[start] = next;
        std::queue<int> bfs;
        bfs.push(start);
        while (!bfs.empty())
        {
            const int v = bfs.front();
            bfs.pop();
            for (int w : neighbors[v])
            {
                if (component[w] < 0 && cell_to_agg[w] == cell_to_agg[start])
                {
                    component[w] = next;
                    bfs.push(w);
                }
            }
        }
        ++next;
    }
    // components are discovered in ascending smallest-member order already
    cell_to_agg = component;
    num_agg = next;
}

} // namespace detail

/// Partition the graph into contiguous aggregates of mean size close to the
/// coarsening factor.  Cells listed in well_cells become singleton
/// aggregates.  Deterministic for a fixed seed.
inline Aggregation partition_cells(const CellGraph& graph, int target_factor,
                                   const std::vector<int>& well_cells, std::uint64_t seed = 0)
{
    require(target_factor >= 2, "partition_cells: coarsening factor must be >= 2");
    const int n = graph.num_vertices();
    std::vector<char> is_well(n, 0);
    for (int c : well_cells)
    {
        require(c >= 0 && c < static_cast<int>(graph.cell_to_vertex.size()),
                "partition_cells: well cell out of range");
        const int v = graph.cell_to_vertex[c];
        require(v >= 0, "partition_cells: well cell not in graph");
        is_well[v] = 1;
    }
    int num_free = 0;
    for (int v = 0; v < n; ++v) { num_free += is_well[v] ? 0 : 1; }
    require(target_factor <= std::max(1, num_free),
            "partition_cells: coarsening factor exceeds the number of non-well cells");

    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> priority(n);
    for (auto& p : priority) { p = rng(); }

    std::vector<int> agg(n, -1);
    std::vector<char> agg_is_well;
    int next_agg = 0;
    for (int v = 0; v < n; ++v)
    {
        if (is_well[v])
        {
            agg[v] = next_agg++;
            agg_is_well.push_back(1);
        }
    }

    auto unassigned_degree = [&](int v) {
        int d = 0;
        for (int w : graph.neighbors[v]) { d += (agg[w] < 0) ? 1 : 0; }
        return d;
    };

    std::vector<int> sizes(next_agg, 1);
    while (true)
    {
        int seed_v = -1;
        std::array<std::uint64_t, 3> best = {0, 0, 0};
        for (int v = 0; v < n; ++v)
        {
            if (agg[v] >= 0) { continue; }
            const std::array<std::uint64_t, 3> key = {static_cast<std::uint64_t>(unassigned_degree(v)),
                                                      priority[v], static_cast<std::uint64_t>(v)};
            if (seed_v < 0 || key < best)
            {
                seed_v = v;
                best = key;
            }
        }
        if (seed_v < 0) { break; }

        const int id = next_agg++;
        agg[seed_v] = id;
        int size = 1;
        std::vector<int> members = {seed_v};
        while (size < target_factor)
        {
            // frontier vertex with the most links into the aggregate
            int pick = -1;
            int pick_links = 0;
            std::uint64_t pick_prio = 0;
            std::set<int> frontier;
            for (int m : members)
            {
                for (int w : graph.neighbors[m])
                {
                    if (agg[w] < 0) { frontier.insert(w); }
                }
            }
            for (int w : frontier)
            {
                int links = 0;
                for (int x : graph.neighbors[w]) { links += (agg[x] == id) ? 1 : 0; }
                if (pick < 0 || links > pick_links || (links == pick_links && priority[w] < pick_prio))
                {
                    pick = w;
                    pick_links = links;
                    pick_prio = priority[w];
                }
            }
            if (pick < 0) { break; }
            agg[pick] = id;
            members.push_back(pick);
            ++size;
        }
        sizes.push_back(size);
        agg_is_well.push_back(0);
    }

    // merge undersized non-well aggregates into their most-connected neighbor
    const int min_size = std::max(1, target_factor / 2);
    for (int a = 0; a < next_agg; ++a)
    {
        std::vector<int> members;
        for (int v = 0; v < n; ++v)
        {
            if (agg[v] == a) { members.push_back(v); }
        }
        if (members.empty() || static_cast<int>(members.size()) >= min_size) { continue; }
        if (agg_is_well[a]) { continue; }
        std::vector<int> links(next_agg, 0);
        for (int m : members)
        {
            for (int w : graph.neighbors[m])
            {
                const int b = agg[w];
                if (b >= 0 && b != a && !agg_is_well[b]) { ++links[b]; }
            }
        }
        int best_b = -1;
        for (int b = 0; b < next_agg; ++b)
        {
            if (links[b] > 0 && (best_b < 0 || links[b] > links[best_b]) &&
                sizes[b] + static_cast<int>(members.size()) <= 2 * target_factor)
            {
                best_b = b;
            }
        }
        if (best_b >= 0)
        {
            for (int m : members) { agg[m] = best_b; }
            sizes[best_b] += static_cast<int>(members.size());
            sizes[a] = 0;
        }
    }

    int num_agg = next_agg;
    detail::split_and_renumber(graph.neighbors, agg, num_agg);

    Aggregation result;
    result.num_aggregates = num_agg;
    result.cell_to_aggregate = agg;
    return result;
}

/// Partition file: one line per cell, `cell_index aggregate_index`.
inline std::vector<int> read_partition_file(std::istream& is, int num_cells)
{
    std::vector<int> map(num_cells, -1);
    int cell = 0, a = 0;
    while (is >> cell >> a)
    {
        require(cell >= 0 && cell < num_cells, "read_partition_file: cell index out of range");
        require(a >= 0, "read_partition_file: aggregate index must be non-negative");
        map[cell] = a;
    }
    for (int c = 0; c < num_cells; ++c)
    {
        require(map[c] >= 0, "read_partition_file: missing entry for a cell");
    }
    return map;
}

/// Wrap an externally supplied cell-to-aggregate map; disconnected aggregates
/// are split into their connected components.
inline Aggregation aggregation_from_map(const std::vector<std::vector<int>>& neighbors,
                                        std::vector<int> cell_to_agg)
{
    Aggregation result;
    int num_agg = 0;
    detail::split_and_renumber(neighbors, cell_to_agg, num_agg);
    result.cell_to_aggregate = std::move(cell_to_agg);
    result.num_aggregates = num_agg;
    return result;
}

} // namespace fasflow
