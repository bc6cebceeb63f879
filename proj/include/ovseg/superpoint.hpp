#pragma once

#include "ovseg/binary_io.hpp"
#include "ovseg/scene_io.hpp"
#include "ovseg/types.hpp"

#include <json.hpp>

#include <span>
#include <utility>
#include <vector>

namespace ovseg {

struct Superpoint {
    SuperpointId id = 0;
    std::vector<PointIndex> point_indices; // strictly ascending
    Vec3 centroid = Vec3::Zero();
    Vec3 mean_normal = Vec3::UnitZ();

    std::size_t member_count() const { return point_indices.size(); }
};

/// Unordered superpoint pair stored as (lower id, higher id).
using SuperpointEdge = std::pair<SuperpointId, SuperpointId>;

/// A partition of the cloud into superpoints plus their adjacency. Superpoint
/// ids are dense (0..n-1) and ordered by each superpoint's smallest point index.
struct SuperpointGraph {
    std::vector<Superpoint> superpoints;
    std::vector<SuperpointEdge> edges; // sorted, unique, no self-loops
    std::vector<SuperpointId> point_to_sp;

    std::size_t size() const { return superpoints.size(); }

    /// Groups points by arbitrary labels; ids follow smallest-member order.
    static SuperpointGraph from_labels(const PointCloud& cloud, std::span<const std::uint32_t> labels);

    /// Throws std::logic_error if the partition or edge invariants are broken.
    void validate(std::size_t n_points) const;
};

struct OversegConfig {
    int target_points_per_sp = 200;
    double lambda_normal = 2.0;
    int lloyd_iterations = 10;
    int knn_adjacency_k = 8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct OversegReport {
    std::size_t n_seeds = 0;
    double seed_spacing = 0.0;
    /// Total assignment energy at the end of each Lloyd iteration.
    std::vector<double> energy;
    std::size_t n_superpoints = 0;
};

/// Symmetric point-level neighbor lists in CSR form. Built from mesh edges when a
/// mesh is given (points no vertex maps to fall back to k-NN links), otherwise
/// from symmetric k-NN.
struct PointAdjacency {
    std::vector<std::uint32_t> offsets;
    std::vector<PointIndex> neighbors;

    std::span<const PointIndex> of(PointIndex i) const {
        return {neighbors.data() + offsets[i], neighbors.data() + offsets[i + 1]};
    }
};

PointAdjacency build_point_adjacency(const PointCloud& cloud, const TriangleMesh* mesh, int knn_k);

/// Lloyd-style energy-minimizing oversegmentation. Seeds come from farthest
/// point sampling; each point joins the seed minimizing
///   |p - s|^2 / r^2 + lambda_normal * (1 - |n_p . n_s|)
/// among seeds within 3r (r = mean nearest-seed spacing). Disconnected
/// superpoints are split into components once after the last iteration.
SuperpointGraph oversegment(const PointCloud& cloud, const TriangleMesh* mesh, const OversegConfig& cfg,
                            OversegReport* report = nullptr);

/// Replaces graph.edges: superpoints are adjacent iff some point adjacency link joins them.
SuperpointGraph build_adjacency(SuperpointGraph graph, const PointCloud& cloud, const TriangleMesh* mesh, int knn_k);

struct GraphStats {
    std::size_t n_superpoints = 0;
    std::size_t n_edges = 0;
    double mean_size = 0.0;
    std::size_t min_size = 0;
    std::size_t max_size = 0;

    friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

GraphStats graph_stats(const SuperpointGraph& graph);

/// {"point_to_sp": [...], "edges": [[a,b], ...]}
nlohmann::json graph_to_json(const SuperpointGraph& graph);
SuperpointGraph graph_from_json(const nlohmann::json& j, const PointCloud& cloud);

void write_graph(BinaryWriter& w, const SuperpointGraph& graph);
SuperpointGraph read_graph(BinaryReader& r, const PointCloud& cloud);

} // namespace ovseg
